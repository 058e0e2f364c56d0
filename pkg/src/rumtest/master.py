"""Restricted master problem: projection of a target onto a finitely generated cone.

``min N * ||target - A p||^2  s.t.  p >= 0`` solved by a Lawson-Hanson style
active-set method on the Gram matrix ``A^T A``.  Columns are 0/1 choice-type
vectors, so the Gram entries are small integers (number of shared picks).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from rumtest.errors import ContractViolation, NumericalFailure

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
RIDGE = 1e-12


@dataclass(frozen=True)
class MasterSolution:
    weights: np.ndarray
    residual: np.ndarray
    projection: np.ndarray
    J: float
    N: float
    passive: tuple[int, ...] = ()
    iterations: int = 0

    @property
    def upper_bound(self) -> float:
        return self.J

    def kkt_violation(self, A: np.ndarray) -> float:
        """``max_r s.a_r - s.v`` over the columns of ``A`` (0 for an empty pool)."""
        if A.shape[1] == 0:
            return 0.0
        s = self.residual
        return float(np.max(A.T @ s) - s @ self.projection)


@dataclass(frozen=True)
class ShiftedSolution(MasterSolution):
    eta: np.ndarray = field(default_factory=lambda: np.zeros(0))  # A p + shift
    shift: np.ndarray = field(default_factory=lambda: np.zeros(0))
    negative_shift: bool = False


@dataclass
class RestrictedMaster:
    """Columns (as a ``D x k`` 0/1 matrix), target vector and scale ``N``."""

    columns: np.ndarray
    target: np.ndarray
    N: float = 1.0

    def __post_init__(self):
        self.target = np.asarray(self.target, dtype=float)
        cols = np.asarray(self.columns, dtype=float)
        if cols.size == 0:
            cols = np.zeros((self.target.shape[0], 0))
        self.columns = cols.reshape(self.target.shape[0], -1)
        if self.N <= 0:
            raise ContractViolation("N must be positive")


def _solve_passive(G: np.ndarray, rhs: np.ndarray, P: list[int]) -> np.ndarray:
    sub = G[np.ix_(P, P)]
    b = rhs[P]
    try:
        # Cholesky pivots flag near-singular blocks cheaply
        d = np.diag(np.linalg.cholesky(sub))
        if d.min() ** 2 > 1e-12 * sub.diagonal().max():
            return np.linalg.solve(sub, b)
    except np.linalg.LinAlgError:
        pass
    try:
        z = np.linalg.solve(sub + RIDGE * np.eye(len(P)), b)
    except np.linalg.LinAlgError:
        z = None
    if z is None or not np.all(np.isfinite(z)):
        raise NumericalFailure("singular passive-set normal equations (duplicate columns?)")
    return z


def nnls_gram(
    G: np.ndarray,
    Atb: np.ndarray,
    tol: float = DEFAULT_TOL,
    warm: Sequence[int] | None = None,
    max_iter: int | None = None,
) -> tuple[np.ndarray, list[int], int]:
    """Active-set NNLS given ``G = A^T A`` and ``Atb = A^T b``.

    Returns ``(x, passive, iterations)``.  ``warm`` seeds the passive set; it is
    used only when the least-squares solution on it is strictly positive.
    """
    n = G.shape[0]
    x = np.zeros(n)
    P: list[int] = []
    if max_iter is None:
        max_iter = 30 * max(n, 1) + 50
    if warm:
        Pw = sorted({int(j) for j in warm if 0 <= j < n})
        if Pw:
            try:
                z = _solve_passive(G, Atb, Pw)
                if np.all(z > 0):
                    x[Pw] = z
                    P = Pw
            except NumericalFailure:
                pass

    in_P = np.zeros(n, dtype=bool)
    in_P[P] = True
    skip = np.zeros(n, dtype=bool)
    w = Atb - G @ x
    it = 0
    while True:
        cand = np.where(in_P | skip, -np.inf, w)
        if n == 0 or cand.max() <= tol:
            break
        it += 1
        if it > max_iter:
            raise NumericalFailure("active-set iteration limit reached")
        j = int(np.argmax(cand))
        in_P[j] = True
        while True:
            P = np.flatnonzero(in_P).tolist()
            z = np.zeros(n)
            z[P] = _solve_passive(G, Atb, P)
            bad = np.flatnonzero(in_P & (z <= 0))
            if bad.size == 0:
                x = z
                break
            if z[j] <= 0 and x[j] == 0:
                # entering column does not help numerically; leave it out
                in_P[j] = False
                skip[j] = True
                if bad.size == 1:
                    break
                bad = bad[bad != j]
            alpha = np.min(x[bad] / (x[bad] - z[bad]))
            x = x + alpha * (z - x)
            in_P &= x > 1e-15
            x[~in_P] = 0.0
        w = Atb - G @ x
    P = np.flatnonzero(in_P).tolist()
    return x, P, it


def solve_restricted(
    master: RestrictedMaster,
    warm_start: Sequence[int] | None = None,
    tol: float = DEFAULT_TOL,
) -> MasterSolution:
    A = master.columns
    b = master.target
    G = A.T @ A
    x, P, it = nnls_gram(G, A.T @ b, tol, warm_start)
    v = A @ x
    s = b - v
    return MasterSolution(x, s, v, float(master.N * (s @ s)), master.N, tuple(P), it)


def shift_vector(subset: np.ndarray, tau: float) -> np.ndarray:
    """``(tau / |R'|) * sum of the subset's columns``."""
    subset = np.asarray(subset, dtype=float)
    if tau == 0:
        return np.zeros(subset.shape[0])
    if subset.ndim != 2 or subset.shape[1] == 0:
        raise ContractViolation("a nonempty subset is required when tau > 0")
    return (tau / subset.shape[1]) * subset.sum(axis=1)


def solve_restricted_shifted(
    columns: np.ndarray,
    pi_hat: np.ndarray,
    tau: float,
    subset: np.ndarray,
    N: float,
    tol: float = DEFAULT_TOL,
    warm_start: Sequence[int] | None = None,
) -> ShiftedSolution:
    """Projection of the shifted target ``pi_hat - shift`` onto the cone.

    ``eta`` reconstructs the tightened projection ``A p + shift``.
    """
    if tau < 0:
        raise ContractViolation("tau must be nonnegative")
    pi_hat = np.asarray(pi_hat, dtype=float)
    shift = shift_vector(subset, tau) if tau > 0 else np.zeros_like(pi_hat)
    target = pi_hat - shift
    neg = bool(np.any(target < 0))
    if neg:
        log.debug("shifted target has negative coordinates")
    sol = solve_restricted(RestrictedMaster(columns, target, N), warm_start, tol)
    return ShiftedSolution(
        sol.weights, sol.residual, sol.projection, sol.J, sol.N, sol.passive,
        sol.iterations, eta=sol.projection + shift, shift=shift, negative_shift=neg,
    )
