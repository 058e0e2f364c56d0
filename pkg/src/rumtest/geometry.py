"""Budget geometry: patches of the choice space and the inducement tensor.

For period ``t`` a bundle ``q`` induces ``p_j > p_t`` (price ``p_j`` revealed
preferred to ``p_t``) when ``p_j . q < p_t . q``.  Bundles that induce the same
set of strict relations form a *patch*.  A patch is identified by its sign
vector ``sigma`` over the other periods ``j != t`` (in increasing order of
``j``): ``sigma_j = sign((p_j - p_t) . q)``.  ``X[t][i, j] == 1`` iff
``sigma_j == -1`` for patch ``i`` of period ``t``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from rumtest import _simplex
from rumtest.errors import (
    DegenerateBudgets,
    InfeasibleMargin,
    InputError,
    OnBoundary,
    UnknownPatch,
)

log = logging.getLogger(__name__)

DEFAULT_MARGIN = 1e-9
DEFAULT_TIE_TOL = 1e-9
TIE_POLICIES = ("error", "perturb", "drop")


@dataclass
class Dataset:
    """Observed prices and choices.

    Exactly one of ``bundles`` / ``patch_counts`` is set.  ``bundles[t]`` is an
    ``(N_t, L)`` array; ``patch_counts[t]`` maps patch index to count.
    """

    prices: np.ndarray
    bundles: list[np.ndarray] | None = None
    patch_counts: list[dict[int, int]] | None = None

    def __post_init__(self):
        self.prices = np.atleast_2d(np.asarray(self.prices, dtype=float))
        T, L = self.prices.shape
        if T < 1 or L < 1:
            raise InputError("need at least one period and one good")
        if not np.all(np.isfinite(self.prices)) or np.any(self.prices <= 0):
            raise InputError("all prices must be finite and strictly positive")
        if (self.bundles is None) == (self.patch_counts is None):
            raise InputError("provide exactly one of bundles or patch_counts")
        if self.bundles is not None:
            if len(self.bundles) != T:
                raise InputError(f"expected bundles for {T} periods, got {len(self.bundles)}")
            fixed = []
            for t, qs in enumerate(self.bundles):
                qs = np.asarray(qs, dtype=float).reshape(-1, L)
                if np.any(qs < 0):
                    raise InputError(f"negative quantity in period {t}")
                if np.any(qs @ self.prices[t] <= 0):
                    raise InputError(f"bundle with zero expenditure in period {t}")
                fixed.append(qs)
            self.bundles = fixed
        else:
            if len(self.patch_counts) != T:
                raise InputError(
                    f"expected patch counts for {T} periods, got {len(self.patch_counts)}"
                )
            for t, cnt in enumerate(self.patch_counts):
                if any(c < 0 for c in cnt.values()):
                    raise InputError(f"negative count in period {t}")

    @property
    def T(self) -> int:
        return self.prices.shape[0]

    @property
    def L(self) -> int:
        return self.prices.shape[1]

    @property
    def N_t(self) -> np.ndarray:
        if self.bundles is not None:
            return np.array([len(b) for b in self.bundles], dtype=np.int64)
        return np.array([sum(c.values()) for c in self.patch_counts], dtype=np.int64)

    @property
    def N(self) -> int:
        return int(self.N_t.sum())


@dataclass
class PatchStructure:
    """Per-period patches, the inducement tensor and witness bundles."""

    prices: np.ndarray
    signs: list[np.ndarray]  # signs[t]: (I_t, T-1) int8 in {-1, +1}
    witnesses: list[np.ndarray]  # witnesses[t]: (I_t, L), on the unit simplex
    margins: list[np.ndarray]  # best normalized margin per patch
    margin: float = DEFAULT_MARGIN
    warnings: list[str] = field(default_factory=list)

    @property
    def T(self) -> int:
        return self.prices.shape[0]

    @cached_property
    def sizes(self) -> np.ndarray:
        return np.array([len(s) for s in self.signs], dtype=np.int64)

    @cached_property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.sizes)[:-1]]).astype(np.int64)

    @property
    def dim(self) -> int:
        return int(self.sizes.sum())

    @cached_property
    def X(self) -> list[np.ndarray]:
        """``X[t][i, j] = 1`` iff patch ``i`` of period ``t`` induces ``p_j > p_t``."""
        T = self.T
        out = []
        for t in range(T):
            others = [j for j in range(T) if j != t]
            x = np.zeros((len(self.signs[t]), T), dtype=np.uint8)
            if others:
                x[:, others] = (self.signs[t] < 0).astype(np.uint8)
            out.append(x)
        return out

    @cached_property
    def in_masks(self) -> list[list[int]]:
        """Bitmask of periods ``j`` with ``X[t][i, j] == 1``, per patch."""
        weights = 1 << np.arange(self.T, dtype=object)
        return [[int(sum(w for w, b in zip(weights, row) if b)) for row in x] for x in self.X]

    @cached_property
    def avoid_tables(self) -> list[np.ndarray]:
        """``avoid_tables[t][i, S]``: patch ``i`` of ``t`` induces no relation to the set ``S``.

        Subsets are bitmasks over all periods; memory is ``dim * 2**T`` bytes.
        """
        S = np.arange(1 << self.T, dtype=np.int64)
        return [np.array([(S & m) == 0 for m in masks]) for masks in self.in_masks]

    @cached_property
    def _lookup(self) -> list[dict[tuple, int]]:
        return [{tuple(int(v) for v in row): i for i, row in enumerate(s)} for s in self.signs]

    def index_of(self, t: int, sigma) -> int:
        try:
            return self._lookup[t][tuple(int(v) for v in sigma)]
        except KeyError:
            raise UnknownPatch(f"sign vector {tuple(sigma)} not enumerated for period {t}") from None

    def flat(self, t: int, i: int) -> int:
        return int(self.offsets[t] + i)

    def total_types(self) -> int:
        out = 1
        for n in self.sizes:
            out *= int(n)
        return out

    def to_dict(self) -> dict:
        return {
            "prices": self.prices.tolist(),
            "margin": self.margin,
            "patches": [
                {
                    "signs": self.signs[t].tolist(),
                    "X": self.X[t].tolist(),
                    "witnesses": self.witnesses[t].tolist(),
                    "margins": [m if np.isfinite(m) else None for m in self.margins[t].tolist()],
                }
                for t in range(self.T)
            ],
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PatchStructure":
        prices = np.asarray(d["prices"], dtype=float)
        T = prices.shape[0]
        signs, wit, marg = [], [], []
        for rec in d["patches"]:
            signs.append(np.asarray(rec["signs"], dtype=np.int8).reshape(-1, T - 1))
            wit.append(np.asarray(rec["witnesses"], dtype=float).reshape(-1, prices.shape[1]))
            marg.append(np.array([np.inf if m is None else m for m in rec["margins"]], dtype=float))
        return cls(prices, signs, wit, marg, float(d.get("margin", DEFAULT_MARGIN)),
                   list(d.get("warnings", [])))


def _check_proportional(P: np.ndarray) -> None:
    T = P.shape[0]
    for t in range(T):
        for j in range(t + 1, T):
            ratio = P[j] / P[t]
            if np.ptp(ratio) <= 1e-12 * np.max(ratio):
                raise DegenerateBudgets(t, j)


def _max_margin(rows: np.ndarray) -> tuple[float, np.ndarray]:
    """Maximize ``d`` s.t. ``rows @ q >= d``, ``sum(q) <= 1``, ``q, d >= 0``.

    Returns ``(d*, q*)``.  ``d* > 0`` forces ``sum(q*) == 1``.
    """
    k, L = rows.shape
    # variables (q_1..q_L, d); constraints d - rows q <= 0 and sum q <= 1
    A = np.zeros((k + 1, L + 1))
    A[:k, :L] = -rows
    A[:k, L] = 1.0
    A[k, :L] = 1.0
    b = np.zeros(k + 1)
    b[k] = 1.0
    c = np.zeros(L + 1)
    c[L] = 1.0
    val, x = _simplex.maximize(c, A, b)
    return val, x[:L]


def _period_patches(G: np.ndarray, margin: float, L: int):
    """Depth-first enumeration of realizable sign vectors for one period.

    ``G`` holds ``p_j - p_t`` (normalized) for the other periods.  Children are
    visited with ``-1`` before ``+1`` so leaves come out in lexicographic order.
    """
    m = G.shape[0]
    found: list[tuple[tuple[int, ...], np.ndarray, float]] = []
    dropped = 0
    q0 = np.full(L, 1.0 / L)

    def visit(prefix: tuple[int, ...], q: np.ndarray):
        nonlocal dropped
        k = len(prefix)
        if k == m:
            rows = np.asarray(prefix, dtype=float)[:, None] * G if m else np.zeros((0, L))
            if m:
                best, qs = _max_margin(rows)
                q = qs / qs.sum() if qs.sum() > 0 else q
            else:
                best = np.inf
            found.append((prefix, q, float(best)))
            return
        for sigma in (-1, 1):
            val = sigma * float(G[k] @ q)
            rows = np.asarray(prefix + (sigma,), dtype=float)[:, None] * G[: k + 1]
            if val >= margin and np.all(rows @ q >= margin):
                visit(prefix + (sigma,), q)
                continue
            best, qs = _max_margin(rows)
            if best >= margin:
                visit(prefix + (sigma,), qs / qs.sum())
            elif best > 0:
                dropped += 1

    visit((), q0)
    return found, dropped


def enumerate_patches(prices, margin: float = DEFAULT_MARGIN) -> PatchStructure:
    """Enumerate the patches of every period.

    A sign vector is kept when some bundle on the unit simplex realizes it with
    normalized margin at least ``margin`` (prices are scaled by their maximum).
    """
    P = np.atleast_2d(np.asarray(prices, dtype=float))
    if P.ndim != 2 or P.shape[0] < 1 or P.shape[1] < 1:
        raise InputError("prices must be a nonempty T x L matrix")
    if np.any(P <= 0) or not np.all(np.isfinite(P)):
        raise InputError("all prices must be finite and strictly positive")
    if margin <= 0:
        raise InputError("margin must be positive")
    _check_proportional(P)
    T, L = P.shape
    Pn = P / P.max()

    signs, wits, margs, warnings = [], [], [], []
    for t in range(T):
        others = [j for j in range(T) if j != t]
        G = Pn[others] - Pn[t]
        found, dropped = _period_patches(G, margin, L)
        if dropped:
            msg = f"period {t}: {dropped} sign pattern(s) below margin {margin:g} dropped"
            log.warning(msg)
            warnings.append(msg)
        if not found:
            raise InfeasibleMargin(f"margin {margin:g} leaves period {t} without patches")
        signs.append(np.array([f[0] for f in found], dtype=np.int8).reshape(len(found), T - 1))
        wits.append(np.array([f[1] for f in found], dtype=float))
        margs.append(np.array([f[2] for f in found], dtype=float))
    return PatchStructure(P.copy(), signs, wits, margs, margin, warnings)


def sign_vector(prices, t: int, q, tie_tol: float = DEFAULT_TIE_TOL, tie_policy: str = "error"):
    """Sign vector of bundle ``q`` in period ``t``; ties follow ``tie_policy``.

    With ``"perturb"`` a tie counts as "no preference" (``+1``).
    """
    P = np.asarray(prices, dtype=float)
    q = np.asarray(q, dtype=float)
    spend = float(P[t] @ q)
    if spend <= 0:
        raise InputError("bundle has zero expenditure")
    out = []
    for j in range(P.shape[0]):
        if j == t:
            continue
        gap = float((P[j] - P[t]) @ q)
        if abs(gap) <= tie_tol * spend:
            if tie_policy == "perturb":
                out.append(1)
                continue
            raise OnBoundary(t, j, gap)
        out.append(1 if gap > 0 else -1)
    return tuple(out)


def patch_of_bundle(
    ps: PatchStructure, t: int, q, tie_tol: float = DEFAULT_TIE_TOL, tie_policy: str = "error"
) -> int:
    """Index of the patch of period ``t`` containing bundle ``q``."""
    return ps.index_of(t, sign_vector(ps.prices, t, q, tie_tol, tie_policy))


@dataclass(frozen=True)
class Frequencies:
    pi_hat: np.ndarray  # flat, dimension ps.dim
    counts: list[np.ndarray]  # per period integer counts over its patches
    N_t: np.ndarray
    dropped: int = 0

    @property
    def N(self) -> int:
        return int(self.N_t.sum())


def patch_counts(
    dataset: Dataset,
    ps: PatchStructure,
    tie_policy: str = "error",
    tie_tol: float = DEFAULT_TIE_TOL,
) -> tuple[list[np.ndarray], int]:
    if tie_policy not in TIE_POLICIES:
        raise InputError(f"unknown tie policy {tie_policy!r}")
    counts = [np.zeros(n, dtype=np.int64) for n in ps.sizes]
    dropped = 0
    if dataset.patch_counts is not None:
        for t, cnt in enumerate(dataset.patch_counts):
            for i, c in cnt.items():
                if not 0 <= i < ps.sizes[t]:
                    raise UnknownPatch(f"patch index {i} out of range for period {t}")
                counts[t][i] += int(c)
        return counts, 0
    for t, qs in enumerate(dataset.bundles):
        for q in qs:
            try:
                i = patch_of_bundle(ps, t, q, tie_tol, tie_policy)
            except OnBoundary:
                if tie_policy == "drop":
                    dropped += 1
                    continue
                raise
            counts[t][i] += 1
    return counts, dropped


def empirical_frequencies(
    dataset: Dataset,
    ps: PatchStructure,
    tie_policy: str = "error",
    tie_tol: float = DEFAULT_TIE_TOL,
) -> Frequencies:
    """Per-period choice frequencies over patches, flattened period-major."""
    counts, dropped = patch_counts(dataset, ps, tie_policy, tie_tol)
    return frequencies_from_counts(counts, dropped)


def frequencies_from_counts(counts: list[np.ndarray], dropped: int = 0) -> Frequencies:
    N_t = np.array([int(c.sum()) for c in counts], dtype=np.int64)
    if np.any(N_t == 0):
        raise InputError("every period needs at least one observation")
    pi = np.concatenate([c / n for c, n in zip(counts, N_t)])
    return Frequencies(pi, [c.copy() for c in counts], N_t, dropped)
