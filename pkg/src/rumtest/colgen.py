"""Column generation for the projection onto the cone of rational types.

The restricted master is re-solved after each new column; pricing supplies
columns until an exact pricing run certifies ``max_r s.a_r < s.v + eps``.
``bounded_project`` stops early once the statistic is known to lie strictly
above or below a reference value.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from rumtest.choice_types import ChoiceType, to_vector
from rumtest.errors import ContractViolation, IterationLimit, NumericalFailure
from rumtest.geometry import PatchStructure
from rumtest.master import MasterSolution, nnls_gram
from rumtest.pricing import PricingConfig, PricingStats, price

log = logging.getLogger(__name__)


class ColumnPool:
    """Deduplicated set of choice types with a cached Gram matrix."""

    def __init__(self, ps: PatchStructure, types: Sequence[ChoiceType] = ()):
        self.ps = ps
        self.types: list[ChoiceType] = []
        self._index: dict[ChoiceType, int] = {}
        self._cap = 16
        self._A = np.zeros((ps.dim, self._cap))
        self._G = np.zeros((self._cap, self._cap))
        self._idle = np.zeros(self._cap, dtype=np.int64)
        self.last_passive: list[ChoiceType] = []
        for t in types:
            self.add(t)

    def __len__(self) -> int:
        return len(self.types)

    def __contains__(self, typ) -> bool:
        return tuple(typ) in self._index

    @property
    def A(self) -> np.ndarray:
        return self._A[:, : len(self.types)]

    @property
    def G(self) -> np.ndarray:
        k = len(self.types)
        return self._G[:k, :k]

    def _grow(self):
        cap = self._cap * 2
        A = np.zeros((self.ps.dim, cap))
        G = np.zeros((cap, cap))
        idle = np.zeros(cap, dtype=np.int64)
        k = len(self.types)
        A[:, :k] = self._A[:, :k]
        G[:k, :k] = self._G[:k, :k]
        idle[:k] = self._idle[:k]
        self._A, self._G, self._idle, self._cap = A, G, idle, cap

    def add(self, typ: Sequence[int]) -> tuple[int, bool]:
        """Insert ``typ``; returns ``(index, is_new)``."""
        typ = tuple(int(v) for v in typ)
        if typ in self._index:
            return self._index[typ], False
        k = len(self.types)
        if k == self._cap:
            self._grow()
        a = to_vector(typ, self.ps)
        g = self._A[:, :k].T @ a
        self._A[:, k] = a
        self._G[k, :k] = g
        self._G[:k, k] = g
        self._G[k, k] = a @ a
        self._idle[k] = 0
        self.types.append(typ)
        self._index[typ] = k
        return k, True

    def index(self, typ) -> int:
        return self._index[tuple(typ)]

    def record_usage(self, weights: np.ndarray) -> None:
        k = len(self.types)
        used = weights[:k] > 0
        self._idle[:k] = np.where(used, 0, self._idle[:k] + 1)

    def purge(self, idle_limit: int) -> int:
        """Drop columns unused in the last ``idle_limit`` master solves."""
        k = len(self.types)
        keep = [i for i in range(k) if self._idle[i] < idle_limit]
        if len(keep) == k:
            return 0
        types = [self.types[i] for i in keep]
        idle = self._idle[keep].copy()
        self.types, self._index = [], {}
        self._cap = 16
        self._A = np.zeros((self.ps.dim, self._cap))
        self._G = np.zeros((self._cap, self._cap))
        self._idle = np.zeros(self._cap, dtype=np.int64)
        for t in types:
            self.add(t)
        self._idle[: len(types)] = idle
        return k - len(keep)

    def copy(self) -> "ColumnPool":
        out = ColumnPool(self.ps, self.types)
        out.last_passive = list(self.last_passive)
        return out


# ----------------------------------------------------------------- bounds


def lower_bound(s, v, z_star, target, N: float, exact: bool = True) -> float:
    """Distance (squared, scaled by ``N``) from ``target`` to ``{c : s.c <= z*}``.

    This is the closed-form optimum of the half-space projection problem.  It is
    a valid bound on the cone statistic only when ``z* == 0``; see
    ``cone_lower_bound`` for the version used to classify replications.
    """
    if not exact:
        raise ContractViolation("the lower bound needs an exactly solved pricing problem")
    s = np.asarray(s, dtype=float)
    nrm = float(s @ s)
    if nrm == 0.0:
        return 0.0
    gap = float(s @ np.asarray(target, dtype=float)) - float(z_star)
    return N * max(0.0, gap) ** 2 / nrm


def _equal_mass_projection(c: np.ndarray, ps: PatchStructure) -> tuple[np.ndarray, float]:
    """Project onto ``{c : all period blocks have the same sum}``.

    Returns the projection and the squared distance.
    """
    sizes = ps.sizes.astype(float)
    mass = np.add.reduceat(c, ps.offsets) if ps.dim else np.zeros(0)
    lam = float(np.sum(mass / sizes) / np.sum(1.0 / sizes))
    y = (mass - lam) / sizes
    return c - np.repeat(y, ps.sizes), float(np.sum(sizes * y * y))


def cone_lower_bound(s, z_star, target, N: float, ps: PatchStructure, exact: bool = True) -> float:
    """Lower bound on ``N * dist(target, C)^2`` from an exact pricing optimum.

    Every generator has one unit per period, so ``s.a_r <= z*`` gives
    ``(s - z*/T).a_r <= 0`` and, by conic combination, ``(s - z*/T).c <= 0``
    on the whole cone.  The cone also lies in the subspace where all period
    blocks have equal mass; the bound is the squared distance to the
    intersection of that subspace with the half-space.
    """
    if not exact:
        raise ContractViolation("the lower bound needs an exactly solved pricing problem")
    target = np.asarray(target, dtype=float)
    g = np.asarray(s, dtype=float) - float(z_star) / ps.T
    tE, d2 = _equal_mass_projection(target, ps)
    gE, _ = _equal_mass_projection(g, ps)
    nrm = float(gE @ gE)
    scale = float(g @ g) + float(z_star) ** 2
    if nrm <= 1e-24 * scale:
        # normal vanishes on the subspace: the cut is slack or void there
        return N * d2
    excess = max(0.0, float(gE @ tE))
    return N * (d2 + excess * excess / nrm)


def upper_bound(sol: MasterSolution) -> float:
    return sol.J


# ----------------------------------------------------------------- driver


@dataclass
class ColgenConfig:
    pricing: PricingConfig = field(default_factory=PricingConfig)
    use_upper_bound: bool = False
    use_lower_bound: bool = False
    max_iter: int | None = None  # default 10 * sum(I_t)
    master_tol: float = 1e-10
    purge_after: int | None = None
    trace: Callable[[dict], None] | None = None


@dataclass
class ProjectionResult:
    J: float
    eta: np.ndarray
    solution: MasterSolution
    columns: list[ChoiceType]
    iterations: int
    exact_pricing_calls: int
    heuristic_hits: int
    certificate_gap: float
    bounds: list[tuple[int, float, float | None]] = field(default_factory=list)


@dataclass
class BoundedOutcome:
    kind: str  # "exact" | "exceeds" | "below"
    value: float
    result: ProjectionResult | None
    iterations: int
    exact_pricing_calls: int
    heuristic_hits: int


def _solve_master(pool: ColumnPool, target: np.ndarray, N: float, tol: float) -> MasterSolution:
    A = pool.A
    warm = [pool.index(t) for t in pool.last_passive if t in pool]
    x, P, it = nnls_gram(pool.G, A.T @ target, tol, warm)
    v = A @ x
    s = target - v
    pool.last_passive = [pool.types[i] for i in P]
    pool.record_usage(x)
    return MasterSolution(x, s, v, float(N * (s @ s)), N, tuple(P), it)


def _run(
    target: np.ndarray,
    ps: PatchStructure,
    N: float,
    pool: ColumnPool,
    config: ColgenConfig,
    rng: np.random.Generator,
    J_ref: float | None,
):
    target = np.asarray(target, dtype=float)
    if target.shape != (ps.dim,):
        raise ContractViolation(f"target has shape {target.shape}, expected ({ps.dim},)")
    max_iter = config.max_iter if config.max_iter is not None else 10 * ps.dim
    stats = PricingStats()
    history: list[tuple[int, float, float | None]] = []
    trace = config.trace
    it = 0

    def finish(kind, value, result=None):
        return BoundedOutcome(kind, value, result, it, stats.exact_calls, stats.heuristic_hits)

    while True:
        sol = _solve_master(pool, target, N, config.master_tol)
        ub = sol.J
        if trace:
            trace({"event": "master", "iteration": it, "J": ub, "columns": len(pool)})
        if J_ref is not None and config.use_upper_bound and ub < J_ref:
            history.append((it, ub, None))
            if trace:
                trace({"event": "below_ref", "iteration": it, "upper_bound": ub, "J_ref": J_ref})
            return finish("below", ub)

        s = sol.residual
        threshold = float(s @ sol.projection)
        out = price(s, ps, threshold, config.pricing, rng, stats)
        lb = None
        if out.exact:
            lb = cone_lower_bound(s, out.z_star, target, N, ps)
        history.append((it, ub, lb))
        if trace:
            trace({
                "event": "pricing", "iteration": it, "exact": out.exact,
                "value": out.value, "z_star": out.z_star, "lower_bound": lb,
            })
        if J_ref is not None and config.use_lower_bound and lb is not None and lb > J_ref:
            if trace:
                trace({"event": "exceeds_ref", "iteration": it, "lower_bound": lb, "J_ref": J_ref})
            return finish("exceeds", lb)

        if out.column is None:
            res = ProjectionResult(
                J=ub, eta=sol.projection, solution=sol, columns=list(pool.types),
                iterations=it, exact_pricing_calls=stats.exact_calls,
                heuristic_hits=stats.heuristic_hits,
                certificate_gap=float(out.z_star - threshold), bounds=history,
            )
            return finish("exact", ub, res)

        _, new = pool.add(out.column)
        if not new:
            raise NumericalFailure(
                f"pricing returned a pooled column (value {out.value:.3g}, threshold {threshold:.3g})"
            )
        it += 1
        if config.purge_after:
            pool.purge(config.purge_after)
        if it > max_iter:
            raise IterationLimit(f"column generation exceeded {max_iter} iterations", sol)


def project(
    target,
    ps: PatchStructure,
    N: float,
    warm_columns: ColumnPool | Sequence[ChoiceType] | None = None,
    config: ColgenConfig | None = None,
    rng: np.random.Generator | None = None,
) -> ProjectionResult:
    """Projection of ``target`` onto the cone of rational types.

    A ``ColumnPool`` passed as ``warm_columns`` is updated in place, so it can be
    carried across calls.
    """
    pool = _as_pool(ps, warm_columns)
    config = config or ColgenConfig()
    rng = rng if rng is not None else np.random.default_rng(0)
    out = _run(target, ps, N, pool, config, rng, None)
    return out.result


def bounded_project(
    target,
    ps: PatchStructure,
    N: float,
    J_ref: float,
    warm_columns: ColumnPool | Sequence[ChoiceType] | None = None,
    config: ColgenConfig | None = None,
    rng: np.random.Generator | None = None,
) -> BoundedOutcome:
    """Like ``project`` but stops once the statistic is certified above/below ``J_ref``."""
    if J_ref < 0:
        raise ContractViolation("J_ref must be nonnegative")
    pool = _as_pool(ps, warm_columns)
    config = config or ColgenConfig(use_upper_bound=True, use_lower_bound=True)
    rng = rng if rng is not None else np.random.default_rng(0)
    return _run(target, ps, N, pool, config, rng, J_ref)


def _as_pool(ps, warm) -> ColumnPool:
    if isinstance(warm, ColumnPool):
        return warm
    return ColumnPool(ps, warm or ())
