"""End-to-end test of stochastic rationalizability with a tightened bootstrap."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from rumtest.choice_types import (
    DEFAULT_SUBSET_SIZE,
    PSEUDOCODE_WEIGHTS,
    enumerate_rational_types,
    sample_rational_types,
    to_matrix,
)
from rumtest.colgen import ColgenConfig, ColumnPool, ProjectionResult, bounded_project, project
from rumtest.errors import ContractViolation, Exhausted, InputError, TimedOut
from rumtest.geometry import (
    DEFAULT_MARGIN,
    DEFAULT_TIE_TOL,
    Dataset,
    Frequencies,
    PatchStructure,
    empirical_frequencies,
    enumerate_patches,
)
from rumtest.master import shift_vector
from rumtest.pricing import PricingConfig

log = logging.getLogger(__name__)

SCHEMA = "rumtest.report/1"
MODES = ("exact", "heur", "heur-ub", "heur-bounds")
MODE_ALIASES = {
    "heuristic": "heur",
    "heuristic+ub": "heur-ub",
    "heuristic+all-bounds": "heur-bounds",
}
ENUMERATE_SUBSET_LIMIT = 10**4


def auto_tau(N: int) -> float:
    """Conventional default ``sqrt(log N / N)``."""
    return math.sqrt(math.log(N) / N) if N > 1 else 0.0


@dataclass
class TestConfig:
    __test__ = False  # keep pytest from collecting this class

    tau: float | str = "auto"
    bootstrap: int = 200
    seed: int = 0
    subset_size: int = DEFAULT_SUBSET_SIZE
    mode: str = "heur-bounds"
    restarts: int = 10
    time_limit: float | None = None  # wall-clock cap for the whole run
    pricing_time_limit: float | None = None  # per exact pricing call
    tie_policy: str = "error"
    tie_tol: float = DEFAULT_TIE_TOL
    margin: float = DEFAULT_MARGIN
    cmp_tol: float = 1e-9
    purge_after: int | None = None
    repair_weights: tuple[int, int] = PSEUDOCODE_WEIGHTS
    max_repair_rounds: int = 50

    def __post_init__(self):
        self.mode = MODE_ALIASES.get(self.mode, self.mode)
        if self.mode not in MODES:
            raise InputError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.bootstrap < 1:
            raise InputError("need at least one bootstrap replication")
        if not isinstance(self.tau, str) and self.tau < 0:
            raise InputError("tau must be nonnegative")
        if isinstance(self.tau, str) and self.tau != "auto":
            raise InputError("tau must be a number or 'auto'")
        if self.subset_size < 1:
            raise InputError("subset size must be >= 1")
        self.repair_weights = tuple(self.repair_weights)

    def resolve_tau(self, N: int) -> float:
        return auto_tau(N) if self.tau == "auto" else float(self.tau)

    def colgen(self, bounds: bool = True, trace=None) -> ColgenConfig:
        heur = self.mode != "exact"
        return ColgenConfig(
            pricing=PricingConfig(
                use_heuristic=heur, restarts=self.restarts, time_limit=self.pricing_time_limit
            ),
            use_upper_bound=bounds and self.mode in ("heur-ub", "heur-bounds"),
            use_lower_bound=bounds and self.mode == "heur-bounds",
            purge_after=self.purge_after,
            trace=trace,
        )


@dataclass
class Replication:
    index: int
    kind: str  # "exact" | "exceeds" | "below"
    value: float
    at_least_ref: bool
    iterations: int
    exact_pricing_calls: int


@dataclass
class TestReport:
    __test__ = False

    J_N: float
    tau: float
    p_value: float
    completed: int
    M: int
    replications: list[Replication]
    counters: dict
    config: dict
    data: dict
    timing: dict = field(default_factory=dict)
    partial: bool = False
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schema"] = SCHEMA
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def table(self) -> str:
        head = f"{'Periods':>8} {'Jstat':>10} {'Pval':>6} {'Time':>9} {'Completed':>10}"
        row = (
            f"{self.data['T']:>8d} {self.J_N:>10.4g} {self.p_value:>6.3f} "
            f"{self.timing.get('wall_seconds', float('nan')):>9.1f} {self.completed:>10d}"
        )
        return f"mode: {self.config['mode']}\n{head}\n{row}"


# ----------------------------------------------------------------- steps


def compute_statistic(
    freq: Frequencies,
    ps: PatchStructure,
    config: TestConfig,
    pool: ColumnPool | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[float, np.ndarray, ProjectionResult]:
    """``J_N`` and the projection of the empirical frequencies, ``N = sum N_t``."""
    pool = pool if pool is not None else ColumnPool(ps)
    rng = rng if rng is not None else np.random.default_rng([config.seed, 3])
    res = project(freq.pi_hat, ps, freq.N, pool, config.colgen(bounds=False), rng)
    return res.J, res.eta, res


def tightening_subset(ps: PatchStructure, config: TestConfig, notes: list[str] | None = None):
    """Choice types carrying the positive lower bounds.

    Small instances use every rational type; larger ones use semi-random
    sampling, falling back to whatever distinct types were found.
    """
    if ps.total_types() <= ENUMERATE_SUBSET_LIMIT:
        return enumerate_rational_types(ps, ENUMERATE_SUBSET_LIMIT)
    rng = np.random.default_rng([config.seed, 0])
    try:
        return sample_rational_types(
            ps, config.subset_size, rng, config.max_repair_rounds, weights=config.repair_weights
        )
    except Exhausted as exc:
        if not exc.found:
            raise
        msg = f"tightening subset has {len(exc.found)} types (requested {config.subset_size})"
        log.warning(msg)
        if notes is not None:
            notes.append(msg)
        return exc.found


def tightened_estimator(
    pi_hat: np.ndarray,
    tau: float,
    subset,
    ps: PatchStructure,
    N: float,
    config: TestConfig,
    pool: ColumnPool | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, ProjectionResult]:
    """Tightened projection ``A p* + shift`` of ``pi_hat``."""
    pool = pool if pool is not None else ColumnPool(ps)
    rng = rng if rng is not None else np.random.default_rng([config.seed, 4])
    shift = shift_vector(to_matrix(list(subset), ps), tau) if tau > 0 else np.zeros(ps.dim)
    res = project(np.asarray(pi_hat) - shift, ps, N, pool, config.colgen(bounds=False), rng)
    return res.eta + shift, res


def bootstrap_frequencies(counts: list[np.ndarray], rng: np.random.Generator) -> np.ndarray:
    """Per-period multinomial resample of the observed counts, as frequencies."""
    out = []
    for c in counts:
        c = np.asarray(c, dtype=np.int64)
        n = int(c.sum())
        if n < 1:
            raise ContractViolation("every period needs at least one observation")
        out.append(rng.multinomial(n, c / n) / n)
    return np.concatenate(out)


def recenter(pi_star, pi_hat, eta_tau) -> np.ndarray:
    return np.asarray(pi_star) - np.asarray(pi_hat) + np.asarray(eta_tau)


def data_digest(ps: PatchStructure, counts: list[np.ndarray]) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(ps.prices, dtype="<f8").tobytes())
    for c in counts:
        h.update(np.ascontiguousarray(c, dtype="<i8").tobytes())
        h.update(b"|")
    return h.hexdigest()


# ----------------------------------------------------------------- driver


def run_test_counts(
    ps: PatchStructure,
    freq: Frequencies,
    config: TestConfig,
    trace: Callable[[dict], None] | None = None,
) -> TestReport:
    """Full procedure on pre-computed patches and counts."""
    start = time.monotonic()
    notes: list[str] = []
    N = freq.N
    tau = config.resolve_tau(N)
    pool = ColumnPool(ps)

    J_N, _, res0 = compute_statistic(freq, ps, config, pool)
    columns_after_stat = len(pool)
    exact_calls = res0.exact_pricing_calls
    hits = res0.heuristic_hits

    subset = tightening_subset(ps, config, notes) if tau > 0 else []
    eta_tau, res1 = tightened_estimator(freq.pi_hat, tau, subset, ps, N, config, pool)
    exact_calls += res1.exact_pricing_calls
    hits += res1.heuristic_hits
    shift = shift_vector(to_matrix(list(subset), ps), tau) if tau > 0 else np.zeros(ps.dim)

    J_ref = J_N - config.cmp_tol * (1.0 + J_N)
    cg_boot = config.colgen(bounds=True, trace=trace)
    reps: list[Replication] = []
    partial = False
    for m in range(config.bootstrap):
        if config.time_limit is not None and time.monotonic() - start > config.time_limit:
            partial = True
            notes.append(f"time limit reached after {m} replications")
            break
        pi_star = bootstrap_frequencies(freq.counts, np.random.default_rng([config.seed, 1, m]))
        target = recenter(pi_star, freq.pi_hat, eta_tau) - shift
        rng = np.random.default_rng([config.seed, 2, m])
        if trace:
            trace({"event": "replication", "index": m})
        try:
            if J_ref < 0 and cg_boot.use_lower_bound:
                # any statistic is >= 0 > J_ref
                reps.append(Replication(m, "exceeds", 0.0, True, 0, 0))
                continue
            out = bounded_project(target, ps, N, max(J_ref, 0.0), pool, cg_boot, rng)
        except TimedOut:
            partial = True
            notes.append(f"pricing time limit hit in replication {m}")
            break
        if out.kind == "exact":
            ge = out.value >= J_ref
        else:
            ge = out.kind == "exceeds"
        reps.append(Replication(m, out.kind, out.value, ge, out.iterations, out.exact_pricing_calls))
        exact_calls += out.exact_pricing_calls
        hits += out.heuristic_hits

    completed = len(reps)
    exceed = sum(r.at_least_ref for r in reps)
    p_value = exceed / completed if completed else float("nan")
    cfg = asdict(config)
    cfg["tau"] = config.tau
    cfg["repair_weights"] = list(config.repair_weights)
    report = TestReport(
        J_N=J_N,
        tau=tau,
        p_value=p_value,
        completed=completed,
        M=config.bootstrap,
        replications=reps,
        counters={
            "columns_statistic": columns_after_stat,
            "columns_total": len(pool),
            "exact_pricing_calls": exact_calls,
            "heuristic_hits": hits,
            "subset_size": len(subset),
            "kinds": {k: sum(r.kind == k for r in reps) for k in ("exact", "exceeds", "below")},
        },
        config=cfg,
        data={
            "T": ps.T,
            "L": int(ps.prices.shape[1]),
            "N": N,
            "N_t": freq.N_t.tolist(),
            "patches": ps.sizes.tolist(),
            "dropped_bundles": freq.dropped,
            "digest": data_digest(ps, freq.counts),
        },
        partial=partial,
        notes=notes,
    )
    report.timing = {"wall_seconds": time.monotonic() - start}
    return report


def run_test(
    dataset: Dataset,
    config: TestConfig,
    ps: PatchStructure | None = None,
    trace: Callable[[dict], None] | None = None,
) -> TestReport:
    """Enumerate patches (unless given), tabulate frequencies and run the test."""
    if ps is None:
        ps = enumerate_patches(dataset.prices, config.margin)
    freq = empirical_frequencies(dataset, ps, config.tie_policy, config.tie_tol)
    return run_test_counts(ps, freq, config, trace)
