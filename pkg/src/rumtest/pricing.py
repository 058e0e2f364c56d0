"""Pricing: find a rational choice type maximizing ``s . a_r``.

Two solvers share the same bitmask representation of the relation digraph:

* ``best_insertion`` builds an ordering of periods by repeated best insertion
  and reads off the best picks consistent with it;
* ``exact_pricing`` solves the problem exactly, by dynamic programming over
  period subsets when ``T`` is small enough and otherwise by a best-first
  branch-and-bound over partial picks whose state is the transitively closed
  strict relation.

A type is rational iff its periods admit an ordering in which every pick
induces preferences only for earlier periods; the dynamic program maximizes
over orderings, one appended period at a time.

``reach[u]`` is the bitmask of periods reachable from ``u`` in the digraph
with an edge ``j -> t`` whenever the pick in period ``t`` induces ``p_j > p_t``.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from rumtest.choice_types import ChoiceType, is_rational
from rumtest.errors import ContractViolation, TimedOut
from rumtest.geometry import PatchStructure

EPS_CG = 1e-9
DEFAULT_RESTARTS = 10
DP_MAX_PERIODS = 18
EXACT_METHODS = ("auto", "dp", "bnb")


@dataclass
class PricingStats:
    heuristic_calls: int = 0
    heuristic_hits: int = 0
    exact_calls: int = 0
    nodes: int = 0

    def merge(self, other: "PricingStats") -> None:
        self.heuristic_calls += other.heuristic_calls
        self.heuristic_hits += other.heuristic_hits
        self.exact_calls += other.exact_calls
        self.nodes += other.nodes


def _blocks(s: np.ndarray, ps: PatchStructure) -> list[np.ndarray]:
    s = np.asarray(s, dtype=float)
    if s.shape != (ps.dim,):
        raise ContractViolation(f"residual has shape {s.shape}, expected ({ps.dim},)")
    return [s[o : o + n] for o, n in zip(ps.offsets, ps.sizes)]


def dummy_value(s: np.ndarray) -> float:
    return -(1.0 + float(np.abs(s).sum()))


class _Ranked:
    """Per-period patches sorted by decreasing ``s`` (ties: lower index first)."""

    def __init__(self, s: np.ndarray, ps: PatchStructure):
        self.blocks = _blocks(s, ps)
        self.masks = ps.in_masks
        self.order = []
        for blk, masks in zip(self.blocks, self.masks):
            idx = sorted(range(len(blk)), key=lambda i: (-blk[i], i))
            self.order.append([(i, float(blk[i]), masks[i]) for i in idx])

    def best(self, t: int, forbidden: int) -> tuple[int, float]:
        """Highest-valued patch of ``t`` whose inducing set avoids ``forbidden``."""
        for i, val, m in self.order[t]:
            if not m & forbidden:
                return i, val
        return -1, -np.inf


# ----------------------------------------------------------------- heuristic


def order_value(order: Sequence[int], s, ps: PatchStructure, _ranked: _Ranked | None = None):
    """Value of the best picks consistent with ``order``.

    Each period may only pick a patch that induces no preference for a period
    ranked after it, so all relations point from earlier to later periods and
    the picks are acyclic.  A period without such a patch gets a dummy pick
    (index ``-1``) worth ``-(1 + sum|s|)``.

    Returns ``(value, picks)`` with ``picks`` a dict ``period -> patch``.
    """
    ranked = _ranked or _Ranked(np.asarray(s, dtype=float), ps)
    if len(set(order)) != len(order):
        raise ContractViolation("ordering repeats a period")
    dummy = dummy_value(np.concatenate(ranked.blocks)) if ranked.blocks else -1.0
    later = 0
    value = 0.0
    picks: dict[int, int] = {}
    for t in reversed(order):
        i, val = ranked.best(t, later)
        if i < 0:
            val = dummy
        picks[t] = i
        value += val
        later |= 1 << t
    return value, picks


def _best_position(order: list[int], t: int, ranked: _Ranked, dummy: float) -> int:
    """Insertion slot for ``t`` maximizing the ordering value (lowest slot on ties).

    Inserting ``t`` at slot ``pos`` adds ``t`` to the later-set of every period
    before ``pos`` and leaves the others unchanged, so all slots are scored from
    two passes over the current ordering.
    """
    k = len(order)
    bit = 1 << t
    later = [0] * (k + 1)
    for pos in range(k - 1, -1, -1):
        later[pos] = later[pos + 1] | (1 << order[pos])

    def val(u, forbidden):
        i, v = ranked.best(u, forbidden)
        return v if i >= 0 else dummy

    plain = [val(order[pos], later[pos + 1]) for pos in range(k)]
    shifted = [val(order[pos], later[pos + 1] | bit) for pos in range(k)]
    head = 0.0  # sum of shifted values before pos
    tail = sum(plain)  # sum of plain values from pos on
    best_val, best_pos = -np.inf, 0
    for pos in range(k + 1):
        v = head + val(t, later[pos]) + tail
        if v > best_val:
            best_val, best_pos = v, pos
        if pos < k:
            head += shifted[pos]
            tail -= plain[pos]
    return best_pos


def best_insertion(
    s, ps: PatchStructure, rng: np.random.Generator, restarts: int = DEFAULT_RESTARTS
) -> list[tuple[ChoiceType, float]]:
    """Best-insertion heuristic with ``restarts`` random insertion sequences.

    Returns distinct rational candidates sorted by decreasing value.
    """
    ranked = _Ranked(np.asarray(s, dtype=float), ps)
    dummy = dummy_value(np.asarray(s, dtype=float))
    T = ps.T
    found: dict[ChoiceType, float] = {}
    for _ in range(restarts):
        seq = rng.permutation(T).tolist()
        order = [seq[0]]
        for t in seq[1:]:
            order.insert(_best_position(order, t, ranked, dummy), t)
        val, picks = order_value(order, None, ps, ranked)
        if min(picks.values()) < 0:
            continue
        typ = tuple(picks[t] for t in range(T))
        found[typ] = val
    out = sorted(found.items(), key=lambda kv: (-kv[1], kv[0]))
    for typ, _ in out:
        if not is_rational(typ, ps):  # ordering guarantees this
            raise AssertionError(f"best insertion produced irrational type {typ}")
    return out


# ----------------------------------------------------------------- exact


def _add_pick(reach: tuple[int, ...], t: int, mask: int) -> tuple[int, ...]:
    if not mask:
        return reach
    add = reach[t] | (1 << t)
    return tuple(
        r | add if ((mask >> u) & 1) or (r & mask) else r for u, r in enumerate(reach)
    )


@dataclass
class ExactResult:
    best: ChoiceType
    z: float
    proven_optimal: bool
    nodes: int = 0


@dataclass(order=True)
class _Node:
    key: tuple
    value: float = field(compare=False)
    picks: tuple = field(compare=False)
    reach: tuple = field(compare=False)
    branch: int = field(compare=False, default=-1)


def _bound(ranked: _Ranked, picks: tuple, reach: tuple) -> tuple[float, int, int]:
    """Optimistic completion value, plus the branching period and its option count."""
    total = 0.0
    branch, fewest = -1, None
    for t, p in enumerate(picks):
        if p >= 0:
            continue
        forbidden = reach[t]
        best = None
        count = 0
        for i, val, m in ranked.order[t]:
            if not m & forbidden:
                count += 1
                if best is None:
                    best = val
        if best is None:
            return -np.inf, t, 0
        total += best
        if fewest is None or count < fewest:
            branch, fewest = t, count
    return total, branch, fewest or 0


def _dive(ranked: _Ranked, T: int):
    """Greedy feasible completion from the root, fixing periods in index order."""
    reach = (0,) * T
    picks = []
    value = 0.0
    for t in range(T):
        i, val = ranked.best(t, reach[t])
        if i < 0:
            return None
        picks.append(i)
        value += val
        reach = _add_pick(reach, t, ranked.masks[t][i])
    return tuple(picks), value


def branch_and_bound(
    s,
    ps: PatchStructure,
    time_limit: float | None = None,
    incumbent: tuple[ChoiceType, float] | None = None,
) -> ExactResult:
    """Maximize ``s . a_r`` over rational types by best-first branch-and-bound.

    Branches on the unfixed period with the fewest feasible patches (lowest
    index on ties); a node's bound adds the best feasible patch of every
    unfixed period to the value of the fixed picks.

    Raises ``TimedOut`` (with the incumbent as ``best``) if ``time_limit``
    seconds pass before optimality is proven.
    """
    ranked = _Ranked(np.asarray(s, dtype=float), ps)
    T = ps.T
    start = time.monotonic()

    best_typ, best_val = None, -np.inf
    if incumbent is not None:
        best_typ, best_val = tuple(incumbent[0]), float(incumbent[1])
    dive = _dive(ranked, T)
    if dive is not None and dive[1] > best_val:
        best_typ, best_val = dive

    root_picks = (-1,) * T
    root_reach = (0,) * T
    bound, root_branch, _ = _bound(ranked, root_picks, root_reach)
    heap: list[_Node] = []
    counter = 0
    if bound > best_val:
        heapq.heappush(heap, _Node((-bound, counter), 0.0, root_picks, root_reach, root_branch))
    nodes = 0
    while heap:
        node = heapq.heappop(heap)
        if -node.key[0] <= best_val:
            break
        nodes += 1
        if time_limit is not None and nodes % 256 == 1 and time.monotonic() - start > time_limit:
            res = ExactResult(best_typ, best_val, False, nodes) if best_typ else None
            raise TimedOut(f"exact pricing exceeded {time_limit}s", res)
        t = node.branch
        forbidden = node.reach[t]
        for i, val, m in ranked.order[t]:
            if m & forbidden:
                continue
            picks = node.picks[:t] + (i,) + node.picks[t + 1 :]
            reach = _add_pick(node.reach, t, m)
            value = node.value + val
            rest, branch, _ = _bound(ranked, picks, reach)
            b = value + rest
            if b <= best_val:
                continue
            if min(picks) >= 0:
                best_typ, best_val = picks, value
                continue
            counter += 1
            heapq.heappush(heap, _Node((-b, counter), value, picks, reach, branch))
    if best_typ is None:
        raise ContractViolation("no rational choice type exists for this patch structure")
    return ExactResult(tuple(best_typ), float(best_val), True, nodes)


def subset_dp(s, ps: PatchStructure) -> ExactResult:
    """Maximize ``s . a_r`` over rational types by dynamic programming.

    ``f[U]`` is the best value of the periods in ``U`` placed, in some order,
    after everything else; prepending ``t`` to ``U`` earns the best patch of
    ``t`` that induces nothing in ``U``.  Ties go to the lowest period index
    and then the lowest patch index.  Time and memory grow as ``dim * 2**T``.
    """
    s = np.asarray(s, dtype=float)
    ranked = _Ranked(s, ps)
    T = ps.T
    n = 1 << T
    tables = ps.avoid_tables
    val = np.full((T, n), -np.inf)
    arg = np.full((T, n), -1, dtype=np.int16)
    for t in range(T):
        v, a = val[t], arg[t]
        for i, sv, _ in ranked.order[t]:
            sel = tables[t][i] & (a < 0)
            v[sel] = sv
            a[sel] = i
    f = np.full(n, -np.inf)
    f[0] = 0.0
    first = np.full(n, -1, dtype=np.int16)
    pop = np.zeros(n, dtype=np.int8)
    for t in range(T):
        pop += ((np.arange(n) >> t) & 1).astype(np.int8)
    for k in range(1, T + 1):
        U = np.flatnonzero(pop == k)
        for t in range(T):
            bit = 1 << t
            has = U[(U & bit) != 0]
            rest = has ^ bit
            cand = f[rest] + val[t, rest]
            better = cand > f[has]
            f[has[better]] = cand[better]
            first[has[better]] = t
    z = float(f[n - 1])
    if not np.isfinite(z):
        raise ContractViolation("no rational choice type exists for this patch structure")
    picks = [0] * T
    U = n - 1
    while U:
        t = int(first[U])
        U ^= 1 << t
        picks[t] = int(arg[t, U])
    return ExactResult(tuple(picks), z, True, n)


def exact_pricing(
    s,
    ps: PatchStructure,
    time_limit: float | None = None,
    incumbent: tuple[ChoiceType, float] | None = None,
    method: str = "auto",
) -> ExactResult:
    """Maximize ``s . a_r`` over all rational types.

    ``method="auto"`` uses the subset dynamic program up to
    ``DP_MAX_PERIODS`` periods and branch-and-bound beyond.  ``time_limit`` and
    ``incumbent`` only affect branch-and-bound.
    """
    if method not in EXACT_METHODS:
        raise ContractViolation(f"unknown exact method {method!r}")
    if method == "dp" or (method == "auto" and ps.T <= DP_MAX_PERIODS):
        return subset_dp(s, ps)
    return branch_and_bound(s, ps, time_limit, incumbent)


# ----------------------------------------------------------------- policy


@dataclass
class PricingConfig:
    use_heuristic: bool = True
    restarts: int = DEFAULT_RESTARTS
    eps_cg: float = EPS_CG
    time_limit: float | None = None
    exact_method: str = "auto"


@dataclass
class PricingOutcome:
    column: ChoiceType | None
    value: float  # value of the returned column, or z* when none
    z_star: float | None  # set only when the exact solver ran to optimality
    exact: bool
    heuristic_value: float | None = None


def price(
    s,
    ps: PatchStructure,
    threshold: float,
    config: PricingConfig,
    rng: np.random.Generator,
    stats: PricingStats | None = None,
) -> PricingOutcome:
    """Heuristic first; fall back to the exact solver only if it misses ``threshold``."""
    stats = stats if stats is not None else PricingStats()
    cut = threshold + config.eps_cg
    incumbent = None
    hval = None
    if config.use_heuristic:
        stats.heuristic_calls += 1
        cands = best_insertion(s, ps, rng, config.restarts)
        if cands:
            incumbent = cands[0]
            hval = cands[0][1]
            if hval >= cut:
                stats.heuristic_hits += 1
                return PricingOutcome(cands[0][0], hval, None, False, hval)
    stats.exact_calls += 1
    res = exact_pricing(s, ps, config.time_limit, incumbent, config.exact_method)
    stats.nodes += res.nodes
    if res.z >= cut:
        return PricingOutcome(res.best, res.z, res.z, True, hval)
    return PricingOutcome(None, res.z, res.z, True, hval)
