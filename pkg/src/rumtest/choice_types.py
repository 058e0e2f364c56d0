"""Choice types: one patch per period, rationality checks, enumeration, sampling.

A choice type is stored as a tuple of patch indices ``picks`` (``picks[t]`` is
the patch chosen in period ``t``).  The relation digraph has an edge ``j -> t``
whenever the patch picked in period ``t`` induces ``p_j > p_t``; under strict
relations only, a type is rational iff this digraph is acyclic.
"""

from __future__ import annotations

import itertools
from typing import Sequence

import numpy as np

from rumtest.errors import ContractViolation, Exhausted, TooLarge
from rumtest.geometry import PatchStructure

ChoiceType = tuple[int, ...]

DEFAULT_SUBSET_SIZE = 1000
REPAIR_PENALTY = 10**6
PSEUDOCODE_WEIGHTS = (1, 5)  # (adding a relation, removing a relation)
PROSE_WEIGHTS = (5, 1)


def _check(picks: Sequence[int], ps: PatchStructure) -> None:
    if len(picks) != ps.T or any(not 0 <= p < n for p, n in zip(picks, ps.sizes)):
        raise ContractViolation(f"invalid picks {tuple(picks)} for sizes {ps.sizes.tolist()}")


def to_vector(picks: Sequence[int], ps: PatchStructure) -> np.ndarray:
    """0/1 column ``a_r`` over all (period, patch) coordinates."""
    _check(picks, ps)
    a = np.zeros(ps.dim)
    a[ps.offsets + np.asarray(picks, dtype=np.int64)] = 1.0
    return a


def to_matrix(types: Sequence[Sequence[int]], ps: PatchStructure) -> np.ndarray:
    A = np.zeros((ps.dim, len(types)))
    if types:
        rows = ps.offsets[None, :] + np.asarray(types, dtype=np.int64)
        A[rows.T, np.arange(len(types))[None, :]] = 1.0
    return A


def induced_relations(picks: Sequence[int], ps: PatchStructure) -> np.ndarray:
    """Direct relations: ``rho[j, t] = 1`` iff the pick of period ``t`` induces ``p_j > p_t``."""
    _check(picks, ps)
    T = ps.T
    rho = np.zeros((T, T), dtype=np.uint8)
    for t in range(T):
        rho[:, t] = ps.X[t][picks[t]]
    return rho


def _has_cycle(rho: np.ndarray) -> bool:
    T = rho.shape[0]
    succ = [np.flatnonzero(rho[u]).tolist() for u in range(T)]
    state = [0] * T  # 0 new, 1 on stack, 2 done
    for root in range(T):
        if state[root]:
            continue
        stack = [(root, iter(succ[root]))]
        state[root] = 1
        while stack:
            u, it = stack[-1]
            for v in it:
                if state[v] == 1:
                    return True
                if state[v] == 0:
                    state[v] = 1
                    stack.append((v, iter(succ[v])))
                    break
            else:
                state[u] = 2
                stack.pop()
    return False


def is_rational(picks: Sequence[int], ps: PatchStructure) -> bool:
    """True iff the induced strict relations contain no cycle."""
    return not _has_cycle(induced_relations(picks, ps))


def enumerate_rational_types(ps: PatchStructure, limit: int = 10**6) -> list[ChoiceType]:
    """All rational types in lexicographic order of picks.

    Periods are fixed in order; a partial assignment is abandoned as soon as it
    closes a cycle, using reachability bitmasks.
    """
    total = ps.total_types()
    if total > limit:
        raise TooLarge(f"{total} candidate types exceed limit {limit}")
    T = ps.T
    masks = ps.in_masks
    out: list[ChoiceType] = []
    picks = [0] * T

    def rec(t: int, reach: list[int]):
        if t == T:
            out.append(tuple(picks))
            return
        for i, m in enumerate(masks[t]):
            # edges j -> t for j in m; a cycle appears iff t already reaches some j
            if reach[t] & m:
                continue
            nxt = reach
            if m:
                add = reach[t] | (1 << t)
                nxt = [
                    r | add if ((1 << u) & m) or (r & m) else r
                    for u, r in enumerate(reach)
                ]
            picks[t] = i
            rec(t + 1, nxt)

    rec(0, [0] * T)
    return out


def estimate_type_counts(ps: PatchStructure, samples: int, rng: np.random.Generator):
    """Exact number of types and the sampled share of rational ones."""
    if samples < 1:
        raise ContractViolation("samples must be >= 1")
    total = ps.total_types()
    draws = rng.integers(0, ps.sizes, size=(samples, ps.T))
    hits = sum(is_rational(tuple(int(v) for v in row), ps) for row in draws)
    return total, hits / samples


def _sccs(rho: np.ndarray) -> list[list[int]]:
    """Strongly connected components (Tarjan)."""
    T = rho.shape[0]
    succ = [np.flatnonzero(rho[u]).tolist() for u in range(T)]
    index = [-1] * T
    low = [0] * T
    on_stack = [False] * T
    stack: list[int] = []
    comps: list[list[int]] = []
    counter = 0

    def strong(v: int):
        nonlocal counter
        index[v] = low[v] = counter
        counter += 1
        stack.append(v)
        on_stack[v] = True
        for w in succ[v]:
            if index[w] < 0:
                strong(w)
                low[v] = min(low[v], low[w])
            elif on_stack[w]:
                low[v] = min(low[v], index[w])
        if low[v] == index[v]:
            comp = []
            while True:
                w = stack.pop()
                on_stack[w] = False
                comp.append(w)
                if w == v:
                    break
            comps.append(sorted(comp))

    for v in range(T):
        if index[v] < 0:
            strong(v)
    return comps


def repair_step(
    picks: list[int],
    ps: PatchStructure,
    rng: np.random.Generator,
    weights: tuple[int, int] = PSEUDOCODE_WEIGHTS,
) -> list[int]:
    """One pass of cycle repair over every nontrivial component."""
    w_add, w_remove = weights
    rho = induced_relations(picks, ps)
    T = ps.T
    for comp in _sccs(rho):
        if len(comp) < 2:
            continue
        t = comp[int(rng.integers(len(comp)))]
        z = picks[t]
        Xt = ps.X[t].astype(np.int64)
        cur = Xt[z]
        in_comp = np.zeros(T, dtype=bool)
        in_comp[comp] = True
        removes_inside = ((cur == 1) & (Xt == 0) & in_comp).any(axis=1)
        added = ((cur == 0) & (Xt == 1)).sum(axis=1)
        removed = ((cur == 1) & (Xt == 0)).sum(axis=1)
        score = w_add * added + w_remove * removed + np.where(removes_inside, 0, REPAIR_PENALTY)
        picks[t] = int(np.argmin(score))  # argmin returns the lowest index on ties
    return picks


def sample_rational_types(
    ps: PatchStructure,
    count: int,
    rng: np.random.Generator,
    max_repair_rounds: int = 50,
    max_restarts: int | None = None,
    weights: tuple[int, int] = PSEUDOCODE_WEIGHTS,
) -> list[ChoiceType]:
    """Semi-random generation of ``count`` distinct rational types.

    Each attempt draws a uniform random type and repairs cycles until the type
    is rational or ``max_repair_rounds`` passes are spent.  Raises ``Exhausted``
    (carrying the distinct types found so far) when ``max_restarts`` attempts
    (default ``200 * count``) do not yield ``count`` distinct types.
    """
    if count < 1:
        raise ContractViolation("count must be >= 1")
    if max_restarts is None:
        max_restarts = 200 * count
    seen: dict[ChoiceType, None] = {}
    for _ in range(max_restarts):
        picks = [int(v) for v in rng.integers(0, ps.sizes)]
        for _ in range(max_repair_rounds + 1):
            if is_rational(picks, ps):
                seen.setdefault(tuple(picks), None)
                break
            picks = repair_step(picks, ps, rng, weights)
        if len(seen) >= count:
            return list(seen)[:count]
    raise Exhausted(
        f"found {len(seen)} of {count} distinct rational types in {max_restarts} attempts",
        list(seen),
    )


def all_types(ps: PatchStructure):
    """Every type (rational or not) in lexicographic order."""
    return itertools.product(*(range(int(n)) for n in ps.sizes))
