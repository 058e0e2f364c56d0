"""Synthetic price/choice data for tests, demos and smoke runs."""

from __future__ import annotations

import numpy as np

from rumtest.choice_types import (
    ChoiceType,
    enumerate_rational_types,
    sample_rational_types,
    to_matrix,
)
from rumtest.geometry import PatchStructure


def random_prices(
    T: int, L: int, rng: np.random.Generator, drift: float = 0.05, spread: float = 0.15
) -> np.ndarray:
    """Log-normal prices with a common upward trend.

    ``spread`` controls how often budget comparisons cross inside the simplex,
    hence the number of patches.
    """
    trend = drift * np.arange(T)[:, None]
    return np.exp(trend + spread * rng.normal(size=(T, L)))


def rational_types(ps: PatchStructure, k: int, rng: np.random.Generator) -> list[ChoiceType]:
    """``k`` distinct rational types (fewer if the instance has fewer)."""
    if ps.total_types() <= 10**4:
        pool = enumerate_rational_types(ps, 10**4)
        pick = rng.choice(len(pool), size=min(k, len(pool)), replace=False)
        return [pool[i] for i in sorted(pick)]
    return sample_rational_types(ps, k, rng)


def mixture_counts(
    ps: PatchStructure, types: list[ChoiceType], consumers: np.ndarray
) -> list[np.ndarray]:
    """Counts produced by a fixed population: ``consumers[r]`` people of type ``r``.

    Every period sees the same population, so the frequencies lie exactly in
    the cone of rational types.
    """
    counts = [np.zeros(n, dtype=np.int64) for n in ps.sizes]
    for typ, n in zip(types, consumers):
        for t, i in enumerate(typ):
            counts[t][i] += int(n)
    return counts


def rationalizable_counts(
    ps: PatchStructure, rng: np.random.Generator, k: int = 5, population: int = 200
) -> tuple[list[np.ndarray], list[ChoiceType], np.ndarray]:
    types = rational_types(ps, k, rng)
    w = rng.dirichlet(np.ones(len(types)))
    consumers = rng.multinomial(population, w)
    return mixture_counts(ps, types, consumers), types, consumers


def random_counts(
    ps: PatchStructure, rng: np.random.Generator, per_period: int = 50
) -> list[np.ndarray]:
    """Independent multinomial counts per period (usually not rationalizable)."""
    return [rng.multinomial(per_period, rng.dirichlet(np.ones(n))) for n in ps.sizes]


def bundles_from_counts(
    ps: PatchStructure, counts: list[np.ndarray], rng: np.random.Generator
) -> list[np.ndarray]:
    """Raw bundles realizing ``counts``: scaled copies of each patch's witness."""
    out = []
    for t, c in enumerate(counts):
        rows = []
        for i, n in enumerate(c):
            for _ in range(int(n)):
                rows.append(ps.witnesses[t][i] * rng.uniform(0.5, 2.0))
        out.append(np.array(rows, dtype=float).reshape(-1, ps.prices.shape[1]))
    return out


def null_counts(
    ps: PatchStructure, rng: np.random.Generator, k: int = 5, per_period: int = 100
) -> tuple[list[np.ndarray], np.ndarray]:
    """Counts sampled period by period from a rational mixture.

    The population frequencies lie in the cone; the sampled ones scatter
    around it, as under the null hypothesis.  Returns the counts and the
    population frequency vector.
    """
    types = rational_types(ps, k, rng)
    w = rng.dirichlet(np.ones(len(types)))
    pi = to_matrix(types, ps) @ w
    counts = []
    for o, n in zip(ps.offsets, ps.sizes):
        p = np.clip(pi[o : o + n], 0.0, None)
        counts.append(rng.multinomial(per_period, p / p.sum()))
    return counts, pi
