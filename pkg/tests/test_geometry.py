import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rumtest.errors import DegenerateBudgets, InputError, OnBoundary
from rumtest.geometry import (
    Dataset,
    PatchStructure,
    empirical_frequencies,
    enumerate_patches,
    frequencies_from_counts,
    patch_of_bundle,
    sign_vector,
)


def census(prices, t, n, rng):
    """Sign vectors realized by ``n`` uniform simplex points in period ``t``."""
    P = np.asarray(prices, dtype=float)
    q = rng.dirichlet(np.ones(P.shape[1]), size=n)
    others = [j for j in range(P.shape[0]) if j != t]
    gaps = q @ (P[others] - P[t]).T
    return {tuple(int(v) for v in row) for row in np.where(gaps > 0, 1, -1)}


def test_single_period_has_one_empty_patch():
    ps = enumerate_patches(np.array([[1.0, 2.0, 3.0]]))
    assert ps.sizes.tolist() == [1]
    assert ps.signs[0].shape == (1, 0)
    assert ps.X[0].shape == (1, 1) and ps.X[0].sum() == 0


def test_two_period_example(two_period):
    assert two_period.sizes.tolist() == [2, 2]
    # lexicographic order puts sigma = -1 first
    assert two_period.signs[0].tolist() == [[-1], [1]]
    grid = np.linspace(0, 1, 2001)
    for t in range(2):
        seen = set()
        for a in grid:
            q = np.array([a, 1 - a])
            gap = (two_period.prices[1 - t] - two_period.prices[t]) @ q
            if gap != 0:
                seen.add(1 if gap > 0 else -1)
        assert len(seen) == two_period.sizes[t]


def test_patch_of_bundle_examples(two_period):
    i = patch_of_bundle(two_period, 0, [1.0, 0.0])
    assert two_period.signs[0][i].tolist() == [1]
    i = patch_of_bundle(two_period, 0, [0.0, 1.0])
    assert two_period.signs[0][i].tolist() == [-1]
    assert two_period.X[0][i, 1] == 1
    with pytest.raises(OnBoundary):
        patch_of_bundle(two_period, 0, [1.0, 1.0])


def test_three_crossing_lines_match_monte_carlo():
    prices = np.array([[1.0, 3.0], [2.0, 2.0], [3.0, 1.2]])
    ps = enumerate_patches(prices)
    rng = np.random.default_rng(0)
    for t in range(3):
        assert ps.sizes[t] <= 4
        seen = census(prices, t, 10**5, rng)
        assert seen == {tuple(s) for s in ps.signs[t].tolist()}


def test_witnesses_realize_their_signs():
    rng = np.random.default_rng(1)
    for _ in range(10):
        P = rng.uniform(0.5, 2.0, size=(5, 3))
        ps = enumerate_patches(P)
        for t in range(ps.T):
            others = [j for j in range(ps.T) if j != t]
            gaps = ps.witnesses[t] @ (P[others] - P[t]).T
            assert np.all(np.sign(gaps) == ps.signs[t])
            assert np.allclose(ps.witnesses[t].sum(axis=1), 1.0)


def test_X_matches_signs():
    ps = enumerate_patches(np.random.default_rng(2).uniform(0.5, 2.0, size=(4, 3)))
    for t in range(ps.T):
        others = [j for j in range(ps.T) if j != t]
        assert np.array_equal(ps.X[t][:, others], (ps.signs[t] < 0).astype(np.uint8))
        assert np.all(ps.X[t][:, t] == 0)


def test_larger_margin_gives_subset():
    P = np.random.default_rng(3).uniform(0.5, 2.0, size=(5, 2))
    small = enumerate_patches(P, 1e-9)
    large = enumerate_patches(P, 1e-2)
    for t in range(5):
        assert {tuple(s) for s in large.signs[t].tolist()} <= {tuple(s) for s in small.signs[t].tolist()}


def test_proportional_prices_rejected():
    with pytest.raises(DegenerateBudgets):
        enumerate_patches(np.array([[1.0, 2.0], [2.0, 4.0]]))


@pytest.mark.parametrize("bad", [[[1.0, 0.0], [1.0, 2.0]], [[1.0, -1.0]], [[np.nan, 1.0]]])
def test_nonpositive_prices_rejected(bad):
    with pytest.raises(InputError):
        enumerate_patches(np.array(bad))


def test_tie_policies(two_period):
    assert sign_vector(two_period.prices, 0, [1.0, 1.0], tie_policy="perturb") == (1,)
    data = Dataset(two_period.prices, bundles=[np.array([[1.0, 1.0], [1.0, 0.0]]), np.array([[0.0, 1.0]])])
    with pytest.raises(OnBoundary):
        empirical_frequencies(data, two_period)
    freq = empirical_frequencies(data, two_period, tie_policy="drop")
    assert freq.dropped == 1 and freq.N == 2
    freq = empirical_frequencies(data, two_period, tie_policy="perturb")
    assert freq.counts[0].tolist() == [0, 2]


def test_frequencies_from_counts():
    freq = frequencies_from_counts([np.array([3, 1]), np.array([0, 5])])
    assert freq.pi_hat.tolist() == [0.75, 0.25, 0.0, 1.0]
    assert freq.N == 9 and freq.N_t.tolist() == [4, 5]


def test_dataset_validation():
    P = np.array([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(InputError):
        Dataset(P)
    with pytest.raises(InputError):
        Dataset(P, bundles=[np.array([[-1.0, 1.0]]), np.array([[1.0, 1.0]])])
    with pytest.raises(InputError):
        Dataset(P, bundles=[np.zeros((1, 2)), np.array([[1.0, 1.0]])])
    d = Dataset(P, patch_counts=[{0: 2}, {1: 3}])
    assert d.N == 5 and d.T == 2 and d.L == 2


def test_json_round_trip():
    ps = enumerate_patches(np.random.default_rng(4).uniform(0.5, 2.0, size=(4, 2)))
    back = PatchStructure.from_dict(ps.to_dict())
    assert back.sizes.tolist() == ps.sizes.tolist()
    for t in range(ps.T):
        assert np.array_equal(back.signs[t], ps.signs[t])
        assert np.array_equal(back.X[t], ps.X[t])


@settings(max_examples=40, deadline=None)
@given(
    T=st.integers(1, 6),
    L=st.integers(2, 4),
    seed=st.integers(0, 2**32 - 1),
)
def test_census_property(T, L, seed):
    rng = np.random.default_rng(seed)
    P = rng.uniform(0.5, 2.0, size=(T, L))
    ps = enumerate_patches(P)
    assert np.all(ps.sizes <= 2 ** (T - 1))
    for t in range(T):
        for q in rng.dirichlet(np.ones(L), size=200) * rng.uniform(0.1, 10):
            patch_of_bundle(ps, t, q)  # raises if the sign vector was missed


def test_lexicographic_patch_order():
    ps = enumerate_patches(np.random.default_rng(5).uniform(0.5, 2.0, size=(5, 3)))
    for t in range(ps.T):
        rows = [tuple(r) for r in ps.signs[t].tolist()]
        assert rows == sorted(rows)
        assert len(set(rows)) == len(rows)
        assert all(set(r) <= {-1, 1} for r in rows)
        assert len(rows) <= len(list(itertools.product((-1, 1), repeat=ps.T - 1)))
