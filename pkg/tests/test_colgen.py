import numpy as np
import pytest

from oracles import cone_projection, halfspace_pg, pg_cone_slab, random_instance
from rumtest.choice_types import enumerate_rational_types, to_matrix, to_vector
from rumtest.colgen import (
    ColgenConfig,
    ColumnPool,
    bounded_project,
    cone_lower_bound,
    lower_bound,
    project,
    upper_bound,
)
from rumtest.errors import ContractViolation, IterationLimit
from rumtest.master import RestrictedMaster, solve_restricted
from rumtest.pricing import EPS_CG, PricingConfig
from rumtest.synthetic import rational_types


def random_target(ps, rng):
    return np.concatenate([rng.dirichlet(np.ones(n)) for n in ps.sizes])


def test_pool_dedup_and_gram():
    rng = np.random.default_rng(0)
    ps = random_instance(rng, 5, 3)
    types = rational_types(ps, 40, rng)
    pool = ColumnPool(ps)
    for t in types + types[:5]:
        pool.add(t)
    assert len(pool) == len(types)
    assert pool.add(types[3]) == (3, False)
    A = to_matrix(types, ps)
    assert np.array_equal(pool.A, A)
    assert np.array_equal(pool.G, A.T @ A)
    assert types[0] in pool and pool.index(types[7]) == 7
    copy = pool.copy()
    extra = next(t for t in enumerate_rational_types(ps, 10**12) if t not in pool)
    copy.add(extra)
    assert len(copy) == len(pool) + 1 and extra not in pool

def test_pool_purge():
    rng = np.random.default_rng(1)
    ps = random_instance(rng, 4, 3)
    types = rational_types(ps, 6, rng)
    pool = ColumnPool(ps, types)
    w = np.zeros(6)
    w[[1, 4]] = 1.0
    for _ in range(3):
        pool.record_usage(w)
    assert pool.purge(3) == 4
    assert pool.types == [types[1], types[4]]
    assert np.array_equal(pool.G, pool.A.T @ pool.A)


def test_type_vector_projects_to_zero():
    rng = np.random.default_rng(2)
    ps = random_instance(rng, 5, 3)
    typ = rational_types(ps, 1, rng)[0]
    res = project(to_vector(typ, ps), ps, 100)
    assert res.J == 0.0
    assert res.iterations <= 2


def test_mixture_projects_to_zero():
    rng = np.random.default_rng(3)
    for _ in range(10):
        ps = random_instance(rng, int(rng.integers(3, 8)), 3)
        types = rational_types(ps, int(rng.integers(1, 11)), rng)
        pi = to_matrix(types, ps) @ rng.dirichlet(np.ones(len(types)))
        assert project(pi, ps, 500).J <= 1e-10


def test_matches_full_enumeration_and_certifies():
    rng = np.random.default_rng(4)
    for _ in range(30):
        ps = random_instance(rng, int(rng.integers(2, 6)), int(rng.integers(2, 4)), max_types=5000)
        types = enumerate_rational_types(ps)
        pi = random_target(ps, rng)
        res = project(pi, ps, 80, config=ColgenConfig(pricing=PricingConfig(use_heuristic=False)))
        J_or, _ = cone_projection(pi, ps, 80, types)
        assert abs(res.J - J_or) <= 1e-7 * (1 + J_or)
        s = res.solution.residual
        gap = float(np.max(to_matrix(types, ps).T @ s) - s @ res.eta)
        assert gap <= EPS_CG
        assert res.certificate_gap <= EPS_CG
        assert res.iterations <= len(types)


def test_warm_start_neutral():
    rng = np.random.default_rng(5)
    ps = random_instance(rng, 6, 3)
    pi = random_target(ps, rng)
    cold = project(pi, ps, 50)
    warm = project(pi, ps, 50, warm_columns=rational_types(ps, 200, rng))
    assert warm.J == pytest.approx(cold.J, abs=1e-9)


def test_lower_bound_formula():
    assert lower_bound([1.0, 0.0], None, 0.2, [0.6, 0.4], 1) == pytest.approx(0.16)
    assert lower_bound([1.0, 0.0], None, 0.7, [0.6, 0.4], 1) == 0.0
    assert lower_bound([0.0, 0.0], None, 0.0, [0.6, 0.4], 1) == 0.0
    with pytest.raises(ContractViolation):
        lower_bound([1.0, 0.0], None, 0.2, [0.6, 0.4], 1, exact=False)


def test_lower_bound_matches_projected_gradient():
    rng = np.random.default_rng(6)
    for _ in range(100):
        D = int(rng.integers(2, 12))
        s = rng.normal(size=D)
        t = rng.normal(size=D)
        z = float(rng.normal())
        assert lower_bound(s, None, z, t, 3.0) == pytest.approx(halfspace_pg(s, z, t, 3.0), abs=1e-8)


def test_cone_bound_matches_alternating_projection():
    rng = np.random.default_rng(7)
    for _ in range(30):
        ps = random_instance(rng, int(rng.integers(2, 6)), 3)
        s = rng.normal(size=ps.dim)
        z = float(rng.normal()) ** 2
        t = rng.normal(size=ps.dim)
        g = s - z / ps.T
        got = cone_lower_bound(s, z, t, 2.0, ps)
        assert got == pytest.approx(pg_cone_slab(g, t, ps, 2.0), rel=1e-6, abs=1e-9)


def _sandwich(ps, pi, N, rng):
    """Sound-bound violations and exact pricings over one exact-mode run."""
    J = cone_projection(pi, ps, N)[0]
    events = []
    cfg = ColgenConfig(pricing=PricingConfig(use_heuristic=False), trace=events.append)
    project(pi, ps, N, config=cfg, rng=rng)
    bad = n = 0
    prev_ub = np.inf
    for e in events:
        if e["event"] == "master":
            assert e["J"] <= prev_ub + 1e-12
            assert J <= e["J"] + 1e-9 * (1 + J)
            prev_ub = e["J"]
        if e["event"] == "pricing" and e["exact"]:
            n += 1
            bad += e["lower_bound"] > J + 1e-9 * (1 + J)
    return bad, n


def test_bound_sandwich():
    rng = np.random.default_rng(8)
    bad = checks = 0
    for _ in range(25):
        ps = random_instance(rng, int(rng.integers(2, 6)), 3, max_types=5000)
        b, n = _sandwich(ps, random_target(ps, rng), 60, rng)
        bad += b
        checks += n
    assert checks > 0 and bad == 0


def test_halfspace_formula_is_not_a_cone_bound(two_period):
    # the cone is closed under scaling, the half-space {s.c <= z*} is not when z* > 0
    a = to_vector((0, 1), two_period)
    pi = 2.0 * a
    assert project(pi, two_period, 1).J == 0.0
    s = a.copy()
    z = float(max(to_matrix(enumerate_rational_types(two_period), two_period).T @ s))
    assert z == 2.0
    assert lower_bound(s, None, z, pi, 1) == pytest.approx(2.0)
    assert cone_lower_bound(s, z, pi, 1, two_period) == pytest.approx(0.0, abs=1e-12)


def test_upper_bound_is_master_objective():
    rng = np.random.default_rng(9)
    ps = random_instance(rng, 4, 3)
    pi = random_target(ps, rng)
    sol = solve_restricted(RestrictedMaster(np.zeros((ps.dim, 0)), pi, 10))
    assert upper_bound(sol) == pytest.approx(10 * pi @ pi)
    res = project(pi, ps, 10)
    assert upper_bound(res.solution) == res.J


def test_bounded_project_outcomes():
    rng = np.random.default_rng(10)
    ps = random_instance(rng, 5, 3)
    pi = random_target(ps, rng)
    cfg = ColgenConfig(use_upper_bound=True, use_lower_bound=True)
    assert bounded_project(pi, ps, 50, 1e300, config=cfg).kind == "below"
    J = project(pi, ps, 50).J
    assert J > 0
    out = bounded_project(pi, ps, 50, 0.0, config=cfg)
    assert out.kind == "exceeds" and out.value > 0
    with pytest.raises(ContractViolation):
        bounded_project(pi, ps, 50, -1.0)


def test_bounded_classification_agrees_with_exact():
    rng = np.random.default_rng(11)
    ps = random_instance(rng, 5, 3)
    pi = random_target(ps, rng)
    J_ref = project(pi, ps, 40).J
    cfg = ColgenConfig(use_upper_bound=True, use_lower_bound=True)
    pool = ColumnPool(ps)
    for _ in range(200):
        target = pi + rng.normal(scale=0.05, size=ps.dim)
        J = project(target, ps, 40).J
        out = bounded_project(target, ps, 40, J_ref, pool, cfg, rng)
        if out.kind == "exact":
            assert out.value == pytest.approx(J, abs=1e-9)
        elif out.kind == "exceeds":
            assert J > J_ref and out.value <= J + 1e-9
        else:
            assert J < J_ref and out.value >= J - 1e-9


def test_iteration_limit():
    rng = np.random.default_rng(12)
    ps = random_instance(rng, 5, 3)
    with pytest.raises(IterationLimit) as err:
        project(random_target(ps, rng), ps, 10, config=ColgenConfig(max_iter=1))
    assert err.value.best is not None


def test_purge_keeps_answer():
    rng = np.random.default_rng(13)
    ps = random_instance(rng, 6, 3)
    pi = random_target(ps, rng)
    a = project(pi, ps, 30).J
    b = project(pi, ps, 30, config=ColgenConfig(purge_after=2)).J
    assert b == pytest.approx(a, abs=1e-9)


def test_shape_check():
    ps = random_instance(np.random.default_rng(14), 3, 2)
    with pytest.raises(ContractViolation):
        project(np.zeros(ps.dim + 1), ps, 1)
