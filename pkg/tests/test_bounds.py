import numpy as np
import pytest

from causalbounds.bounds import (CausalBounds, bounds_accelerated, bounds_by_sampling,
                                 envelope, feasible_start, frechet_only_bounds,
                                 hausdorff_constant, local_optimize, nonparametric_bounds,
                                 propagate_error)
from causalbounds.effects import EffectQuery, evaluate
from causalbounds.hit_and_run import run_chain
from causalbounds.lp import LinearProgram, solve, variable_support
from causalbounds.polytope import (GridSpec, build_pocb_constraints, check_feasible,
                                   product_init, relax)

Q0 = EffectQuery("mean_do_a", 0)
Q1 = EffectQuery("mean_do_a", 1)


def start(poly):
    return product_init(poly.grid, poly.marginal_ayw, poly.marginal_u, poly.kappa)


def test_single_sample_degenerate_interval(pocb):
    p = start(pocb)
    b = bounds_by_sampling(p[None, :], Q0, pocb.grid)
    assert b.lower == b.upper == pytest.approx(evaluate(Q0, p, pocb.grid))


def test_segment_endpoints_recovered():
    poly = build_pocb_constraints(GridSpec(2, 1, 1, 2), [0.3, 0.7], [0.6, 0.4])
    lo, hi = variable_support(poly, 0)
    S = run_chain(poly, start(poly), 10000, burn_in=0, rng=0)
    v = S[:, 0]
    assert v.min() - lo < 0.01 * (hi - lo)
    assert hi - v.max() < 0.01 * (hi - lo)


def test_prefix_bounds_nested(pocb):
    S = run_chain(pocb, start(pocb), 2000, rng=1)
    small = bounds_by_sampling(S[:500], Q1, pocb.grid)
    big = bounds_by_sampling(S[:1000], Q1, pocb.grid)
    assert big.contains(small)


@pytest.mark.parametrize("seed", range(5))
def test_local_optimize_linear_matches_lp(pocb, seed):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=16)
    init = run_chain(pocb, start(pocb), 200, rng=rng)[-1]
    lp = solve(LinearProgram(c, pocb.eq_rows, pocb.eq_targets, lower=pocb.kappa))
    r = local_optimize(pocb, lambda X: X @ c, init, "max", max_iters=2000)
    assert check_feasible(r.x, pocb, 1e-9)
    assert r.value == pytest.approx(lp.value, abs=1e-6)


def test_local_optimize_at_optimum_returns_init(pocb):
    c = np.random.default_rng(8).normal(size=16)
    lp = solve(LinearProgram(c, pocb.eq_rows, pocb.eq_targets, lower=pocb.kappa))
    r = local_optimize(pocb, lambda X: X @ c, lp.x, "max")
    np.testing.assert_allclose(r.x, lp.x, atol=1e-12)
    assert r.converged


def test_local_optimize_weak_improvement(pocb):
    init = run_chain(pocb, start(pocb), 300, rng=2)[-1]
    f = lambda X: evaluate(Q0, X, pocb.grid)
    lo = local_optimize(pocb, f, init, "min")
    hi = local_optimize(pocb, f, init, "max")
    assert lo.value <= f(init) <= hi.value
    assert check_feasible(lo.x, pocb) and check_feasible(hi.x, pocb)
    with pytest.raises(ValueError):
        local_optimize(pocb, f, init, "sideways")


def test_feasible_start(pocb):
    assert check_feasible(feasible_start(pocb), pocb)
    assert check_feasible(feasible_start(relax(pocb, 0.05)), relax(pocb, 0.05))


def test_envelope_contains_sampling_range(pocb):
    lo, hi, s_lo, s_hi = envelope(pocb, lambda X: evaluate(Q1, X, pocb.grid), T=500,
                                  rng=3, restarts=5)
    assert lo <= s_lo <= s_hi <= hi


def test_bounds_deterministic(pocb):
    a = bounds_accelerated(pocb, Q0, T=300, rng=9, restarts=3)
    b = bounds_accelerated(pocb, Q0, T=300, rng=9, restarts=3)
    assert a == b


def test_relaxation_nesting(pocb):
    out = [bounds_accelerated(relax(pocb, e), Q1, T=500, rng=4, restarts=10)
           for e in (0.0, 0.01, 0.05)]
    for small, big in zip(out, out[1:]):
        assert big.contains(small, tol=1e-6)


@pytest.fixture(scope="module")
def table_bounds(pocb):
    ours = [bounds_accelerated(pocb, q, T=2000, rng=np.random.default_rng([0, i]))
            for i, q in enumerate((Q0, Q1))]
    base = [frechet_only_bounds(pocb.grid, pocb.marginal_ayw, pocb.marginal_u, q, T=2000,
                                rng=np.random.default_rng([0, 1000 + i]))
            for i, q in enumerate((Q0, Q1))]
    return ours, base


def test_table_instance_a0(table_bounds):
    b = table_bounds[0][0]
    assert 0.352 - 0.02 <= b.lower and b.upper <= 0.471 + 0.02
    assert b.width >= 0.10


def test_table_instance_a1(table_bounds):
    b = table_bounds[0][1]
    assert abs(b.lower - 0.265) <= 0.02 and abs(b.upper - 0.768) <= 0.02


def test_ours_inside_frechet_baseline(table_bounds):
    for ours, base in zip(*table_bounds):
        assert base.contains(ours)


def test_frechet_baseline_a1(table_bounds):
    b = table_bounds[1][1]
    assert abs(b.lower - 0.240) <= 0.02 and abs(b.upper - 0.807) <= 0.02


def test_frechet_rejects_conditional(pocb):
    with pytest.raises(ValueError):
        frechet_only_bounds(pocb.grid, pocb.marginal_ayw, pocb.marginal_u,
                            EffectQuery("mean_do_a_given_w", 0, w=1))


def test_propagate_error():
    b = CausalBounds(0.2, 0.4)
    assert propagate_error(b, 3, 2, 0.0).err == 0.0
    e = propagate_error(b, 3, 2, 0.01)
    assert e.err == pytest.approx(0.06)
    assert (e.lower, e.upper) == (0.2, 0.4)
    assert e.inflated() == pytest.approx((0.14, 0.46))
    assert propagate_error(b, 3, 2, 0.02).err == pytest.approx(2 * e.err)


def test_nonparametric_bounds_contain_interventional_truth():
    rng = np.random.default_rng(0)
    g = GridSpec(2, 2, 1, 3)
    for _ in range(50):
        p = rng.dirichlet(np.ones(g.n))
        m_ay = p.reshape(g.shape).sum(axis=(2, 3))
        for a in (0, 1):
            b = nonparametric_bounds(m_ay, a, 1)
            truth = evaluate(EffectQuery("prob_do_a", a, y=1), p, g)
            assert b.lower - 1e-12 <= truth <= b.upper + 1e-12


def test_hausdorff_constant(pocb):
    L1 = hausdorff_constant(pocb, 1e-3)
    L2 = hausdorff_constant(pocb, 1e-2)
    assert L1 > L2 > 0


def test_causal_bounds_validation():
    with pytest.raises(ValueError):
        CausalBounds(0.5, 0.4)
    with pytest.raises(ValueError):
        CausalBounds(0.1, 0.4, err=-1)
