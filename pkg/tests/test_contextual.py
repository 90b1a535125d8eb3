import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from causalbounds import fixtures
from causalbounds.contextual import (ContextBoundTable, LinearFunctionClass, best_margin,
                                     candidate_actions_box, candidate_actions_linear,
                                     candidate_table, constrained_least_squares,
                                     covering_proxy, gamma_t, igw_distribution,
                                     rejection_theta, run_contextual)

CB = fixtures.CB_CONTEXTS


@pytest.fixture(scope="module")
def fclass():
    return fixtures.cb_function_class()


def test_box_sets_examples(fclass):
    np.testing.assert_array_equal(candidate_actions_box(1, fclass.bounds), [0, 1, 3])
    np.testing.assert_array_equal(candidate_actions_box(4, fclass.bounds), [2])
    same = ContextBoundTable(np.full((1, 4), 0.2), np.full((1, 4), 0.7))
    np.testing.assert_array_equal(candidate_actions_box(0, same), range(4))


def test_box_sets_full_table(fclass):
    for w, expect in enumerate(CB["box_sets"]):
        np.testing.assert_array_equal(candidate_actions_box(w, fclass.bounds), expect)


def test_lp_sets_full_table(fclass):
    for w, expect in enumerate(CB["lp_sets"]):
        np.testing.assert_array_equal(candidate_actions_linear(w, fclass), expect)


def test_lp_sets_inside_box_sets(fclass):
    for w in range(fclass.n_contexts):
        lp = set(candidate_actions_linear(w, fclass))
        box = set(candidate_actions_box(w, fclass.bounds))
        assert lp <= box


def test_mean_candidate_set_size(fclass):
    sets = candidate_table(fclass, "lp", fclass.bounds)
    assert sum(len(s) for s in sets) / len(sets) == 2.0
    box = candidate_table(fclass, "box", fclass.bounds)
    assert sum(len(s) for s in box) / len(box) == pytest.approx(32 / 11)


def test_single_arm_always_candidate():
    fc = LinearFunctionClass(np.ones((1, 1, 2)))
    assert best_margin(0, 0, fc) == np.inf
    np.testing.assert_array_equal(candidate_actions_linear(0, fc), [0])


def test_empty_class_detected():
    phi = np.array([[[1.0], [0.0]]])
    bad = ContextBoundTable([[2.0, 0.0]], [[3.0, 0.0]])
    with pytest.raises(ValueError, match="empty"):
        candidate_actions_linear(0, LinearFunctionClass(phi, bad))


@pytest.mark.parametrize("seed", range(30))
def test_realizability_safety(seed):
    rng = np.random.default_rng(seed)
    W, K, d = 4, int(rng.integers(2, 6)), int(rng.integers(1, 4))
    phi = rng.normal(size=(W, K, d))
    theta = rng.uniform(-1, 1, d)
    mu = phi @ theta
    lo = mu - rng.uniform(0, 0.5, (W, K))
    hi = mu + rng.uniform(0, 0.5, (W, K))
    fc = LinearFunctionClass(phi, ContextBoundTable(lo, hi))
    assert fc.contains(theta)
    for w in range(W):
        assert int(np.argmax(mu[w])) in candidate_actions_linear(w, fc)


@pytest.mark.parametrize("seed", range(10))
def test_cls_interior_matches_ols(seed):
    rng = np.random.default_rng(seed)
    theta = rng.uniform(-0.5, 0.5, 3)
    X = rng.normal(size=(200, 3))
    y = X @ theta + 0.01 * rng.normal(size=200)
    ols = np.linalg.solve(X.T @ X, X.T @ y)
    fc = LinearFunctionClass(np.zeros((1, 1, 3)))
    np.testing.assert_allclose(constrained_least_squares(X, y, fc), ols, atol=1e-6)


def test_cls_interpolates_single_observation():
    fc = LinearFunctionClass(np.zeros((1, 1, 1)))
    th = constrained_least_squares(np.array([[2.0]]), np.array([0.6]), fc)
    assert th[0] == pytest.approx(0.3, abs=1e-9)


def _vertices(fc):
    d = fc.d
    G, g = fc.constraints()
    G = np.vstack([G, np.eye(d), -np.eye(d)])
    g = np.concatenate([g, np.full(2 * d, fc.radius)])
    out = []
    for rows in itertools.combinations(range(G.shape[0]), d):
        M = G[list(rows)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        v = np.linalg.solve(M, g[list(rows)])
        if np.all(G @ v <= g + 1e-9):
            out.append(v)
    return out


@pytest.mark.parametrize("seed", range(10))
def test_cls_beats_every_vertex_when_binding(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 4))
    phi = rng.normal(size=(2, 3, d))
    centre = rng.uniform(-0.2, 0.2, d)
    mu = phi @ centre
    fc = LinearFunctionClass(phi, ContextBoundTable(mu - 0.1, mu + 0.1))
    X = rng.normal(size=(50, d))
    y = X @ rng.uniform(-1, 1, d) * 3
    th = constrained_least_squares(X, y, fc)
    assert fc.contains(th, 1e-8)
    res = np.sum((X @ th - y) ** 2)
    for v in _vertices(fc):
        assert res <= np.sum((X @ v - y) ** 2) + 1e-7


def test_gamma_examples():
    assert gamma_t(3, 100, 1.0, 0.1, 5.0, 10000, epoch=1) == 1.0
    g1 = gamma_t(2, 64, 1.0, 0.1, 5.0, 10000, epoch=3)
    g2 = gamma_t(2, 128, 1.0, 0.1, 5.0, 10000, epoch=3)
    assert g2 / g1 == pytest.approx(np.sqrt(2))
    logF = 8 - np.log(2 / 0.1) - np.log(np.log(10000))
    assert gamma_t(2, 64, 1.0, 0.1, logF, 10000, epoch=2) == pytest.approx(4.0)


def test_covering_proxy():
    T, d = 10000, 2
    full = covering_proxy(CB["diam_full"], d, T)
    pruned = covering_proxy(CB["diam_pruned"], d, T)
    assert full - pruned == pytest.approx(d * np.log(40))
    assert covering_proxy(0.5, d, T) == pytest.approx(covering_proxy(1.0, d, T) - d * np.log(2))
    assert covering_proxy(1.0, 0, T) == 0


def test_igw_examples():
    np.testing.assert_allclose(igw_distribution([0.3] * 4, 5.0), 0.25)
    p = igw_distribution([0.1, 0.9, 0.4], 0.0)
    np.testing.assert_allclose(p, [1 / 3, 1 / 3, 1 / 3])
    np.testing.assert_allclose(igw_distribution([1.0, 0.5], 4.0), [0.75, 0.25])


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=1, max_size=12), st.floats(0, 1e6))
def test_igw_valid(fhat, gamma):
    p = igw_distribution(fhat, gamma)
    assert np.all(p >= 0)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)
    f = np.asarray(fhat)
    others = np.arange(f.size) != int(np.argmax(f))
    gaps = f.max() - f[others]
    order = np.argsort(gaps, kind="stable")
    assert np.all(np.diff(p[others][order]) <= 1e-15)


def test_rejection_theta_in_class(fclass):
    rng = np.random.default_rng(0)
    for _ in range(20):
        th = rejection_theta(fclass, rng)
        assert fclass.contains(th)
        assert 0.85 <= th[0] <= 0.9 and 0.8 <= th[1] <= 0.85


def test_rejection_theta_gives_up():
    phi = np.array([[[1.0, 0.0]]])
    tiny = LinearFunctionClass(phi, ContextBoundTable([[0.5]], [[0.5 + 1e-12]]))
    with pytest.raises(RuntimeError):
        rejection_theta(tiny, np.random.default_rng(0), max_proposals=1000)


def test_run_contextual_shapes_and_determinism(fclass):
    a = run_contextual(fclass, "lp", T=300, trials=2, seed=1, diam=CB["diam_pruned"])
    b = run_contextual(fclass, "lp", T=300, trials=2, seed=1, diam=CB["diam_pruned"], threads=2)
    assert a.regret.shape == (2, 300)
    np.testing.assert_array_equal(a.regret, b.regret)
    assert np.all(np.diff(a.regret, axis=1) >= -1e-12)


def test_unknown_mode(fclass):
    with pytest.raises(ValueError):
        candidate_table(fclass, "magic", fclass.bounds)
