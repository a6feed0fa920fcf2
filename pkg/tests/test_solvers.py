import math

import numpy as np
import pytest

from ecolog.checks import prox_accuracy, prox_conditioning
from ecolog.linalg import Ball, Ellipsoid, Intersection, OpCounter, SpdMatrix
from ecolog.logistic import sigmoid
from ecolog.solvers import MleProblem, ProxProblem, pgd_iterations, solve_mle, solve_prox
from oracles import bisect, random_spd


def test_pgd_iterations_examples():
    assert pgd_iterations(1.0, math.e, 1.0) == 3
    assert pgd_iterations(2.0, 1.0, 1.0) == 1
    assert pgd_iterations(2.0, 0.5, 1.0) == 1
    assert pgd_iterations(2.0, math.e**2, 1.0) == 5
    # two loss terms pay for their larger smoothness constant
    assert pgd_iterations(2.0, math.e, 1.0, n_terms=2) == math.ceil(2 + 2 * 4 / 8)
    with pytest.raises(ValueError):
        pgd_iterations(1.0, 0.0, 1.0)


def _one_d(anchor=0.0, W=1.0, D=2.0, label=1, lo=-1.0, hi=1.0, eps=1e-10):
    return ProxProblem(SpdMatrix(np.array([[W]])), np.array([anchor]), D, np.array([[1.0]]), np.array([label]),
                       Ball(max(abs(lo), abs(hi))), eps)


def test_prox_one_dimensional_oracle():
    p = _one_d()
    assert p.eta == 0.25
    th = solve_prox(p)[0]
    ref = bisect(lambda x: x / 2 + sigmoid(x) - 1, -1, 1)
    assert th == pytest.approx(ref, abs=1e-9)
    assert th == pytest.approx(0.674832, abs=1e-6)


def test_prox_dominant_quadratic_returns_anchor():
    anchor = np.array([0.3, -0.2])
    p = ProxProblem(SpdMatrix.identity(2, 1e9), anchor, 1.0, np.array([[0.6, 0.8]]), np.array([1]), Ball(2.0), 1e-8)
    np.testing.assert_allclose(solve_prox(p), anchor, atol=1e-8)


def test_prox_antipodal_symmetry():
    p = ProxProblem(SpdMatrix.identity(3), np.zeros(3), 2.0, np.array([[1.0, 0, 0], [1.0, 0, 0]]),
                    np.array([0, 1]), Ball(3.0), 1e-10)
    th = solve_prox(p)
    assert abs(th[0]) <= 1e-10
    np.testing.assert_allclose(th, 0.0, atol=1e-10)


def test_prox_validation():
    W = SpdMatrix.identity(2)
    with pytest.raises(ValueError):
        ProxProblem(W, np.zeros(2), -1.0, np.ones((1, 2)), np.array([1]), Ball(1.0))
    with pytest.raises(ValueError):
        ProxProblem(W, np.zeros(2), 1.0, np.ones((3, 2)), np.array([1, 0, 1]), Ball(1.0))
    with pytest.raises(ValueError):
        ProxProblem(W, np.zeros(2), 1.0, np.ones((1, 2)), np.array([2]), Ball(1.0))
    with pytest.raises(ValueError):
        ProxProblem(W, np.zeros(3), 1.0, np.ones((1, 2)), np.array([1]), Ball(1.0))


def test_prox_info_and_cost_accounting():
    rng = np.random.default_rng(0)
    d = 4
    p = ProxProblem(SpdMatrix(np.eye(d) + random_spd(rng, d, 5.0)), np.zeros(d), 3.0, rng.standard_normal((1, d)) / 3,
                    np.array([1]), Ball(2.0), 1e-6)
    ops = OpCounter()
    th, info = solve_prox(p, ops, return_info=True)
    assert 1 <= info.iterations <= info.budget
    assert info.budget == pgd_iterations(3.0, info.diam, 1e-6)
    assert ops.total == d**3 + 2 * d * d + info.iterations * d * d
    th_full, info_full = solve_prox(p, early_stop=False, return_info=True)
    assert info_full.iterations == info_full.budget
    assert np.linalg.norm(th - th_full) <= 1e-6


def test_prox_with_intersection_constraint():
    rng = np.random.default_rng(1)
    d = 3
    E = Ellipsoid(np.array([0.5, 0.0, 0.0]), SpdMatrix(random_spd(rng, d, 5.0)), 0.5)
    C = Intersection(E, Ball(0.8))
    p = ProxProblem(SpdMatrix.identity(d, 2.0), C.project(np.zeros(d)), 1.0, np.array([[0.0, 1.0, 0.0], [0.0, 1.0, 0.0]]),
                    np.array([1, 1]), C, 1e-9)
    th = solve_prox(p)
    assert C.contains(th, tol=1e-8)
    ref = solve_prox(p, early_stop=False, budget_scale=10.0)
    assert np.linalg.norm(th - ref) <= 1e-9


def test_prox_suites():
    rng = np.random.default_rng(2)
    assert prox_accuracy(rng, problems=200).bad == 0
    assert prox_conditioning(rng, problems=100).bad == 0


def test_prox_objective_not_worse_than_reference():
    rng = np.random.default_rng(3)
    for _ in range(50):
        d = int(rng.integers(1, 6))
        A = rng.standard_normal((1, d))
        A /= np.linalg.norm(A)
        p = ProxProblem(SpdMatrix(np.eye(d) + random_spd(rng, d, 10.0)), np.zeros(d), float(rng.uniform(0, 4)), A,
                        rng.integers(0, 2, 1), Ball(1.5), 1e-6)
        th = solve_prox(p)
        ref = solve_prox(p, early_stop=False, budget_scale=10.0)
        # objective gradient is bounded by (2 eta ||W|| diam + 1) on the set
        lip = 2 * p.eta * np.linalg.norm(p.W.matrix, 2) * 3.0 + 1.0
        assert p.objective(th) <= p.objective(ref) + lip * p.eps


def _newton_mle(X, y, reg, w=None):
    th = np.zeros(X.shape[1])
    w = np.ones(len(y)) if w is None else w
    for _ in range(100):
        m = sigmoid(X @ th)
        g = X.T @ (w * (m - y)) + 2 * reg * th
        H = (X.T * (w * m * (1 - m))) @ X + 2 * reg * np.eye(X.shape[1])
        step = np.linalg.solve(H, g)
        th -= step
        if np.linalg.norm(step) < 1e-15:
            break
    return th


def test_mle_examples():
    X = np.array([[1.0, 0.0], [1.0, 0.0]])
    for reg in (1e-3, 0.5, 10.0):
        np.testing.assert_allclose(solve_mle(MleProblem(X, np.array([0.0, 1.0]), reg)), 0.0, atol=1e-12)
    th, it = solve_mle(MleProblem(np.zeros((0, 3)), np.zeros(0), 1.0), return_iterations=True)
    assert np.array_equal(th, np.zeros(3)) and it == 0
    with pytest.raises(ValueError):
        MleProblem(X, np.array([0.0, 1.0]), 0.0)
    with pytest.raises(ValueError):
        MleProblem(X, np.array([0.0]), 1.0)


def test_mle_matches_newton_reference():
    rng = np.random.default_rng(4)
    for _ in range(50):
        n, d = int(rng.integers(1, 200)), int(rng.integers(1, 6))
        X = rng.standard_normal((n, d))
        X /= np.maximum(1.0, np.linalg.norm(X, axis=1, keepdims=True))
        theta = rng.standard_normal(d) * 3
        y = (rng.random(n) < sigmoid(X @ theta)).astype(float)
        reg = float(10 ** rng.uniform(-2, 1))
        kappa = 50.0
        V = SpdMatrix(X.T @ X / kappa + 2 * reg * np.eye(d))
        ref = _newton_mle(X, y, reg)
        got = solve_mle(MleProblem(X, y, reg, preconditioner=V, eps=1e-10))
        plain = solve_mle(MleProblem(X, y, reg, eps=1e-10))
        assert np.linalg.norm(got - ref) <= 1e-6
        assert np.linalg.norm(plain - ref) <= 1e-6


def test_mle_weights_equal_repeated_rows():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((6, 3)) / 2
    y = np.array([1.0, 0.0, 1.0, 1.0, 0.0, 0.0])
    w = np.array([3.0, 1.0, 0.0, 2.0, 5.0, 1.0])
    rep = np.repeat(np.arange(6), w.astype(int))
    a = solve_mle(MleProblem(X, y, 0.3, weights=w, eps=1e-12))
    b = solve_mle(MleProblem(X[rep], y[rep], 0.3, eps=1e-12))
    np.testing.assert_allclose(a, b, atol=1e-10)
    with pytest.raises(ValueError):
        MleProblem(X, y, 0.3, weights=-w)


def test_mle_stopping_rule_and_cost():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((300, 4)) / 2
    y = (rng.random(300) < 0.3).astype(float)
    p = MleProblem(X, y, 0.7, eps=1e-9)
    ops = OpCounter()
    th, it = solve_mle(p, ops, return_iterations=True)
    assert np.linalg.norm(p.gradient(th)) <= 1e-9 * 0.7
    assert ops.total == 300 * 4 + 16 + it * (3 * 300 * 4 + 16)
    # a warm start at the answer needs no iterations
    _, it2 = solve_mle(p, x0=th, return_iterations=True)
    assert it2 <= 1
