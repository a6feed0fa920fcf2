import math

import numpy as np
import pytest
from scipy.optimize import minimize

from ecolog.checks import (
    curvature_domination,
    determinant_trace,
    elliptical_potential,
    incremental_factorization,
    projection_properties,
)
from ecolog.linalg import (
    Ball,
    Ellipsoid,
    EllipsoidProjector,
    Intersection,
    OpCounter,
    ProjectionError,
    SpdMatrix,
    diam_under_arms,
    dykstra,
    inv_norm_sq,
    mahalanobis_sq,
    project_constraint,
    project_ellipsoid,
    rank1_update,
)
from oracles import grid_project_ellipsoid, random_spd


def test_rank1_diagonal_case():
    A = SpdMatrix.identity(2)
    rank1_update(A, np.array([1.0, 0.0]), 0.25)
    np.testing.assert_allclose(A.matrix, np.diag([1.25, 1.0]))
    np.testing.assert_allclose(A.inv, np.diag([0.8, 1.0]))
    np.testing.assert_allclose(A.chol, np.diag([math.sqrt(1.25), 1.0]))


def test_rank1_zero_weight_is_noop():
    rng = np.random.default_rng(0)
    A = SpdMatrix(random_spd(rng, 4))
    M, L, Minv = A.matrix.copy(), A.chol.copy(), A.inv.copy()
    A.rank1_update(rng.standard_normal(4), 0.0)
    assert np.array_equal(M, A.matrix) and np.array_equal(L, A.chol) and np.array_equal(Minv, A.inv)
    assert A.n_updates == 0


def test_rank1_rejects_bad_input():
    A = SpdMatrix.identity(3)
    with pytest.raises(ValueError):
        A.rank1_update(np.ones(3), -0.1)
    with pytest.raises(ValueError):
        A.rank1_update(np.ones(2), 1.0)
    with pytest.raises(ValueError):
        SpdMatrix(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        SpdMatrix(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_rank1_matches_refactorization_without_refactoring():
    rng = np.random.default_rng(1)
    d = 10
    A = SpdMatrix.identity(d)
    M = np.eye(d)
    ops = OpCounter()
    for _ in range(500):
        v = rng.standard_normal(d)
        w = rng.uniform(0, 1)
        A.rank1_update(v, w, ops)
        M += w * np.outer(v, v)
    assert A.n_refactorizations == 0
    assert A.n_updates == 500
    assert ops.total == 500 * 3 * d * d
    rel = lambda a, b: np.linalg.norm(a - b) / np.linalg.norm(b)
    assert rel(A.matrix, M) < 1e-8
    assert rel(A.chol, np.linalg.cholesky(M)) < 1e-8
    assert rel(A.inv, np.linalg.inv(M)) < 1e-8
    assert np.max(np.abs(A.matrix @ A.inv - np.eye(d))) < 1e-8
    assert np.max(np.abs(A.matrix - A.chol @ A.chol.T)) < 1e-8 * np.max(np.abs(A.matrix))


def test_periodic_refactorization(monkeypatch):
    monkeypatch.setattr(SpdMatrix, "REFACTOR_EVERY", 7)
    A = SpdMatrix.identity(3)
    rng = np.random.default_rng(2)
    for _ in range(15):
        A.rank1_update(rng.standard_normal(3), 0.5)
    assert A.n_refactorizations == 2


def test_norms():
    A = SpdMatrix.identity(2)
    x = np.array([3.0, 4.0])
    assert mahalanobis_sq(A, x) == 25 and inv_norm_sq(A, x) == pytest.approx(25)
    B = SpdMatrix(np.diag([4.0, 1.0]))
    assert mahalanobis_sq(B, np.ones(2)) == 5
    assert inv_norm_sq(B, np.ones(2)) == pytest.approx(1.25)
    with pytest.raises(ValueError):
        mahalanobis_sq(B, np.ones(3))


def test_norms_vs_dense_oracle():
    rng = np.random.default_rng(3)
    for _ in range(50):
        d = int(rng.integers(1, 8))
        M = random_spd(rng, d)
        A = SpdMatrix(M)
        x = rng.standard_normal(d)
        assert mahalanobis_sq(A, x) == pytest.approx(x @ M @ x, rel=1e-10)
        assert inv_norm_sq(A, x) == pytest.approx(x @ np.linalg.solve(M, x), rel=1e-10)
        assert A.inv_norm_sq_rows(x[None, :])[0] == pytest.approx(x @ np.linalg.solve(M, x), rel=1e-10)
        # ||Ax||_{A^-1}^2 = x^T A x
        assert inv_norm_sq(A, M @ x) == pytest.approx(mahalanobis_sq(A, x), rel=1e-9)


def test_logdet_and_lambda_min():
    rng = np.random.default_rng(4)
    M = random_spd(rng, 5)
    A = SpdMatrix(M)
    assert A.logdet() == pytest.approx(np.linalg.slogdet(M)[1], rel=1e-12)
    assert A.lambda_min() == pytest.approx(np.linalg.eigvalsh(M)[0], rel=1e-12)
    before = A.matrix.copy()
    B = A.copy()
    B.rank1_update(np.ones(5), 1.0)
    assert np.array_equal(A.matrix, before)


def _ellipsoid(c, M, r):
    return Ellipsoid(np.asarray(c, dtype=float), SpdMatrix(np.asarray(M, dtype=float)), r)


def test_projection_examples():
    E = _ellipsoid([0, 0], np.eye(2), 1.0)
    x = np.array([0.3, -0.2])
    assert project_ellipsoid(x, E) is x or np.array_equal(project_ellipsoid(x, E), x)
    np.testing.assert_allclose(project_ellipsoid(np.array([2.0, 0.0]), E), [1.0, 0.0], atol=1e-12)
    E2 = _ellipsoid([0, 0], np.diag([4.0, 1.0]), 1.0)
    np.testing.assert_allclose(project_ellipsoid(np.array([1.0, 0.0]), E2), [0.5, 0.0], atol=1e-12)


def test_projection_vs_grid_oracle():
    rng = np.random.default_rng(5)
    for _ in range(100):
        d = int(rng.integers(2, 4))
        c = rng.standard_normal(d)
        M = random_spd(rng, d, cond=30.0)
        r = float(rng.uniform(0.2, 3.0))
        E = _ellipsoid(c, M, r)
        x = c + rng.standard_normal(d) * 4
        y = project_ellipsoid(x, E)
        ref = grid_project_ellipsoid(x, c, M, r)
        assert np.linalg.norm(y - ref) <= 1e-6
        assert E.quad(y) <= r * (1 + 1e-9)


def test_projection_extreme_conditioning():
    M = np.diag([1e8, 1.0, 1e-4])
    P = EllipsoidProjector(np.zeros(3), M, 1.0)
    y = P.project(np.array([10.0, 10.0, 500.0]))
    assert P.quad(y) <= 1.0 + 1e-9
    with pytest.raises(ValueError):
        EllipsoidProjector(np.zeros(2), np.diag([1.0, -1.0]), 1.0)


def test_projection_error_on_iteration_cap(monkeypatch):
    monkeypatch.setattr(EllipsoidProjector, "MAX_ITER", 1)
    P = EllipsoidProjector(np.zeros(2), np.diag([100.0, 1.0]), 1.0)
    with pytest.raises(ProjectionError):
        P.project(np.array([30.0, 40.0]))


def test_projection_properties_suite():
    assert projection_properties(np.random.default_rng(6)).bad == 0


def test_constraint_validation():
    with pytest.raises(ValueError):
        Ball(0.0)
    with pytest.raises(ValueError):
        _ellipsoid([0, 0], np.eye(2), 0.0)
    with pytest.raises(ValueError):
        Intersection(_ellipsoid([10, 0], np.eye(2), 1.0), Ball(1.0))
    # touching sets are nonempty
    Intersection(_ellipsoid([1.5, 0], np.eye(2), 0.25 + 1e-6), Ball(1.0))


def test_project_constraint_cases():
    b = Ball(2.0)
    np.testing.assert_allclose(project_constraint(np.array([3.0, 4.0]), b), [1.2, 1.6])
    E = _ellipsoid([0.2, 0.0], np.diag([4.0, 9.0]), 1.0)
    inter = Intersection(E, Ball(5.0))  # ellipsoid inside the ball: redundant constraint
    x = np.array([3.0, -2.0])
    np.testing.assert_allclose(project_constraint(x, inter), project_ellipsoid(x, E), atol=1e-12)
    inside = np.array([0.3, 0.1])
    np.testing.assert_array_equal(project_constraint(inside, inter), inside)


def test_intersection_projection_vs_solver_oracle():
    rng = np.random.default_rng(7)
    done = 0
    while done < 40:
        c = rng.standard_normal(2)
        M = random_spd(rng, 2, cond=10.0)
        r = float(rng.uniform(0.5, 3.0))
        R = float(rng.uniform(0.5, 2.0))
        try:
            C = Intersection(_ellipsoid(c, M, r), Ball(R))
        except ValueError:
            continue
        x = rng.standard_normal(2) * 3
        y = project_constraint(x, C)
        cons = [
            {"type": "ineq", "fun": lambda z: r - (z - c) @ M @ (z - c), "jac": lambda z: -2 * M @ (z - c)},
            {"type": "ineq", "fun": lambda z: R * R - z @ z, "jac": lambda z: -2 * z},
        ]
        best = None
        for z0 in (y, np.zeros(2), C.ellipsoid.project(c * 0)):
            res = minimize(lambda z: (z - x) @ (z - x), z0, jac=lambda z: 2 * (z - x), constraints=cons,
                           method="SLSQP", options={"ftol": 1e-15, "maxiter": 500})
            if best is None or res.fun < best.fun:
                best = res
        assert np.linalg.norm(y - best.x) <= 1e-5
        assert C.ellipsoid.quad(y) <= r * (1 + 1e-8) and y @ y <= R * R * (1 + 1e-8)
        done += 1


def test_dykstra_cap():
    E = EllipsoidProjector(np.array([1.0, 0.0]), np.eye(2), 1.0)
    B = EllipsoidProjector(np.array([-1.0, 0.0]), np.eye(2), 1.0)
    with pytest.raises(ProjectionError):
        dykstra(np.array([0.0, 3.0]), E.project, B.project, lambda y: E.contains(y, 1e-14),
                lambda y: B.contains(y, 1e-14), max_iter=3)


def test_diam_under_arms_examples():
    E = _ellipsoid([0, 0], np.eye(2), 1.0)
    assert diam_under_arms(E, [np.array([1.0, 0.0])]) == pytest.approx(2.0)
    E2 = _ellipsoid([0, 0], np.diag([4.0, 1.0]), 1.0)
    assert diam_under_arms(E2, np.eye(2)) == pytest.approx(2.0)
    assert diam_under_arms(E2, unit_ball=True) == pytest.approx(2.0)
    assert diam_under_arms(Ball(3.0), unit_ball=True) == 6.0
    inter = Intersection(_ellipsoid([0, 0], np.eye(2) * 100, 1.0), Ball(3.0))
    assert diam_under_arms(inter, unit_ball=True) == pytest.approx(0.2)
    with pytest.raises(ValueError):
        diam_under_arms(E, np.zeros((0, 2)))
    with pytest.raises(ValueError):
        diam_under_arms(E)


def test_diam_upper_bounds_sampled_diameter():
    rng = np.random.default_rng(8)
    for _ in range(100):
        d = int(rng.integers(2, 4))
        M = random_spd(rng, d)
        r = float(rng.uniform(0.1, 2))
        E = _ellipsoid(rng.standard_normal(d), M, r)
        arms = rng.standard_normal((5, d))
        arms /= np.linalg.norm(arms, axis=1, keepdims=True)
        # boundary samples c + sqrt(r) L^{-T} u with unit u
        U = rng.standard_normal((4000, d))
        U /= np.linalg.norm(U, axis=1, keepdims=True)
        L = np.linalg.cholesky(M)
        pts = E.center + math.sqrt(r) * np.linalg.solve(L.T, U.T).T
        proj = pts @ arms.T
        exact = float((proj.max(axis=0) - proj.min(axis=0)).max())
        assert diam_under_arms(E, arms) >= exact - 1e-12
        assert diam_under_arms(E, unit_ball=True) >= exact - 1e-12


def test_linear_algebra_suites():
    rng = np.random.default_rng(9)
    assert incremental_factorization(rng).bad == 0
    assert elliptical_potential(rng).bad == 0
    assert determinant_trace(rng).bad == 0
    assert curvature_domination(rng).bad == 0
