"""Convex programs used by the learners.

``solve_prox`` handles the per-round proximal logistic step (one or two loss
terms over a constraint set); ``solve_mle`` handles ridge-regularised batch
logistic regression.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import solve_triangular

from .linalg import ConstraintSet, EllipsoidProjector, OpCounter, SpdMatrix, _charge, dykstra
from .logistic import _sigmoid_scalar, sigmoid

EPS_FLOOR = 1e-12


def pgd_iterations(D: float, diam: float, eps: float, n_terms: int = 1) -> int:
    """Iteration budget ``ceil((1 + beta/alpha) log(diam/eps))``, at least 1.

    ``alpha = (1 + D/2)^-1`` and ``beta = alpha + n_terms/4``; with one term
    the factor is ``9/4 + D/8``.
    """
    if diam <= 0 or eps <= 0:
        raise ValueError("diam and eps must be positive")
    if diam <= eps:
        return 1
    factor = 2.0 + n_terms * (2.0 + D) / 8.0
    # shave off rounding noise so exact integers are not bumped up
    return max(1, math.ceil(factor * math.log(diam / eps) - 1e-9))


@dataclass
class ProxProblem:
    """``argmin_{theta in C} eta ||theta - anchor||_W^2 + sum_j logloss(a_j^T theta, r_j)``.

    ``eta = 1/(2 + D)``.  ``arms`` has one row per loss term.
    """

    W: SpdMatrix
    anchor: np.ndarray
    D: float
    arms: np.ndarray
    labels: np.ndarray
    constraint: ConstraintSet
    eps: float = 1e-6

    def __post_init__(self) -> None:
        self.anchor = np.asarray(self.anchor, dtype=float)
        self.arms = np.atleast_2d(np.asarray(self.arms, dtype=float))
        self.labels = np.atleast_1d(np.asarray(self.labels, dtype=float))
        if self.D < 0:
            raise ValueError(f"D must be nonnegative, got {self.D}")
        if self.arms.shape[0] not in (1, 2) or self.arms.shape[0] != self.labels.shape[0]:
            raise ValueError("a proximal problem takes one or two (arm, label) terms")
        if not np.all((self.labels == 0) | (self.labels == 1)):
            raise ValueError("labels must be 0 or 1")
        if self.arms.shape[1] != self.W.dim or self.anchor.shape != (self.W.dim,):
            raise ValueError("dimension mismatch between W, anchor and arms")

    @property
    def eta(self) -> float:
        return 1.0 / (2.0 + self.D)

    def objective(self, theta: np.ndarray) -> float:
        diff = theta - self.anchor
        x = self.arms @ theta
        loss = np.logaddexp(0.0, x) - self.labels * x
        return self.eta * float(diff @ self.W.matrix @ diff) + float(loss.sum())


@dataclass
class ProxInfo:
    iterations: int
    budget: int
    diam: float
    contraction: float


def _z_projectors(C: ConstraintSet, L: np.ndarray) -> list[EllipsoidProjector]:
    # theta = L^{-T} z turns (theta-c)^T M (theta-c) into (z - L^T c)^T L^{-1} M L^{-T} (z - L^T c)
    out = []
    d = L.shape[0]
    for c, M, r in C.quadratic_pieces(d):
        X = solve_triangular(L, M, lower=True, check_finite=False)
        Mz = solve_triangular(L, X.T, lower=True, check_finite=False)
        out.append(EllipsoidProjector(L.T @ c, 0.5 * (Mz + Mz.T), r))
    return out


def solve_prox(
    p: ProxProblem,
    ops: Optional[OpCounter] = None,
    *,
    early_stop: bool = True,
    budget_scale: float = 1.0,
    return_info: bool = False,
):
    """Projected gradient descent on the W-whitened proximal objective.

    In ``z = L^T theta`` the quadratic term becomes isotropic, so the
    objective is ``alpha``-strongly convex with ``alpha = 2 eta`` and
    ``beta``-smooth with ``beta = alpha + sum_j ||L^{-1} a_j||^2 / 4``.  The
    iteration budget follows :func:`pgd_iterations` with the z-space diameter
    of the constraint.  With ``early_stop`` the loop also exits once the
    contraction certificate ``q/(1-q) * ||z_{k+1} - z_k|| <= eps`` holds.
    ``W`` is assumed to dominate the identity so z-accuracy carries over to
    theta.
    """
    W = p.W
    L = W.chol
    d = W.dim
    n = p.arms.shape[0]
    eps = max(p.eps, EPS_FLOOR)
    At = solve_triangular(L, p.arms.T, lower=True, check_finite=False)  # columns L^{-1} a_j
    cols = [At[:, j].copy() for j in range(n)]
    labels = [float(v) for v in p.labels]
    z_anchor = L.T @ p.anchor
    alpha = 2.0 * p.eta
    beta = alpha + sum(float(c @ c) for c in cols) / 4.0

    projs = _z_projectors(p.constraint, L)
    if len(projs) == 1:
        pr = projs[0]
        project = pr.project
    else:
        pa, pb = projs

        def project(z):
            return dykstra(z, pa.project, pb.project, lambda y: pa.contains(y, 1e-10), lambda y: pb.contains(y, 1e-10))

    diam = min(pr.diameter() for pr in projs)
    budget = pgd_iterations(p.D, diam, eps, n)
    budget = max(1, int(math.ceil(budget * budget_scale)))
    q = math.sqrt((beta - alpha) / (beta + alpha))
    cert = q / (1.0 - q) if q < 1.0 else math.inf
    _charge(ops, d**3 + 2 * d * d)

    z = project(z_anchor)
    inv_beta = 1.0 / beta
    it = 0
    for it in range(1, budget + 1):
        g = alpha * (z - z_anchor)
        for c, r in zip(cols, labels):
            g += (_sigmoid_scalar(float(c @ z)) - r) * c
        z_new = project(z - inv_beta * g)
        step = float(np.linalg.norm(z_new - z))
        z = z_new
        if early_stop and cert * step <= eps:
            break
    _charge(ops, it * d * d)
    theta = solve_triangular(L, z, lower=True, trans="T", check_finite=False)
    if return_info:
        return theta, ProxInfo(iterations=it, budget=budget, diam=diam, contraction=q)
    return theta


# ---------------------------------------------------------------------------
# Batch regularised MLE


@dataclass
class MleProblem:
    """``argmin_theta sum_i w_i logloss(x_i^T theta, y_i) + reg ||theta||^2``."""

    arms: np.ndarray
    labels: np.ndarray
    reg: float
    preconditioner: Optional[SpdMatrix] = None
    eps: float = 1e-8
    weights: Optional[np.ndarray] = None
    max_iter: int = 10_000

    def __post_init__(self) -> None:
        self.arms = np.asarray(self.arms, dtype=float)
        self.labels = np.asarray(self.labels, dtype=float)
        if self.arms.ndim != 2:
            raise ValueError("arms must be a 2-D array (possibly with zero rows)")
        if self.labels.shape != (self.arms.shape[0],):
            raise ValueError("one label per arm row is required")
        if not self.reg > 0:
            raise ValueError(f"reg must be positive, got {self.reg}")
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=float)
            if self.weights.shape != self.labels.shape or np.any(self.weights < 0):
                raise ValueError("weights must be nonnegative, one per row")

    def objective(self, theta: np.ndarray) -> float:
        x = self.arms @ theta
        loss = np.logaddexp(0.0, x) - self.labels * x
        if self.weights is not None:
            loss = loss * self.weights
        return float(loss.sum()) + self.reg * float(theta @ theta)

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        res = sigmoid(self.arms @ theta) - self.labels
        if self.weights is not None:
            res = res * self.weights
        return self.arms.T @ res + 2.0 * self.reg * theta


def _line_search(X, y, w, reg, theta, direction, q, iters=30):
    # exact minimisation of the convex 1-D restriction by safeguarded Newton
    tp = float(theta @ direction)
    pp = float(direction @ direction)
    base = X @ theta
    lo, hi = 0.0, math.inf
    s = 0.0
    slope0 = None
    for _ in range(iters):
        mu = sigmoid(base + s * q)
        r = (mu - y) * q
        h = mu * (1.0 - mu) * q * q
        if w is not None:
            r = r * w
            h = h * w
        g1 = float(r.sum()) + 2.0 * reg * (tp + s * pp)
        g2 = float(h.sum()) + 2.0 * reg * pp
        if g1 < 0:
            lo = s
        else:
            hi = s
        if slope0 is None:
            slope0 = abs(g1)
            if slope0 == 0.0:
                break
        elif abs(g1) <= 1e-12 * slope0 or hi - lo <= 1e-15 * max(1.0, abs(s)):
            break
        nxt = s - g1 / g2
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi) if math.isfinite(hi) else 2.0 * max(s, 1.0)
        s = nxt
    return s


def solve_mle(
    p: MleProblem,
    ops: Optional[OpCounter] = None,
    x0: Optional[np.ndarray] = None,
    return_iterations: bool = False,
):
    """Preconditioned nonlinear conjugate gradient with exact line search.

    Search directions use ``P^{-1} grad`` (Polak-Ribiere+ conjugation with
    restarts); the loop ends when ``||grad|| <= eps * reg``.  Every step is
    first order: one pass over the data per gradient plus O(n) per line-search
    probe.
    """
    X, y, w, reg = p.arms, p.labels, p.weights, p.reg
    n, d = X.shape
    theta = np.zeros(d) if x0 is None else np.array(x0, dtype=float)
    P = p.preconditioner
    if n == 0:
        return (np.zeros(d), 0) if return_iterations else np.zeros(d)

    def precond(g):
        return P.solve(g) if P is not None else g

    tol = p.eps * reg
    g = p.gradient(theta)
    h = precond(g)
    direction = -h
    _charge(ops, n * d + d * d)
    it = 0
    while it < p.max_iter and float(np.linalg.norm(g)) > tol:
        it += 1
        q = X @ direction
        s = _line_search(X, y, w, reg, theta, direction, q)
        if s == 0.0:
            break  # no progress possible at this precision
        theta = theta + s * direction
        g_new = p.gradient(theta)
        h_new = precond(g_new)
        _charge(ops, 3 * n * d + d * d)
        denom = float(g @ h)
        b = max(0.0, float(g_new @ (h_new - h)) / denom) if denom > 0 else 0.0
        direction = -h_new + b * direction
        if float(direction @ g_new) >= 0:
            direction = -h_new
        g, h = g_new, h_new
    return (theta, it) if return_iterations else theta
