"""Randomised invariant suites for the numerical core.

Each suite returns a :class:`SuiteResult`; :func:`run_all` runs every suite
and is what ``ecolog-bench --check`` executes.  The suites double as the
property tests of the test-suite.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .learners import (
    EcologState,
    _Frame,
    ada_step,
    ecolog_step,
    new_ada_state,
    ofu_select,
)
from .linalg import Ball, Ellipsoid, EllipsoidProjector, SpdMatrix
from .logistic import (
    SCHEDULE_KINDS,
    ProblemParams,
    RadiusSchedule,
    alpha_coeffs,
    dsigmoid,
    logloss,
)
from .solvers import ProxProblem, solve_prox


@dataclass
class SuiteResult:
    module: str
    name: str
    samples: int
    violations: int
    worst: float  # largest violation margin seen (0 when none)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} {self.module:<14} {self.name:<32} samples={self.samples:<6} "
                f"violations={self.violations} worst={self.worst:.3g} ({self.seconds:.2f}s)")


class _Tally:
    def __init__(self, tol: float = 0.0):
        self.n = 0
        self.bad = 0
        self.worst = 0.0
        self.tol = tol

    def le(self, lhs: float, rhs: float, rel: float = 1e-12) -> None:
        """Record the claim ``lhs <= rhs`` up to a relative slack."""
        self.n += 1
        gap = lhs - rhs
        slack = self.tol + rel * max(abs(lhs), abs(rhs), 1e-300)
        if gap > slack:
            self.bad += 1
            self.worst = max(self.worst, gap)


# ---------------------------------------------------------------------------
# logistic-core


def self_concordance(rng: np.random.Generator, n: int = 10_000) -> _Tally:
    """Lower bounds on the exact-Taylor coefficients and the curvature ratio bound, |x-y| <= 10."""
    tally = _Tally()
    x = rng.uniform(-15.0, 15.0, n)
    y = x + rng.uniform(-10.0, 10.0, n)
    # also exercise the short-gap series branch
    short = rng.random(n) < 0.2
    y[short] = x[short] + rng.uniform(-1e-2, 1e-2, short.sum())
    for xi, yi in zip(x, y):
        g = abs(xi - yi)
        a, at = alpha_coeffs(xi, yi)
        mx, my = float(dsigmoid(xi)), float(dsigmoid(yi))
        tally.le(mx / (1.0 + g), a, rel=1e-9)
        tally.le(my / (1.0 + g), a, rel=1e-9)
        tally.le(mx / (2.0 + g), at, rel=1e-9)
        tally.le(mx, my * math.exp(g), rel=1e-12)
    return tally


def local_quadratic_bound(rng: np.random.Generator, n: int = 1000) -> _Tally:
    """``l(a^T th) >= l(a^T th_r) + grad^T (th - th_r) + mu'(a^T th_r)/(2+D) (a^T(th - th_r))^2``."""
    tally = _Tally()
    for _ in range(n):
        d = int(rng.integers(1, 6))
        a = rng.standard_normal(d)
        a /= max(1.0, float(np.linalg.norm(a)))
        th_r = rng.standard_normal(d) * rng.uniform(0.0, 5.0)
        th = th_r + rng.standard_normal(d) * rng.uniform(0.0, 5.0)
        r = int(rng.integers(0, 2))
        x, x_r = float(a @ th), float(a @ th_r)
        D = abs(x - x_r) * rng.uniform(1.0, 2.0)
        lhs, _ = logloss(x, r)
        base, g = logloss(x_r, r)
        rhs = base + g * (x - x_r) + float(dsigmoid(x_r)) / (2.0 + D) * (x - x_r) ** 2
        tally.le(rhs, float(lhs), rel=1e-10)
    return tally


def schedule_monotonicity(rng: np.random.Generator, t_max: int = 100_000) -> _Tally:
    tally = _Tally()
    t = np.unique(np.concatenate([np.arange(1, 1001), np.geomspace(1, t_max, 2000).round()]))
    for _ in range(5):
        p = ProblemParams(int(rng.integers(1, 11)), float(rng.uniform(0.1, 8.0)), float(rng.uniform(0.001, 0.5)))
        sched = RadiusSchedule(p)
        for kind in SCHEDULE_KINDS:
            vals = np.array([sched(kind, float(s)) for s in t])
            for prev, nxt in zip(vals[:-1], vals[1:]):
                tally.le(prev, nxt, rel=0.0)
    return tally


# ---------------------------------------------------------------------------
# linalg


def _random_spd(rng: np.random.Generator, d: int, cond: float = 100.0) -> np.ndarray:
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    ev = np.geomspace(1.0, cond, d) * rng.uniform(0.5, 2.0)
    return (Q * ev) @ Q.T


def incremental_factorization(rng: np.random.Generator, n_updates: int = 500, d: int = 10) -> _Tally:
    """Incremental matrix, factor and inverse agree with a from-scratch rebuild."""
    tally = _Tally()
    A = SpdMatrix.identity(d)
    M = np.eye(d)
    for _ in range(n_updates):
        v = rng.standard_normal(d)
        w = float(rng.uniform(0.0, 1.0))
        A.rank1_update(v, w)
        M += w * np.outer(v, v)
    L = np.linalg.cholesky(M)
    Minv = np.linalg.inv(M)
    for got, ref in ((A.matrix, M), (A.chol, L), (A.inv, Minv)):
        tally.le(float(np.linalg.norm(got - ref) / np.linalg.norm(ref)), 1e-8, rel=0.0)
    return tally


def elliptical_potential(rng: np.random.Generator, T: int = 1000, d: int = 5, reps: int = 5) -> _Tally:
    """``sum ||x_t||^2_{V_{t-1}^{-1}} <= 2 d (1 + X^2) log(1 + T X^2 / (d lam))`` with ``lam >= 1``."""
    tally = _Tally()
    for _ in range(reps):
        lam = float(rng.uniform(1.0, 3.0))
        X = float(rng.uniform(0.5, 2.0))
        V = SpdMatrix.identity(d, lam)
        total = 0.0
        for _ in range(T):
            x = rng.standard_normal(d)
            x *= X * rng.uniform(0.0, 1.0) / np.linalg.norm(x)
            total += V.inv_norm_sq(x)
            V.rank1_update(x, 1.0)
        tally.le(total, 2.0 * d * (1.0 + X * X) * math.log(1.0 + T * X * X / (d * lam)))
    return tally


def determinant_trace(rng: np.random.Generator, T: int = 1000, d: int = 5, reps: int = 5) -> _Tally:
    """``log det V_t <= d log(lam + t X^2 / d)`` along the whole sequence."""
    tally = _Tally()
    for _ in range(reps):
        lam = float(rng.uniform(0.5, 3.0))
        X = float(rng.uniform(0.5, 2.0))
        V = SpdMatrix.identity(d, lam)
        for t in range(1, T + 1):
            x = rng.standard_normal(d)
            x *= X * rng.uniform(0.0, 1.0) / np.linalg.norm(x)
            V.rank1_update(x, 1.0)
            if t % 50 == 0 or t == T:
                tally.le(V.logdet(), d * math.log(lam + t * X * X / d), rel=1e-12)
    return tally


def curvature_domination(rng: np.random.Generator, histories: int = 50) -> _Tally:
    """``H_t(theta) - V_t`` is PSD whenever ``||theta|| <= S``."""
    tally = _Tally(tol=1e-12)
    for _ in range(histories):
        d = int(rng.integers(1, 6))
        S = float(rng.uniform(0.5, 6.0))
        kappa = 1.0 / float(dsigmoid(S))
        n = int(rng.integers(0, 200))
        A = rng.standard_normal((n, d))
        if n:
            A *= (rng.uniform(0.0, 1.0, n) / np.linalg.norm(A, axis=1))[:, None]
        th = rng.standard_normal(d)
        th *= S * rng.uniform(0.0, 1.0) / np.linalg.norm(th)
        w = dsigmoid(A @ th) if n else np.zeros(0)
        H = (A.T * w) @ A + np.eye(d)
        V = A.T @ A / kappa + np.eye(d)
        ev = float(np.linalg.eigvalsh(H - V).min())
        tally.le(-ev, 0.0, rel=0.0)
    return tally


def projection_properties(rng: np.random.Generator, pairs: int = 300) -> _Tally:
    """Idempotent, feasible and non-expansive in the Euclidean norm."""
    tally = _Tally()
    for _ in range(pairs):
        d = int(rng.integers(1, 6))
        c = rng.standard_normal(d)
        E = EllipsoidProjector(c, _random_spd(rng, d, 50.0), float(rng.uniform(0.1, 5.0)))
        x = c + rng.standard_normal(d) * 5
        y = c + rng.standard_normal(d) * 5
        px, py = E.project(x), E.project(y)
        tally.le(float(np.linalg.norm(E.project(px) - px)), 1e-9 * (1.0 + np.linalg.norm(px)), rel=0.0)
        tally.le(E.quad(px), E.r, rel=1e-9)
        tally.le(float(np.linalg.norm(px - py)), float(np.linalg.norm(x - y)), rel=1e-9)
    return tally


# ---------------------------------------------------------------------------
# solvers


def _random_prox(rng: np.random.Generator, d: int, n_terms: int) -> ProxProblem:
    A = rng.standard_normal((n_terms, d))
    A *= (rng.uniform(0.2, 1.0, n_terms) / np.linalg.norm(A, axis=1))[:, None]
    W = SpdMatrix(np.eye(d) + _random_spd(rng, d, 20.0) * rng.uniform(0.0, 5.0))
    S = float(rng.uniform(0.5, 4.0))
    anchor = rng.standard_normal(d) * rng.uniform(0.0, S) / math.sqrt(d)
    kind = rng.integers(0, 2)
    if kind == 0:
        C = Ball(S)
    else:
        C = Ellipsoid(anchor + 0.1 * rng.standard_normal(d), SpdMatrix(_random_spd(rng, d, 10.0)), float(rng.uniform(0.5, 4.0)))
    if not C.contains(anchor, tol=0.0):
        anchor = C.project(anchor)
    labels = rng.integers(0, 2, n_terms).astype(float)
    return ProxProblem(W, anchor, float(rng.uniform(0.0, 8.0)), A, labels, C, eps=10.0 ** rng.uniform(-8, -3))


def _excess(C, theta: np.ndarray) -> float:
    # worst violation over the quadratic pieces, in quadratic-form units
    out = -math.inf
    for c, M, r in C.quadratic_pieces(theta.size):
        diff = theta - c
        out = max(out, float(diff @ M @ diff) - r)
    return out


def prox_accuracy(rng: np.random.Generator, problems: int = 200) -> _Tally:
    """Budgeted solve lands within eps of a 10x-budget reference and stays feasible."""
    tally = _Tally()
    for _ in range(problems):
        d = int(rng.integers(1, 11))
        p = _random_prox(rng, d, int(rng.integers(1, 3)))
        th = solve_prox(p, early_stop=False)
        ref = solve_prox(p, early_stop=False, budget_scale=10.0)
        tally.le(float(np.linalg.norm(th - ref)), p.eps, rel=0.0)
        tally.le(_excess(p.constraint, th), 1e-8, rel=0.0)
    return tally


def prox_conditioning(rng: np.random.Generator, problems: int = 100) -> _Tally:
    """Whitened Hessian condition ratio ``lmin/lmax`` lies in ``[0.9 (5/4 + D/8)^-1, 1.1]``."""
    tally = _Tally()
    for _ in range(problems):
        d = int(rng.integers(1, 11))
        p = _random_prox(rng, d, 1)
        L = p.W.chol
        a = p.arms[0]
        x = float(a @ p.anchor) + rng.uniform(-p.D / 2, p.D / 2)
        u = np.linalg.solve(L, a)
        Hz = 2.0 * p.eta * np.eye(d) + float(dsigmoid(x)) * np.outer(u, u)
        # power iteration for the top eigenvalue, then on the shifted matrix for the bottom
        v = rng.standard_normal(d)
        for _ in range(200):
            v = Hz @ v
            v /= np.linalg.norm(v)
        top = float(v @ Hz @ v)
        B = top * np.eye(d) - Hz
        v = rng.standard_normal(d)
        for _ in range(200):
            v = B @ v
            nv = np.linalg.norm(v)
            if nv == 0:
                break
            v /= nv
        bottom = top - float(v @ B @ v) if d > 1 else top
        ratio = bottom / top
        tally.le(0.9 / (1.25 + p.D / 8.0), ratio, rel=1e-9)
        tally.le(ratio, 1.1, rel=0.0)
    return tally


# ---------------------------------------------------------------------------
# learners


def ofu_scale_invariance(rng: np.random.Generator, trials: int = 200) -> _Tally:
    """Scaling theta by c, the radius by c^2 and W by 1 keeps the argmax."""
    tally = _Tally()
    for _ in range(trials):
        d = int(rng.integers(1, 6))
        K = int(rng.integers(1, 30))
        arms = rng.standard_normal((K, d))
        th = rng.standard_normal(d)
        W = SpdMatrix(_random_spd(rng, d, 20.0))
        radius = float(rng.uniform(0.0, 10.0))
        c = float(2.0 ** rng.integers(-4, 5))  # exact in floating point
        k1, _ = ofu_select(_Frame(th, W), arms, radius)
        k2, _ = ofu_select(_Frame(c * th, W), arms, c * c * radius)
        tally.le(float(k1 != k2), 0.0, rel=0.0)
    return tally


def ada_forced_matches_ecolog(rng: np.random.Generator, rounds: int = 200) -> _Tally:
    """With (C1) forced, the adaptive learner reproduces plain ECOLog steps bit for bit."""
    tally = _Tally()
    d, S = 3, 2.0
    params = ProblemParams(d, S)
    ada = new_ada_state(params, force_accept=True, w_reg=1.0)
    plain = EcologState(np.zeros(d), SpdMatrix.identity(d), Ball(S), 2.0 * S, RadiusSchedule(params))
    for _ in range(rounds):
        a = rng.standard_normal(d)
        a /= max(1.0, float(np.linalg.norm(a)))
        r = int(rng.integers(0, 2))
        ada_step(ada, a, r)
        ecolog_step(plain, a, r)
        tally.le(float(np.any(ada.inner.theta != plain.theta)), 0.0, rel=0.0)
        tally.le(float(np.any(ada.inner.W.matrix != plain.W.matrix)), 0.0, rel=0.0)
    return tally


def design_growth(rng: np.random.Generator, rounds: int = 300) -> _Tally:
    """``lambda_min(W)`` never decreases and sensitivity weights lie in (0, 1/4]."""
    tally = _Tally()
    d, S = 2, 3.0
    params = ProblemParams(d, S)
    st = EcologState(np.zeros(d), SpdMatrix.identity(d), Ball(S), 2.0 * S, RadiusSchedule(params))
    prev = st.W.lambda_min()
    for _ in range(rounds):
        a = rng.standard_normal(d)
        a /= np.linalg.norm(a)
        before = st.W.matrix.copy()
        ecolog_step(st, a, int(rng.integers(0, 2)))
        w = float((a @ (st.W.matrix - before) @ a))  # = weight * ||a||^4 with ||a|| = 1
        tally.le(1e-300, w, rel=0.0)
        tally.le(w, 0.25, rel=1e-12)
        cur = st.W.lambda_min()
        tally.le(prev, cur, rel=1e-12)
        prev = cur
    return tally


SUITES: tuple[tuple[str, str, Callable], ...] = (
    ("logistic-core", "self-concordance", self_concordance),
    ("logistic-core", "local-quadratic-lower-bound", local_quadratic_bound),
    ("logistic-core", "schedule-monotonicity", schedule_monotonicity),
    ("linalg", "incremental-factorization", incremental_factorization),
    ("linalg", "elliptical-potential", elliptical_potential),
    ("linalg", "determinant-trace", determinant_trace),
    ("linalg", "curvature-domination", curvature_domination),
    ("linalg", "projection-properties", projection_properties),
    ("solvers", "prox-accuracy", prox_accuracy),
    ("solvers", "prox-conditioning", prox_conditioning),
    ("learners", "ofu-scale-invariance", ofu_scale_invariance),
    ("learners", "ada-forced-matches-ecolog", ada_forced_matches_ecolog),
    ("learners", "design-growth", design_growth),
)


def run_suite(module: str, name: str, fn: Callable, seed: int = 0) -> SuiteResult:
    rng = np.random.default_rng([seed, len(name)])
    t0 = time.perf_counter()
    tally = fn(rng)
    return SuiteResult(module, name, tally.n, tally.bad, tally.worst, time.perf_counter() - t0)


def run_all(seed: int = 0) -> list[SuiteResult]:
    return [run_suite(m, n, fn, seed) for m, n, fn in SUITES]
