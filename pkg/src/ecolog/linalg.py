"""Incremental SPD algebra and ellipsoid geometry.

``SpdMatrix`` keeps a matrix, its lower Cholesky factor and its inverse in
sync under PSD rank-1 additions at O(d^2) per update.  Constraint sets are
balls, ellipsoids and ellipsoid-ball intersections, all with Euclidean
projections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numba
import numpy as np
from scipy.linalg import cholesky, cho_solve, solve_triangular


class OpCounter:
    """Abstract cost meter: d^2 units per mat-vec, triangular solve or rank-1 update."""

    __slots__ = ("total",)

    def __init__(self) -> None:
        self.total = 0

    def add(self, n: int) -> None:
        self.total += int(n)


def _charge(ops: Optional[OpCounter], n: int) -> None:
    if ops is not None:
        ops.total += int(n)


@numba.njit(cache=True)
def _chol_rank1_update(L, x):
    # In-place L L^T + x x^T, Givens form.  x is clobbered.
    d = x.shape[0]
    for k in range(d):
        lkk = L[k, k]
        r = math.sqrt(lkk * lkk + x[k] * x[k])
        c = r / lkk
        s = x[k] / lkk
        L[k, k] = r
        for i in range(k + 1, d):
            L[i, k] = (L[i, k] + s * x[i]) / c
            x[i] = c * x[i] - s * L[i, k]


class SpdMatrix:
    """Symmetric positive-definite matrix with co-maintained Cholesky factor and inverse."""

    REFACTOR_EVERY = 10_000

    def __init__(self, matrix: np.ndarray):
        m = np.array(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {m.shape}")
        if not np.allclose(m, m.T, rtol=1e-12, atol=1e-12):
            raise ValueError("matrix is not symmetric")
        self._m = 0.5 * (m + m.T)
        self.n_updates = 0
        self.n_refactorizations = 0
        self._refactor()
        self.n_refactorizations = 0

    @classmethod
    def identity(cls, d: int, scale: float = 1.0) -> "SpdMatrix":
        if scale <= 0:
            raise ValueError(f"scale must be positive, got {scale}")
        return cls(scale * np.eye(d))

    def _refactor(self) -> None:
        try:
            self._L = cholesky(self._m, lower=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise ValueError("matrix is not positive definite") from exc
        inv = cho_solve((self._L, True), np.eye(self.dim), check_finite=False)
        self._inv = 0.5 * (inv + inv.T)
        self._since_refactor = 0
        self.n_refactorizations += 1

    @property
    def dim(self) -> int:
        return self._m.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        return self._m

    @property
    def chol(self) -> np.ndarray:
        return self._L

    @property
    def inv(self) -> np.ndarray:
        return self._inv

    def copy(self) -> "SpdMatrix":
        new = object.__new__(SpdMatrix)
        new._m = self._m.copy()
        new._L = self._L.copy()
        new._inv = self._inv.copy()
        new.n_updates = self.n_updates
        new.n_refactorizations = self.n_refactorizations
        new._since_refactor = self._since_refactor
        return new

    def _check_vec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"expected a vector of length {self.dim}, got shape {x.shape}")
        return x

    def rank1_update(self, v: np.ndarray, w: float, ops: Optional[OpCounter] = None) -> "SpdMatrix":
        """In place ``M <- M + w v v^T``; returns ``self``."""
        v = self._check_vec(v)
        if not w >= 0:
            raise ValueError(f"rank-1 weight must be nonnegative, got {w}")
        if w == 0:
            return self
        self._m += w * np.outer(v, v)
        _chol_rank1_update(self._L, math.sqrt(w) * v)
        u = self._inv @ v
        self._inv -= (w / (1.0 + w * (v @ u))) * np.outer(u, u)
        self.n_updates += 1
        self._since_refactor += 1
        _charge(ops, 3 * self.dim * self.dim)
        if self._since_refactor >= self.REFACTOR_EVERY:
            self._refactor()
            _charge(ops, self.dim**3)
        return self

    def mahalanobis_sq(self, x: np.ndarray) -> float:
        x = self._check_vec(x)
        return float(x @ self._m @ x)

    def inv_norm_sq(self, x: np.ndarray) -> float:
        """``x^T M^{-1} x`` through a triangular solve against L."""
        x = self._check_vec(x)
        y = solve_triangular(self._L, x, lower=True, check_finite=False)
        return float(y @ y)

    def inv_norm_sq_rows(self, X: np.ndarray) -> np.ndarray:
        """Row-wise ``x^T M^{-1} x`` using the stored inverse (the planning hot path)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.einsum("ij,jk,ik->i", X, self._inv, X)

    def solve(self, b: np.ndarray) -> np.ndarray:
        return cho_solve((self._L, True), b, check_finite=False)

    def logdet(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self._L))))

    def lambda_min(self) -> float:
        return float(np.linalg.eigvalsh(self._m)[0])


def mahalanobis_sq(A: SpdMatrix, x: np.ndarray) -> float:
    return A.mahalanobis_sq(x)


def inv_norm_sq(A: SpdMatrix, x: np.ndarray) -> float:
    return A.inv_norm_sq(x)


def rank1_update(A: SpdMatrix, v: np.ndarray, w: float, ops: Optional[OpCounter] = None) -> SpdMatrix:
    return A.rank1_update(v, w, ops)


# ---------------------------------------------------------------------------
# Ellipsoid projection


class ProjectionError(RuntimeError):
    pass


class EllipsoidProjector:
    """Euclidean projection onto ``{x : (x-c)^T M (x-c) <= r}`` for a dense SPD ``M``.

    The eigendecomposition of ``M`` is computed once, so repeated projections
    onto the same set cost O(d^2) plus a scalar root-find.
    """

    MAX_ITER = 1000

    def __init__(self, center: np.ndarray, M: np.ndarray, r: float):
        if not r > 0:
            raise ValueError(f"squared radius must be positive, got {r}")
        self.center = np.asarray(center, dtype=float)
        self.r = float(r)
        self.M = np.asarray(M, dtype=float)
        m, Q = np.linalg.eigh(0.5 * (self.M + self.M.T))
        if m[0] <= 0:
            raise ValueError("shape matrix is not positive definite")
        self.m = m
        self.Q = Q

    def quad(self, x: np.ndarray) -> float:
        u = self.Q.T @ (x - self.center)
        return float(self.m @ (u * u))

    def contains(self, x: np.ndarray, tol: float = 0.0) -> bool:
        return self.quad(x) <= self.r * (1.0 + tol)

    def diameter(self) -> float:
        return 2.0 * math.sqrt(self.r / self.m[0])

    def project(self, x: np.ndarray) -> np.ndarray:
        u = self.Q.T @ (x - self.center)
        mu2 = self.m * u * u
        q = float(mu2.sum())
        if q <= self.r:
            return x
        lam = _secular_root(self.m, mu2, q, self.r, self.MAX_ITER)
        v = u / (1.0 + lam * self.m)
        qv = float(self.m @ (v * v))
        if qv > self.r:
            v *= math.sqrt(self.r / qv)
        return self.center + self.Q @ v


def _secular_root(m: np.ndarray, mu2: np.ndarray, q: float, r: float, max_iter: int) -> float:
    # Newton on h(lam) = G(lam)^(-1/2) - r^(-1/2) with G(lam) = sum m u^2 / (1 + lam m)^2.
    # h is increasing and concave, so Newton started left of the root climbs monotonically.
    upper = (math.sqrt(q / r) - 1.0) / m[0] + 1.0
    target = 1.0 / math.sqrt(r)
    lam = 0.0
    for _ in range(max_iter):
        den = 1.0 + lam * m
        terms = mu2 / (den * den)
        G = float(terms.sum())
        if abs(G - r) <= 1e-12 * r:
            return lam
        dG = float((terms * m / den).sum())  # equals -G'/2
        h = 1.0 / math.sqrt(G) - target
        hp = dG * G ** (-1.5)
        step = -h / hp
        new = min(lam + step, upper)
        if new <= lam or (new - lam) <= 1e-15 * max(1.0, lam):
            return lam
        lam = new
    raise ProjectionError("ellipsoid projection did not converge")


def project_ellipsoid(x: np.ndarray, E: "Ellipsoid") -> np.ndarray:
    """Euclidean projection of ``x`` onto the ellipsoid ``E``."""
    return E.projector().project(np.asarray(x, dtype=float))


def dykstra(
    x: np.ndarray,
    proj_a: Callable[[np.ndarray], np.ndarray],
    proj_b: Callable[[np.ndarray], np.ndarray],
    in_a: Callable[[np.ndarray], bool],
    in_b: Callable[[np.ndarray], bool],
    tol: float = 1e-10,
    max_iter: int = 10_000,
) -> np.ndarray:
    """Projection onto the intersection of two convex sets by Dykstra's algorithm."""
    # when one projection already lands in the other set it is the answer
    ya = proj_a(x)
    if in_b(ya):
        return ya
    yb = proj_b(x)
    if in_a(yb):
        return yb
    cur = x
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    for _ in range(max_iter):
        y = proj_a(cur + p)
        p = cur + p - y
        nxt = proj_b(y + q)
        q = y + q - nxt
        # nxt is in B by construction; stop once it has settled and also sits in A
        if np.linalg.norm(nxt - cur) < tol and in_a(nxt):
            return nxt
        cur = nxt
    raise ProjectionError("Dykstra projection hit its iteration cap")


# ---------------------------------------------------------------------------
# Constraint sets


@dataclass
class Ball:
    """Centered Euclidean ball of the given radius."""

    radius: float

    def __post_init__(self) -> None:
        if not self.radius > 0:
            raise ValueError(f"ball radius must be positive, got {self.radius}")

    def contains(self, x: np.ndarray, tol: float = 1e-9) -> bool:
        return float(x @ x) <= self.radius**2 * (1.0 + tol)

    def project(self, x: np.ndarray) -> np.ndarray:
        n = float(np.linalg.norm(x))
        if n <= self.radius:
            return x
        return x * (self.radius / n)

    def quadratic_pieces(self, d: int):
        return [(np.zeros(d), np.eye(d), self.radius**2)]


@dataclass
class Ellipsoid:
    """The set ``{theta : ||theta - center||^2_shape <= radius_sq}``."""

    center: np.ndarray
    shape: SpdMatrix
    radius_sq: float
    _proj: Optional[EllipsoidProjector] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        self.center = np.asarray(self.center, dtype=float)
        if not self.radius_sq > 0:
            raise ValueError(f"radius_sq must be positive, got {self.radius_sq}")
        if self.center.shape != (self.shape.dim,):
            raise ValueError("center and shape dimensions differ")

    @property
    def dim(self) -> int:
        return self.shape.dim

    def quad(self, x: np.ndarray) -> float:
        diff = np.asarray(x, dtype=float) - self.center
        return float(diff @ self.shape.matrix @ diff)

    def contains(self, x: np.ndarray, tol: float = 1e-9) -> bool:
        return self.quad(x) <= self.radius_sq * (1.0 + tol)

    def projector(self) -> EllipsoidProjector:
        # The shape is treated as frozen once wrapped in a constraint set.
        if self._proj is None:
            self._proj = EllipsoidProjector(self.center, self.shape.matrix, self.radius_sq)
        return self._proj

    def project(self, x: np.ndarray) -> np.ndarray:
        return self.projector().project(np.asarray(x, dtype=float))

    def quadratic_pieces(self, d: int):
        return [(self.center, self.shape.matrix, self.radius_sq)]


@dataclass
class Intersection:
    """Ellipsoid intersected with a centered ball."""

    ellipsoid: Ellipsoid
    ball: Ball

    def __post_init__(self) -> None:
        e, b = self.ellipsoid, self.ball
        if b.contains(e.center, tol=0.0) or e.contains(np.zeros(e.dim), tol=0.0):
            return
        try:
            probe = self.project(e.center)
        except ProjectionError:
            raise ValueError("intersection is empty") from None
        if not (e.contains(probe, 1e-8) and b.contains(probe, 1e-8)):
            raise ValueError("intersection is empty")

    @property
    def dim(self) -> int:
        return self.ellipsoid.dim

    def contains(self, x: np.ndarray, tol: float = 1e-9) -> bool:
        return self.ellipsoid.contains(x, tol) and self.ball.contains(x, tol)

    def project(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        e, b = self.ellipsoid, self.ball
        return dykstra(x, e.project, b.project, lambda y: e.contains(y, 1e-10), lambda y: b.contains(y, 1e-10))

    def quadratic_pieces(self, d: int):
        return self.ellipsoid.quadratic_pieces(d) + self.ball.quadratic_pieces(d)


ConstraintSet = Union[Ball, Ellipsoid, Intersection]


def project_constraint(x: np.ndarray, C: ConstraintSet) -> np.ndarray:
    """Euclidean projection onto a ball, an ellipsoid or their intersection."""
    return C.project(np.asarray(x, dtype=float))


def diam_under_arms(
    C: ConstraintSet, arms: Optional[Union[np.ndarray, Sequence[np.ndarray]]] = None, unit_ball: bool = False
) -> float:
    """Upper bound on ``max_{a, theta, theta'} |a^T (theta - theta')|`` over the set.

    Pass a finite arm list, or ``unit_ball=True`` for the whole unit ball.
    """
    if isinstance(C, Intersection):
        return min(diam_under_arms(C.ellipsoid, arms, unit_ball), diam_under_arms(C.ball, arms, unit_ball))
    if not unit_ball:
        if arms is None:
            raise ValueError("either arms or unit_ball=True is required")
        A = np.atleast_2d(np.asarray(arms, dtype=float))
        if A.size == 0:
            raise ValueError("arm list is empty")
    if isinstance(C, Ball):
        if unit_ball:
            return 2.0 * C.radius
        return 2.0 * C.radius * float(np.sqrt(np.max(np.einsum("ij,ij->i", A, A))))
    if isinstance(C, Ellipsoid):
        if unit_ball:
            # smallest eigenvalue of M is the squared smallest singular value of L
            lam_min = float(np.linalg.svd(C.shape.chol, compute_uv=False)[-1]) ** 2
            return 2.0 * math.sqrt(C.radius_sq / lam_min)
        return 2.0 * math.sqrt(C.radius_sq * float(np.max(C.shape.inv_norm_sq_rows(A))))
    raise TypeError(f"unsupported constraint set {type(C).__name__}")
