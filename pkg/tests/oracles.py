"""Brute-force reference computations shared by the tests."""

import math

import numpy as np
from scipy.optimize import minimize, minimize_scalar


def random_spd(rng, d, cond=100.0):
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    ev = np.geomspace(1.0, cond, d) * rng.uniform(0.5, 2.0)
    return (Q * ev) @ Q.T


def grid_project_ellipsoid(x, c, M, r):
    """Closest boundary point found by a dense angular grid, then polished locally.

    Independent of any dual or secular-equation reasoning: the boundary is
    parametrised as ``c + sqrt(r) L^{-T} u`` with ``u`` on the unit sphere.
    """
    x = np.asarray(x, dtype=float)
    if (x - c) @ M @ (x - c) <= r:
        return x
    d = x.size
    L = np.linalg.cholesky(M)
    Linv_T = np.linalg.inv(L).T * math.sqrt(r)

    def point(u):
        return c + Linv_T @ u

    if d == 2:
        phi = np.linspace(0, 2 * math.pi, 20001)
        U = np.stack([np.cos(phi), np.sin(phi)])
        P = c[:, None] + Linv_T @ U
        k = int(np.argmin(((P - x[:, None]) ** 2).sum(axis=0)))
        h = phi[1] - phi[0]
        f = lambda a: float(np.sum((point(np.array([math.cos(a), math.sin(a)])) - x) ** 2))
        res = minimize_scalar(f, bounds=(phi[k] - h, phi[k] + h), method="bounded", options={"xatol": 1e-14})
        return point(np.array([math.cos(res.x), math.sin(res.x)]))
    if d == 3:
        th = np.linspace(0, math.pi, 401)
        ph = np.linspace(0, 2 * math.pi, 801)
        T, P_ = np.meshgrid(th, ph, indexing="ij")
        U = np.stack([np.sin(T) * np.cos(P_), np.sin(T) * np.sin(P_), np.cos(T)]).reshape(3, -1)
        P = c[:, None] + Linv_T @ U
        k = int(np.argmin(((P - x[:, None]) ** 2).sum(axis=0)))
        u0 = U[:, k]

        def f(v):
            u = v / np.linalg.norm(v)
            return float(np.sum((point(u) - x) ** 2))

        # gradient polish from the best grid point; the normalised map keeps it on the sphere
        v = minimize(f, u0, method="BFGS", options={"gtol": 1e-14}).x
        return point(v / np.linalg.norm(v))
    raise ValueError("grid oracle supports d in {2, 3}")


def bisect(f, lo, hi, iters=200):
    """Root of an increasing scalar function on [lo, hi]."""
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
