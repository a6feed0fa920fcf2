"""Compiled inner loops that are too hot for the interpreter."""

from __future__ import annotations

import numba
import numpy as np


@numba.njit(cache=True)
def warmup_counts(arms, kappa, lam, tau, refresh=10_000):
    """Replay the max-uncertainty rule for ``tau`` rounds; return per-arm play counts.

    Uncertainties ``||a_k||^2_{V^{-1}}`` are kept for every arm and downdated
    after each play, so a round costs O(K d).  Ties go to the lowest index.
    The inverse is rebuilt from the counts every ``refresh`` rounds.
    """
    K, d = arms.shape
    counts = np.zeros(K, dtype=np.int64)
    Vinv = np.eye(d) / lam
    scores = np.empty(K)
    u = np.empty(d)
    for k in range(K):
        scores[k] = arms[k] @ Vinv @ arms[k]
    for t in range(tau):
        best = 0
        for k in range(1, K):
            if scores[k] > scores[best]:
                best = k
        counts[best] += 1
        a = arms[best]
        for i in range(d):
            acc = 0.0
            for j in range(d):
                acc += Vinv[i, j] * a[j]
            u[i] = acc
        c = kappa + a @ u
        for i in range(d):
            for j in range(d):
                Vinv[i, j] -= u[i] * u[j] / c
        for k in range(K):
            acc = 0.0
            for j in range(d):
                acc += arms[k, j] * u[j]
            scores[k] -= acc * acc / c
        if (t + 1) % refresh == 0:
            V = lam * np.eye(d)
            for k in range(K):
                if counts[k] > 0:
                    V += (counts[k] / kappa) * np.outer(arms[k], arms[k])
            Vinv = np.linalg.inv(V)
            for k in range(K):
                scores[k] = arms[k] @ Vinv @ arms[k]
    return counts
