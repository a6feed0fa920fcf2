"""Environments, the episode runner and regret bookkeeping."""

from __future__ import annotations

import math
import time
import zlib
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .learners import UNIT_BALL, make_learner
from .logistic import ProblemParams, dsigmoid, norm_for_kappa, sigmoid

ARMSET_KINDS = ("fixed", "contextual", "unit-ball")


def stream(seed: int, name: str) -> np.random.Generator:
    """Independent Philox generator for a named purpose under one experiment seed."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(zlib.crc32(name.encode()),))
    return np.random.Generator(np.random.Philox(ss))


def sample_unit_ball(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    """``n`` points drawn uniformly from the d-dimensional unit ball."""
    g = rng.standard_normal((n, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * rng.random(n)[:, None] ** (1.0 / d)


@dataclass
class EnvSpec:
    """Problem description.  Give ``theta_star`` or a target ``kappa`` (not both)."""

    d: int
    armset: str = "fixed"
    K: int = 20
    theta_star: Optional[np.ndarray] = None
    kappa: Optional[float] = None
    S: Optional[float] = None
    arms: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if self.armset not in ARMSET_KINDS:
            raise ValueError(f"armset must be one of {ARMSET_KINDS}, got {self.armset!r}")
        if (self.theta_star is None) == (self.kappa is None):
            raise ValueError("give exactly one of theta_star or kappa")
        if self.armset != "unit-ball" and self.arms is None and self.K < 1:
            raise ValueError("K must be positive")


class Environment:
    """Bernoulli rewards with mean ``sigmoid(a^T theta_star)``.

    Arm sampling and rewards use separate streams, so every learner facing the
    same seed sees the same arms and the same uniform draws round by round.
    """

    def __init__(self, theta_star: np.ndarray, armset: str, seed: int, K: int = 20,
                 arms: Optional[np.ndarray] = None, S: Optional[float] = None):
        self.theta_star = np.asarray(theta_star, dtype=float)
        self.d = self.theta_star.size
        norm = float(np.linalg.norm(self.theta_star))
        # theta_star = 0 still needs a positive bound for the learners
        self.S = (norm if norm > 0 else 1.0) if S is None else float(S)
        if norm > self.S * (1.0 + 1e-12):
            raise ValueError(f"||theta_star|| = {norm} exceeds S = {self.S}")
        self.armset = armset
        self.K = K
        self.seed = seed
        self._arm_rng = stream(seed, "arms")
        self._reward_rng = stream(seed, "rewards")
        self._t = 0
        self._current: Optional[np.ndarray] = None
        self._best = math.nan
        if armset == "fixed":
            A = sample_unit_ball(self._arm_rng, K, self.d) if arms is None else np.asarray(arms, dtype=float)
            if np.any(np.linalg.norm(A, axis=1) > 1.0 + 1e-12):
                raise ValueError("arms must lie in the unit ball")
            self.fixed_arms = A
            self._current = A
            self._best = float(sigmoid(float(np.max(A @ self.theta_star))))
        elif armset == "unit-ball":
            self.fixed_arms = None
            self._best = float(sigmoid(norm))
        else:
            self.fixed_arms = None

    @property
    def params(self) -> ProblemParams:
        return self.problem()

    def problem(self, delta: float = 0.05) -> ProblemParams:
        return ProblemParams(self.d, self.S, delta)

    def arms(self, t: int):
        """Arm set of round ``t``; rounds must be visited in order."""
        if t == self._t:
            return UNIT_BALL if self.armset == "unit-ball" else self._current
        if t != self._t + 1:
            raise ValueError(f"rounds must advance one at a time (at {self._t}, asked {t})")
        self._t = t
        if self.armset == "contextual":
            self._current = sample_unit_ball(self._arm_rng, self.K, self.d)
            self._best = float(sigmoid(float(np.max(self._current @ self.theta_star))))
        return UNIT_BALL if self.armset == "unit-ball" else self._current

    def mean(self, arm: np.ndarray) -> float:
        return float(sigmoid(float(arm @ self.theta_star)))

    def best_mean(self, t: int) -> float:
        if t != self._t:
            raise ValueError("best_mean is only available for the current round")
        return self._best

    def pull(self, arm: np.ndarray, t: int) -> int:
        if t != self._t:
            raise ValueError(f"pull for round {t} but the current round is {self._t}")
        arm = np.asarray(arm, dtype=float)
        if self.armset == "unit-ball":
            if float(arm @ arm) > 1.0 + 1e-9:
                raise ValueError("arm outside the unit ball")
        elif not np.any(np.all(self._current == arm, axis=1)):
            raise ValueError("arm is not in the current arm set")
        u = self._reward_rng.random()
        return int(u < self.mean(arm))

    def pull_counts(self, counts: np.ndarray) -> np.ndarray:
        """Number of unit rewards when fixed arm k is played ``counts[k]`` times."""
        if self.fixed_arms is None:
            raise ValueError("aggregated pulls need a fixed arm set")
        p = sigmoid(self.fixed_arms @ self.theta_star)
        return self._reward_rng.binomial(np.asarray(counts, dtype=np.int64), p)


def make_environment(spec: EnvSpec, seed: int) -> Environment:
    if spec.theta_star is not None:
        theta = np.asarray(spec.theta_star, dtype=float)
        if theta.shape != (spec.d,):
            raise ValueError(f"theta_star must have length {spec.d}")
    else:
        g = stream(seed, "theta").standard_normal(spec.d)
        theta = norm_for_kappa(spec.kappa) * g / np.linalg.norm(g)
    return Environment(theta, spec.armset, seed, spec.K, spec.arms, spec.S)


# ---------------------------------------------------------------------------


@dataclass
class TrajectoryLog:
    algorithm: str
    arms: np.ndarray
    rewards: np.ndarray
    inst_regret: np.ndarray
    regret_cum: np.ndarray
    elapsed_ns: np.ndarray
    op_count: np.ndarray
    h_size: np.ndarray
    coverage: np.ndarray  # 1 covered, 0 not covered, -1 undefined (warm-up)
    metadata: dict

    def __len__(self) -> int:
        return self.rewards.size


def run_episode(
    algorithm: str,
    env: Environment,
    T: int,
    seed: int,
    *,
    tau: Optional[int] = None,
    timing: bool = True,
    learner=None,
    delta: float = 0.05,
    ada_w_reg: Optional[float] = None,
) -> TrajectoryLog:
    """Play ``T`` rounds.  The clock covers the learner only, never the environment.

    With ``timing=False`` the ``elapsed_ns`` column is all zeros, which keeps
    logs byte-for-byte reproducible.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    d = env.d
    if learner is None:
        learner = make_learner(
            algorithm, env.problem(delta), T, rng=stream(seed, "ts"), tau=tau,
            fixed_arms=env.fixed_arms, unit_ball=env.armset == "unit-ball", ada_w_reg=ada_w_reg,
        )
    arms_log = np.empty((T, d))
    rewards = np.empty(T, dtype=np.int8)
    inst = np.empty(T)
    elapsed = np.zeros(T, dtype=np.int64)
    ops = np.empty(T, dtype=np.int64)
    hs = np.empty(T, dtype=np.int64)
    cov = np.empty(T, dtype=np.int8)
    clock = time.perf_counter_ns
    theta_star = env.theta_star
    for i in range(T):
        t = i + 1
        A = env.arms(t)
        c = learner.coverage(theta_star)
        cov[i] = -1 if c is None else int(c)
        before = learner.ops.total
        t0 = clock()
        arm = learner.select(A)
        t1 = clock()
        r = env.pull(arm, t)
        t2 = clock()
        learner.update(arm, r)
        t3 = clock()
        if timing:
            elapsed[i] = (t1 - t0) + (t3 - t2)
        ops[i] = learner.ops.total - before
        arms_log[i] = arm
        rewards[i] = r
        inst[i] = max(0.0, env.best_mean(t) - env.mean(arm))
        hs[i] = learner.h_size
    meta = learner.metadata() if hasattr(learner, "metadata") else {}
    return TrajectoryLog(algorithm, arms_log, rewards, inst, np.cumsum(inst), elapsed, ops, hs, cov, meta)


def aggregate(logs: Sequence[TrajectoryLog], field_name: str = "regret_cum") -> dict:
    """Pointwise mean, population std, min and max of one per-round series.

    Works on any objects carrying ``field_name`` as an array attribute.
    """
    if not logs:
        raise ValueError("no logs to aggregate")
    series = [np.asarray(getattr(g, field_name), dtype=float) for g in logs]
    if any(s.shape != series[0].shape for s in series):
        raise ValueError("logs have different lengths")
    M = np.vstack(series)
    return {"mean": M.mean(axis=0), "std": M.std(axis=0), "min": M.min(axis=0), "max": M.max(axis=0), "n": len(logs)}


def design_diagnostics(
    arms: np.ndarray, theta: np.ndarray, kappa: float, lam: float = 1.0, t: Optional[int] = None
) -> tuple[np.ndarray, np.ndarray]:
    """``H_t(theta) = sum mu'(a^T theta) a a^T + lam I`` and ``V_t = sum a a^T / kappa + lam I``.

    ``arms`` may be a :class:`TrajectoryLog` or an (n, d) array of played arms.
    """
    A = arms.arms if isinstance(arms, TrajectoryLog) else np.asarray(arms, dtype=float)
    if t is not None:
        A = A[:t]
    d = A.shape[1]
    w = dsigmoid(A @ theta) if A.shape[0] else np.zeros(0)
    H = (A.T * w) @ A + lam * np.eye(d)
    V = A.T @ A / kappa + lam * np.eye(d)
    return H, V
