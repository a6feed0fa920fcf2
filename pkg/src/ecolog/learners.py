"""Bandit learners: warm-up, the ECOLog update, OFU/TS planning, the adaptive
variant and two baselines (batch-MLE GLM-UCB and an online-Newton learner).

Every learner exposes the same small interface used by the episode runner::

    arm = learner.select(arms)      # arms: (K, d) array or UNIT_BALL
    learner.update(arm, reward)
    learner.coverage(theta_star)    # True/False, or None when undefined
    learner.h_size, learner.ops.total
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy.linalg import solve_triangular

from . import _kernels
from .linalg import (
    Ball,
    ConstraintSet,
    Ellipsoid,
    Intersection,
    OpCounter,
    SpdMatrix,
    _charge,
    diam_under_arms,
)
from .logistic import ProblemParams, RadiusSchedule, _sigmoid_scalar, dsigmoid
from .solvers import EPS_FLOOR, MleProblem, ProxProblem, _z_projectors, solve_mle, solve_prox


class UnitBallArms:
    """Marker for the continuous arm set ``{a : ||a|| <= 1}``."""

    def __repr__(self) -> str:
        return "UNIT_BALL"


UNIT_BALL = UnitBallArms()
Arms = Union[np.ndarray, UnitBallArms]

TS_MAX_DRAWS = 10_000


class RejectionCapExceeded(RuntimeError):
    pass


def default_eps(t: int) -> float:
    return 1.0 / t


def default_tau(params: ProblemParams, T: int) -> int:
    """Warm-up length ``16 kappa d beta_T log(1 + T)``."""
    beta_T = RadiusSchedule(params).beta(T)
    return int(math.ceil(16.0 * params.kappa * params.d * beta_T * math.log(1.0 + T)))


# ---------------------------------------------------------------------------
# ECOLog update


@dataclass
class EcologState:
    theta: np.ndarray
    W: SpdMatrix
    constraint: ConstraintSet
    D: float
    schedule: RadiusSchedule
    t: int = 1
    eps_rule: Callable[[int], float] = default_eps


def ecolog_step(
    state: EcologState,
    arm: np.ndarray,
    reward: int,
    ops: Optional[OpCounter] = None,
    theta_next: Optional[np.ndarray] = None,
) -> EcologState:
    """One proximal step on the new loss, then ``W += mu'(a^T theta') a a^T``.

    ``theta_next`` lets a caller that already solved the same program reuse it.
    The state is updated in place and returned.
    """
    if reward not in (0, 1):
        raise ValueError(f"reward must be 0 or 1, got {reward!r}")
    arm = np.asarray(arm, dtype=float)
    if theta_next is None:
        eps = max(state.eps_rule(state.t), EPS_FLOOR)
        prob = ProxProblem(state.W, state.theta, state.D, arm[None, :], np.array([reward]), state.constraint, eps)
        theta_next = solve_prox(prob, ops)
    state.W.rank1_update(arm, dsigmoid(float(arm @ theta_next)), ops)
    state.theta = theta_next
    state.t += 1
    return state


# ---------------------------------------------------------------------------
# Planning


def ofu_scores(theta: np.ndarray, W: SpdMatrix, arms: np.ndarray, radius: float) -> np.ndarray:
    widths = np.sqrt(np.maximum(W.inv_norm_sq_rows(arms), 0.0))
    return arms @ theta + math.sqrt(radius) * widths


def ofu_select(state, arms: np.ndarray, radius: float, ops: Optional[OpCounter] = None) -> tuple[int, float]:
    """Index and value of ``argmax_a a^T theta + sqrt(radius) ||a||_{W^{-1}}``.

    ``state`` is anything with ``theta`` and ``W`` attributes.  Ties resolve
    to the lowest index.
    """
    arms = np.atleast_2d(np.asarray(arms, dtype=float))
    if arms.shape[0] == 0:
        raise ValueError("arm set is empty")
    scores = ofu_scores(state.theta, state.W, arms, radius)
    _charge(ops, arms.shape[0] * state.W.dim**2)
    k = int(np.argmax(scores))
    return k, float(scores[k])


def finite_oracle(arms: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    arms = np.atleast_2d(np.asarray(arms, dtype=float))

    def oracle(theta: np.ndarray) -> np.ndarray:
        return arms[int(np.argmax(arms @ theta))]

    return oracle


def unit_ball_oracle(theta: np.ndarray) -> np.ndarray:
    n = float(np.linalg.norm(theta))
    if n == 0.0:
        out = np.zeros_like(theta)
        out[0] = 1.0
        return out
    return theta / n


def ts_sample(
    theta: np.ndarray,
    W: SpdMatrix,
    radius: float,
    rng: np.random.Generator,
    constraint: Optional[ConstraintSet] = None,
    max_draws: int = TS_MAX_DRAWS,
) -> tuple[np.ndarray, int]:
    """Draw ``theta + sqrt(radius) L^{-T} xi`` with standard Gaussian ``xi``,
    redrawing until the sample lies in ``constraint``."""
    scale = math.sqrt(radius)
    L = W.chol
    for draw in range(1, max_draws + 1):
        xi = rng.standard_normal(W.dim)
        sample = theta + scale * solve_triangular(L, xi, lower=True, trans="T", check_finite=False)
        if constraint is None or constraint.contains(sample, tol=0.0):
            return sample, draw
    raise RejectionCapExceeded(f"no admissible Thompson sample after {max_draws} draws")


def ts_select(
    state,
    arm_oracle: Callable[[np.ndarray], np.ndarray],
    rng: np.random.Generator,
    radius: float,
    constraint: Optional[ConstraintSet] = None,
    ops: Optional[OpCounter] = None,
):
    """Play the oracle's best response to a Thompson sample around ``state.theta``."""
    sample, draws = ts_sample(state.theta, state.W, radius, rng, constraint)
    _charge(ops, 2 * draws * state.W.dim**2)
    return arm_oracle(sample)


def _plan(theta, W, radius, arms: Arms, planner: str, rng, ops, constraint=None) -> np.ndarray:
    if isinstance(arms, UnitBallArms):
        frame = _Frame(theta, W)
        return ts_select(frame, unit_ball_oracle, rng, radius, constraint, ops)
    if planner == "ts":
        frame = _Frame(theta, W)
        arm = ts_select(frame, finite_oracle(arms), rng, radius, constraint, ops)
        _charge(ops, arms.shape[0] * W.dim)
        return arm
    k, _ = ofu_select(_Frame(theta, W), arms, radius, ops)
    return arms[k]


@dataclass
class _Frame:
    theta: np.ndarray
    W: SpdMatrix


def _check_planner(planner: str) -> str:
    if planner not in ("ofu", "ts"):
        raise ValueError(f"planner must be 'ofu' or 'ts', got {planner!r}")
    return planner


# ---------------------------------------------------------------------------
# Warm-up


class WarmUp:
    """Forced exploration: play the arm with the largest ``||a||_{V^{-1}}``.

    ``V`` starts at ``lambda_tau I`` and absorbs ``a a^T / kappa`` per round.
    """

    def __init__(self, params: ProblemParams, tau: int):
        if tau < 1:
            raise ValueError(f"tau must be >= 1, got {tau}")
        self.params = params
        self.tau = int(tau)
        self.schedule = RadiusSchedule(params)
        self.lam = self.schedule.lam(self.tau)
        self.V = SpdMatrix.identity(params.d, self.lam)
        self._arms: list[np.ndarray] = []
        self._labels: list[int] = []

    @property
    def rounds(self) -> int:
        return len(self._labels)

    @property
    def done(self) -> bool:
        return self.rounds >= self.tau

    def select(self, arms: Arms, ops: Optional[OpCounter] = None) -> np.ndarray:
        d = self.params.d
        if isinstance(arms, UnitBallArms):
            # the worst-explored direction: eigenvector of the smallest eigenvalue
            _, vecs = np.linalg.eigh(self.V.matrix)
            v = vecs[:, 0]
            nz = np.flatnonzero(np.abs(v) > 1e-12)
            if nz.size and v[nz[0]] < 0:
                v = -v
            _charge(ops, d**3)
            return v
        widths = self.V.inv_norm_sq_rows(arms)
        _charge(ops, arms.shape[0] * d * d)
        return arms[int(np.argmax(widths))]

    def observe(self, arm: np.ndarray, reward: int, ops: Optional[OpCounter] = None) -> None:
        self.V.rank1_update(arm, 1.0 / self.params.kappa, ops)
        self._arms.append(np.asarray(arm, dtype=float))
        self._labels.append(int(reward))

    def finish(self, ops: Optional[OpCounter] = None) -> Ellipsoid:
        X = np.array(self._arms).reshape(-1, self.params.d)
        y = np.array(self._labels, dtype=float)
        theta_hat = solve_mle(MleProblem(X, y, reg=self.lam / 2.0, preconditioner=self.V, eps=1e-10), ops)
        return Ellipsoid(theta_hat, self.V.copy(), self.schedule.beta(self.tau))


@dataclass
class WarmupResult:
    Theta: Ellipsoid
    counts: Optional[np.ndarray]
    theta_hat: np.ndarray
    lam: float


def warmup_run(
    tau: int,
    arms: Arms,
    pull: Optional[Callable[[np.ndarray], int]],
    params: ProblemParams,
    *,
    pull_counts: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    ops: Optional[OpCounter] = None,
) -> WarmupResult:
    """Run the whole warm-up and return the admissible set ``Theta``.

    With a finite arm array and ``pull_counts`` (play counts per arm ->
    number of unit rewards per arm) the arm sequence is replayed by a compiled
    kernel and rewards are drawn in aggregate, which makes very long warm-ups
    tractable.  Otherwise ``pull(arm)`` is called once per round.
    """
    if tau < 1:
        raise ValueError(f"tau must be >= 1, got {tau}")
    if pull_counts is not None and not isinstance(arms, UnitBallArms):
        A = np.ascontiguousarray(np.atleast_2d(np.asarray(arms, dtype=float)))
        sched = RadiusSchedule(params)
        lam = sched.lam(tau)
        kappa = params.kappa
        counts = _kernels.warmup_counts(A, kappa, lam, int(tau))
        ones = np.asarray(pull_counts(counts), dtype=float)
        used = counts > 0
        Xa, n_a, k_a = A[used], counts[used].astype(float), ones[used]
        V = SpdMatrix(lam * np.eye(params.d) + (Xa.T * (n_a / kappa)) @ Xa)
        X = np.vstack([Xa, Xa])
        y = np.concatenate([np.ones(len(Xa)), np.zeros(len(Xa))])
        w = np.concatenate([k_a, n_a - k_a])
        theta_hat = solve_mle(MleProblem(X, y, reg=lam / 2.0, preconditioner=V, eps=1e-10, weights=w), ops)
        return WarmupResult(Ellipsoid(theta_hat, V, sched.beta(tau)), counts, theta_hat, lam)
    if pull is None:
        raise ValueError("a pull oracle is required")
    wu = WarmUp(params, tau)
    for _ in range(tau):
        arm = wu.select(arms, ops)
        wu.observe(arm, pull(arm), ops)
    Theta = wu.finish(ops)
    return WarmupResult(Theta, None, Theta.center, wu.lam)


# ---------------------------------------------------------------------------
# Learners


class EcologAgent:
    """Warm-up followed by ECOLog updates with OFU or Thompson-sampling planning.

    ``tau=0`` skips the warm-up and uses the ball of radius S as the
    admissible set.
    """

    def __init__(
        self,
        params: ProblemParams,
        T: int,
        planner: str = "ofu",
        tau: Optional[int] = None,
        rng: Optional[np.random.Generator] = None,
        fixed_arms: Optional[np.ndarray] = None,
        D: Optional[float] = None,
    ):
        self.params = params
        self.planner = _check_planner(planner)
        self.name = "ofu-ecolog" if planner == "ofu" else "ts-ecolog"
        self.schedule = RadiusSchedule(params)
        self.default_tau = tau is None
        self.tau = default_tau(params, T) if tau is None else int(tau)
        if self.tau < 0:
            raise ValueError("tau must be nonnegative")
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.fixed_arms = fixed_arms
        self._D_override = D
        self.ops = OpCounter()
        self.t = 1
        self.state: Optional[EcologState] = None
        self.Theta: Optional[ConstraintSet] = None
        self.warm = WarmUp(params, self.tau) if self.tau > 0 else None
        self._conf: Optional[tuple] = None
        if self.warm is None:
            self._start(Ball(params.S), np.zeros(params.d))

    @property
    def h_size(self) -> int:
        return 0

    @property
    def in_warmup(self) -> bool:
        return self.state is None

    def _start(self, Theta: ConstraintSet, theta0: np.ndarray) -> None:
        self.Theta = Theta
        if self._D_override is not None:
            D = float(self._D_override)
        elif isinstance(Theta, Ball):
            D = 2.0 * self.params.S
        else:
            D = 1.0
        self.D = D
        self.state = EcologState(theta0.copy(), SpdMatrix.identity(self.params.d), Theta, D, self.schedule, t=self.t)
        if isinstance(Theta, Ellipsoid):
            self._conf = (Theta.center, Theta.shape, Theta.radius_sq)
        else:
            self._conf = None  # confidence set is the ball itself

    def select(self, arms: Arms) -> np.ndarray:
        if self.state is None:
            return self.warm.select(arms, self.ops)
        st = self.state
        if self.planner == "ts" or isinstance(arms, UnitBallArms):
            radius = self.schedule.sigma(self.t)
            # rejecting on ball(S) at this scale would almost never accept
            reject_on = self.Theta if isinstance(self.Theta, Ellipsoid) else None
            return _plan(st.theta, st.W, radius, arms, "ts", self.rng, self.ops, reject_on)
        if self._conf is None:
            arms = np.atleast_2d(arms)
            return arms[int(np.argmax(self.params.S * np.linalg.norm(arms, axis=1)))]
        center, shape, radius = self._conf
        return _plan(center, shape, radius, arms, "ofu", self.rng, self.ops)

    def update(self, arm: np.ndarray, reward: int) -> None:
        if self.state is None:
            self.warm.observe(arm, reward, self.ops)
            self.t += 1
            if self.warm.done:
                Theta = self.warm.finish(self.ops)
                self._start(Theta, Theta.center)
            return
        ecolog_step(self.state, arm, reward, self.ops)
        self._conf = (self.state.theta, self.state.W, self.schedule.sigma(self.t))
        self.t += 1

    def coverage(self, theta_star: np.ndarray) -> Optional[bool]:
        """Whether ``theta_star`` lies in the current confidence set (None during warm-up)."""
        if self.state is None:
            return None
        if self._conf is None:
            return bool(self.Theta.contains(theta_star, tol=0.0))
        center, shape, radius = self._conf
        diff = theta_star - center
        return bool(diff @ shape.matrix @ diff <= radius)

    def metadata(self) -> dict:
        return {"tau": self.tau, "tau_is_default": self.default_tau, "planning_radius": "sigma_t",
                "D": getattr(self, "D", None)}


@dataclass
class AdaState:
    inner: EcologState
    ball: Ball
    Theta_t: ConstraintSet
    history_arms: list = field(default_factory=list)
    history_labels: list = field(default_factory=list)
    theta_hat_H: Optional[np.ndarray] = None
    V_H: Optional[SpdMatrix] = None
    gram_H: Optional[np.ndarray] = None
    conf_radius: Optional[float] = None  # None: confidence set is still Theta_1
    force_accept: bool = False

    @property
    def h_size(self) -> int:
        return len(self.history_labels)


def ada_w_reg(D: float) -> float:
    """Smallest ``lam`` with ``W_1 = lam I`` that certifies (C1) whenever D does not grow.

    The one-label and two-label programs differ by a loss whose slope is at
    most 1, and both are ``2 eta``-strongly convex in the W-norm, so
    ``|a^T (theta_bar - theta^u)| <= ||a||^2_{W^-1} (2 + D) / 2 <= (2 + D) / (2 lam)``.
    Self-concordance turns a gap of at most log 2 into the factor 2 of (C1).
    """
    return max(1.0, (2.0 + D) / (2.0 * math.log(2.0)))


def new_ada_state(params: ProblemParams, force_accept: bool = False, w_reg: Optional[float] = None) -> AdaState:
    """Initial state: ``Theta_1 = ball(S)``, ``D = 2S``, ``theta_1 = 0``, ``W_1 = w_reg I``.

    ``w_reg=None`` uses :func:`ada_w_reg`; ``w_reg=1`` is the bare identity.
    """
    ball = Ball(params.S)
    D = 2.0 * params.S
    lam = ada_w_reg(D) if w_reg is None else float(w_reg)
    inner = EcologState(np.zeros(params.d), SpdMatrix.identity(params.d, lam), ball, D, RadiusSchedule(params))
    return AdaState(inner=inner, ball=ball, Theta_t=ball, gram_H=np.zeros((params.d, params.d)), force_accept=force_accept)


def ada_step(
    state: AdaState,
    arm: np.ndarray,
    reward: int,
    arms: Optional[np.ndarray] = None,
    ops: Optional[OpCounter] = None,
) -> bool:
    """One round of the adaptive mechanism; returns True when the update was accepted.

    ``arms`` (a fixed finite arm set) sharpens the diameter bound used after a
    refresh; without it the unit-ball bound is used.
    """
    if reward not in (0, 1):
        raise ValueError(f"reward must be 0 or 1, got {reward!r}")
    arm = np.asarray(arm, dtype=float)
    inner = state.inner
    t = inner.t
    sched = inner.schedule
    kappa = sched.params.kappa
    eps = max(inner.eps_rule(t), EPS_FLOOR)
    a1 = arm[None, :]

    def prox(rows, labels):
        return solve_prox(ProxProblem(inner.W, inner.theta, inner.D, rows, labels, inner.constraint, eps), ops)

    theta_u = [prox(a1, np.array([0.0])), prox(a1, np.array([1.0]))]
    theta_bar = prox(np.vstack([arm, arm]), np.array([0.0, 1.0]))
    s_bar = dsigmoid(float(arm @ theta_bar))
    accepted = state.force_accept or all(s_bar <= 2.0 * dsigmoid(float(arm @ th)) for th in theta_u)
    if accepted:
        ecolog_step(inner, arm, reward, ops, theta_next=theta_u[reward])
        state.conf_radius = sched.eta(t)
        return True

    state.history_arms.append(arm)
    state.history_labels.append(int(reward))
    state.gram_H += np.outer(arm, arm) / kappa
    g = sched.gamma(t)
    state.V_H = SpdMatrix(state.gram_H + g * np.eye(arm.size))
    X = np.array(state.history_arms)
    y = np.array(state.history_labels, dtype=float)
    state.theta_hat_H = solve_mle(MleProblem(X, y, reg=g, preconditioner=state.V_H, eps=1e-8), ops, x0=state.theta_hat_H)
    _charge(ops, arm.size**3)
    ell = Ellipsoid(state.theta_hat_H, state.V_H, sched.beta(t))
    state.Theta_t = Intersection(ell, state.ball)
    inner.constraint = state.Theta_t
    inner.D = diam_under_arms(state.Theta_t, arms, unit_ball=arms is None)
    inner.t += 1
    return False


class AdaOfuEcolog:
    """Warm-up-free ECOLog with the (C1) acceptance test and history refits."""

    name = "ada-ofu-ecolog"

    def __init__(
        self,
        params: ProblemParams,
        planner: str = "ofu",
        rng: Optional[np.random.Generator] = None,
        fixed_arms: Optional[np.ndarray] = None,
        force_accept: bool = False,
        w_reg: Optional[float] = None,
    ):
        self.params = params
        self.planner = _check_planner(planner)
        self.schedule = RadiusSchedule(params)
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.fixed_arms = fixed_arms
        self.state = new_ada_state(params, force_accept, w_reg)
        self.w_reg = self.state.inner.W.matrix[0, 0]
        self.ops = OpCounter()
        self.n_rejected = 0

    @property
    def t(self) -> int:
        return self.state.inner.t

    @property
    def h_size(self) -> int:
        return self.state.h_size

    def select(self, arms: Arms) -> np.ndarray:
        st = self.state
        inner = st.inner
        if self.planner == "ts" or isinstance(arms, UnitBallArms):
            radius = st.conf_radius if st.conf_radius is not None else self.schedule.eta(1)
            return _plan(inner.theta, inner.W, radius, arms, "ts", self.rng, self.ops)
        if st.conf_radius is None:
            arms = np.atleast_2d(arms)
            _charge(self.ops, arms.shape[0] * self.params.d)
            return arms[int(np.argmax(np.linalg.norm(arms, axis=1)))]
        return _plan(inner.theta, inner.W, st.conf_radius, arms, "ofu", self.rng, self.ops)

    def update(self, arm: np.ndarray, reward: int) -> None:
        if not ada_step(self.state, arm, reward, self.fixed_arms, self.ops):
            self.n_rejected += 1

    def coverage(self, theta_star: np.ndarray) -> Optional[bool]:
        st = self.state
        if st.conf_radius is None:
            return bool(st.ball.contains(theta_star, tol=0.0))
        diff = theta_star - st.inner.theta
        return bool(diff @ st.inner.W.matrix @ diff <= st.conf_radius)

    def metadata(self) -> dict:
        return {"planning_radius": "eta_t", "theta_set_radius": "beta_t", "history_reg": "gamma_t",
                "D_initial": 2.0 * self.params.S, "W_initial_scale": self.w_reg, "ts_rejection": False,
                "rejected_rounds": self.n_rejected}


class GlmUcb:
    """Batch regularised MLE every round, preconditioned by ``V_t``.

    ``V_t = lam I + sum a a^T / kappa``; the MLE minimises
    ``sum logloss + (lam/2) ||theta||^2``; the bonus is
    ``sqrt(kappa lambda_t(delta)) ||a||_{V_t^{-1}}``.
    """

    name = "glm-ucb"

    def __init__(self, params: ProblemParams, T: int, planner: str = "ofu", rng=None, lam: float = 1.0,
                 mle_eps: float = 1e-6):
        self.params = params
        self.planner = _check_planner(planner)
        self.schedule = RadiusSchedule(params)
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.lam = lam
        self.mle_eps = mle_eps
        self.V = SpdMatrix.identity(params.d, lam)
        self.X = np.empty((T, params.d))
        self.y = np.empty(T)
        self.n = 0
        self.theta = np.zeros(params.d)
        self.ops = OpCounter()

    h_size = 0

    def radius(self) -> float:
        return self.params.kappa * self.schedule.lam(self.n + 1)

    def select(self, arms: Arms) -> np.ndarray:
        return _plan(self.theta, self.V, self.radius(), arms, self.planner, self.rng, self.ops)

    def update(self, arm: np.ndarray, reward: int) -> None:
        if self.n == self.X.shape[0]:
            self.X = np.vstack([self.X, np.empty_like(self.X)])
            self.y = np.concatenate([self.y, np.empty_like(self.y)])
        self.X[self.n] = arm
        self.y[self.n] = reward
        self.n += 1
        self.V.rank1_update(arm, 1.0 / self.params.kappa, self.ops)
        prob = MleProblem(self.X[: self.n], self.y[: self.n], self.lam / 2.0, self.V, self.mle_eps)
        self.theta = solve_mle(prob, self.ops, x0=self.theta)

    def coverage(self, theta_star: np.ndarray) -> Optional[bool]:
        diff = theta_star - self.theta
        return bool(diff @ self.V.matrix @ diff <= self.radius())

    def metadata(self) -> dict:
        return {"lambda": self.lam, "mle_reg": self.lam / 2.0, "bonus": "sqrt(kappa*lambda_t)",
                "mle_eps": self.mle_eps, "planner": self.planner}


class OnsBaseline:
    """Online Newton step on the log-loss with worst-case curvature ``1/kappa``.

    ``V <- V + a a^T / kappa``, ``theta <- Proj^V_{ball(S)}(theta - g V^{-1} a)``
    with ``g = mu(a^T theta) - r``.  Same bonus as :class:`GlmUcb`.
    """

    name = "ons"

    def __init__(self, params: ProblemParams, planner: str = "ofu", rng=None, lam: float = 1.0):
        self.params = params
        self.planner = _check_planner(planner)
        self.schedule = RadiusSchedule(params)
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.lam = lam
        self.V = SpdMatrix.identity(params.d, lam)
        self.theta = np.zeros(params.d)
        self.t = 1
        self.ball = Ball(params.S)
        self.ops = OpCounter()

    h_size = 0

    def radius(self) -> float:
        return self.params.kappa * self.schedule.lam(self.t)

    def select(self, arms: Arms) -> np.ndarray:
        return _plan(self.theta, self.V, self.radius(), arms, self.planner, self.rng, self.ops)

    def update(self, arm: np.ndarray, reward: int) -> None:
        if reward not in (0, 1):
            raise ValueError(f"reward must be 0 or 1, got {reward!r}")
        g = _sigmoid_scalar(float(arm @ self.theta)) - reward
        self.V.rank1_update(arm, 1.0 / self.params.kappa, self.ops)
        step = self.theta - g * (self.V.inv @ arm)
        _charge(self.ops, self.params.d**2)
        if not self.ball.contains(step, tol=0.0):
            # projection in the V metric, done as a Euclidean projection in z = L^T theta
            L = self.V.chol
            (pz,) = _z_projectors(self.ball, L)
            z = pz.project(L.T @ step)
            step = solve_triangular(L, z, lower=True, trans="T", check_finite=False)
            _charge(self.ops, self.params.d**3)
        self.theta = step
        self.t += 1

    def coverage(self, theta_star: np.ndarray) -> Optional[bool]:
        diff = theta_star - self.theta
        return bool(diff @ self.V.matrix @ diff <= self.radius())

    def metadata(self) -> dict:
        return {"lambda": self.lam, "curvature": "1/kappa", "projection": "V-metric onto ball(S)",
                "bonus": "sqrt(kappa*lambda_t)", "planner": self.planner}


ALGORITHMS = ("ofu-ecolog", "ts-ecolog", "ada-ofu-ecolog", "glm-ucb", "ons")


def make_learner(
    algorithm: str,
    params: ProblemParams,
    T: int,
    *,
    rng: Optional[np.random.Generator] = None,
    tau: Optional[int] = None,
    fixed_arms: Optional[np.ndarray] = None,
    unit_ball: bool = False,
    ada_w_reg: Optional[float] = None,
):
    """Build a learner by id.  On the unit ball every learner plans by Thompson sampling."""
    planner = "ts" if unit_ball else "ofu"
    if algorithm == "ofu-ecolog":
        return EcologAgent(params, T, planner, tau, rng, fixed_arms)
    if algorithm == "ts-ecolog":
        return EcologAgent(params, T, "ts", tau, rng, fixed_arms)
    if algorithm == "ada-ofu-ecolog":
        return AdaOfuEcolog(params, planner, rng, fixed_arms, w_reg=ada_w_reg)
    if algorithm == "glm-ucb":
        return GlmUcb(params, T, planner, rng)
    if algorithm == "ons":
        return OnsBaseline(params, planner, rng)
    raise ValueError(f"unknown algorithm id {algorithm!r}; known ids: {', '.join(ALGORITHMS)}")
