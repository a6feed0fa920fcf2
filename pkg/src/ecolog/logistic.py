"""Scalar logistic primitives, problem constants and radius schedules."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

ArrayLike = Union[float, np.ndarray]

SCHEDULE_KINDS = ("lambda", "gamma", "beta", "nu", "sigma", "eta")


def _sigmoid_scalar(x: float) -> float:
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def sigmoid(x: ArrayLike) -> ArrayLike:
    """Logistic function 1/(1+exp(-x)), branching on sign so it never overflows."""
    if isinstance(x, (float, int)):
        return _sigmoid_scalar(float(x))
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return _sigmoid_scalar(float(x))
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ez = np.exp(x[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def dsigmoid(x: ArrayLike) -> ArrayLike:
    """Derivative of the logistic function, mu(x)(1 - mu(x))."""
    # evaluate at -|x| so the (1 - mu) factor never cancels
    if isinstance(x, (float, int)):
        m = _sigmoid_scalar(-abs(float(x)))
        return m * (1.0 - m)
    m = sigmoid(-np.abs(np.asarray(x, dtype=float)))
    return m * (1.0 - m)


def softplus(x: ArrayLike) -> ArrayLike:
    """log(1 + exp(x)) without overflow."""
    return np.logaddexp(0.0, x)


def logloss(x: ArrayLike, r: ArrayLike) -> tuple[ArrayLike, ArrayLike]:
    """Binary log-loss of logit ``x`` against label ``r`` and its derivative in ``x``.

    Returns ``(value, gradient)`` where the gradient is ``mu(x) - r``.
    """
    r_arr = np.asarray(r)
    if not np.all((r_arr == 0) | (r_arr == 1)):
        raise ValueError(f"labels must be 0 or 1, got {r!r}")
    x_arr = np.asarray(x, dtype=float)
    # -r log mu(x) - (1-r) log(1-mu(x)) = softplus(x) - r x
    value = np.where(r_arr == 1, softplus(-x_arr), softplus(x_arr))
    grad = sigmoid(x_arr) - r_arr
    if value.ndim == 0:
        return float(value), float(grad)
    return value, grad


def kappa_of(S: float) -> float:
    """Inverse minimal reward sensitivity 1/dsigmoid(S) over the unit ball of arms."""
    if S < 0:
        raise ValueError(f"S must be nonnegative, got {S}")
    return 1.0 / dsigmoid(float(S))


def norm_for_kappa(kappa: float) -> float:
    """Closed-form inverse of :func:`kappa_of`: the S >= 0 with kappa_of(S) == kappa."""
    if kappa < 4.0:
        raise ValueError(f"kappa must be >= 4, got {kappa}")
    m = 0.5 * (1.0 + math.sqrt(1.0 - 4.0 / kappa))
    if m >= 1.0:
        raise ValueError(f"kappa={kappa} too large to invert in double precision")
    return math.log(m / (1.0 - m))


@dataclass(frozen=True)
class ProblemParams:
    """Dimension ``d``, norm bound ``S`` and failure level ``delta``.

    ``kappa`` is derived from ``S`` and never stored independently.
    """

    d: int
    S: float
    delta: float = 0.05

    def __post_init__(self) -> None:
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"d must be a positive integer, got {self.d}")
        if not self.S > 0:
            raise ValueError(f"S must be positive, got {self.S}")
        if not 0.0 < self.delta <= 1.0:
            raise ValueError(f"delta must lie in (0, 1], got {self.delta}")

    @property
    def kappa(self) -> float:
        return kappa_of(self.S)


class RadiusSchedule:
    """Confidence radii as functions of the round index (natural logarithms)."""

    def __init__(self, params: ProblemParams):
        self.params = params

    @staticmethod
    def _check_t(t: float) -> None:
        if t < 1:
            raise ValueError(f"round index must be >= 1, got {t}")

    def lam(self, t: float) -> float:
        self._check_t(t)
        p = self.params
        return p.d * math.log((4.0 + t / 4.0) / p.delta)

    def gamma(self, t: float) -> float:
        return (self.params.S + 1.5) ** 2 * self.lam(t)

    def beta(self, t: float) -> float:
        S = self.params.S
        return (2.5 + (S + 1.5) ** 2 + S) ** 2 * self.gamma(t)

    def nu(self, t: float) -> float:
        self._check_t(t)
        return 0.5 + 2.0 * math.log(2.0 * math.sqrt(t / 4.0 + 1.0) / self.params.delta)

    def sigma(self, t: float) -> float:
        self._check_t(t)
        p = self.params
        return (
            8.0 * p.S**2
            + 6.0
            + 4.0 * math.log(t)
            + 9.0 * self.nu(t)
            + 18.0 * math.e * p.d * math.log(1.0 + t / (4.0 * p.d))
        )

    def eta(self, t: float) -> float:
        self._check_t(t)
        p = self.params
        return (
            4.0
            + 4.0 * math.log(t)
            + 16.0 * p.S**2
            + (2.0 + 2.0 * p.S) ** 2 * self.nu(t) / 2.0
            + 8.0 * (1.0 + p.S) * p.d * math.log(1.0 + t / p.d)
        )

    def __call__(self, kind: str, t: float) -> float:
        name = "lam" if kind == "lambda" else kind
        if kind not in SCHEDULE_KINDS:
            raise ValueError(f"unknown schedule kind {kind!r}; expected one of {SCHEDULE_KINDS}")
        return getattr(self, name)(t)


def schedule_eval(kind: str, t: float, params: ProblemParams) -> float:
    return RadiusSchedule(params)(kind, t)


# Derivatives of mu written with s = mu(1 - mu) and p = 1 - 2 mu.
def _mu_derivs(x: float) -> tuple[float, float, float, float]:
    m = _sigmoid_scalar(x)
    s = m * (1.0 - m)
    p = 1.0 - 2.0 * m
    return s, s * p, s * p * p - 2.0 * s * s, s * p**3 - 8.0 * s * s * p


_ALPHA_SERIES_GAP = 1e-3
_ALPHA_TILDE_SERIES_GAP = 1e-2


def alpha_coeffs(x: float, y: float) -> tuple[float, float]:
    """Exact-Taylor coefficients between logits ``x`` and ``y``.

    ``alpha`` averages mu' along the segment [x, y]; ``alpha_tilde`` weights the
    average by (1 - v), so that
    ``softplus(y) = softplus(x) + (y - x) mu(x) + alpha_tilde (y - x)^2``.
    Short segments use a Taylor series to dodge cancellation.
    """
    x = float(x)
    y = float(y)
    # both coefficients are invariant under (x, y) -> (-x, -y); evaluate with x <= 0
    if x > 0:
        x, y = -x, -y
    h = y - x
    if abs(h) < _ALPHA_TILDE_SERIES_GAP:
        d1, d2, d3, d4 = _mu_derivs(x)
        at = d1 / 2 + d2 * h / 6 + d3 * h * h / 24 + d4 * h**3 / 120
        if abs(h) < _ALPHA_SERIES_GAP:
            a = d1 + d2 * h / 2 + d3 * h * h / 6 + d4 * h**3 / 24
            return a, at
    else:
        num = (float(softplus(y)) - float(softplus(x))) - h * _sigmoid_scalar(x)
        at = num / (h * h)
    if x + y > 0:
        a = (_sigmoid_scalar(-x) - _sigmoid_scalar(-y)) / h
    else:
        a = (_sigmoid_scalar(y) - _sigmoid_scalar(x)) / h
    return a, at
