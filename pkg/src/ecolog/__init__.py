"""Logistic bandits with constant per-round cost.

Modules:

* :mod:`ecolog.logistic` - the logistic link, losses, kappa and radius schedules
* :mod:`ecolog.linalg` - incremental SPD factorizations and ellipsoid projections
* :mod:`ecolog.solvers` - the proximal step solver and the batch MLE
* :mod:`ecolog.learners` - warm-up, ECOLog learners and baselines
* :mod:`ecolog.sim` - environments, the episode runner and aggregation
* :mod:`ecolog.config`, :mod:`ecolog.cli` - experiment configuration and the benchmark CLI
"""

from .learners import ALGORITHMS, UNIT_BALL, make_learner
from .linalg import Ball, Ellipsoid, Intersection, OpCounter, SpdMatrix, diam_under_arms, project_ellipsoid
from .logistic import ProblemParams, RadiusSchedule, alpha_coeffs, dsigmoid, kappa_of, logloss, norm_for_kappa, sigmoid
from .sim import EnvSpec, Environment, TrajectoryLog, aggregate, make_environment, run_episode
from .solvers import MleProblem, ProxProblem, solve_mle, solve_prox

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS", "UNIT_BALL", "make_learner",
    "Ball", "Ellipsoid", "Intersection", "OpCounter", "SpdMatrix", "diam_under_arms", "project_ellipsoid",
    "ProblemParams", "RadiusSchedule", "alpha_coeffs", "dsigmoid", "kappa_of", "logloss", "norm_for_kappa", "sigmoid",
    "EnvSpec", "Environment", "TrajectoryLog", "aggregate", "make_environment", "run_episode",
    "MleProblem", "ProxProblem", "solve_mle", "solve_prox",
]
