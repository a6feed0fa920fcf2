"""Experiment configuration: a flat ``key = value`` text format.

Schema (``*`` marks required keys)::

    d*            int >= 1            problem dimension
    T*            int >= 1            horizon
    algorithms*   comma list          subset of ofu-ecolog, ts-ecolog, ada-ofu-ecolog, glm-ucb, ons
    kappa         float >= 4          target kappa; theta_star is drawn with the matching norm
    theta_star    comma list          explicit parameter (give kappa or theta_star, not both)
    S             float > 0           norm bound; default ||theta_star||
    armset        fixed | contextual | unit-ball          (default fixed)
    K             int >= 1            arms per round for finite sets (default 20)
    n_runs        int >= 1            independent runs (default 1)
    delta         float in (0, 1)     confidence level (default 0.05)
    tau_override  int >= 0 | auto     warm-up length for ofu/ts-ecolog (default auto)
    ada_w_reg     float >= 1 | auto   initial W scale of ada-ofu-ecolog (default auto)
    seed          int >= 0            master seed (default 0)
    out           path                output directory (default results)
    timing        wall | off          per-round wall clock, or zeros (default wall)
    workers       int >= 1            parallel cells (default 1)

Blank lines and ``#`` comments are ignored.  ``none`` or ``auto`` leave an
optional key unset.  When neither kappa nor theta_star is given, kappa
defaults to 400.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

from .learners import ALGORITHMS
from .logistic import norm_for_kappa
from .sim import ARMSET_KINDS

DEFAULT_KAPPA = 400.0
_UNSET = ("none", "auto", "")


class ConfigError(ValueError):
    """Schema violation; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class ExperimentConfig:
    d: int
    T: int
    algorithms: tuple[str, ...]
    kappa: Optional[float] = None
    theta_star: Optional[tuple[float, ...]] = None
    S: Optional[float] = None
    armset: str = "fixed"
    K: int = 20
    n_runs: int = 1
    delta: float = 0.05
    tau_override: Optional[int] = None
    ada_w_reg: Optional[float] = None
    seed: int = 0
    out: str = "results"
    timing: str = "wall"
    workers: int = 1

    def __post_init__(self) -> None:
        _validate(self)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    @property
    def theta_star_array(self) -> Optional[np.ndarray]:
        return None if self.theta_star is None else np.array(self.theta_star, dtype=float)


KEYS = tuple(f.name for f in dataclasses.fields(ExperimentConfig))
REQUIRED = ("d", "T", "algorithms")


def _validate(c: ExperimentConfig) -> None:
    if c.d < 1:
        raise ConfigError("d", f"must be >= 1, got {c.d}")
    if c.T < 1:
        raise ConfigError("T", f"must be >= 1, got {c.T}")
    if not c.algorithms:
        raise ConfigError("algorithms", "at least one algorithm is required")
    for a in c.algorithms:
        if a not in ALGORITHMS:
            raise ConfigError("algorithms", f"unknown algorithm id {a!r} (known: {', '.join(ALGORITHMS)})")
    if len(set(c.algorithms)) != len(c.algorithms):
        raise ConfigError("algorithms", "duplicate algorithm id")
    if c.kappa is not None and c.theta_star is not None:
        raise ConfigError("kappa", "give exactly one of kappa or theta_star")
    if c.kappa is None and c.theta_star is None:
        raise ConfigError("kappa", "give exactly one of kappa or theta_star")
    if c.kappa is not None and not (math.isfinite(c.kappa) and c.kappa >= 4.0):
        raise ConfigError("kappa", f"must be a finite number >= 4, got {c.kappa}")
    if c.theta_star is not None:
        if len(c.theta_star) != c.d:
            raise ConfigError("theta_star", f"needs {c.d} entries, got {len(c.theta_star)}")
        if not all(math.isfinite(v) for v in c.theta_star):
            raise ConfigError("theta_star", "entries must be finite")
    if c.S is not None:
        if not (math.isfinite(c.S) and c.S > 0):
            raise ConfigError("S", f"must be positive, got {c.S}")
        norm = float(np.linalg.norm(c.theta_star)) if c.theta_star is not None else norm_for_kappa(c.kappa)
        if norm > c.S * (1.0 + 1e-12):
            raise ConfigError("S", f"||theta_star|| = {norm:.6g} exceeds S = {c.S}")
    if c.armset not in ARMSET_KINDS:
        raise ConfigError("armset", f"must be one of {', '.join(ARMSET_KINDS)}, got {c.armset!r}")
    if c.K < 1:
        raise ConfigError("K", f"must be >= 1, got {c.K}")
    if c.n_runs < 1:
        raise ConfigError("n_runs", f"must be >= 1, got {c.n_runs}")
    if not 0.0 < c.delta < 1.0:
        raise ConfigError("delta", f"must lie in (0, 1), got {c.delta}")
    if c.tau_override is not None and c.tau_override < 0:
        raise ConfigError("tau_override", f"must be >= 0, got {c.tau_override}")
    if c.ada_w_reg is not None and not c.ada_w_reg >= 1.0:
        raise ConfigError("ada_w_reg", f"must be >= 1, got {c.ada_w_reg}")
    if c.seed < 0:
        raise ConfigError("seed", f"must be >= 0, got {c.seed}")
    if c.timing not in ("wall", "off"):
        raise ConfigError("timing", f"must be 'wall' or 'off', got {c.timing!r}")
    if c.workers < 1:
        raise ConfigError("workers", f"must be >= 1, got {c.workers}")
    if not c.out:
        raise ConfigError("out", "must not be empty")


def _int(key: str, v: str) -> int:
    try:
        return int(v)
    except ValueError:
        raise ConfigError(key, f"expected an integer, got {v!r}") from None


def _float(key: str, v: str) -> float:
    try:
        return float(v)
    except ValueError:
        raise ConfigError(key, f"expected a number, got {v!r}") from None


def _convert(key: str, raw: str):
    v = raw.strip()
    if key in ("d", "T", "K", "n_runs", "seed", "workers"):
        return _int(key, v)
    if key in ("kappa", "S", "ada_w_reg", "tau_override"):
        if v.lower() in _UNSET:
            return None
        return _int(key, v) if key == "tau_override" else _float(key, v)
    if key == "delta":
        return _float(key, v)
    if key == "theta_star":
        if v.lower() in _UNSET:
            return None
        return tuple(_float(key, x) for x in v.split(","))
    if key == "algorithms":
        return tuple(x.strip() for x in v.split(",") if x.strip())
    return v


def parse_text(text: str) -> dict:
    """``key = value`` lines to a dict of raw strings (duplicates and unknown keys are errors)."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(key, "unknown key")
        if key in out:
            raise ConfigError(key, f"given twice (line {lineno})")
        out[key] = value
    return out


def build_config(raw: Mapping[str, object]) -> ExperimentConfig:
    """Validate a mapping of raw values (strings or already-typed) and resolve defaults."""
    values = {}
    for key, v in raw.items():
        if key not in KEYS:
            raise ConfigError(key, "unknown key")
        values[key] = _convert(key, v) if isinstance(v, str) else v
    for key in REQUIRED:
        if key not in values:
            raise ConfigError(key, "missing required key")
    if values.get("kappa") is None and values.get("theta_star") is None:
        values["kappa"] = DEFAULT_KAPPA
    if values.get("theta_star") is not None:
        values["theta_star"] = tuple(float(x) for x in values["theta_star"])
    values["algorithms"] = tuple(values["algorithms"])
    return ExperimentConfig(**values)


def parse_config(path: Optional[str | Path] = None, overrides: Optional[Mapping[str, object]] = None) -> ExperimentConfig:
    """Read ``path`` (if given), apply ``overrides`` on top and validate."""
    raw: dict[str, object] = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError("config", f"file not found: {p}")
        raw.update(parse_text(p.read_text()))
    if overrides:
        raw.update(overrides)
    return build_config(raw)


def _fmt(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def serialize(c: ExperimentConfig) -> str:
    """Every key with its resolved value, one per line; :func:`parse_text` reads it back."""
    lines = []
    for key in KEYS:
        v = getattr(c, key)
        if v is None and key in ("kappa", "theta_star", "S"):
            v_str = "none"
        else:
            v_str = _fmt(v)
        lines.append(f"{key} = {v_str}")
    return "\n".join(lines) + "\n"


def as_dict(c: ExperimentConfig) -> dict:
    d = dataclasses.asdict(c)
    d["algorithms"] = list(c.algorithms)
    if c.theta_star is not None:
        d["theta_star"] = list(c.theta_star)
    return d
