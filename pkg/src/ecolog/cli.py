"""``ecolog-bench``: run configured experiments or the invariant suites.

Exit codes: 0 success, 1 configuration error, 2 run failure (a cell raised
or output could not be written), 3 property-check failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import platform
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import metadata as importlib_metadata
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import checks
from .config import ConfigError, ExperimentConfig, as_dict, parse_config, parse_text, serialize
from .logistic import kappa_of
from .sim import EnvSpec, aggregate, make_environment, run_episode, stream

LONG_COLUMNS = ("run_id", "t", "algorithm", "regret_cum", "elapsed_ns", "op_count", "h_size", "coverage_flag")
AGG_COLUMNS = ("algorithm", "t", "n_runs", "regret_mean", "regret_std", "regret_min", "regret_max",
               "elapsed_ns_mean", "op_count_mean")
EXIT_OK, EXIT_CONFIG, EXIT_RUN, EXIT_CHECK = 0, 1, 2, 3


def run_seeds(master: int, n_runs: int) -> list[int]:
    """Per-run seeds from their own named stream; all algorithms of a run share one."""
    return [int(s) for s in stream(master, "runs").integers(0, 2**63 - 1, size=n_runs)]


def h_envelope(S: float, kappa: float, d: int, T: int, delta: float) -> int:
    """``S^6 kappa d^2 log(T/delta)^2`` with unit constant, rounded up."""
    return int(math.ceil(S**6 * kappa * d * d * math.log(T / delta) ** 2))


@dataclass
class CellResult:
    run_id: int
    algorithm: str
    seed: int
    ok: bool
    error: Optional[str] = None
    regret_cum: Optional[np.ndarray] = None
    elapsed_ns: Optional[np.ndarray] = None
    op_count: Optional[np.ndarray] = None
    h_size: Optional[np.ndarray] = None
    coverage: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict)


def _env_spec(cfg: ExperimentConfig) -> EnvSpec:
    return EnvSpec(d=cfg.d, armset=cfg.armset, K=cfg.K, theta_star=cfg.theta_star_array, kappa=cfg.kappa, S=cfg.S)


def run_cell(cfg: ExperimentConfig, run_id: int, seed: int, algorithm: str) -> CellResult:
    """One (run, algorithm) episode.  Exceptions are captured, never raised."""
    try:
        env = make_environment(_env_spec(cfg), seed)
        log = run_episode(algorithm, env, cfg.T, seed, tau=cfg.tau_override, timing=cfg.timing == "wall",
                          delta=cfg.delta, ada_w_reg=cfg.ada_w_reg)
    except Exception as exc:  # the cell fails, the experiment goes on
        tb = traceback.format_exception_only(type(exc), exc)
        return CellResult(run_id, algorithm, seed, False, error="".join(tb).strip())
    meta = dict(log.metadata)
    meta.update(S=env.S, kappa=kappa_of(env.S), theta_star=[float(v) for v in env.theta_star])
    if algorithm == "ada-ofu-ecolog":
        meta["h_envelope_unit_const"] = h_envelope(env.S, kappa_of(env.S), cfg.d, cfg.T, cfg.delta)
    return CellResult(run_id, algorithm, seed, True, regret_cum=log.regret_cum, elapsed_ns=log.elapsed_ns,
                      op_count=log.op_count, h_size=log.h_size, coverage=log.coverage, metadata=meta)


def _versions() -> dict:
    out = {"python": platform.python_version()}
    for pkg in ("artifact", "numpy", "scipy", "numba"):
        try:
            out[pkg] = importlib_metadata.version(pkg)
        except importlib_metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def _write_long(path: Path, cells: Sequence[CellResult]) -> int:
    rows = 0
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LONG_COLUMNS)
        for c in cells:
            if not c.ok:
                continue
            for i in range(c.regret_cum.size):
                w.writerow((c.run_id, i + 1, c.algorithm, repr(float(c.regret_cum[i])), int(c.elapsed_ns[i]),
                            int(c.op_count[i]), int(c.h_size[i]), int(c.coverage[i])))
                rows += 1
    return rows


def _write_aggregate(path: Path, cfg: ExperimentConfig, cells: Sequence[CellResult]) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGG_COLUMNS)
        for algo in cfg.algorithms:
            logs = [c for c in cells if c.ok and c.algorithm == algo]
            if not logs:
                continue
            reg = aggregate(logs, "regret_cum")
            el = aggregate(logs, "elapsed_ns")["mean"]
            ops = aggregate(logs, "op_count")["mean"]
            for i in range(cfg.T):
                w.writerow((algo, i + 1, reg["n"], repr(float(reg["mean"][i])), repr(float(reg["std"][i])),
                            repr(float(reg["min"][i])), repr(float(reg["max"][i])), repr(float(el[i])),
                            repr(float(ops[i]))))


@dataclass
class ExperimentResult:
    out_dir: Path
    cells: list[CellResult]
    rows: int

    @property
    def failures(self) -> list[CellResult]:
        return [c for c in self.cells if not c.ok]


def run_experiment(cfg: ExperimentConfig, log=None) -> ExperimentResult:
    """Run every (run, algorithm) cell and write the CSV files and metadata.

    Output files in ``cfg.out``: ``trajectories.csv`` (long format),
    ``aggregate.csv`` (per algorithm and round), ``metadata.json`` and
    ``config.txt`` (the resolved configuration).
    """
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    seeds = run_seeds(cfg.seed, cfg.n_runs)
    jobs = [(run_id, seeds[run_id], algo) for run_id in range(cfg.n_runs) for algo in cfg.algorithms]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = [pool.submit(run_cell, cfg, *job) for job in jobs]
            cells = [f.result() for f in futures]
    else:
        cells = []
        for job in jobs:
            cells.append(run_cell(cfg, *job))
            if log is not None:
                c = cells[-1]
                status = f"regret={c.regret_cum[-1]:.3f}" if c.ok else f"FAILED: {c.error}"
                log(f"run {c.run_id} {c.algorithm}: {status}")

    rows = _write_long(out / "trajectories.csv", cells)
    _write_aggregate(out / "aggregate.csv", cfg, cells)
    (out / "config.txt").write_text(serialize(cfg))
    meta = {
        "created": datetime.now(timezone.utc).isoformat(),
        "versions": _versions(),
        "config": as_dict(cfg),
        "seeds": {"master": cfg.seed, "runs": seeds, "streams": ["arms", "rewards", "theta", "ts", "runs"]},
        "columns": {"trajectories": list(LONG_COLUMNS), "aggregate": list(AGG_COLUMNS)},
        "coverage_flag": {"1": "theta_star in confidence set", "0": "not covered", "-1": "undefined (warm-up)"},
        "cells": [
            {
                "run_id": c.run_id, "algorithm": c.algorithm, "seed": c.seed, "status": "ok" if c.ok else "failed",
                **({"final_regret": float(c.regret_cum[-1]), "final_h_size": int(c.h_size[-1]),
                    "uncovered_rounds": int((c.coverage == 0).sum()), "constants": c.metadata} if c.ok else
                   {"error": c.error}),
            }
            for c in cells
        ],
        "failures": [{"run_id": c.run_id, "algorithm": c.algorithm, "error": c.error} for c in cells if not c.ok],
        "rows": rows,
    }
    (out / "metadata.json").write_text(json.dumps(meta, indent=2, sort_keys=False) + "\n")
    return ExperimentResult(out, cells, rows)


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ecolog-bench", description=__doc__.splitlines()[0])
    p.add_argument("--config", metavar="PATH", help="flat key = value configuration file")
    p.add_argument("--out", metavar="DIR", help="output directory (overrides 'out')")
    p.add_argument("--seed", type=int, metavar="N", help="master seed (overrides 'seed')")
    p.add_argument("--algos", metavar="LIST", help="comma-separated algorithm ids (overrides 'algorithms')")
    p.add_argument("--runs", type=int, metavar="N", help="number of runs (overrides 'n_runs')")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any configuration key; repeatable")
    p.add_argument("--check", action="store_true", help="run the invariant suites only")
    p.add_argument("-q", "--quiet", action="store_true", help="no progress output")
    return p


def _overrides(args) -> dict:
    over: dict[str, object] = {}
    for item in args.set:
        over.update(parse_text(item))
    if args.out is not None:
        over["out"] = args.out
    if args.seed is not None:
        over["seed"] = args.seed
    if args.algos is not None:
        over["algorithms"] = args.algos
    if args.runs is not None:
        over["n_runs"] = args.runs
    return over


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    say = (lambda *_: None) if args.quiet else (lambda msg: print(msg, flush=True))

    if args.check:
        results = checks.run_all(seed=args.seed or 0)
        for r in results:
            say(r.line())
        failed = [r for r in results if not r.passed]
        say(f"{len(results) - len(failed)}/{len(results)} suites passed")
        return EXIT_CHECK if failed else EXIT_OK

    try:
        cfg = parse_config(args.config, _overrides(args))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    say(serialize(cfg).rstrip())
    try:
        res = run_experiment(cfg, log=say)
    except OSError as exc:
        print(f"run error: {exc}", file=sys.stderr)
        return EXIT_RUN
    for c in res.failures:
        print(f"cell failed: run {c.run_id} {c.algorithm}: {c.error}", file=sys.stderr)
    say(f"wrote {res.rows} rows to {res.out_dir / 'trajectories.csv'}")
    return EXIT_RUN if res.failures else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
