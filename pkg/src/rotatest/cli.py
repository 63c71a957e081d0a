"""Command-line front end.

    rotatest experiment --experiment 1 --m 1,2,3 --reps 5000 --out results/
    rotatest verify --seed 0 --cases 1000

Exit status: 0 on success, 1 when too many replications fail (experiment) or
an identity is violated (verify), 2 on usage errors.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ReplicationFailureError
from .models import BUILTIN_ORDER, available_models
from .montecarlo import Experiment, ExperimentConfig, edf_to_csv, run_experiment
from .permtest import pvalue_matrix
from .verify import TOLERANCES, run_suite

log = logging.getLogger("rotatest")

SEED_ENV = "ROTATEST_SEED"

# flag defaults; the keys double as the accepted config-file keys
_EXPERIMENT_DEFAULTS = {
    "experiment": 1,
    "m": "1,2,3",
    "trials": 96,
    "reps": 5000,
    "grid": 100,
    "seed": None,
    "models": ",".join(BUILTIN_ORDER),
    "out": "rotatest-out",
    "perms": 10_000,
    "jobs": None,
    "svg": False,
}


class UsageError(Exception):
    pass


def _int_list(text):
    try:
        return tuple(int(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


def read_config(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment.  Keys are flag names
    without dashes (``reps``, ``m``, ``models``, ...)."""
    out = {}
    try:
        fh = open(path)
    except OSError as e:
        raise UsageError(f"cannot read config file: {e}") from None
    with fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip().replace("-", "_")
            if not sep or key not in _EXPERIMENT_DEFAULTS:
                raise UsageError(f"{path}:{lineno}: unrecognised config line {line!r}")
            out[key] = value.strip()
    return out


def _resolve_seed(value):
    if value is None:
        value = os.environ.get(SEED_ENV, 0)
    try:
        return int(value)
    except ValueError:
        raise UsageError(f"seed must be an integer, got {value!r}") from None


def _settings(args) -> dict:
    """Merge defaults < config file < command-line flags."""
    s = dict(_EXPERIMENT_DEFAULTS)
    if args.config:
        s.update(read_config(args.config))
    for k in _EXPERIMENT_DEFAULTS:
        v = getattr(args, k, None)
        if v is not None and v is not False:
            s[k] = v
    try:
        s["experiment"] = int(s["experiment"])
        s["trials"] = int(s["trials"])
        s["reps"] = int(s["reps"])
        s["grid"] = int(s["grid"])
        s["perms"] = int(s["perms"])
        s["jobs"] = None if s["jobs"] in (None, "") else int(s["jobs"])
    except ValueError as e:
        raise UsageError(str(e)) from None
    if isinstance(s["svg"], str):
        s["svg"] = s["svg"].lower() in ("1", "true", "yes", "on")
    if s["experiment"] not in (1, 2):
        raise UsageError("--experiment must be 1 or 2")
    if s["perms"] < 1:
        raise UsageError("--perms must be positive")
    s["m"] = _int_list(s["m"])
    s["models"] = tuple(v.strip() for v in str(s["models"]).split(",") if v.strip())
    unknown = [g for g in s["models"] if g not in available_models()]
    if unknown:
        raise UsageError(f"unknown models: {', '.join(unknown)}")
    s["seed"] = _resolve_seed(s["seed"])
    return s


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def plot_data_tsv(edfs, path=None) -> str:
    """Sorted KS values of each model against cumulative probability i/reps."""
    reps = len(edfs[0])
    lines = ["\t".join(["cumprob"] + [e.generator for e in edfs])]
    for i in range(reps):
        row = [repr((i + 1) / reps)] + [repr(float(e.values[i])) for e in edfs]
        lines.append("\t".join(row))
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def _write_svg(edfs, path, title):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for e in edfs:
        y = np.arange(1, len(e) + 1) / len(e)
        ax.step(e.values, y, where="post", label=e.generator)
    ax.set_xlabel("KS statistic")
    ax.set_ylabel("cumulative probability")
    ax.set_title(title)
    ax.legend()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def cmd_experiment(args) -> int:
    s = _settings(args)
    out = Path(s["out"])
    exp = Experiment.from_number(s["experiment"])
    try:
        config = ExperimentConfig(
            experiment=exp, total_trials=s["trials"], m_values=s["m"], replications=s["reps"],
            grid_points=s["grid"], master_seed=s["seed"], models=s["models"],
        )
    except ValueError as e:
        raise UsageError(str(e)) from None
    out.mkdir(parents=True, exist_ok=True)

    manifest = {
        "tool": "rotatest",
        "version": __version__,
        "config": {
            "experiment": exp.number, "m": list(config.m_values), "trials": config.total_trials,
            "reps": config.replications, "grid": config.grid_points, "seed": config.master_seed,
            "models": list(config.models), "perms": s["perms"],
        },
        "started": _now(),
        "cells": [],
        "files": {},
    }
    status = 0
    try:
        edfs = run_experiment(config, jobs=s["jobs"])
    except ReplicationFailureError as e:
        log.error("%s", e)
        edfs = e.results
        status = 1
        manifest["error"] = str(e)

    tag = f"exp{exp.number}"
    for e in edfs:
        name = f"edf_{tag}_{e.generator}_{e.fitted}_m{e.m}.csv"
        edf_to_csv(e, out / name)
        manifest["cells"].append({
            "generator": e.generator, "fitted": e.fitted, "m": e.m, "file": name,
            "boundary_count": e.boundary_count, "failure_count": e.failure_count,
        })

    if status == 0:
        for m in config.m_values:
            cell = [e for e in edfs if e.m == m]
            name = f"plot_{tag}_m{m}.tsv"
            plot_data_tsv(cell, out / name)
            manifest["files"][f"plot_m{m}"] = name
            if s["svg"]:
                svg = f"plot_{tag}_m{m}.svg"
                _write_svg(cell, out / svg, f"experiment {exp.number}, m = {m}")
                manifest["files"][f"svg_m{m}"] = svg
        if len(config.models) > 1:
            pm = pvalue_matrix(edfs, N=s["perms"], master_seed=config.master_seed)
            pm.to_table_csv(list(config.models), list(config.m_values), out / f"pvalues_{tag}.csv")
            (out / f"pvalues_{tag}.json").write_text(pm.to_json(indent=2) + "\n")
            manifest["files"]["pvalues_csv"] = f"pvalues_{tag}.csv"
            manifest["files"]["pvalues_json"] = f"pvalues_{tag}.json"
            for a, b, p in pm.pairs():
                log.info("p(%s m=%d, %s m=%d) = %.4f", a[0], a[1], b[0], b[1], p)

    manifest["finished"] = _now()
    manifest["status"] = "ok" if status == 0 else "replication_failures"
    (out / f"manifest_{tag}.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"wrote {len(edfs)} EDF files to {out}")
    return status


def cmd_verify(args) -> int:
    seed = _resolve_seed(args.seed)
    if args.cases < 1:
        raise UsageError("--cases must be positive")
    normalize = args.inject_fault != "skip-normalization"
    res = run_suite(seed, args.cases, normalize=normalize)
    print(f"verify: seed={seed} cases={args.cases}")
    for k, v in res.max_residuals.items():
        print(f"  {k:20s} max residual {v:.3e}  (tol {TOLERANCES[k]:.0e})")
    if res.ok:
        print("all identities hold")
        return 0
    for c in res.failed[:20]:
        print(f"FAIL case {c.index} (seed={seed}, model={c.model}, m={c.m}, theta={c.theta:.6g}): "
              + ", ".join(f"{k}={c.residuals[k]:.3e}" for k in c.failures()))
    print(f"{len(res.failed)} of {len(res.cases)} cases failed")
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rotatest", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"rotatest {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    e = sub.add_parser("experiment", help="run a Monte Carlo experiment")
    e.add_argument("--experiment", type=int, choices=(1, 2),
                   help="1: fit the generating model, 2: fit logistic to every generator")
    e.add_argument("--m", help="comma-separated group sizes (default 1,2,3)")
    e.add_argument("--trials", type=int, help="trials per sample (default 96)")
    e.add_argument("--reps", type=int, help="replications per cell (default 5000)")
    e.add_argument("--grid", type=int, help="covariate grid points (default 100)")
    e.add_argument("--seed", type=int, help=f"master seed (default ${SEED_ENV} or 0)")
    e.add_argument("--models", help="comma-separated generator models")
    e.add_argument("--out", help="output directory (default rotatest-out)")
    e.add_argument("--perms", type=int, help="random splits per p-value (default 10000)")
    e.add_argument("--jobs", type=int, help="worker processes (default: all cores)")
    e.add_argument("--svg", action="store_true", help="also write SVG plots (needs matplotlib)")
    e.add_argument("--config", help="key=value file; command-line flags take precedence")
    e.set_defaults(func=cmd_experiment)

    v = sub.add_parser("verify", help="check the rotation identities on random cases")
    v.add_argument("--seed", type=int)
    v.add_argument("--cases", type=int, default=1000)
    v.add_argument("--inject-fault", choices=("skip-normalization",), help=argparse.SUPPRESS)
    v.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"rotatest: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
