"""Replicated generate / fit / rotate / KS runs.

Each replication draws from its own random stream keyed by
``(master_seed, generator, m, replication, attempt)``, so results do not
depend on how replications are scheduled across workers.  A replication
whose fit or rotation fails (singular information in some subgroup) is
redrawn with the next ``attempt`` and counted.
"""
from __future__ import annotations

import csv
import enum
import io
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ReplicationFailureError
from .mle import fit_batch
from .models import BUILTIN_ORDER, get_model
from .process import DEFAULT_GRID, ks_batch
from .sampler import generate_sample, stream

log = logging.getLogger(__name__)

BLOCK_SIZE = 250
MAX_ATTEMPTS = 50


class Experiment(str, enum.Enum):
    CORRECT_FIT = "CORRECT_FIT"     # fit the generating family
    LOGISTIC_FIT = "LOGISTIC_FIT"   # fit the logistic family to every generator

    @classmethod
    def from_number(cls, k: int) -> "Experiment":
        return {1: cls.CORRECT_FIT, 2: cls.LOGISTIC_FIT}[int(k)]

    @property
    def number(self) -> int:
        return 1 if self is Experiment.CORRECT_FIT else 2


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: Experiment = Experiment.CORRECT_FIT
    total_trials: int = 96
    m_values: tuple = (1, 2, 3)
    replications: int = 5000
    grid_points: int = DEFAULT_GRID
    master_seed: int = 0
    models: tuple = BUILTIN_ORDER
    max_failure_rate: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "experiment", Experiment(self.experiment))
        object.__setattr__(self, "m_values", tuple(int(m) for m in self.m_values))
        object.__setattr__(self, "models", tuple(self.models))
        for m in self.m_values:
            if m not in (1, 2, 3):
                raise ValueError(f"m must be 1, 2 or 3, got {m}")
            if self.total_trials % m:
                raise ValueError(f"total_trials={self.total_trials} is not divisible by m={m}")
        if self.replications < 1 or self.grid_points < 1 or self.total_trials < 1:
            raise ValueError("replications, grid_points and total_trials must be positive")
        for name in self.models:
            get_model(name)

    def fitted_model(self, generator: str) -> str:
        if self.experiment is Experiment.LOGISTIC_FIT:
            return "logistic"
        return generator


@dataclass
class EDFSample:
    """Sorted KS statistics for one (generator, fitted model, m) cell."""

    generator: str
    fitted: str
    m: int
    values: np.ndarray
    boundary_count: int = 0
    failure_count: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.sort(np.asarray(self.values, dtype=float))

    def __len__(self):
        return self.values.size

    def evaluate(self, t):
        return edf_evaluate(self, t)


def edf_evaluate(edf, t):
    """Right-continuous EDF: fraction of values ``<= t``."""
    values = edf.values if isinstance(edf, EDFSample) else np.sort(np.asarray(edf, dtype=float))
    r = np.searchsorted(values, t, side="right") / values.size
    return float(r) if np.ndim(r) == 0 else r


def replication_stream(master_seed, generator, m, replication, attempt=0):
    return stream(master_seed, generator, m, replication, attempt)


def run_block(generator, fitted, m, n, start, stop, master_seed, grid_points=DEFAULT_GRID):
    """Run replications ``start..stop-1`` of one cell.

    Returns ``(ks, at_boundary, failures)``.
    """
    gen = get_model(generator)
    fit = get_model(fitted)
    reps = np.arange(start, stop)
    ks = np.empty(reps.size)
    boundary = np.zeros(reps.size, dtype=bool)
    attempts = np.zeros(reps.size, dtype=int)
    failures = 0
    todo = np.arange(reps.size)
    while todo.size:
        samples = [
            generate_sample(gen, gen.theta0, n, m,
                            replication_stream(master_seed, gen.name, m, reps[i], attempts[i]))
            for i in todo
        ]
        X = np.stack([s.covariates for s in samples])
        Y = np.stack([s.outcomes for s in samples])
        th, _, conv, bnd = fit_batch(fit, X.reshape(todo.size, -1), Y.reshape(todo.size, -1))
        k, _, _, sing = ks_batch(fit, X, Y, th, grid_points)
        bad = sing | ~conv | ~np.isfinite(k)
        ks[todo[~bad]] = k[~bad]
        boundary[todo[~bad]] = bnd[~bad]
        failures += int(bad.sum())
        attempts[todo[bad]] += 1
        todo = todo[bad]
        if todo.size and attempts.max() > MAX_ATTEMPTS:
            raise ReplicationFailureError(
                f"{generator}/{fitted} m={m}: replication kept failing after {MAX_ATTEMPTS} redraws",
                failures=failures, replications=reps.size,
            )
    return ks, boundary, failures


def _run_block_task(args):
    return run_block(*args)


def _resolve_jobs(jobs):
    if jobs is None:
        return os.cpu_count() or 1
    return max(1, int(jobs))


def run_experiment(config: ExperimentConfig, jobs: int | None = None) -> list[EDFSample]:
    """Run every (generator, m) cell of an experiment.

    Results are ordered by ``m`` then by generator as listed in
    ``config.models``.

    Raises
    ------
    ReplicationFailureError
        If some cell had to redraw more than ``config.max_failure_rate`` of
        its replications.  ``err.results`` holds the completed cells.
    """
    jobs = _resolve_jobs(jobs)
    cells = [(g, m) for m in config.m_values for g in config.models]
    tasks, owners = [], []
    for ci, (g, m) in enumerate(cells):
        n = config.total_trials // m
        for start in range(0, config.replications, BLOCK_SIZE):
            stop = min(start + BLOCK_SIZE, config.replications)
            tasks.append((g, config.fitted_model(g), m, n, start, stop,
                          config.master_seed, config.grid_points))
            owners.append(ci)

    if jobs == 1 or len(tasks) == 1:
        outputs = [_run_block_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outputs = list(pool.map(_run_block_task, tasks))

    results = []
    bad_cells = []
    for ci, (g, m) in enumerate(cells):
        parts = [o for o, owner in zip(outputs, owners) if owner == ci]
        ks = np.concatenate([p[0] for p in parts])
        boundary = int(sum(p[1].sum() for p in parts))
        failures = sum(p[2] for p in parts)
        edf = EDFSample(
            g, config.fitted_model(g), m, ks, boundary, failures,
            meta={"experiment": config.experiment.value, "master_seed": config.master_seed,
                  "total_trials": config.total_trials, "replications": config.replications,
                  "grid_points": config.grid_points},
        )
        results.append(edf)
        log.info("cell %s/%s m=%d: %d reps, %d at boundary, %d redrawn",
                 g, edf.fitted, m, ks.size, boundary, failures)
        if failures > config.max_failure_rate * config.replications:
            bad_cells.append((g, m, failures))
    if bad_cells:
        err = ReplicationFailureError(
            "too many failed replications: "
            + ", ".join(f"{g} m={m}: {f}" for g, m, f in bad_cells),
            failures=sum(f for _, _, f in bad_cells),
            replications=config.replications,
            results=results,
        )
        raise err
    return results


def edf_to_csv(edf: EDFSample, path=None) -> str:
    """One KS value per row after ``# key=value`` metadata lines."""
    buf = io.StringIO()
    meta = {"generator": edf.generator, "fitted": edf.fitted, "m": edf.m,
            "boundary_count": edf.boundary_count, "failure_count": edf.failure_count,
            **edf.meta}
    for k, v in meta.items():
        buf.write(f"# {k}={v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["ks"])
    for v in edf.values:
        w.writerow([repr(float(v))])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def edf_from_csv(path) -> EDFSample:
    meta, values = {}, []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition("=")
                meta[k] = v
            elif line and line != "ks":
                values.append(float(line))
    gen, fitted, m = meta.pop("generator"), meta.pop("fitted"), int(meta.pop("m"))
    boundary = int(meta.pop("boundary_count", 0))
    failures = int(meta.pop("failure_count", 0))
    return EDFSample(gen, fitted, m, np.array(values), boundary, failures, meta)
