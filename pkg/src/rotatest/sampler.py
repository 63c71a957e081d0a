"""Grouped Bernoulli trial data and lexicographic outcome codes."""
from __future__ import annotations

import csv
import io
import zlib
from dataclasses import dataclass

import numpy as np

from .models import ModelSpec, evaluate_model, get_model


@dataclass(frozen=True)
class TrialSample:
    """``n`` subgroups of ``m`` trials.

    ``covariates`` and ``outcomes`` are ``(n, m)`` arrays; outcome 1 is a
    success and 0 a failure.
    """

    covariates: np.ndarray
    outcomes: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.covariates, dtype=float)
        y = np.asarray(self.outcomes, dtype=np.int64)
        if x.ndim != 2 or x.shape != y.shape:
            raise ValueError("covariates and outcomes must be matching (n, m) arrays")
        if x.shape[1] not in (1, 2, 3) or x.shape[0] < 1:
            raise ValueError(f"unsupported sample shape {x.shape}")
        if np.any((x < 0) | (x > 2)) or not np.all(np.isfinite(x)):
            raise ValueError("covariates must lie in [0, 2]")
        if np.any((y != 0) & (y != 1)):
            raise ValueError("outcomes must be 0 or 1")
        object.__setattr__(self, "covariates", x)
        object.__setattr__(self, "outcomes", y)

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def m(self) -> int:
        return self.covariates.shape[1]

    @property
    def z(self) -> np.ndarray:
        """Lexicographic subgroup codes, 1-based."""
        return encode_lex(self.outcomes)


def stream(master_seed: int, *key) -> np.random.Generator:
    """Independent random stream for ``(master_seed, *key)``.

    Key parts may be ints or strings; strings are hashed with CRC32 so the
    mapping is stable across processes and Python versions.
    """
    spawn_key = tuple(
        zlib.crc32(k.encode()) if isinstance(k, str) else int(k) for k in key
    )
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(int(master_seed), spawn_key=spawn_key))
    )


def generate_sample(model, theta: float, n: int, m: int, rng: np.random.Generator) -> TrialSample:
    """Draw ``n`` subgroups of ``m`` trials with covariates uniform on [0, 2].

    Each trial fails (y = 0) with probability ``p(x, theta)`` and succeeds
    otherwise.  Consecutive draws fill a subgroup.
    """
    model = get_model(model)
    if n < 1 or m not in (1, 2, 3):
        raise ValueError(f"need n >= 1 and m in {{1, 2, 3}}, got n={n}, m={m}")
    x = rng.uniform(0.0, 2.0, size=(n, m))
    u = rng.random(size=(n, m))
    p, _ = evaluate_model(model, x, theta)
    y = (u >= p).astype(np.int64)
    return TrialSample(x, y)


def encode_lex(y) -> np.ndarray | int:
    """Map outcome vectors (last axis of length m) to codes 1..2**m.

    ``000 -> 1, 001 -> 2, ..., 111 -> 8`` for m = 3; for m = 1 a failure is
    1 and a success 2.
    """
    y = np.asarray(y, dtype=np.int64)
    m = y.shape[-1]
    weights = 1 << np.arange(m - 1, -1, -1)
    z = 1 + y @ weights
    return int(z) if np.ndim(z) == 0 else z


def decode_lex(z: int, m: int) -> np.ndarray:
    """Inverse of :func:`encode_lex` for a single code."""
    if not 1 <= z <= 2**m:
        raise ValueError(f"code {z} out of range for m={m}")
    return np.array([(z - 1) >> (m - 1 - i) & 1 for i in range(m)], dtype=np.int64)


def outcome_table(m: int) -> np.ndarray:
    """All outcome vectors in lexicographic order, shape ``(2**m, m)``."""
    return np.array([decode_lex(z, m) for z in range(1, 2**m + 1)], dtype=np.int64)


def sample_to_csv(sample: TrialSample, path=None) -> str:
    """Write columns ``subgroup, trial, covariate, outcome`` (1-based indices).

    Returns the CSV text; also writes it to ``path`` if given.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["subgroup", "trial", "covariate", "outcome"])
    for j in range(sample.n):
        for i in range(sample.m):
            w.writerow([j + 1, i + 1, repr(float(sample.covariates[j, i])), int(sample.outcomes[j, i])])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def sample_from_csv(path) -> TrialSample:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    n = max(int(r["subgroup"]) for r in rows)
    m = max(int(r["trial"]) for r in rows)
    x = np.full((n, m), np.nan)
    y = np.zeros((n, m), dtype=np.int64)
    for r in rows:
        j, i = int(r["subgroup"]) - 1, int(r["trial"]) - 1
        x[j, i] = float(r["covariate"])
        y[j, i] = int(r["outcome"])
    return TrialSample(x, y)
