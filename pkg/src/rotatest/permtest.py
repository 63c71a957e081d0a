"""Two-sample randomisation p-values between EDF samples.

The distance between two samples is the largest vertical gap between their
empirical distribution functions.  The p-value is the fraction of ``N``
random re-splits of the pooled sample whose distance is at least the
observed one.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .sampler import stream

PERM_CHUNK = 200
_PERM_TAG = "randomization"


def _values(g):
    v = getattr(g, "values", g)
    v = np.sort(np.asarray(v, dtype=float))
    if v.size == 0:
        raise ValueError("EDF samples must be non-empty")
    return v


def two_sample_ks_distance(G1, G2) -> float:
    """``sup_t |F1(t) - F2(t)|``, evaluated at every pooled data point."""
    a, b = _values(G1), _values(G2)
    t = np.concatenate([a, b])
    f1 = np.searchsorted(a, t, side="right") / a.size
    f2 = np.searchsorted(b, t, side="right") / b.size
    return float(np.max(np.abs(f1 - f2)))


def _split_distances(labels, n1, n2, block_end):
    """Scaled KS distances ``n1 * n2 * d`` for rows of 0/1 ``labels`` laid
    over the sorted pool.

    Integer arithmetic keeps the comparison with the observed distance
    exact.  ``block_end`` (or None when there are no ties) marks the last
    position of each run of tied pool values; the EDF gap is only read
    there.
    """
    dtype = np.int32 if (n1 + n2) ** 2 < 2**31 else np.int64
    c1 = np.cumsum(labels, axis=-1, dtype=dtype)
    c1 *= n1 + n2
    c1 -= n1 * np.arange(1, n1 + n2 + 1, dtype=dtype)
    if block_end is not None:
        c1 = c1[..., block_end]
    return np.abs(c1).max(axis=-1)


def randomization_pvalue(G1, G2, N: int = 10_000, rng: np.random.Generator | None = None,
                         convention: str = "raw") -> float:
    """Randomisation p-value for "G1 and G2 share a distribution".

    The pooled values are randomly split into parts of the original sizes
    ``N`` times.  ``convention="raw"`` returns ``#{d* >= d_obs} / N`` (so
    0 is attainable); ``"plus_one"`` returns ``(#{d* >= d_obs} + 1) / (N + 1)``.

    The smaller sample (the first one on equal sizes) is always the
    labelled part, and splits depend only on the pooled values, so the
    result does not change when ``G1`` and ``G2`` are swapped.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if convention not in ("raw", "plus_one"):
        raise ValueError(f"unknown convention {convention!r}")
    if rng is None:
        rng = np.random.default_rng()
    a, b = _values(G1), _values(G2)
    if b.size < a.size:
        a, b = b, a
    n1, n2 = a.size, b.size
    pooled = np.concatenate([a, b])
    order = np.argsort(pooled, kind="stable")
    sorted_pool = pooled[order]
    block_end = np.flatnonzero(np.append(sorted_pool[1:] != sorted_pool[:-1], True))
    if block_end.size == n1 + n2:
        block_end = None

    is_first = np.zeros(n1 + n2, dtype=np.int8)
    is_first[:n1] = True
    d_obs = _split_distances(is_first[order], n1, n2, block_end)

    base = np.zeros(n1 + n2, dtype=np.int8)
    base[:n1] = True
    hits = 0
    done = 0
    while done < N:
        k = min(PERM_CHUNK, N - done)
        labels = rng.permuted(np.broadcast_to(base, (k, base.size)), axis=1)
        d = _split_distances(labels, n1, n2, block_end)
        hits += int(np.count_nonzero(d >= d_obs))
        done += k
    if convention == "raw":
        return hits / N
    return (hits + 1) / (N + 1)


def _cell_label(edf):
    return (edf.generator, int(edf.m))


@dataclass
class PValueMatrix:
    """Pairwise p-values; entries ``p[i, j]`` with ``i < j`` are stored.

    Pairs in different ``m`` are not compared unless requested and hold NaN.
    """

    labels: list
    p: np.ndarray
    N: int
    observed_d: np.ndarray

    def index(self, generator, m):
        return self.labels.index((generator, int(m)))

    def get(self, a, b):
        i, j = sorted((self.index(*a), self.index(*b)))
        return float(self.p[i, j])

    def distance(self, a, b):
        i, j = sorted((self.index(*a), self.index(*b)))
        return float(self.observed_d[i, j])

    def pairs(self):
        """``(label_i, label_j, p)`` for every computed pair."""
        L = len(self.labels)
        return [
            (self.labels[i], self.labels[j], float(self.p[i, j]))
            for i in range(L) for j in range(i + 1, L) if np.isfinite(self.p[i, j])
        ]

    def to_json(self, **kwargs) -> str:
        payload = {
            "N": self.N,
            "pairs": [
                {"a": {"generator": a[0], "m": a[1]}, "b": {"generator": b[0], "m": b[1]},
                 "p": p, "observed_d": self.distance(a, b)}
                for a, b, p in self.pairs()
            ],
        }
        return json.dumps(payload, **kwargs)

    def to_table_csv(self, models, m_values, path=None) -> str:
        """Row ``Model i`` / sub-row ``m`` against columns ``Model 2..K``."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["model", "generator", "m"] + [f"Model {k + 1}" for k in range(1, len(models))])
        for i, gi in enumerate(models[:-1]):
            for m in m_values:
                row = [f"Model {i + 1}", gi, m]
                for j in range(1, len(models)):
                    if j <= i:
                        row.append("")
                    else:
                        row.append(f"{self.get((gi, m), (models[j], m)):.3f}")
                w.writerow(row)
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def pair_pvalue(edf_a, edf_b, N: int = 10_000, master_seed: int = 0, convention: str = "raw") -> float:
    """Randomisation p-value for two EDF samples, drawing from the stream
    keyed by the unordered pair of cells (so the value does not depend on
    argument order or on which other pairs are computed)."""
    ka, kb = sorted([_cell_label(edf_a), _cell_label(edf_b)])
    rng = stream(master_seed, _PERM_TAG, ka[0], ka[1], kb[0], kb[1])
    return randomization_pvalue(edf_a, edf_b, N, rng, convention)


def pvalue_matrix(edfs, N: int = 10_000, master_seed: int = 0, same_m_only: bool = True,
                  convention: str = "raw") -> PValueMatrix:
    """Randomisation p-values between all pairs of EDF samples.

    Each entry is :func:`pair_pvalue`, so it does not depend on which other
    cells are present.
    """
    edfs = list(edfs)
    labels = [_cell_label(e) for e in edfs]
    L = len(edfs)
    p = np.full((L, L), np.nan)
    d = np.full((L, L), np.nan)
    for i in range(L):
        for j in range(i + 1, L):
            if same_m_only and labels[i][1] != labels[j][1]:
                continue
            p[i, j] = pair_pvalue(edfs[i], edfs[j], N, master_seed, convention)
            d[i, j] = two_sample_ks_distance(edfs[i], edfs[j])
    return PValueMatrix(labels, p, N, d)
