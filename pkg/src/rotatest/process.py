"""The rotated empirical process and its Kolmogorov-Smirnov statistic.

The statistic is the maximum of

    (1/sqrt(n)) * sum_{j : X_j <= x0} [ w_j(z_j) - sum_z p_z^(j) w_j(z) ],
    w_j = U_j (ell_j * v_z0),   v_z0(z) = 1{z <= z0} - z0 / 2**m

over covariate thresholds ``x0 = 2k/G`` (k = 1..G) and outcome thresholds
``z0 = 1..2**m - 1``.  For m > 1 the condition ``X_j <= x0`` holds when
every covariate of the subgroup is at most ``x0``.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import SingularInformationError
from .models import get_model
from .rotation import build_reference_basis, group_probabilities_batch, rotate_batch
from .sampler import TrialSample, encode_lex

DEFAULT_GRID = 100


@dataclass(frozen=True)
class KSResult:
    ks: float
    argmax_x0: float
    argmax_z0: int


def x_grid(grid_points: int = DEFAULT_GRID) -> np.ndarray:
    if grid_points < 1:
        raise ValueError("grid_points must be >= 1")
    return 2.0 * np.arange(1, grid_points + 1) / grid_points


def indicator_contrasts(m: int) -> np.ndarray:
    """Columns ``v_z0`` for z0 = 1..2**m, shape ``(2**m, 2**m)``."""
    D = 2**m
    z = np.arange(1, D + 1)[:, None]
    z0 = np.arange(1, D + 1)[None, :]
    return (z <= z0).astype(float) - z0 / D


def subgroup_contributions(model, covariates, outcomes, theta, basis=None, normalize=True):
    """Centred contribution of each subgroup for every ``z0``.

    ``covariates``/``outcomes`` are ``(B, m)``; ``theta`` is a scalar or one
    value per subgroup.  Returns ``(c, singular)`` where ``c`` has shape
    ``(B, 2**m)`` (column ``z0 - 1``) and ``singular`` flags subgroups whose
    information matrix could not be inverted.
    """
    covariates = np.asarray(covariates, dtype=float)
    m = covariates.shape[-1]
    if basis is None:
        basis = build_reference_basis(m)
    p, dp = group_probabilities_batch(model, covariates, theta)
    rb = rotate_batch(p, dp, basis, normalize=normalize)
    V = indicator_contrasts(m)
    W = rb.U @ (rb.ell[:, :, None] * V[None])          # (B, D, D)
    z = encode_lex(outcomes) - 1
    observed = W[np.arange(W.shape[0]), z, :]
    expected = np.einsum("bd,bdk->bk", p, W)
    return observed - expected, rb.singular


def ks_batch(model, covariates, outcomes, theta_hat, grid_points=DEFAULT_GRID, normalize=True):
    """KS statistics for ``R`` samples at once.

    ``covariates``/``outcomes`` have shape ``(R, n, m)`` and ``theta_hat``
    shape ``(R,)``.  Returns ``(ks, ix0, iz0, singular)``; ``ix0``/``iz0`` are
    0-based indices of the maximising grid cell and ``singular`` marks
    replications containing a subgroup with singular information.
    """
    model = get_model(model)
    x = np.asarray(covariates, dtype=float)
    R, n, m = x.shape
    th = np.repeat(np.asarray(theta_hat, dtype=float), n)
    c, sing = subgroup_contributions(
        model, x.reshape(R * n, m), np.asarray(outcomes).reshape(R * n, m), th,
        normalize=normalize,
    )
    c = c.reshape(R, n, -1)[:, :, :-1]                  # z0 = 2**m is identically 0
    grid = x_grid(grid_points)
    inside = (x.max(axis=2)[:, None, :] <= grid[None, :, None]).astype(float)
    S = np.abs(inside @ c) / np.sqrt(n)                  # (R, G, D-1)
    flat = S.reshape(R, -1)
    k = np.argmax(flat, axis=1)
    ks = flat[np.arange(R), k]
    return ks, k // S.shape[2], k % S.shape[2], sing.reshape(R, n).any(axis=1)


def _check(sing):
    if np.any(sing):
        bad = np.flatnonzero(sing).tolist()
        raise SingularInformationError(f"singular information in subgroups {bad}")


def rotated_process_value(sample: TrialSample, model, theta_hat: float, x0: float, z0: int) -> float:
    """Value of the rotated process at one ``(x0, z0)``."""
    D = 2**sample.m
    if not 1 <= z0 <= D:
        raise ValueError(f"z0 must lie in 1..{D}")
    c, sing = subgroup_contributions(model, sample.covariates, sample.outcomes, theta_hat)
    _check(sing)
    inside = sample.covariates.max(axis=1) <= x0
    return float(c[inside, z0 - 1].sum() / np.sqrt(sample.n))


def process_surface(sample: TrialSample, model, theta_hat: float, grid_points: int = DEFAULT_GRID) -> np.ndarray:
    """Process values on the full grid, shape ``(grid_points, 2**m - 1)``."""
    c, sing = subgroup_contributions(model, sample.covariates, sample.outcomes, theta_hat)
    _check(sing)
    inside = (sample.covariates.max(axis=1)[None, :] <= x_grid(grid_points)[:, None]).astype(float)
    return inside @ c[:, :-1] / np.sqrt(sample.n)


def ks_statistic(sample: TrialSample, model, theta_hat: float, grid_points: int = DEFAULT_GRID) -> KSResult:
    """Maximum absolute rotated process value over the grid.

    Raises
    ------
    SingularInformationError
        If any subgroup has singular information at ``theta_hat``.
    """
    ks, ix, iz, sing = ks_batch(
        model, sample.covariates[None], sample.outcomes[None], np.array([theta_hat]), grid_points
    )
    if sing[0]:
        raise SingularInformationError("singular information in at least one subgroup")
    return KSResult(float(ks[0]), float(x_grid(grid_points)[ix[0]]), int(iz[0]) + 1)


def surface_to_csv(surface: np.ndarray, path=None) -> str:
    """Columns ``x0, z0, value`` for every grid cell."""
    G, Z = surface.shape
    grid = x_grid(G)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x0", "z0", "value"])
    for g in range(G):
        for k in range(Z):
            w.writerow([repr(float(grid[g])), k + 1, repr(float(surface[g, k]))])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text
