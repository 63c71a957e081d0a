"""Slow reference computations used as independent checks."""
import numpy as np

from rotatest.models import evaluate_model
from rotatest.rotation import build_bundle


def grid_mle(model, sample, step=1e-4):
    """Maximiser of the log-likelihood over a regular grid on the search interval."""
    lo, hi = model.theta_interval
    grid = np.arange(lo, hi + step / 2, step)
    x = sample.covariates.ravel()
    fail = sample.outcomes.ravel() == 0
    best_t, best_ll = None, -np.inf
    for chunk in np.array_split(grid, 20):
        p, _ = evaluate_model(model, x[None, :], chunk[:, None])
        ll = np.where(fail, np.log(p), np.log1p(-p)).sum(axis=1)
        k = int(np.argmax(ll))
        if ll[k] > best_ll:
            best_t, best_ll = chunk[k], ll[k]
    return best_t


def _naive_value(sample, bundles, x0, z0):
    m, n = sample.m, sample.n
    D = 2**m
    total = 0.0
    for j in range(n):
        if not all(sample.covariates[j, i] <= x0 for i in range(m)):
            continue
        b = bundles[j]
        psi = [(1.0 if z <= z0 else 0.0) - z0 / D for z in range(1, D + 1)]
        w = [sum(b.U[r, c] * b.ell[c] * psi[c] for c in range(D)) for r in range(D)]
        zj = 1 + sum(int(sample.outcomes[j, i]) << (m - 1 - i) for i in range(m))
        total += w[zj - 1] - sum(b.p[z] * w[z] for z in range(D))
    return total / np.sqrt(n)


def naive_process_value(sample, model, theta, x0, z0):
    """Direct loop over subgroups and outcomes."""
    bundles = [build_bundle(model, sample.covariates[j], theta) for j in range(sample.n)]
    return _naive_value(sample, bundles, x0, z0)


def naive_ks(sample, model, theta, grid_points=100):
    bundles = [build_bundle(model, sample.covariates[j], theta) for j in range(sample.n)]
    best = 0.0
    for k in range(1, grid_points + 1):
        x0 = 2.0 * k / grid_points
        for z0 in range(1, 2**sample.m):
            best = max(best, abs(_naive_value(sample, bundles, x0, z0)))
    return best
