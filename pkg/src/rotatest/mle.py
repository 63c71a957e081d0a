"""Maximum likelihood for the scalar model parameter.

The search is a bounded one-dimensional maximisation: a coarse grid over
the model's ``theta_interval`` picks a bracket, then golden-section search
shrinks it to ``tol``.  Both stages are vectorised over a batch of
independent samples so that Monte Carlo runs can fit many replications at
once; :func:`fit_mle` is the single-sample entry point.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EstimationError
from .models import evaluate_model, get_model
from .sampler import TrialSample

TOL = 1e-8
MAX_ITER = 10_000
BOUNDARY_TOL = 1e-6
GRID_SIZE = 51

_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class FitResult:
    theta_hat: float
    loglik: float
    converged: bool
    at_boundary: bool


def _loglik(model, x, y, theta):
    # x, y: (R, N); theta: (R, T) -> (R, T)
    p, _ = evaluate_model(model, x[:, None, :], theta[:, :, None])
    fail = (y == 0)[:, None, :]
    return np.where(fail, np.log(p), np.log1p(-p)).sum(axis=-1)


def log_likelihood(model, sample: TrialSample, theta: float) -> float:
    """Bernoulli log-likelihood of all trials in ``sample``."""
    model = get_model(model)
    x = sample.covariates.reshape(1, -1)
    y = sample.outcomes.reshape(1, -1)
    return float(_loglik(model, x, y, np.array([[theta]], dtype=float))[0, 0])


def score(model, sample: TrialSample, theta: float) -> float:
    """Derivative of :func:`log_likelihood` in theta."""
    model = get_model(model)
    p, dp = evaluate_model(model, sample.covariates, theta)
    y = sample.outcomes
    return float(np.sum(np.where(y == 0, dp / p, -dp / (1.0 - p))))


def fit_batch(model, x, y, tol=TOL, max_iter=MAX_ITER, grid_size=GRID_SIZE):
    """Fit each row of ``x``/``y`` (shape ``(R, N)``) separately.

    Returns arrays ``theta_hat, loglik, converged, at_boundary`` of length R.
    """
    model = get_model(model)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y))
    R = x.shape[0]
    lo, hi = map(float, model.theta_interval)

    grid = np.linspace(lo, hi, grid_size)
    fg = _loglik(model, x, y, np.broadcast_to(grid, (R, grid_size)))
    k = np.argmax(fg, axis=1)
    a = grid[np.maximum(k - 1, 0)]
    b = grid[np.minimum(k + 1, grid_size - 1)]

    def f(t):
        return _loglik(model, x, y, t[:, None])[:, 0]

    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    # rows stop updating once their own bracket is small enough, so a fit
    # does not depend on the other rows in the batch
    active = (b - a) > tol
    while np.any(active) and it < max_iter:
        left = fc >= fd  # maximum lies in [a, d]
        b2 = np.where(left, d, b)
        a2 = np.where(left, a, c)
        new = np.where(left, b2 - _INVPHI * (b2 - a2), a2 + _INVPHI * (b2 - a2))
        new = np.where(active, new, c)
        fnew = f(new)
        c2 = np.where(left, new, d)
        d2 = np.where(left, c, new)
        fc2 = np.where(left, fnew, fd)
        fd2 = np.where(left, fc, fnew)
        a, b = np.where(active, a2, a), np.where(active, b2, b)
        c, d = np.where(active, c2, c), np.where(active, d2, d)
        fc, fd = np.where(active, fc2, fc), np.where(active, fd2, fd)
        active = (b - a) > tol
        it += 1
    converged = (b - a) <= tol

    mid = 0.5 * (a + b)
    cands = np.stack(
        [np.full(R, lo), np.full(R, hi), grid[k], mid, c, d], axis=1
    )
    fc_all = _loglik(model, x, y, cands)
    if not np.all(np.isfinite(fc_all)):
        raise EstimationError("log-likelihood is not finite", best=cands[:, 2])
    # Endpoints come first so exact ties resolve to the boundary.
    best = np.argmax(fc_all, axis=1)
    theta_hat = cands[np.arange(R), best]
    loglik = fc_all[np.arange(R), best]
    at_boundary = (np.abs(theta_hat - lo) <= BOUNDARY_TOL) | (np.abs(theta_hat - hi) <= BOUNDARY_TOL)
    return theta_hat, loglik, converged, at_boundary


def fit_mle(model, sample: TrialSample, tol: float = TOL, max_iter: int = MAX_ITER) -> FitResult:
    """Maximum likelihood estimate of theta over the model's search interval.

    Raises
    ------
    EstimationError
        If the bracket does not shrink below ``tol`` within ``max_iter``
        golden-section steps.  ``err.best`` carries the best estimate so far.
    """
    th, ll, conv, bnd = fit_batch(
        model, sample.covariates.reshape(1, -1), sample.outcomes.reshape(1, -1),
        tol=tol, max_iter=max_iter,
    )
    result = FitResult(float(th[0]), float(ll[0]), bool(conv[0]), bool(bnd[0]))
    if not result.converged:
        raise EstimationError(
            f"no convergence within {max_iter} iterations", best=result
        )
    return result
