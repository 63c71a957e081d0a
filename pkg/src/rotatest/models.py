"""Parametric failure-probability models for Bernoulli trials with a covariate.

Every model maps a covariate ``x`` in ``[0, 2]`` and a scalar parameter
``theta`` to the probability of a *failure* (outcome 0).  The success
probability is ``1 - p``.  This convention is used throughout the package.

Four families ship with the package::

    logistic     p = 1 / (1 + exp(theta x))                    theta0 = 1
    exponential  p = 0.2 + 0.8 (1 - exp(-theta x))             theta0 = 0.3
    normal       p = 1.5/sqrt(2 pi) exp(-2 (x - theta)^2) + 0.2 theta0 = 1
    beta         p = 0.2 + 2 (x/2)^0.5 (1 - x/2)^(theta - 1)   theta0 = 2.5

User models are added with :func:`register_model`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import expit

from .errors import ModelEvaluationError

EPS = 1e-10

_NORMAL_SCALE = 1.5 / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class ModelSpec:
    """A one-parameter failure-probability family.

    ``raw_prob`` and ``raw_dtheta`` must broadcast over array arguments and
    return the *unclipped* probability and its derivative in ``theta``.
    Use :meth:`failure_prob` / :meth:`failure_prob_dtheta` (or
    :func:`evaluate_model`) for the clipped, checked versions.
    """

    name: str
    theta0: float
    theta_interval: tuple[float, float]
    raw_prob: Callable
    raw_dtheta: Callable
    K: int = 1

    def failure_prob(self, x, theta):
        return evaluate_model(self, x, theta)[0]

    def failure_prob_dtheta(self, x, theta):
        return evaluate_model(self, x, theta)[1]


def evaluate_model(model: ModelSpec, x, theta):
    """Failure probability and its theta-derivative, clipped into [EPS, 1-EPS].

    Where clipping is active the derivative is set to zero, since the clipped
    function is flat there.

    Raises
    ------
    ModelEvaluationError
        If the model produces a non-finite probability or derivative.
    """
    with np.errstate(all="ignore"):
        p = np.asarray(model.raw_prob(x, theta), dtype=float)
        dp = np.asarray(model.raw_dtheta(x, theta), dtype=float)
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(dp))):
        raise ModelEvaluationError(
            f"model {model.name!r} is not finite at theta={theta!r}"
        )
    clipped = (p < EPS) | (p > 1.0 - EPS)
    p = np.clip(p, EPS, 1.0 - EPS)
    dp = np.where(clipped, 0.0, dp)
    if p.ndim == 0:
        return float(p), float(dp)
    return p, dp


# -- built-in families ------------------------------------------------------

def _logistic_p(x, theta):
    return expit(-np.multiply(theta, x))


def _logistic_dp(x, theta):
    p = expit(-np.multiply(theta, x))
    return -np.asarray(x) * p * (1.0 - p)


def _exponential_p(x, theta):
    return 0.2 + 0.8 * (1.0 - np.exp(-np.multiply(theta, x)))


def _exponential_dp(x, theta):
    return 0.8 * np.asarray(x) * np.exp(-np.multiply(theta, x))


def _normal_p(x, theta):
    return _NORMAL_SCALE * np.exp(-2.0 * np.subtract(x, theta) ** 2) + 0.2


def _normal_dp(x, theta):
    d = np.subtract(x, theta)
    return _NORMAL_SCALE * np.exp(-2.0 * d**2) * 4.0 * d


def _beta_p(x, theta):
    u = np.asarray(x) / 2.0
    return 0.2 + 2.0 * np.sqrt(u) * (1.0 - u) ** np.subtract(theta, 1.0)


def _beta_dp(x, theta):
    u = np.asarray(x) / 2.0
    s = 1.0 - u
    # s**(theta-1) * log(s) -> 0 as s -> 0 when theta > 1
    log_s = np.log(np.where(s > 0, s, 1.0))
    return 2.0 * np.sqrt(u) * s ** np.subtract(theta, 1.0) * log_s


LOGISTIC = ModelSpec("logistic", 1.0, (-5.0, 5.0), _logistic_p, _logistic_dp)
EXPONENTIAL = ModelSpec("exponential", 0.3, (0.01, 5.0), _exponential_p, _exponential_dp)
NORMAL = ModelSpec("normal", 1.0, (-2.0, 4.0), _normal_p, _normal_dp)
BETA = ModelSpec("beta", 2.5, (1.1, 10.0), _beta_p, _beta_dp)

BUILTIN_ORDER = ("logistic", "exponential", "normal", "beta")

_REGISTRY: dict[str, ModelSpec] = {m.name: m for m in (LOGISTIC, EXPONENTIAL, NORMAL, BETA)}


def register_model(model: ModelSpec, overwrite: bool = False) -> ModelSpec:
    if model.name in _REGISTRY and not overwrite:
        raise ValueError(f"model {model.name!r} already registered")
    lo, hi = model.theta_interval
    if not lo < hi:
        raise ValueError("theta_interval must satisfy lo < hi")
    _REGISTRY[model.name] = model
    return model


def get_model(name) -> ModelSpec:
    """Look up a model by name; ModelSpec instances pass through."""
    if isinstance(name, ModelSpec):
        return name
    try:
        return _REGISTRY[name]
    except KeyError:
        raise KeyError(
            f"unknown model {name!r}; known models: {', '.join(sorted(_REGISTRY))}"
        ) from None


def available_models() -> list[str]:
    return list(_REGISTRY)
