"""Randomised check of the exact identities behind the rotation.

Each case draws a model, a subgroup size, covariates and a parameter close
to the model's reference value, builds the rotation and records max-norm
residuals.  All quantities are identities, so residuals are pure rounding.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SingularInformationError
from .models import BUILTIN_ORDER, get_model
from .process import subgroup_contributions
from .rotation import build_U_m1_closed_form, build_bundle, bundle_residuals
from .sampler import outcome_table, stream

TOLERANCES = {
    "sum_p": 1e-12,
    "orthonormal_scores": 1e-10,
    "maps_basis": 1e-10,
    "maps_full_basis": 1e-10,
    "unitarity": 1e-10,
    "score_centering": 1e-10,
    "maps_ones": 1e-10,
    "closed_form": 1e-10,
    "process_centering": 1e-10,
    "last_contrast": 1e-10,
}
THETA_SPREAD = 0.25


@dataclass
class CaseResult:
    index: int
    model: str
    m: int
    x: list
    theta: float
    residuals: dict

    def failures(self):
        return [k for k, v in self.residuals.items() if not v <= TOLERANCES[k]]


@dataclass
class SuiteResult:
    seed: int
    cases: list = field(default_factory=list)

    @property
    def max_residuals(self) -> dict:
        out = {}
        for c in self.cases:
            for k, v in c.residuals.items():
                out[k] = max(out.get(k, 0.0), v)
        return out

    @property
    def failed(self):
        return [c for c in self.cases if c.failures()]

    @property
    def ok(self) -> bool:
        return not self.failed


def _draw_case(rng, models):
    name = models[rng.integers(len(models))]
    model = get_model(name)
    m = int(rng.integers(1, 4))
    theta = float(model.theta0 + rng.uniform(-THETA_SPREAD, THETA_SPREAD))
    while True:
        x = rng.uniform(0.0, 2.0, m)
        try:
            return model, m, x, theta, build_bundle(model, x, theta, normalize=True)
        except SingularInformationError:
            continue


def check_case(model, m, x, theta, normalize=True) -> dict:
    """Residuals for one subgroup."""
    b = build_bundle(model, x, theta, normalize=normalize)
    res = {k: float(v) for k, v in bundle_residuals(b).items()}
    if m == 1:
        p0 = b.p[0]
        dp0 = b.M[0, 0] * p0
        U1 = build_U_m1_closed_form(p0, dp0)
        B = np.array([[1.0, -1.0], [1.0, 1.0]])
        res["closed_form"] = float(np.abs(U1 @ (b.ell[:, None] * B) - b.U @ (b.ell[:, None] * B)).max())
    # contributions for every possible outcome of the subgroup
    Z = outcome_table(m)
    X = np.broadcast_to(np.asarray(x, dtype=float), Z.shape)
    c, _ = subgroup_contributions(model, X, Z, theta, normalize=normalize)
    res["process_centering"] = float(np.abs(b.p @ c).max())
    res["last_contrast"] = float(np.abs(c[:, -1]).max())
    return res


def run_suite(seed: int = 0, cases: int = 1000, models=BUILTIN_ORDER, normalize: bool = True) -> SuiteResult:
    """Run ``cases`` random cases; case ``i`` uses its own stream so any
    failing case can be replayed on its own."""
    out = SuiteResult(seed)
    for i in range(cases):
        rng = stream(seed, "verify", i)
        model, m, x, theta, _ = _draw_case(rng, tuple(models))
        out.cases.append(CaseResult(i, model.name, m, x.tolist(), theta,
                                    check_case(model, m, x, theta, normalize)))
    return out
