import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rotatest.errors import DegeneracyWarning, IdentifiabilityError, SingularInformationError
from rotatest.models import BUILTIN_ORDER, ModelSpec, evaluate_model, get_model
from rotatest.rotation import (
    B1_VECTORS, SignRelation, build_bundle, build_reference_basis, build_U,
    build_U_m1_closed_form, bundle_residuals, complete_orthonormal, group_probabilities,
    group_probabilities_batch, information_matrix, rotate_batch, sign_consistency,
)
from rotatest.sampler import decode_lex

TOL = 1e-10


def _const(p):
    return ModelSpec(f"const{p}", 0.0, (-1.0, 1.0),
                     lambda x, t: p + 0.0 * np.multiply(x, t),
                     lambda x, t: 0.0 * np.multiply(x, t))


def _from_trial_probs(q):
    # model whose failure probability at covariate index i is q[i]
    q = np.asarray(q)
    return ModelSpec("table", 0.0, (-1.0, 1.0),
                     lambda x, t: q[np.asarray(x, dtype=int)] + 0.0 * np.multiply(x, t),
                     lambda x, t: 0.0 * np.multiply(x, t))


# -- group probabilities --------------------------------------------------------

def test_group_probabilities_symmetric():
    p, _ = group_probabilities(_const(0.5), [0.3, 1.2], 0.0)
    np.testing.assert_allclose(p, [0.25] * 4, atol=1e-15)


def test_group_probabilities_single_trial():
    p, _ = group_probabilities(_const(0.3), [0.7], 0.0)
    np.testing.assert_allclose(p, [0.3, 0.7], atol=1e-15)


def test_group_probabilities_hand_product():
    p, _ = group_probabilities(_from_trial_probs([0.2, 0.6]), [0.0, 1.0], 0.0)
    np.testing.assert_allclose(p, [0.12, 0.08, 0.48, 0.32], atol=1e-15)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_group_derivative_by_enumeration(model, m, rng):
    # independent oracle: enumerate outcomes and differentiate the product numerically
    x = rng.uniform(0.05, 1.95, m)
    th = model.theta0
    h = 1e-6

    def enum_probs(t):
        q, _ = evaluate_model(model, x, t)
        out = []
        for z in range(1, 2**m + 1):
            y = decode_lex(z, m)
            out.append(np.prod(np.where(y == 0, q, 1 - q)))
        return np.array(out)

    p, dp = group_probabilities(model, x, th)
    np.testing.assert_allclose(p, enum_probs(th), rtol=1e-14)
    fd = (enum_probs(th + h) - enum_probs(th - h)) / (2 * h)
    np.testing.assert_allclose(dp, fd, rtol=1e-5, atol=1e-9)


def test_degenerate_subgroup_warns():
    with pytest.warns(DegeneracyWarning):
        group_probabilities(_const(1.0), [0.5, 0.5], 0.0)


# -- information matrix ----------------------------------------------------------

def test_information_single_trial_by_hand():
    p0, dp0 = 0.25, 0.37
    p = np.array([p0, 1 - p0])
    M = np.array([dp0 / p0, -dp0 / (1 - p0)])
    G = information_matrix(M, p)
    assert G[0, 0] == pytest.approx(dp0**2 * (1 / p0 + 1 / (1 - p0)), rel=1e-14)
    assert G[0, 0] == pytest.approx(16 / 3 * dp0**2, rel=1e-14)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_zero_scores_are_singular(m):
    with pytest.raises(SingularInformationError):
        information_matrix(np.zeros((2**m, 1)), np.full(2**m, 2.0**-m))


def test_information_matches_finite_difference_oracle(rng):
    model = get_model("logistic")
    x = rng.uniform(0, 2, 2)
    h = 1e-6
    p, dp = group_probabilities(model, x, 1.0)
    fd = (group_probabilities(model, x, 1 + h)[0] - group_probabilities(model, x, 1 - h)[0]) / (2 * h)
    oracle = np.sum(fd**2 / p)
    G = information_matrix(dp / p, p)
    assert G[0, 0] == pytest.approx(oracle, rel=1e-6)


# -- reference basis ------------------------------------------------------------

def test_reference_basis_m1():
    b = build_reference_basis(1)
    np.testing.assert_allclose(b.O_Q, np.array([[1, -1], [1, 1]]) / np.sqrt(2), atol=1e-15)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_reference_basis_orthogonality(m):
    b = build_reference_basis(m)
    D = 2**m
    np.testing.assert_allclose(b.O_Q.T @ b.O_Q, np.eye(D), atol=1e-12)
    np.testing.assert_array_equal(b.B[:, 0], np.ones(D))
    np.testing.assert_array_equal(b.B[:, 1], B1_VECTORS[m])
    np.testing.assert_allclose(b.B.T @ b.B / D, np.eye(2), atol=1e-12)
    # the reference basis reproduces the full O_Q
    np.testing.assert_allclose(np.column_stack([b.B, b.Z_B]) * 2.0 ** (-m / 2), b.O_Q, atol=1e-15)


def test_listed_b1_normalisation():
    assert B1_VECTORS[2] @ B1_VECTORS[2] / 4 == pytest.approx(1.0)
    assert B1_VECTORS[3].sum() / 8 == pytest.approx(0.0, abs=1e-15)
    assert B1_VECTORS[3] @ B1_VECTORS[3] / 8 == pytest.approx(1.0)


def test_reference_basis_deterministic():
    build_reference_basis.cache_clear()
    a = build_reference_basis(3).O_Q.copy()
    build_reference_basis.cache_clear()
    np.testing.assert_array_equal(a, build_reference_basis(3).O_Q)


def test_general_K_basis():
    b = build_reference_basis(2, K=2)
    assert b.B.shape == (4, 3)
    np.testing.assert_allclose(b.B.T @ b.B / 4, np.eye(3), atol=1e-12)
    with pytest.raises(IdentifiabilityError):
        build_reference_basis(1, K=2)


def test_completion_skips_dependent_candidates():
    Q0 = np.eye(3)[:, [0]]
    Q = complete_orthonormal(Q0)
    np.testing.assert_allclose(Q, np.eye(3), atol=1e-15)
    v = np.array([[1.0], [1.0], [0.0]]) / np.sqrt(2)
    Q = complete_orthonormal(v)
    np.testing.assert_allclose(Q.T @ Q, np.eye(3), atol=1e-14)


# -- U -----------------------------------------------------------------------------

def test_U_symmetric_single_trial():
    p = np.array([0.5, 0.5])
    dp0 = 0.3
    M = np.array([dp0 / 0.5, -dp0 / 0.5])
    U = build_U(p, M, information_matrix(M, p), build_reference_basis(1))
    np.testing.assert_allclose(U, [[0, 1], [1, 0]], atol=1e-15)


def test_closed_form_reference_points():
    np.testing.assert_allclose(build_U_m1_closed_form(0.5, 1.0), [[0, 1], [1, 0]], atol=1e-15)
    np.testing.assert_allclose(build_U_m1_closed_form(0.5, -1.0), np.eye(2), atol=1e-15)
    np.testing.assert_allclose(build_U_m1_closed_form(0.5, 0.0), [[0, 1], [1, 0]], atol=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(-5, 5).filter(lambda v: abs(v) > 1e-3))
def test_closed_form_maps_basis(p0, dp0):
    U = build_U_m1_closed_form(p0, dp0)
    p1 = 1 - p0
    ell = np.sqrt(0.5 / np.array([p0, p1]))
    s = np.sign(dp0)
    a1 = np.array([s * np.sqrt(p1 / p0), -s * np.sqrt(p0 / p1)])
    np.testing.assert_allclose(U @ ell, [1, 1], atol=1e-10)
    np.testing.assert_allclose(U @ (ell * np.array([-1, 1])), a1, atol=1e-10)


def test_identifiability_error():
    p = np.array([0.5, 0.5])
    M = np.array([[1.0, 2.0], [-1.0, 3.0]])
    with pytest.raises(IdentifiabilityError):
        build_U(p, M, np.eye(2), build_reference_basis(1))


def test_singular_gamma_error():
    with pytest.raises(SingularInformationError):
        build_U(np.array([0.5, 0.5]), np.zeros(2), np.zeros((1, 1)), build_reference_basis(1))
    with pytest.raises(SingularInformationError):
        build_bundle(_const(0.4), [0.5], 0.0)


def test_unitarity_fixed_case():
    b = build_bundle("logistic", [0.5, 1.5], 1.0)
    np.testing.assert_allclose(b.U.T @ np.diag(b.p) @ b.U, np.diag(b.p), atol=TOL)
    np.testing.assert_allclose(b.U @ b.ell, np.ones(4), atol=TOL)
    np.testing.assert_allclose(b.ell, np.sqrt(0.25 / b.p), rtol=1e-15)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_identities_random_subgroups(model, m, rng):
    lo, hi = model.theta_interval
    for _ in range(25):
        x = rng.uniform(0.01, 2, m)
        th = model.theta0 + rng.uniform(-0.2, 0.2)
        b = build_bundle(model, x, th)
        r = bundle_residuals(b)
        assert r["sum_p"] < 1e-12
        for key in ("orthonormal_scores", "maps_basis", "maps_full_basis", "unitarity",
                    "score_centering", "maps_ones"):
            assert r[key] < TOL, (key, r[key])
        assert np.linalg.eigvalsh(b.Gamma)[0] > 1e-12


def test_m1_construction_equals_closed_form(model, rng):
    for _ in range(50):
        x = rng.uniform(0.01, 2)
        b = build_bundle(model, [x], model.theta0)
        p0 = b.p[0]
        dp0 = b.M[0, 0] * p0
        np.testing.assert_allclose(b.U, build_U_m1_closed_form(p0, dp0), atol=TOL)


def test_batch_matches_single(rng):
    model = get_model("normal")
    x = rng.uniform(0, 2, (10, 3))
    p, dp = group_probabilities_batch(model, x, 1.1)
    rb = rotate_batch(p, dp, build_reference_basis(3))
    for j in range(10):
        b = build_bundle(model, x[j], 1.1)
        np.testing.assert_allclose(rb.U[j], b.U, atol=1e-14)


def test_skipping_normalisation_breaks_identities():
    b = build_bundle("logistic", [0.5, 1.5], 1.0, normalize=False)
    r = bundle_residuals(b)
    assert r["orthonormal_scores"] > 1e-3


def test_bundle_json_dump():
    import json
    b = build_bundle("beta", [0.4, 0.9, 1.7], 2.5)
    d = json.loads(b.to_json())
    assert set(d) >= {"p", "M", "Gamma", "ell", "U"}
    assert np.array(d["U"]).shape == (8, 8)


# -- sign diagnostic --------------------------------------------------------------

def test_sign_consistency_examples():
    assert sign_consistency("logistic", 1.0, "exponential", 0.3) is SignRelation.ALL_OPPOSITE
    assert sign_consistency("normal", 1.0, "beta", 2.5) is SignRelation.MIXED
    assert sign_consistency("logistic", 1.0, "logistic", 1.0) is SignRelation.ALL_SAME
