import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from rotatest.models import EPS, ModelSpec, get_model
from rotatest.rotation import group_probabilities
from rotatest.sampler import (
    TrialSample, decode_lex, encode_lex, generate_sample, outcome_table,
    sample_from_csv, sample_to_csv, stream,
)


@pytest.mark.parametrize("y, z", [((0, 0, 0), 1), ((1, 1, 1), 8), ((0, 1, 0), 3), ((0, 0, 1), 2)])
def test_encode_lex_listed_order(y, z):
    assert encode_lex(y) == z


def test_encode_lex_single_trial():
    assert encode_lex([0]) == 1
    assert encode_lex([1]) == 2


@pytest.mark.parametrize("m", [1, 2, 3])
def test_encode_lex_bijection(m):
    codes = [encode_lex(y) for y in itertools.product([0, 1], repeat=m)]
    assert codes == list(range(1, 2**m + 1))
    for z in codes:
        assert encode_lex(decode_lex(z, m)) == z
    np.testing.assert_array_equal(encode_lex(outcome_table(m)), np.arange(1, 2**m + 1))


@given(st.lists(st.integers(0, 1), min_size=1, max_size=3))
def test_encode_decode_roundtrip(y):
    z = encode_lex(y)
    assert 1 <= z <= 2 ** len(y)
    np.testing.assert_array_equal(decode_lex(z, len(y)), y)


def _const_model(p):
    return ModelSpec(f"const{p}", 0.0, (-1.0, 1.0),
                     lambda x, t: p + 0.0 * np.multiply(x, t),
                     lambda x, t: 0.0 * np.multiply(x, t))


@pytest.mark.parametrize("m", [1, 2, 3])
def test_degenerate_models(m, rng):
    all_fail = generate_sample(_const_model(1.0), 0.0, 30, m, rng)
    assert np.all(all_fail.outcomes == 0)
    all_success = generate_sample(_const_model(0.0), 0.0, 30, m, rng)
    assert np.all(all_success.outcomes == 1)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_sample_shape_and_ranges(model, m, rng):
    s = generate_sample(model, model.theta0, 96 // m, m, rng)
    assert s.n * s.m == 96
    assert np.all((s.covariates >= 0) & (s.covariates <= 2))
    assert set(np.unique(s.outcomes)) <= {0, 1}


def test_failure_rate_near_zero_covariate():
    s = generate_sample("logistic", 1.0, 100_000, 1, np.random.default_rng(0))
    band = s.covariates[:, 0] <= 0.02
    assert band.sum() > 500
    rate = np.mean(s.outcomes[band, 0] == 0)
    assert abs(rate - 0.5) < 0.02


def test_subgroup_code_frequencies_match_product_probabilities():
    # many m=2 subgroups; condition on both covariates in a narrow band
    s = generate_sample("exponential", 0.3, 400_000, 2, np.random.default_rng(1))
    band = np.all(np.abs(s.covariates - np.array([0.5, 1.5])) < 0.05, axis=1)
    counts = np.bincount(s.z[band] - 1, minlength=4)
    p, _ = group_probabilities("exponential", [0.5, 1.5], 0.3)
    chi2 = stats.chisquare(counts, p * counts.sum())
    assert chi2.pvalue > 0.001


def test_streams_are_reproducible_and_distinct():
    a = stream(5, "logistic", 1, 0, 0).random(4)
    b = stream(5, "logistic", 1, 0, 0).random(4)
    c = stream(5, "logistic", 1, 1, 0).random(4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_csv_roundtrip(tmp_path, rng):
    s = generate_sample("normal", 1.0, 16, 3, rng)
    path = tmp_path / "sample.csv"
    text = sample_to_csv(s, path)
    assert text.splitlines()[0] == "subgroup,trial,covariate,outcome"
    assert len(text.splitlines()) == 1 + 48
    back = sample_from_csv(path)
    np.testing.assert_array_equal(back.covariates, s.covariates)
    np.testing.assert_array_equal(back.outcomes, s.outcomes)


def test_invalid_samples_rejected():
    with pytest.raises(ValueError):
        TrialSample(np.array([[2.5]]), np.array([[0]]))
    with pytest.raises(ValueError):
        TrialSample(np.array([[1.0]]), np.array([[2]]))
    with pytest.raises(ValueError):
        generate_sample("logistic", 1.0, 10, 4, np.random.default_rng())
