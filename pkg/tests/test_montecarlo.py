import numpy as np
import pytest

from rotatest.errors import ReplicationFailureError
from rotatest.mle import fit_mle
from rotatest.models import get_model
from rotatest.montecarlo import (
    EDFSample, Experiment, ExperimentConfig, edf_evaluate, edf_from_csv, edf_to_csv,
    replication_stream, run_experiment,
)
from rotatest.process import ks_statistic
from rotatest.sampler import generate_sample

from helpers import flat_tail_model


@pytest.mark.parametrize("experiment, fitted", [(1, "normal"), (2, "logistic")])
def test_single_replication_is_manual_composition(experiment, fitted):
    cfg = ExperimentConfig(Experiment.from_number(experiment), m_values=(2,), replications=1,
                           master_seed=11, models=("normal",))
    (edf,) = run_experiment(cfg, jobs=1)
    assert edf.fitted == fitted
    gen = get_model("normal")
    s = generate_sample(gen, gen.theta0, 48, 2, replication_stream(11, "normal", 2, 0))
    th = fit_mle(fitted, s).theta_hat
    assert edf.values[0] == ks_statistic(s, fitted, th).ks


def test_worker_count_does_not_change_results():
    cfg = ExperimentConfig(m_values=(1, 3), replications=300, master_seed=5, models=("logistic", "beta"))
    a = run_experiment(cfg, jobs=1)
    b = run_experiment(cfg, jobs=2)
    for ea, eb in zip(a, b):
        assert (ea.generator, ea.m) == (eb.generator, eb.m)
        np.testing.assert_array_equal(ea.values, eb.values)


def test_results_shape_and_order():
    cfg = ExperimentConfig(m_values=(1, 2), replications=20, master_seed=2)
    res = run_experiment(cfg, jobs=1)
    assert [(e.generator, e.m) for e in res] == [(g, m) for m in (1, 2) for g in cfg.models]
    for e in res:
        assert len(e) == 20
        assert np.all(np.diff(e.values) >= 0) and e.values[0] >= 0


def test_edf_evaluate_examples():
    edf = EDFSample("a", "a", 1, [3.0, 1.0, 2.0])
    assert edf_evaluate(edf, 0.5) == 0.0
    assert edf_evaluate(edf, 2.0) == pytest.approx(2 / 3)
    assert edf_evaluate(edf, 3.0) == 1.0
    np.testing.assert_allclose(edf.evaluate([1.0, 1.5, 10.0]), [1 / 3, 1 / 3, 1.0])


def test_edf_csv_roundtrip(tmp_path):
    edf = EDFSample("normal", "logistic", 3, np.random.default_rng(0).random(50), 2, 1,
                    meta={"master_seed": 4})
    edf_to_csv(edf, tmp_path / "e.csv")
    back = edf_from_csv(tmp_path / "e.csv")
    assert (back.generator, back.fitted, back.m) == ("normal", "logistic", 3)
    assert (back.boundary_count, back.failure_count) == (2, 1)
    np.testing.assert_array_equal(back.values, edf.values)
    assert back.meta["master_seed"] == "4"


@pytest.mark.parametrize("kwargs", [
    {"m_values": (4,)}, {"total_trials": 95, "m_values": (2,)}, {"replications": 0},
    {"models": ("nope",)},
])
def test_config_validation(kwargs):
    with pytest.raises((ValueError, KeyError)):
        ExperimentConfig(**kwargs)


def test_failed_replications_are_redrawn_and_counted():
    name = flat_tail_model()
    cfg = ExperimentConfig(m_values=(1,), replications=40, models=(name,), max_failure_rate=1.0)
    (edf,) = run_experiment(cfg, jobs=1)
    assert len(edf) == 40 and np.all(np.isfinite(edf.values))
    assert edf.failure_count > 0


def test_too_many_failures_abort():
    name = flat_tail_model()
    cfg = ExperimentConfig(m_values=(1,), replications=40, models=(name,))
    with pytest.raises(ReplicationFailureError) as info:
        run_experiment(cfg, jobs=1)
    assert info.value.failures > 0.01 * 40
    assert len(info.value.results) == 1
