import json
import math

import numpy as np
import pytest

from ewens_pitman.asymptotics import m_r
from ewens_pitman.errors import ConfigurationError
from ewens_pitman.harness import (
    CovAccumulator,
    ExperimentConfig,
    Tolerances,
    bootstrap_cov_se,
    clt_test,
    covariance_check,
    mahalanobis_test,
    report_header,
    run_batch,
    slln_diagnostic,
)
from ewens_pitman.partition import ModelParams, SeedSpec


@pytest.fixture(scope="module")
def ewens_batch():
    cfg = ExperimentConfig(ModelParams.linear(0.0, 1.0, 10**4, d=1), 1000, 7)
    return run_batch(cfg)


def test_accumulator_matches_two_pass():
    rng = np.random.default_rng(0)
    x = rng.normal(1e3, 2.0, size=(1000, 3)) @ np.array([[1, 0.3, 0], [0, 1, 0.5], [0, 0, 1]])
    acc = CovAccumulator(3).extend(x)
    ref = np.cov(x, rowvar=False)
    assert np.allclose(acc.mean, x.mean(axis=0), rtol=1e-12)
    assert np.abs(acc.cov() - ref).max() <= 1e-12 * np.abs(ref).max()
    parts = [CovAccumulator(3).extend(x[i:i + 137]) for i in range(0, 1000, 137)]
    merged = parts[0]
    for p in parts[1:]:
        merged = merged.merge(p)
    assert merged.count == 1000
    assert np.abs(merged.cov() - ref).max() <= 1e-12 * np.abs(ref).max()
    with pytest.raises(ConfigurationError):
        CovAccumulator(2).extend([[1.0, 2.0]]).cov()


def test_config_validation():
    p = ModelParams.linear(0.0, 1.0, 100)
    assert ExperimentConfig(p, 5, 1, (0.5,)).checkpoints[-1] == 1.0
    for bad in ((0.0,), (1.5,)):
        with pytest.raises(ConfigurationError):
            ExperimentConfig(p, 5, 1, bad)
    with pytest.raises(ConfigurationError):
        ExperimentConfig(p, 0, 1)


def test_batch_mean_and_cov(ewens_batch):
    b = ewens_batch
    n = b.config.params.n
    se = b.standard_errors
    assert abs(b.empirical_mean[0] - n * math.log(2)) <= 3 * se[0]
    assert abs(b.empirical_mean[1] - n * 0.5) <= 3 * se[1]
    assert np.allclose(b.empirical_cov, b.empirical_cov.T)
    assert np.linalg.eigvalsh(b.empirical_cov).min() >= 0
    boot = bootstrap_cov_se(b.scaled, 200)
    assert abs(b.empirical_cov[1, 1] - 0.375) <= 3 * boot[1, 1]
    assert np.allclose(se, np.sqrt(np.diag(b.empirical_cov) * n / b.R))


def test_batch_independent_of_workers():
    p = ModelParams.linear(0.4, 0.8, 500, d=2)
    one = run_batch(ExperimentConfig(p, 150, 3, (0.5, 1.0)))
    four = run_batch(ExperimentConfig(p, 150, 3, (0.5, 1.0), workers=4))
    assert np.array_equal(one.counts, four.counts)
    assert np.array_equal(one.empirical_cov, four.empirical_cov)
    assert one.to_json() == four.to_json()
    assert one.to_csv() == four.to_csv()


def test_clt_and_negative_control(ewens_batch):
    ok = clt_test(ewens_batch, 0)
    assert ok.passed and ok.statistic_name == "KS" and ok.statistic_value >= 0
    assert ok.threshold == pytest.approx(1.63 / math.sqrt(1000))
    bad = clt_test(ewens_batch, 0, shift=0.5)
    assert not bad.passed
    assert mahalanobis_test(ewens_batch).passed
    assert covariance_check(ewens_batch).passed


def test_clt_needs_replicates():
    cfg = ExperimentConfig(ModelParams.linear(0.0, 1.0, 100), 100, 1)
    with pytest.raises(ConfigurationError):
        clt_test(cfg, 0)


def test_tolerances_are_configurable(ewens_batch):
    strict = ExperimentConfig(ewens_batch.config.params, 1000, 7, tolerances=Tolerances(ks_coefficient=1e-6))
    batch = run_batch(strict)
    assert not clt_test(batch, 0).passed


def test_slln_examples():
    rep = slln_diagnostic(0.0, 1.0, 2, SeedSpec(11), [10**3, 10**4, 10**5])
    assert abs(rep.final_ratio[-1, 2] - 0.125) < 0.01
    for r in range(3):
        assert rep.decreasing_pairs(r) >= 1
    assert np.all(rep.sup_dev[-1] < 0.02)
    with pytest.raises(ConfigurationError):
        slln_diagnostic(0.0, 1.0, 1, SeedSpec(1), [100, 10])


def test_slln_endpoint_agrees_with_batch():
    p = ModelParams.linear(0.5, 1.0, 10**4, d=1)
    b = run_batch(ExperimentConfig(p, 200, 4))
    rep = slln_diagnostic(0.5, 1.0, 1, SeedSpec(4, 0), [10**4])
    assert np.array_equal(np.rint(rep.final_ratio[0] * 10**4), b.counts[0, -1])
    m = [m_r(r, 0.5, 1.0, 1.0) for r in (0, 1)]
    assert np.all(np.abs(b.empirical_mean / 10**4 - m) <= 4 * b.standard_errors / 10**4 + 1e-3)


def test_reports_are_deterministic():
    cfg = ExperimentConfig(ModelParams.linear(0.2, 1.0, 300, d=2), 20, 99, (0.25, 1.0))
    a, b = run_batch(cfg).to_json(), run_batch(cfg).to_json()
    assert a == b
    head = json.loads(a)["header"]
    assert head["master_seed"] == 99 and "version" in head
    assert report_header(cfg) == report_header(cfg)
