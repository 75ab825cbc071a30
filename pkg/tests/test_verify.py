import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from innout.verify import (
    DEFAULT_CONFIGS,
    SUITE_NAMES,
    default_config,
    psd_gap_matrix,
    read_rows,
    rows_to_csv,
    run_suite,
    run_suites,
    verify_ols,
    verify_prop1,
    verify_thm2,
)
from innout.verify.config import trial_seed

# small versions of every suite; the full sizes run in test_acceptance.py
SMALL = {
    "ols": dict(trials=40),
    "prop1": dict(trials=20),
    "example1": dict(trials=60),
    "thm1": dict(trials=4, redraws=20, m_id=1000, m_ood=1000),
    "psd": dict(trials=30),
    "thm2": dict(trials=10, m_id=2000),
    "rowspace": dict(trials=5, pool_sizes=(1000, 10000)),
    "minsing": dict(trials=200),
    "closed_forms": dict(trials=3, m_id=20000, tolerances={"pool_err": 0.1}),
    "risk_oracle": dict(trials=6, n_mc=20000),
}


def small(name, **extra):
    return default_config(name, **{**SMALL[name], **extra})


@pytest.mark.parametrize("name", SUITE_NAMES)
def test_small_suites_run(name):
    report = run_suite(small(name))
    assert report.status in ("pass", "fail", "n/a")
    assert report.rows and report.summary()["suite"] == name
    json.dumps(report.summary())


@pytest.mark.parametrize("name", ["ols", "prop1", "psd", "minsing", "thm2", "rowspace"])
def test_small_suites_pass(name):
    assert run_suite(small(name)).status == "pass"


def test_parallel_rows_match_serial():
    cfg = small("prop1", trials=8)
    assert rows_to_csv(run_suite(cfg, jobs=1).rows) == rows_to_csv(run_suite(cfg, jobs=2).rows)


def test_seed_changes_rows_and_hash():
    a, b = small("ols"), small("ols", base_seed=1)
    assert a.config_hash() != b.config_hash()
    assert rows_to_csv(run_suite(a).rows) != rows_to_csv(run_suite(b).rows)
    assert trial_seed(a, 0).entropy == trial_seed(a, 0).entropy


def test_impossible_tolerance_fails():
    report = verify_ols(trials=20, tolerances={"rel_tol": 1e-9})
    assert report.status == "fail" and not report.passed


def test_unmet_hypotheses_are_not_applicable():
    assert verify_prop1(trials=5, sigma_u_sq=0.0).status == "n/a"
    assert verify_prop1(trials=5, n_labeled=50).status == "n/a"
    assert verify_thm2(trials=3, m_id=0, sigma_u_sq=0.0).status == "n/a"


def test_precondition_errors():
    with pytest.raises(ValueError, match="T == m"):
        run_suite(default_config("prop1", T=3))
    with pytest.raises(ValueError):
        run_suite(default_config("psd", n_labeled=4))
    with pytest.raises(ValueError):
        run_suite(default_config("rowspace", pool_sizes=(100, 10)))
    with pytest.raises(KeyError, match="valid suites"):
        default_config("nope")
    with pytest.raises(ValueError):
        default_config("ols", trials=0)


@given(st.integers(0, 2**31), st.integers(1, 4), st.integers(0, 8))
def test_psd_gap_is_psd(seed, k, extra):
    rng = np.random.default_rng(seed)
    d = k + 2
    X = rng.standard_normal((d + extra + 1, d))
    b = rng.standard_normal((k, d))
    M = psd_gap_matrix(X, b)
    scale = np.linalg.norm(np.linalg.inv(X.T @ X), 2)
    assert np.linalg.eigvalsh(M)[0] >= -1e-9 * scale


def test_reports_round_trip(tmp_path):
    reports, status = run_suites([small("ols"), small("psd")], tmp_path)
    assert status == 0
    rows = read_rows(tmp_path / "ols.csv")
    assert len(rows) == len(reports[0].rows)
    assert rows[3]["excess"] == reports[0].rows[3]["excess"]
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert [s["suite"] for s in summary] == ["ols", "psd"]


def test_run_suites_status_reflects_failure(tmp_path):
    _, status = run_suites([small("psd"), small("ols", tolerances={"rel_tol": 1e-9})], tmp_path)
    assert status == 1


def test_default_configs_cover_all_suites():
    assert list(DEFAULT_CONFIGS) == list(SUITE_NAMES)
    for cfg in DEFAULT_CONFIGS.values():
        assert cfg.replace(trials=2).tolerances == cfg.tolerances
