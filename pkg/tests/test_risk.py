import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from innout.estimators import FeatureModel, LinearPredictor, fit_aux_inputs, fit_baseline
from innout.problem import example1_setting, oracle_moments, sample_dataset
from innout.risk import CSV_COLUMNS, analytic_risk, bayes_risk, excess_risk_ratio, monte_carlo_risk


def _bayes_x_only(setting):
    return LinearPredictor(setting.theta_x.copy(), np.zeros(setting.dims.T))


def _bayes_x_and_z(setting):
    # u = C^+ (z - A B x), so theta_u^T u is linear in (x, z)
    theta_z = np.linalg.pinv(setting.C_star).T @ setting.theta_u
    theta_x = setting.theta_x - setting.B_star.T @ setting.A_star.T @ theta_z
    return LinearPredictor(theta_x, theta_z)


@pytest.mark.parametrize("origin", ["id", "ood"])
def test_bayes_predictors_have_zero_excess(setting, origin):
    r1 = analytic_risk(_bayes_x_only(setting), setting, origin)
    r2 = analytic_risk(_bayes_x_and_z(setting), setting, origin)
    assert r1.excess == pytest.approx(0, abs=1e-12)
    assert r2.excess == pytest.approx(0, abs=1e-12)
    assert r2.bayes == setting.sigma_sq
    _, _, sigma_u_sq = oracle_moments(setting, origin)
    assert r1.bayes == pytest.approx(setting.sigma_sq + sigma_u_sq)


@given(st.integers(0, 10_000), st.sampled_from(["id", "ood"]))
def test_x_only_excess_is_nonnegative(seed, origin):
    setting = example1_setting(5.0)
    rng = np.random.default_rng(seed)
    pred = LinearPredictor(rng.standard_normal(1), np.zeros(2), float(rng.standard_normal()))
    assert analytic_risk(pred, setting, origin).excess >= -1e-12


def test_risk_decomposition_adds_up(setting, rng):
    ds = sample_dataset(setting, 30, seed=rng)
    report = analytic_risk(fit_baseline(ds), setting, "ood")
    assert report.risk == pytest.approx(report.x_term + report.u_term + report.noise_term)
    assert report.risk - report.bayes == report.excess
    row = report.as_row("baseline", 4)
    assert tuple(row) == CSV_COLUMNS and row["seed"] == 4


@pytest.mark.parametrize("origin", ["id", "ood"])
def test_analytic_matches_monte_carlo(setting, origin, rng):
    ds = sample_dataset(setting, 30, seed=rng)
    for model in (fit_baseline(ds), fit_aux_inputs(ds),
                  FeatureModel(setting.B_star, rng.standard_normal(2), 0.3)):
        exact = analytic_risk(model, setting, origin)
        mc = monte_carlo_risk(model, setting, origin, n_samples=200_000, seed=rng, chunk=70_000)
        assert abs(exact.risk - mc.risk) <= 4 * mc.mc_std_err
        assert mc.bayes == exact.bayes


def test_example1_baseline_risk_by_hand():
    s = example1_setting(30.0)
    pred = LinearPredictor(np.array([0.5]), np.zeros(2), 0.1)
    # (0.5 x - 0.1)^2 with Var x = 1/3, plus u1 variance, plus noise
    expected_ood = 0.25 / 3 + 0.01 + 1 / 3 + 1.0
    assert analytic_risk(pred, s, "ood").risk == pytest.approx(expected_ood)
    assert analytic_risk(pred, s, "id").risk == pytest.approx(0.25 / 3 + 0.01 + 0.25 + 1.0)


def test_excess_ratio(setting):
    a = analytic_risk(_bayes_x_only(setting), setting, "id")
    b = analytic_risk(LinearPredictor(np.zeros(6), np.zeros(3)), setting, "id")
    assert excess_risk_ratio(b, a) == math.inf
    assert excess_risk_ratio(a, b) == pytest.approx(0, abs=1e-10)
    with pytest.raises(ValueError):
        excess_risk_ratio(a, analytic_risk(_bayes_x_only(setting), setting, "ood"))
    with pytest.raises(ValueError):
        excess_risk_ratio(a, analytic_risk(_bayes_x_and_z(setting), setting, "id"))


def test_bayes_risk_rejects_unknown_class(setting):
    with pytest.raises(ValueError):
        bayes_risk(setting, "id", "z-only")
    with pytest.raises(ValueError):
        monte_carlo_risk(_bayes_x_only(setting), setting, "id", n_samples=10)
