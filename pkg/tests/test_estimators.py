import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from innout.estimators import (
    LAMBDA_GRID,
    FeatureModel,
    aux_map_in_features,
    fit_aux_inputs,
    fit_baseline,
    fit_in_n_out,
    fit_input_on_features,
    in_n_out_oracle_head,
    in_n_out_population_head,
    in_n_out_population_model,
    model_from_dict,
    model_to_dict,
    pretrain_aux_outputs,
    select_lambda,
    transfer_aux_outputs,
)
from innout.numerics import principal_angles
from innout.problem import Dataset, Dims, make_problem_setting, sample_dataset


@pytest.fixture
def noiseless():
    # no latent term in y and no label noise
    return make_problem_setting(Dims(5, 2, 2, 3), 4, 2.0, sigma_sq=0.0, sigma_u_sq=0.0)


def test_baseline_recovers_exact_coefficients(noiseless):
    ds = sample_dataset(noiseless, 30, seed=0)
    model = fit_baseline(ds)
    assert np.allclose(model.theta_x, noiseless.theta_x, atol=1e-10)
    assert abs(model.intercept) < 1e-10 and not model.uses_z


def test_baseline_fits_intercept(noiseless):
    ds = sample_dataset(noiseless, 30, seed=0)
    shifted = Dataset(ds.X, ds.Z, ds.Y + 2.5)
    assert fit_baseline(shifted).intercept == pytest.approx(2.5)
    assert fit_baseline(shifted, fit_intercept=False).intercept == 0.0


def test_aux_inputs_normal_equations(setting):
    ds = sample_dataset(setting, 60, seed=1)
    model = fit_aux_inputs(ds)
    resid = ds.Y - model.predict(ds.X, ds.Z)
    design = np.hstack([np.ones((60, 1)), ds.X, ds.Z])
    assert np.allclose(design.T @ resid, 0, atol=1e-9)
    assert model.uses_z and model.kind == "aux-inputs"


def test_transfer_with_oracle_features_is_exact(noiseless, rng):
    Q = rng.standard_normal((2, 2)) + 2 * np.eye(2)
    b_hat = Q @ noiseless.B_star
    model = transfer_aux_outputs(b_hat, sample_dataset(noiseless, 20, seed=2))
    assert np.allclose(model.as_linear(3).theta_x, noiseless.theta_x, atol=1e-9)
    assert np.allclose(model.theta_w_hat, np.linalg.solve(Q.T, noiseless.theta_w), atol=1e-9)


def test_pretraining_accepts_a_list(setting):
    pool = [sample_dataset(setting, 3000, o, with_labels=False, seed=i) for i, o in enumerate(("id", "ood"))]
    b_hat = pretrain_aux_outputs(pool, 2)
    assert b_hat.shape == (2, 6)
    assert principal_angles(b_hat, setting.B_star).max() < 0.2
    with pytest.raises(ValueError):
        pretrain_aux_outputs([], 2)


def _parts(setting, seed=0, n=25, pool=400):
    labeled = sample_dataset(setting, n, seed=seed)
    unlabeled = sample_dataset(setting, pool, with_labels=False, seed=seed + 1)
    return setting.B_star.copy(), labeled, unlabeled


def test_lambda_zero_is_aux_outputs(setting):
    b_hat, labeled, pool = _parts(setting)
    a = fit_in_n_out(b_hat, labeled, pool, 0.0)
    b = transfer_aux_outputs(b_hat, labeled)
    assert np.array_equal(a.theta_w_hat, b.theta_w_hat) and a.kind == "in-n-out"


def test_lambda_one_fits_pseudolabels(setting):
    b_hat, labeled, pool = _parts(setting)
    model = fit_in_n_out(b_hat, labeled, pool, 1.0)
    gamma = fit_input_on_features(b_hat, labeled)
    W = pool.X @ b_hat.T
    pseudo = gamma.predict(W, pool.Z)
    design = np.hstack([np.ones((len(pool), 1)), W])
    resid = pseudo - model.predict(pool.X)
    assert np.allclose(design.T @ resid, 0, atol=1e-8)


@given(st.floats(0.05, 0.95))
def test_mixed_objective_is_minimized(lam):
    setting = make_problem_setting(Dims(5, 2, 2, 3), 9, 2.0, sigma_sq=0.1, sigma_u_sq=1.0)
    b_hat, labeled, pool = _parts(setting, n=20, pool=100)
    model = fit_in_n_out(b_hat, labeled, pool, lam)
    pseudo = fit_input_on_features(b_hat, labeled).predict(pool.X @ b_hat.T, pool.Z)

    def objective(head, c):
        lab = np.mean((labeled.Y - labeled.X @ b_hat.T @ head - c) ** 2)
        unl = np.mean((pseudo - pool.X @ b_hat.T @ head - c) ** 2)
        return (1 - lam) * lab + lam * unl

    best = objective(model.theta_w_hat, model.intercept)
    rng = np.random.default_rng(0)
    for _ in range(10):
        assert best <= objective(model.theta_w_hat + 0.01 * rng.standard_normal(2),
                                 model.intercept + 0.01 * rng.standard_normal()) + 1e-12


def test_sum_normalization_differs(setting):
    b_hat, labeled, pool = _parts(setting)
    mean = fit_in_n_out(b_hat, labeled, pool, 0.5)
    total = fit_in_n_out(b_hat, labeled, pool, 0.5, normalization="sum")
    assert not np.allclose(mean.theta_w_hat, total.theta_w_hat)


def test_raw_pseudolabeler(setting):
    b_hat, labeled, pool = _parts(setting)
    raw = fit_in_n_out(b_hat, labeled, pool, 1.0, pseudolabeler="raw")
    pseudo = fit_aux_inputs(labeled).predict(pool.X, pool.Z)
    design = np.hstack([np.ones((len(pool), 1)), pool.X @ b_hat.T])
    assert np.allclose(design.T @ (pseudo - raw.predict(pool.X)), 0, atol=1e-8)
    with pytest.raises(ValueError):
        fit_in_n_out(b_hat, labeled, pool, 1.0, pseudolabeler="other")


def test_in_n_out_input_errors(setting):
    b_hat, labeled, pool = _parts(setting)
    with pytest.raises(ValueError):
        fit_in_n_out(b_hat, labeled, pool, 1.5)
    with pytest.raises(ValueError):
        fit_in_n_out(b_hat, labeled, None, 0.5)
    with pytest.raises(ValueError):
        fit_in_n_out(b_hat, labeled.unlabeled(), pool, 0.5)
    with pytest.raises(ValueError):
        fit_in_n_out(b_hat, labeled, pool, 0.5, normalization="max")


def test_oracle_head_equals_population_head(setting, rng):
    Q = rng.standard_normal((2, 2)) + 2 * np.eye(2)
    b_hat = Q @ setting.B_star
    labeled = sample_dataset(setting, 40, with_latents=True, seed=5)
    gamma = fit_input_on_features(b_hat, labeled)
    pop = in_n_out_population_head(gamma, aux_map_in_features(setting, b_hat))
    oracle = in_n_out_oracle_head(labeled.X @ b_hat.T, labeled.U, labeled.Y)
    assert np.allclose(pop, oracle, rtol=1e-8, atol=1e-10)
    model = in_n_out_population_model(b_hat, gamma, aux_map_in_features(setting, b_hat))
    assert model.intercept == gamma.intercept


def test_oracle_head_rejects_rank_deficiency(rng):
    W = rng.standard_normal((10, 2))
    with pytest.raises(np.linalg.LinAlgError):
        in_n_out_oracle_head(W, W[:, :1], rng.standard_normal(10))
    with pytest.raises(np.linalg.LinAlgError):
        in_n_out_oracle_head(W[:2], W[:2], rng.standard_normal(2))


def test_select_lambda_is_the_grid_argmin(setting):
    b_hat, labeled, pool = _parts(setting)
    validation = sample_dataset(setting, 30, seed=9)
    lam, model = select_lambda(b_hat, labeled, pool, validation)
    errs = [np.mean((fit_in_n_out(b_hat, labeled, pool, g).predict(validation.X) - validation.Y) ** 2)
            for g in LAMBDA_GRID]
    assert lam == LAMBDA_GRID[int(np.argmin(errs))]
    assert np.mean((model.predict(validation.X) - validation.Y) ** 2) == pytest.approx(min(errs))


def test_model_serialization_round_trip(setting):
    b_hat, labeled, pool = _parts(setting)
    for model in (fit_aux_inputs(labeled), fit_in_n_out(b_hat, labeled, pool, 0.3)):
        back = model_from_dict(json.loads(json.dumps(model_to_dict(model))))
        assert type(back) is type(model) and back.kind == model.kind
        assert np.array_equal(back.predict(labeled.X, labeled.Z), model.predict(labeled.X, labeled.Z))
    with pytest.raises(ValueError):
        model_from_dict({"model": "tree"})


def test_feature_model_as_linear(rng):
    model = FeatureModel(rng.standard_normal((2, 4)), rng.standard_normal(2), 0.7)
    X = rng.standard_normal((5, 4))
    lin = model.as_linear(3)
    assert np.allclose(lin.predict(X, np.ones((5, 3))), model.predict(X))
