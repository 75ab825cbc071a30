"""Population risk of linear predictors under the ID and OOD distributions.

The analytic route rewrites a predictor in ``(x, u)`` coordinates and uses
second moments; the Monte-Carlo route samples fresh test triples and exists
as an independent oracle for it.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .estimators import FeatureModel, LinearPredictor, Predictor
from .problem import ProblemSetting, SeedLike, _check_origin, _rng, oracle_moments, sample_dataset

CSV_COLUMNS = (
    "model", "origin", "method", "risk", "bayes", "excess",
    "x_term", "u_term", "noise_term", "mc_std_err", "seed",
)

PREDICTOR_CLASSES = ("x-only", "x-and-z")


@dataclass(frozen=True)
class RiskReport:
    risk: float
    bayes: float
    excess: float
    x_term: float
    u_term: float
    noise_term: float
    origin: str
    method: str
    mc_std_err: Optional[float] = None

    def as_row(self, model: str = "", seed: Optional[int] = None) -> dict:
        row = {"model": model, **asdict(self), "seed": seed}
        return {key: row[key] for key in CSV_COLUMNS}


def _linear(predictor: Predictor, setting: ProblemSetting) -> LinearPredictor:
    if isinstance(predictor, FeatureModel):
        return predictor.as_linear(setting.dims.T)
    return predictor


def _default_class(predictor: Predictor) -> str:
    return "x-and-z" if predictor.uses_z else "x-only"


def bayes_risk(setting: ProblemSetting, origin: str, predictor_class: str = "x-only") -> float:
    """Lowest achievable squared-error risk for predictors of ``x`` (or of ``x`` and ``z``).

    With ``x`` alone the latent term ``theta_u^T u`` is unpredictable.  With
    ``z`` available ``u`` is recovered exactly because ``C`` has full column
    rank, leaving only the noise.
    """
    if predictor_class not in PREDICTOR_CLASSES:
        raise ValueError(f"predictor_class must be one of {PREDICTOR_CLASSES}")
    _, _, sigma_u_sq = oracle_moments(setting, origin)
    if predictor_class == "x-only":
        return setting.sigma_sq + sigma_u_sq
    return setting.sigma_sq


def coefficient_errors(predictor: Predictor, setting: ProblemSetting) -> tuple[np.ndarray, np.ndarray, float]:
    """Errors ``(delta_x, delta_u, intercept)`` of the predictor in ``(x, u)`` coordinates.

    The prediction error is ``delta_x^T x + delta_u^T u - intercept + eps``.
    """
    lin = _linear(predictor, setting)
    coef_x = lin.theta_x + setting.B_star.T @ (setting.A_star.T @ lin.theta_z)
    coef_u = setting.C_star.T @ lin.theta_z
    return setting.theta_x - coef_x, setting.theta_u - coef_u, float(lin.intercept)


def analytic_risk(
    predictor: Predictor,
    setting: ProblemSetting,
    origin: str,
    predictor_class: Optional[str] = None,
) -> RiskReport:
    """Exact risk ``E[(y - f(x, z))^2]`` from closed-form second moments.

    The excess is taken against :func:`bayes_risk` of ``predictor_class``
    (default: x-only unless the predictor puts weight on ``z``).
    """
    _check_origin(origin)
    p_x, _ = setting.distributions(origin)
    _, Su, _ = oracle_moments(setting, origin)
    dx, du, b = coefficient_errors(predictor, setting)
    # x term includes the intercept: E[(dx^T x - b)^2]
    Sx = p_x.covariance()
    mean_err = float(dx @ p_x.mean) - b
    x_term = float(dx @ Sx @ dx) + mean_err**2
    u_term = float(du @ Su @ du)
    noise = setting.sigma_sq
    risk = x_term + u_term + noise
    bayes = bayes_risk(setting, origin, predictor_class or _default_class(predictor))
    return RiskReport(risk, bayes, risk - bayes, x_term, u_term, noise, origin, "analytic")


def monte_carlo_risk(
    predictor: Predictor,
    setting: ProblemSetting,
    origin: str,
    n_samples: int = 1_000_000,
    seed: SeedLike = None,
    predictor_class: Optional[str] = None,
    chunk: int = 250_000,
) -> RiskReport:
    """Sample-average risk on fresh ``(x, u, eps)`` with its standard error."""
    if n_samples < 100:
        raise ValueError("n_samples must be at least 100")
    _check_origin(origin)
    rng = _rng(seed)
    dx, du, b = coefficient_errors(predictor, setting)
    total = total_sq = x_sum = u_sum = 0.0
    remaining = n_samples
    while remaining > 0:
        size = min(chunk, remaining)
        ds = sample_dataset(setting, size, origin, with_labels=True, with_latents=True, seed=rng)
        err = ds.Y - predictor.predict(ds.X, ds.Z)
        sq = err**2
        total += float(sq.sum())
        total_sq += float((sq**2).sum())
        x_sum += float(((ds.X @ dx - b) ** 2).sum())
        u_sum += float(((ds.U @ du) ** 2).sum())
        remaining -= size
    mean = total / n_samples
    var = max(total_sq / n_samples - mean**2, 0.0) * n_samples / (n_samples - 1)
    bayes = bayes_risk(setting, origin, predictor_class or _default_class(predictor))
    return RiskReport(
        mean, bayes, mean - bayes, x_sum / n_samples, u_sum / n_samples, setting.sigma_sq,
        origin, "monte-carlo", math.sqrt(var / n_samples),
    )


def excess_risk_ratio(model_a_report: RiskReport, model_b_report: RiskReport) -> float:
    """``a.excess / b.excess``; ``inf`` when the denominator is at most 1e-14."""
    a, b = model_a_report, model_b_report
    if a.origin != b.origin:
        raise ValueError("reports come from different origins")
    if not math.isclose(a.bayes, b.bayes, rel_tol=1e-12, abs_tol=1e-15):
        raise ValueError("reports use different Bayes risks")
    if b.excess <= 1e-14:
        return math.inf
    return a.excess / b.excess
