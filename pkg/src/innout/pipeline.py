"""End-to-end run of the three-step In-N-Out recipe on one sampled setting."""

from __future__ import annotations

import dataclasses
import zlib
from dataclasses import dataclass
from typing import Union

import numpy as np

from .estimators import (
    fit_aux_inputs,
    fit_baseline,
    fit_in_n_out,
    pretrain_aux_outputs,
    select_lambda,
    transfer_aux_outputs,
)
from .problem import Dims, make_problem_setting, random_covariate_shift, sample_dataset
from .risk import analytic_risk

MODELS = ("baseline", "aux-inputs", "aux-outputs", "in-n-out")
SWEEP_AXES = ("sigma_sq", "lambda", "n_labeled", "pool_size", "shift_scale")


@dataclass(frozen=True)
class DemoConfig:
    d: int = 10
    k: int = 3
    m: int = 2
    T: int = 4
    n_labeled: int = 50
    n_validation: int = 50
    m_id: int = 5000
    m_ood: int = 5000
    sigma_sq: float = 0.01
    sigma_u_sq: float = 1.0
    lam: Union[float, str] = 1.0
    conditioning: float = 2.0
    shift_scale: tuple = (0.1, 10.0)
    mean_shift: float = 0.0
    pseudolabeler: str = "features"
    normalization: str = "mean"
    trials: int = 1

    def __post_init__(self):
        object.__setattr__(self, "shift_scale", tuple(self.shift_scale))
        if isinstance(self.lam, str) and self.lam != "auto":
            raise ValueError("lam must be a number in [0, 1] or 'auto'")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")

    def replace(self, **changes) -> "DemoConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        doc["shift_scale"] = list(self.shift_scale)
        return doc


def _trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(b"demo"), trial])


def run_pipeline(config: DemoConfig, seed: int = 0, trial: int = 0) -> list:
    """Fit all four models on one sampled setting and report ID/OOD risks.

    Returns one row per model with ``risk_id``, ``risk_ood``, ``excess_id``,
    ``excess_ood`` and the mixing weight used by In-N-Out.
    """
    rng = _trial_rng(seed, trial)
    dims = Dims(config.d, config.k, config.m, config.T)
    setting = make_problem_setting(dims, rng, config.conditioning,
                                   sigma_sq=config.sigma_sq, sigma_u_sq=config.sigma_u_sq)
    setting = random_covariate_shift(setting, rng, config.shift_scale, config.mean_shift)
    labeled = sample_dataset(setting, config.n_labeled, "id", seed=rng)
    id_pool = sample_dataset(setting, config.m_id, "id", with_labels=False, seed=rng)
    pool = [id_pool]
    if config.m_ood > 0:
        pool.append(sample_dataset(setting, config.m_ood, "ood", with_labels=False, seed=rng))

    b_hat = pretrain_aux_outputs(pool, config.k)
    options = {"pseudolabeler": config.pseudolabeler, "normalization": config.normalization}
    if config.lam == "auto":
        validation = sample_dataset(setting, config.n_validation, "id", seed=rng)
        lam, innout = select_lambda(b_hat, labeled, id_pool, validation, **options)
    else:
        lam = float(config.lam)
        innout = fit_in_n_out(b_hat, labeled, id_pool, lam, **options)
    models = {
        "baseline": fit_baseline(labeled),
        "aux-inputs": fit_aux_inputs(labeled),
        "aux-outputs": transfer_aux_outputs(b_hat, labeled),
        "in-n-out": innout,
    }
    rows = []
    for name, model in models.items():
        rid = analytic_risk(model, setting, "id")
        rood = analytic_risk(model, setting, "ood")
        rows.append({
            "trial": trial, "model": name,
            "risk_id": rid.risk, "risk_ood": rood.risk,
            "excess_id": rid.excess, "excess_ood": rood.excess,
            "lambda": lam if name == "in-n-out" else None,
        })
    return rows


def apply_axis(config: DemoConfig, axis: str, value: float) -> DemoConfig:
    if axis == "sigma_sq":
        return config.replace(sigma_sq=float(value))
    if axis == "lambda":
        return config.replace(lam=float(value))
    if axis == "n_labeled":
        return config.replace(n_labeled=int(value))
    if axis == "pool_size":
        return config.replace(m_id=int(value), m_ood=int(value))
    if axis == "shift_scale":
        value = float(value)
        if value < 1:
            raise ValueError("shift_scale values must be >= 1 (factors drawn from [1/s, s])")
        return config.replace(shift_scale=(1.0 / value, value))
    raise ValueError(f"unknown sweep axis {axis!r}; valid axes: {', '.join(SWEEP_AXES)}")


def run_sweep(config: DemoConfig, axis: str, grid, seed: int = 0, origins=("id", "ood")) -> list:
    """Long-format rows ``(axis, value, trial, model, origin, risk, excess)``.

    Trial ``t`` reuses the same seed at every grid value.
    """
    if len(grid) == 0:
        raise ValueError("empty sweep grid")
    rows = []
    for value in grid:
        point = apply_axis(config, axis, value)
        for trial in range(point.trials):
            for row in run_pipeline(point, seed, trial):
                for origin in origins:
                    rows.append({
                        "axis": axis, "value": float(value), "trial": trial, "model": row["model"],
                        "origin": origin, "risk": row[f"risk_{origin}"], "excess": row[f"excess_{origin}"],
                    })
    return rows
