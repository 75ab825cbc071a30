"""Suite configuration, reports and per-trial seeding."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import zlib
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional

import numpy as np

from ..problem import Dims


@dataclass(frozen=True)
class SuiteConfig:
    """Knobs for one verification suite.

    Statistical thresholds live in ``tolerances``; each suite documents the
    keys it reads and ships defaults in :data:`DEFAULT_CONFIGS`.
    """

    name: str
    d: int = 6
    k: int = 2
    m: int = 2
    T: int = 3
    n_labeled: int = 20
    m_id: int = 0
    m_ood: int = 0
    sigma_sq: float = 0.1
    sigma_u_sq: Optional[float] = 1.0
    sigma_grid: tuple = ()
    R_grid: tuple = ()
    pool_sizes: tuple = ()
    trials: int = 100
    redraws: int = 0
    n_mc: int = 0
    conditioning: float = 2.0
    shift_scale: tuple = (0.1, 10.0)
    mean_shift: float = 0.0
    feature_map: str = "oracle"
    base_seed: int = 0
    tolerances: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        for name in ("sigma_grid", "R_grid", "pool_sizes", "shift_scale"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(self, "tolerances", dict(self.tolerances))
        if self.feature_map not in ("oracle", "pretrained"):
            raise ValueError("feature_map must be 'oracle' or 'pretrained'")

    @property
    def dims(self) -> Dims:
        return Dims(self.d, self.k, self.m, self.T)

    def tol(self, key: str) -> float:
        return float(self.tolerances[key])

    def replace(self, **changes) -> "SuiteConfig":
        if "tolerances" in changes:
            changes["tolerances"] = {**self.tolerances, **changes["tolerances"]}
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        for key, value in doc.items():
            if isinstance(value, tuple):
                doc[key] = list(value)
        doc["tolerances"] = dict(sorted(self.tolerances.items()))
        return doc

    def config_hash(self) -> str:
        return canonical_hash(self.to_dict())


def canonical_hash(doc: Any) -> str:
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def trial_seed(config: SuiteConfig, index: int) -> np.random.SeedSequence:
    """Seed for one trial, keyed on (base seed, suite name, trial index)."""
    return np.random.SeedSequence([config.base_seed, zlib.crc32(config.name.encode()), index])


def trial_rng(config: SuiteConfig, index: int) -> np.random.Generator:
    return np.random.default_rng(trial_seed(config, index))


STATUSES = ("pass", "fail", "n/a")


@dataclass
class SuiteReport:
    name: str
    status: str
    rows: list
    aggregates: dict
    config: SuiteConfig
    elapsed: float = 0.0

    @property
    def passed(self) -> bool:
        """False only on failure; an inapplicable suite carries no pass requirement."""
        return self.status != "fail"

    def summary(self) -> dict:
        return {
            "suite": self.name,
            "pass": self.passed,
            "status": self.status,
            "config_hash": self.config.config_hash(),
            "aggregates": _jsonable(self.aggregates),
        }


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else repr(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


# Defaults are sized to the acceptance battery.
DEFAULT_CONFIGS = {
    "ols": SuiteConfig(
        "ols", d=10, k=3, m=2, T=4, n_labeled=200, sigma_sq=1.0, sigma_u_sq=0.0, trials=500,
        tolerances={"rel_tol": 0.2},
    ),
    "prop1": SuiteConfig(
        "prop1", d=5, k=2, m=2, T=2, n_labeled=500, sigma_sq=0.1, sigma_u_sq=1.0, trials=500,
        tolerances={"pass_fraction": 0.95, "min_n": 100},
    ),
    "example1": SuiteConfig(
        "example1", d=1, k=1, m=2, T=2, n_labeled=20, sigma_sq=1.0, sigma_u_sq=None,
        R_grid=(1.0, 3.0, 10.0, 30.0), trials=1000,
        tolerances={"gap_se": 2.0, "flat_se": 3.0, "trim": 0.05},
    ),
    "thm1": SuiteConfig(
        "thm1", d=6, k=2, m=2, T=3, n_labeled=20, m_id=5000, m_ood=5000, sigma_sq=0.1,
        sigma_u_sq=1.0, trials=200, redraws=200, feature_map="pretrained",
        tolerances={"se_multiplier": 3.0, "pass_fraction": 0.95, "abs_slack": 1e-8},
    ),
    "psd": SuiteConfig(
        "psd", d=8, k=3, m=2, T=3, n_labeled=30, trials=1000,
        tolerances={"min_eigenvalue": -1e-8},
    ),
    "thm2": SuiteConfig(
        "thm2", d=6, k=2, m=2, T=3, n_labeled=20, m_id=10_000, sigma_u_sq=1.0,
        sigma_grid=(1e-4, 1e-3, 1e-2, 1e-1), trials=200,
        tolerances={"drop_factor": 10.0},
    ),
    "rowspace": SuiteConfig(
        "rowspace", d=10, k=3, m=2, T=4, pool_sizes=(1_000, 10_000, 100_000), trials=20,
        tolerances={"angle": 0.05, "exact": 1e-8},
    ),
    "minsing": SuiteConfig(
        "minsing", d=5, k=3, m=2, T=3, n_labeled=20, trials=10_000,
        tolerances={"quantile": 0.01, "floor": 1e-6},
    ),
    "closed_forms": SuiteConfig(
        "closed_forms", d=6, k=2, m=2, T=3, n_labeled=20, m_id=1_000_000, trials=100,
        tolerances={"exact_rel": 1e-8, "pool_abs": 1e-2},
    ),
    "risk_oracle": SuiteConfig(
        "risk_oracle", trials=100, n_mc=1_000_000,
        tolerances={"se_multiplier": 4.0},
    ),
}

SUITE_NAMES = tuple(DEFAULT_CONFIGS)


def default_config(name: str, **overrides) -> SuiteConfig:
    if name not in DEFAULT_CONFIGS:
        raise KeyError(f"unknown suite {name!r}; valid suites: {', '.join(SUITE_NAMES)}")
    return DEFAULT_CONFIGS[name].replace(**overrides) if overrides else DEFAULT_CONFIGS[name]
