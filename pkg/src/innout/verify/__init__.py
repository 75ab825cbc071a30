"""Trial-based verification suites for the linear theory."""

from .config import DEFAULT_CONFIGS, SUITE_NAMES, SuiteConfig, SuiteReport, default_config, trial_rng
from .runner import (
    default_battery,
    read_rows,
    rows_to_csv,
    run_suite,
    run_suites,
    verify_closed_forms,
    verify_example1,
    verify_minsing_lemma,
    verify_ols,
    verify_prop1,
    verify_psd_inequality,
    verify_risk_oracle,
    verify_rowspace_lemma,
    verify_thm1,
    verify_thm2,
)
from .suites import evaluate_rows, psd_gap_matrix

__all__ = [
    "DEFAULT_CONFIGS", "SUITE_NAMES", "SuiteConfig", "SuiteReport", "default_config", "trial_rng",
    "default_battery", "read_rows", "rows_to_csv", "run_suite", "run_suites", "evaluate_rows",
    "psd_gap_matrix", "verify_closed_forms", "verify_example1", "verify_minsing_lemma", "verify_ols",
    "verify_prop1", "verify_psd_inequality", "verify_risk_oracle", "verify_rowspace_lemma",
    "verify_thm1", "verify_thm2",
]
