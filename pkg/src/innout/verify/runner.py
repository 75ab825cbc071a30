"""Run suites, reduce trials in index order and write CSV/JSON reports."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from .config import DEFAULT_CONFIGS, SuiteConfig, SuiteReport, default_config
from .suites import SUITES

SUMMARY_FILE = "summary.json"


def _trial_rows(args):
    config, index = args
    return SUITES[config.name].trial(config, index)


def run_suite(config: SuiteConfig, jobs: int = 1) -> SuiteReport:
    """Run every trial of one suite and judge the collected rows.

    Trials may run in worker processes; rows are reassembled by trial index
    so the report does not depend on completion order.
    """
    if config.name not in SUITES:
        raise KeyError(f"unknown suite {config.name!r}; valid suites: {', '.join(SUITES)}")
    suite = SUITES[config.name]
    suite.check(config)
    start = time.perf_counter()
    work = [(config, i) for i in range(config.trials)]
    if jobs > 1 and config.trials > 1:
        chunk = max(1, config.trials // (4 * jobs))
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_trial = list(pool.map(_trial_rows, work, chunksize=chunk))
    else:
        per_trial = [_trial_rows(item) for item in work]
    rows = [row for trial_rows in per_trial for row in trial_rows]
    status, aggregates = suite.evaluate(config, rows)
    return SuiteReport(config.name, status, rows, aggregates, config, time.perf_counter() - start)


def format_value(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return format(value, ".17g")
    if value is None:
        return ""
    return str(value)


def rows_to_csv(rows: Sequence[dict]) -> str:
    """CSV text with '.' decimals and 17 significant digits."""
    buf = io.StringIO()
    if rows:
        writer = csv.writer(buf, lineterminator="\n")
        columns = list(rows[0])
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(row[c]) for c in columns])
    return buf.getvalue()


def read_rows(path: Union[str, Path]) -> list:
    """Rows from a suite CSV, numeric fields parsed back to floats."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        for key, value in row.items():
            try:
                row[key] = float(value)
            except ValueError:
                pass
    return rows


def write_report(report: SuiteReport, out_dir: Union[str, Path]) -> Path:
    path = Path(out_dir) / f"{report.name}.csv"
    try:
        path.write_text(rows_to_csv(report.rows))
    except OSError as exc:
        raise OSError(f"could not write {path}: {exc}") from exc
    return path


def run_suites(
    configs: Iterable[SuiteConfig],
    out_dir: Optional[Union[str, Path]] = None,
    jobs: int = 1,
) -> tuple[list, int]:
    """Run suites in order; returns the reports and an exit status (0 iff all pass).

    With ``out_dir`` each suite's rows go to ``<suite>.csv`` and the pass
    summary to ``summary.json``.
    """
    configs = list(configs)
    out = None
    if out_dir is not None:
        out = Path(out_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise OSError(f"could not create output directory {out}: {exc}") from exc
    reports = []
    for config in configs:
        report = run_suite(config, jobs)
        reports.append(report)
        if out is not None:
            write_report(report, out)
    if out is not None:
        summary = out / SUMMARY_FILE
        try:
            summary.write_text(json.dumps([r.summary() for r in reports], indent=2, sort_keys=True) + "\n")
        except OSError as exc:
            raise OSError(f"could not write {summary}: {exc}") from exc
    status = 0 if all(r.passed for r in reports) else 1
    return reports, status


def _runner(name):
    def run(config: Optional[SuiteConfig] = None, jobs: int = 1, **overrides) -> SuiteReport:
        config = config or default_config(name)
        if overrides:
            config = config.replace(**overrides)
        return run_suite(config, jobs)

    run.__name__ = f"verify_{name}"
    run.__doc__ = f"Run the ``{name}`` suite (defaults from ``DEFAULT_CONFIGS[{name!r}]``)."
    return run


verify_ols = _runner("ols")
verify_prop1 = _runner("prop1")
verify_example1 = _runner("example1")
verify_thm1 = _runner("thm1")
verify_psd_inequality = _runner("psd")
verify_thm2 = _runner("thm2")
verify_rowspace_lemma = _runner("rowspace")
verify_minsing_lemma = _runner("minsing")
verify_closed_forms = _runner("closed_forms")
verify_risk_oracle = _runner("risk_oracle")


def default_battery(**overrides) -> list:
    return [cfg.replace(**overrides) if overrides else cfg for cfg in DEFAULT_CONFIGS.values()]
