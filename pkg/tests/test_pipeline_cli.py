import json
import subprocess
import sys

import numpy as np
import pytest

from innout.cli import main
from innout.pipeline import MODELS, DemoConfig, apply_axis, run_pipeline, run_sweep

FAST = DemoConfig(m_id=1000, m_ood=1000)


def test_pipeline_rows():
    rows = run_pipeline(FAST, seed=0)
    assert [r["model"] for r in rows] == list(MODELS)
    by = {r["model"]: r for r in rows}
    # aux-inputs sees u through z and wins in distribution
    assert by["aux-inputs"]["risk_id"] == min(r["risk_id"] for r in rows)
    assert by["in-n-out"]["lambda"] == 1.0 and by["baseline"]["lambda"] is None
    assert rows == run_pipeline(FAST, seed=0)


def test_auto_lambda_picks_from_grid():
    rows = run_pipeline(FAST.replace(lam="auto"), seed=1)
    lam = rows[-1]["lambda"]
    assert 0.0 <= lam <= 1.0 and round(lam * 10) == lam * 10


def test_sweep_shape():
    rows = run_sweep(FAST.replace(trials=2), "sigma_sq", [0.01, 0.1, 1.0], seed=0)
    assert len(rows) == 3 * len(MODELS) * 2 * 2
    ood = run_sweep(FAST, "n_labeled", [20, 40], origins=("ood",))
    assert {r["origin"] for r in ood} == {"ood"} and len(ood) == 2 * len(MODELS)


def test_apply_axis():
    assert apply_axis(FAST, "shift_scale", 4).shift_scale == (0.25, 4.0)
    assert apply_axis(FAST, "pool_size", 300).m_ood == 300
    with pytest.raises(ValueError):
        apply_axis(FAST, "shift_scale", 0.5)
    with pytest.raises(ValueError):
        apply_axis(FAST, "depth", 1)
    with pytest.raises(ValueError):
        DemoConfig(lam="best")


def _write(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(doc if isinstance(doc, str) else json.dumps(doc))
    return str(path)


def test_cli_demo_writes_outputs(tmp_path, capsys):
    cfg = _write(tmp_path, {"schema_version": 1, "seed": 3, "demo": {"m_id": 500, "m_ood": 500}})
    out = tmp_path / "out"
    assert main(["demo", "--config", cfg, "--out", str(out), "--format", "json"]) == 0
    printed = capsys.readouterr().out.splitlines()
    assert len(printed) == 1 + len(MODELS)
    rows = json.loads((out / "demo.json").read_text(), parse_constant=lambda c: pytest.fail(c))
    assert len(rows) == 4
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["base_seed"] == 3 and "demo.json" in manifest["files"]
    assert {"tool_version", "config_hash", "timestamp", "output_dir"} <= set(manifest)


def test_cli_sweep_csv(tmp_path):
    out = tmp_path / "sweep"
    code = main(["sweep", "--axis", "lambda", "--grid", "0,0.5,1", "--origin", "ood", "--out", str(out),
                 "--config", _write(tmp_path, {"schema_version": 1, "demo": {"m_id": 300, "m_ood": 300}})])
    assert code == 0
    lines = (out / "sweep_lambda.csv").read_text().splitlines()
    assert lines[0] == "axis,value,trial,model,origin,risk,excess"
    assert len(lines) == 1 + 3 * len(MODELS)


def test_cli_verify_exit_codes(tmp_path):
    ok = _write(tmp_path, {"schema_version": 1, "suites": {"psd": {"trials": 5}}})
    assert main(["verify", "psd", "--config", ok, "--out", str(tmp_path / "a"), "--jobs", "1"]) == 0
    bad = _write(tmp_path, {"schema_version": 1, "suites": {"ols": {"trials": 5, "tolerances": {"rel_tol": 1e-12}}}},
                 "bad.json")
    assert main(["verify", "ols", "--config", bad, "--out", str(tmp_path / "b"), "--jobs", "1"]) == 1
    manifest = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert manifest["files"] == ["manifest.json", "ols.csv", "summary.json"]


@pytest.mark.parametrize("doc, message", [
    ({"schema_version": 1, "suites": {"thm2": {"trialz": 3}}}, "suites.thm2.trialz: unknown field"),
    ({"schema_version": 1, "suites": {"ols": {"trials": "many"}}}, "suites.ols.trials: expected an integer"),
    ({"schema_version": 1, "suites": {"what": {}}}, "unknown suite"),
    ({"schema_version": 1, "demo": {"lam": "best"}}, "demo"),
    ({"schema_version": 2}, "schema_version"),
    ({"schema_version": 1, "extra": 1}, "extra: unknown field"),
    ('{"schema_version": 1,\n "seed": }', ":2:10:"),
])
def test_cli_config_errors(tmp_path, capsys, doc, message):
    assert main(["demo", "--config", _write(tmp_path, doc), "--out", str(tmp_path)]) == 2
    assert message in capsys.readouterr().err


def test_cli_unknown_suite_lists_valid(capsys):
    assert main(["verify", "bogus"]) == 2
    assert "valid suites: ols" in capsys.readouterr().err


def test_cli_bad_grid(capsys, tmp_path):
    assert main(["sweep", "--axis", "lambda", "--grid", "a,b", "--out", str(tmp_path)]) == 2


def test_cli_usage_error_exits_2():
    proc = subprocess.run([sys.executable, "-m", "innout", "sweep"], capture_output=True, text=True)
    assert proc.returncode == 2 and "--axis" in proc.stderr
