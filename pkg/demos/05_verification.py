"""Run a reduced verification battery and read back the reports.

Run: python3 demos/05_verification.py   (the full battery is `innout verify all`)
"""
import tempfile

from innout.verify import default_battery, read_rows, run_suites

configs = [cfg.replace(trials=min(cfg.trials, 20)) for cfg in default_battery()
           if cfg.name not in ("closed_forms", "risk_oracle")]

# %% Each suite writes one CSV; trial seeds depend only on (base seed, suite, index).
with tempfile.TemporaryDirectory() as out:
    reports, status = run_suites(configs, out)
    for report in reports:
        print(f"{report.status:5s} {report.name:10s} {report.elapsed:6.2f}s")
    print("first psd row:", read_rows(f"{out}/psd.csv")[0])
print("exit status", status)
