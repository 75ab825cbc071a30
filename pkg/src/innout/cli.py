"""Command-line front end: ``innout verify | demo | sweep``.

Exit codes: 0 success, 1 a suite failed, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .pipeline import SWEEP_AXES, DemoConfig, run_pipeline, run_sweep
from .verify.config import DEFAULT_CONFIGS, SUITE_NAMES, canonical_hash
from .verify.runner import rows_to_csv, run_suites

CONFIG_SCHEMA_VERSION = 1
TOP_LEVEL_KEYS = ("schema_version", "seed", "suites", "demo")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class ConfigError(ValueError):
    pass


def _check_value(path: str, default, value):
    """Coerce ``value`` to the type of ``default``; raise ConfigError on mismatch."""
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected a boolean, got {value!r}")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, tuple):
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list, got {value!r}")
        return tuple(value)
    return value


def _overrides(path: str, section, template) -> dict:
    if not isinstance(section, dict):
        raise ConfigError(f"{path}: expected an object")
    known = {f.name: f for f in dataclasses.fields(template)}
    out = {}
    for key, value in section.items():
        if key == "name" or key not in known:
            raise ConfigError(f"{path}.{key}: unknown field (valid: {', '.join(k for k in known if k != 'name')})")
        default = getattr(template, key)
        if key == "tolerances":
            if not isinstance(value, dict):
                raise ConfigError(f"{path}.tolerances: expected an object")
            for tkey, tval in value.items():
                if tkey not in default:
                    raise ConfigError(f"{path}.tolerances.{tkey}: unknown tolerance (valid: {', '.join(default)})")
                value[tkey] = _check_value(f"{path}.tolerances.{tkey}", float(default[tkey]), tval)
            out[key] = value
        elif key == "sigma_u_sq" and value is None:
            out[key] = None
        elif key == "lam" and value == "auto":
            out[key] = value
        elif default is None:
            out[key] = _check_value(f"{path}.{key}", 0.0, value)
        else:
            out[key] = _check_value(f"{path}.{key}", default, value)
    return out


def load_config(path) -> dict:
    """Parse and validate a config document; returns ``{"seed", "suites", "demo"}``."""
    doc = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"{path}: {exc.strerror}") from exc
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be an object")
        if doc.get("schema_version") != CONFIG_SCHEMA_VERSION:
            raise ConfigError(f"{path}: schema_version must be {CONFIG_SCHEMA_VERSION}")
        for key in doc:
            if key not in TOP_LEVEL_KEYS:
                raise ConfigError(f"{path}: {key}: unknown field (valid: {', '.join(TOP_LEVEL_KEYS)})")
    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("seed: expected an integer")
    suites = dict(DEFAULT_CONFIGS)
    section = doc.get("suites", {})
    if not isinstance(section, dict):
        raise ConfigError("suites: expected an object")
    for name, fields in section.items():
        if name not in DEFAULT_CONFIGS:
            raise ConfigError(f"suites.{name}: unknown suite (valid: {', '.join(SUITE_NAMES)})")
        changes = _overrides(f"suites.{name}", fields, DEFAULT_CONFIGS[name])
        try:
            suites[name] = DEFAULT_CONFIGS[name].replace(**changes)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"suites.{name}: {exc}") from exc
    changes = _overrides("demo", doc.get("demo", {}), DemoConfig())
    try:
        demo = DemoConfig(**changes)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"demo: {exc}") from exc
    return {"seed": seed, "suites": suites, "demo": demo}


def _write(path: Path, text: str, written: list) -> None:
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"could not write {path}: {exc.strerror}") from exc
    written.append(path.name)


def _write_manifest(out: Path, config_doc: dict, seed: int, files: list, extra=None) -> None:
    manifest = {
        "tool_version": __version__,
        "config_hash": canonical_hash(config_doc),
        "base_seed": seed,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "output_dir": str(out),
        "files": sorted(files + ["manifest.json"]),
    }
    if extra:
        manifest.update(extra)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _seed(args, config) -> int:
    return args.seed if args.seed is not None else config["seed"]


def cmd_verify(args) -> int:
    names = list(SUITE_NAMES) if args.suites == ["all"] else args.suites
    unknown = [n for n in names if n not in SUITE_NAMES]
    if unknown:
        print(f"unknown suite(s): {', '.join(unknown)}; valid suites: {', '.join(SUITE_NAMES)}, all",
              file=sys.stderr)
        return EXIT_USAGE
    config = load_config(args.config)
    seed = _seed(args, config)
    configs = []
    for name in names:
        cfg = config["suites"][name].replace(base_seed=seed)
        if args.trials is not None:
            cfg = cfg.replace(trials=args.trials)
        configs.append(cfg)
    out = Path(args.out)
    reports, status = run_suites(configs, out, jobs=args.jobs)
    for report in reports:
        print(f"{report.status.upper():4s}  {report.name:13s} {report.elapsed:8.2f}s  {len(report.rows)} rows")
    doc = {"schema_version": CONFIG_SCHEMA_VERSION, "seed": seed,
           "suites": {c.name: c.to_dict() for c in configs}}
    files = [f"{c.name}.csv" for c in configs] + ["summary.json"]
    _write_manifest(out, doc, seed, files, {"elapsed": {r.name: round(r.elapsed, 3) for r in reports}})
    return status


def _table(rows: list) -> str:
    cols = ("risk_id", "risk_ood", "excess_id", "excess_ood")
    lines = [f"{'model':12s}" + "".join(f"{c:>14s}" for c in cols)]
    for row in rows:
        lines.append(f"{row['model']:12s}" + "".join(f"{row[c]:14.6g}" for c in cols))
    return "\n".join(lines)


def cmd_demo(args) -> int:
    config = load_config(args.config)
    seed = _seed(args, config)
    demo = config["demo"]
    if args.trials is not None:
        demo = demo.replace(trials=args.trials)
    rows = [row for t in range(demo.trials) for row in run_pipeline(demo, seed, t)]
    print(_table(rows))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    if args.format == "json":
        _write(out / "demo.json", json.dumps(rows, indent=2) + "\n", files)
    else:
        _write(out / "demo.csv", rows_to_csv(rows), files)
    _write_manifest(out, {"schema_version": CONFIG_SCHEMA_VERSION, "seed": seed, "demo": demo.to_dict()},
                    seed, files)
    return EXIT_OK


def _parse_grid(text: str) -> list:
    try:
        grid = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--grid: could not parse {text!r} as comma-separated numbers") from None
    if not grid:
        raise ConfigError("--grid: empty grid")
    return grid


def cmd_sweep(args) -> int:
    config = load_config(args.config)
    seed = _seed(args, config)
    demo = config["demo"]
    if args.trials is not None:
        demo = demo.replace(trials=args.trials)
    grid = _parse_grid(args.grid)
    origins = ("id", "ood") if args.origin == "both" else (args.origin,)
    try:
        rows = run_sweep(demo, args.axis, grid, seed, origins)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    name = f"sweep_{args.axis}"
    if args.format == "json":
        _write(out / f"{name}.json", json.dumps(rows, indent=2) + "\n", files)
    else:
        _write(out / f"{name}.csv", rows_to_csv(rows), files)
    print(f"{len(rows)} rows -> {out / files[0]}")
    _write_manifest(out, {"schema_version": CONFIG_SCHEMA_VERSION, "seed": seed, "demo": demo.to_dict(),
                          "axis": args.axis, "grid": grid}, seed, files)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config document")
    common.add_argument("--out", default="innout-results", help="output directory")
    common.add_argument("--seed", type=int, help="override the base seed")
    common.add_argument("--trials", type=int, help="override the trial count")
    common.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="worker processes")
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    parser = argparse.ArgumentParser(prog="innout", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("verify", parents=[common], help="run verification suites")
    p.add_argument("suites", nargs="+", metavar="SUITE", help=f"'all' or any of: {', '.join(SUITE_NAMES)}")
    p.set_defaults(func=cmd_verify)
    p = sub.add_parser("demo", parents=[common], help="run the four models on one sampled setting")
    p.set_defaults(func=cmd_demo)
    p = sub.add_parser("sweep", parents=[common], help="rerun the demo along one axis")
    p.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p.add_argument("--grid", required=True, help="comma-separated values")
    p.add_argument("--origin", choices=("id", "ood", "both"), default="both")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
