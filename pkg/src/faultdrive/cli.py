"""Command-line entry point.

Subcommands:
  run       execute a campaign and write all result files
  report    recompute report.json/summary.csv/plotdata from stored episodes
  validate  check a config (scenarios, fault specs, weights) without running
  replay    re-run one stored trial and byte-compare against its record

Exit codes: 0 ok, 2 config error, 3 data error, 4 determinism divergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .campaign import (
    ConfigError,
    DataError,
    Trial,
    full_report,
    load_config,
    plan_campaign,
    read_episodes,
    record_json,
    record_to_obj,
    render_plotdata,
    render_report_json,
    render_summary_csv,
    resolve_config,
    run_campaign,
    run_episode,
    validate_config,
    write_outputs,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGED = 4


def _parse_override(text: str):
    if "=" not in text:
        raise ConfigError(f"override must look like key=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def _load_config_with_overrides(config_path: str, overrides: list[str]) -> dict:
    path = Path(config_path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: parse error at line {e.lineno}: {e.msg}") from e
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be an object")
    for text in overrides:
        key, value = _parse_override(text)
        raw[key] = value
    return resolve_config(raw, path.parent)


def cmd_run(args) -> int:
    cfg = _load_config_with_overrides(args.config, args.override)
    if args.workers is not None:
        cfg["workers"] = args.workers
    validate_config(cfg)
    records = run_campaign(cfg)
    write_outputs(args.out, records, cfg=cfg)
    trials = plan_campaign(cfg)
    print(f"ran {len(trials)} trials; results in {args.out}")
    return EXIT_OK


def cmd_report(args) -> int:
    out = Path(args.out)
    records = read_episodes(out / "episodes.jsonl")
    report = full_report(records)
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        fh.write(render_report_json(report))
    with open(out / "summary.csv", "w", encoding="utf-8") as fh:
        fh.write(render_summary_csv(records))
    plotdir = out / "plotdata"
    plotdir.mkdir(exist_ok=True)
    for name, content in render_plotdata(report).items():
        with open(plotdir / name, "w", encoding="utf-8") as fh:
            fh.write(content)
    print(f"recomputed report over {len(records)} episodes in {out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _load_config_with_overrides(args.config, args.override)
    validate_config(cfg)
    trials = plan_campaign(cfg)
    print(
        f"config ok: {len(cfg['scenarios'])} scenarios, "
        f"{len(cfg['fault_specs'])} fault specs, {len(trials)} trials planned"
    )
    return EXIT_OK


def cmd_replay(args) -> int:
    out = Path(args.out)
    cfg_path = out / "config.resolved.json"
    if not cfg_path.exists():
        raise ConfigError(f"stored config not found: {cfg_path}")
    with open(cfg_path, "r", encoding="utf-8") as fh:
        cfg = json.load(fh)
    records = read_episodes(out / "episodes.jsonl")
    stored = {r.trial.trial_id: r for r in records}
    if args.trial not in stored:
        raise ConfigError(
            f"unknown trial id {args.trial!r}; stored trials look like "
            f"{records[0].trial.trial_id!r}"
        )
    old = stored[args.trial]
    fresh = run_episode(cfg, old.trial)

    old_json = record_json(old)
    new_json = record_json(fresh)
    if old_json == new_json:
        print(f"replay ok: {args.trial} reproduced byte-identically")
        return EXIT_OK
    if args.tolerance:
        if _within_tolerance(record_to_obj(old), record_to_obj(fresh), args.tolerance):
            print(
                f"replay TOLERANT MATCH: {args.trial} differs in exact bits but "
                f"every numeric field is within {args.tolerance}",
                file=sys.stderr,
            )
            return EXIT_OK
    field = _first_divergence(record_to_obj(old), record_to_obj(fresh))
    print(f"replay DIVERGED: {args.trial} first differing field: {field}", file=sys.stderr)
    return EXIT_DIVERGED


def _first_divergence(a, b, path="record"):
    if isinstance(a, dict) and isinstance(b, dict):
        for key in sorted(set(a) | set(b)):
            if key not in a or key not in b:
                return f"{path}.{key} (missing on one side)"
            sub = _first_divergence(a[key], b[key], f"{path}.{key}")
            if sub:
                return sub
        return None
    if isinstance(a, list) and isinstance(b, list):
        if len(a) != len(b):
            return f"{path} (length {len(a)} vs {len(b)})"
        for i, (x, y) in enumerate(zip(a, b)):
            sub = _first_divergence(x, y, f"{path}[{i}]")
            if sub:
                return sub
        return None
    if a != b:
        return f"{path} ({a!r} vs {b!r})"
    return None


def _within_tolerance(a, b, tol) -> bool:
    if isinstance(a, dict) and isinstance(b, dict):
        return set(a) == set(b) and all(_within_tolerance(a[k], b[k], tol) for k in a)
    if isinstance(a, list) and isinstance(b, list):
        return len(a) == len(b) and all(_within_tolerance(x, y, tol) for x, y in zip(a, b))
    if isinstance(a, float) and isinstance(b, float):
        return abs(a - b) <= tol
    return a == b


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="faultdrive",
        description="Fault-injection campaigns for a deterministic 2D driving loop",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, needs_config):
        if needs_config:
            p.add_argument("-c", "--config", required=True, help="campaign config JSON")
        p.add_argument("-o", "--out", required=True, help="output directory")
        p.add_argument(
            "--override",
            action="append",
            default=[],
            metavar="K=V",
            help="override a top-level config key (repeatable)",
        )

    p_run = sub.add_parser("run", help="run a campaign")
    common(p_run, needs_config=True)
    p_run.add_argument("--workers", type=int, default=None, help="parallel episode workers")
    p_run.set_defaults(func=cmd_run)

    p_report = sub.add_parser("report", help="recompute reports from stored episodes")
    common(p_report, needs_config=False)
    p_report.set_defaults(func=cmd_report)

    p_val = sub.add_parser("validate", help="validate a config without running")
    p_val.add_argument("-c", "--config", required=True)
    p_val.add_argument("--override", action="append", default=[], metavar="K=V")
    p_val.set_defaults(func=cmd_validate)

    p_replay = sub.add_parser("replay", help="re-run one stored trial and compare")
    common(p_replay, needs_config=False)
    p_replay.add_argument("--trial", required=True, help="trial id scenario:spec:replicate")
    p_replay.add_argument(
        "--tolerance",
        type=float,
        default=0.0,
        help="accept numeric drift up to this bound (flagged, default exact)",
    )
    p_replay.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
