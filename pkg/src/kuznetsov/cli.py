"""Command-line runner: ``kuznetsov <subcommand> [--preset NAME] [--config FILE] ...``.

Artifacts go to ``<out>/<name>/``: ``summary.json`` always, ``timeseries.csv``
when a trajectory was produced.  Exit codes: 0 success, 2 validation
failure, 3 degeneracy, 4 numerical failure, 130 interrupted.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import experiments
from .errors import (CompatibilityError, DegeneracyError, KuznetsovError, NumericalFailure,
                     StudyInvalidError)
from .scenarios import PRESETS, ScenarioConfig, deep_merge, load_config, preset

log = logging.getLogger("kuznetsov")

EXIT_INTERRUPTED = 130


def jsonable(obj):
    """Plain JSON types; non-finite floats become ``None``."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "as_dict"):
        return jsonable(obj.as_dict())
    return repr(obj)


def write_table(path: Path, rows):
    cols = experiments.TABLE_COLUMNS
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in rows:
            w.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in cols])


def write_summary(path: Path, summary):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(jsonable(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")


def resolve_config(args, command) -> ScenarioConfig:
    mapping = {}
    if args.preset:
        preset_cmd, cfg = preset(args.preset)
        if preset_cmd != command:
            log.info("preset %s is meant for '%s'; running '%s'", args.preset, preset_cmd, command)
        mapping = cfg.to_dict()
    if args.config:
        mapping = deep_merge(mapping, load_config(args.config))
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.strict is not None:
        overrides["solver"] = {"strict": args.strict}
    if args.out is not None:
        overrides["output"] = {"dir": args.out}
    mapping = deep_merge(mapping, overrides)
    cfg = ScenarioConfig.from_mapping(mapping)
    if cfg.output.name is None:
        name = args.preset or (Path(args.config).stem if args.config else "scenario")
        cfg = cfg.with_overrides(output={"name": name})
    return cfg


def emit(cfg: ScenarioConfig, result: experiments.Result, quiet=False):
    out = Path(cfg.output.dir) / cfg.output.name
    out.mkdir(parents=True, exist_ok=True)
    if result.table is not None:
        write_table(out / "timeseries.csv", result.table)
    write_summary(out / "summary.json", result.summary)
    if not quiet:
        flags = result.summary.get("flags", {})
        shown = " ".join(f"{k}={v}" for k, v in sorted(flags.items()))
        print(f"{cfg.output.name}: {shown}  -> {out}")
    return out


def execute(command, cfg: ScenarioConfig, quiet=False) -> int:
    fn = experiments.COMMANDS[command]
    try:
        result = fn(cfg)
    except CompatibilityError as exc:
        summary = experiments._header(cfg, command)
        summary.update({"error": {"type": type(exc).__name__, "message": str(exc)},
                        "compat": exc.report.as_dict()})
        emit(cfg, experiments.Result(summary), quiet)
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except DegeneracyError as exc:
        emit(cfg, experiments.partial_result(cfg, command, exc.partial, exc), quiet)
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except NumericalFailure as exc:
        partial = exc.payload.get("partial") if isinstance(exc.payload, dict) else None
        emit(cfg, experiments.partial_result(cfg, command, partial, exc), quiet)
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except StudyInvalidError as exc:
        summary = experiments._header(cfg, command)
        summary.update({"error": {"type": type(exc).__name__, "message": str(exc)},
                        "table": exc.table})
        emit(cfg, experiments.Result(summary), quiet)
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except KuznetsovError as exc:
        summary = experiments._header(cfg, command)
        summary["error"] = {"type": type(exc).__name__, "message": str(exc)}
        emit(cfg, experiments.Result(summary), quiet)
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except KeyboardInterrupt as exc:
        emit(cfg, experiments.partial_result(cfg, command, getattr(exc, "partial", None), exc),
             quiet)
        print("interrupted; partial artifacts written", file=sys.stderr)
        return EXIT_INTERRUPTED
    emit(cfg, result, quiet)
    return 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON scenario file")
    common.add_argument("--preset", help="built-in scenario name (see 'presets')")
    common.add_argument("--out", help="output directory (default: out)")
    common.add_argument("--seed", type=int, help="seed for randomized data")
    strict = common.add_mutually_exclusive_group()
    strict.add_argument("--strict", dest="strict", action="store_const", const=True,
                        help="reject incompatible data (default)")
    strict.add_argument("--permissive", dest="strict", action="store_const", const=False,
                        help="warn on incompatible data and run anyway")
    common.add_argument("-q", "--quiet", action="store_true")
    common.add_argument("-v", "--verbose", action="store_true")
    common.set_defaults(strict=None)

    parser = argparse.ArgumentParser(prog="kuznetsov", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "run": "solve one scenario; writes time series and summary",
        "decay": "run plus time-derivative decay report",
        "converge": "refinement study against an oracle",
        "oracle": "compare against a closed form or an independent construction",
        "compat": "check the trace conditions only",
        "perturb": "difference quotients with respect to the data",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text)
    p = sub.add_parser("presets", help="list built-in scenarios")
    p.add_argument("--json", action="store_true", help="print the preset configs as JSON")
    return parser


def list_presets(as_json=False):
    if as_json:
        print(json.dumps(jsonable(PRESETS), indent=2, sort_keys=True))
        return
    width = max(map(len, PRESETS))
    for name in sorted(PRESETS):
        entry = PRESETS[name]
        print(f"{name:<{width}}  {entry['command']:<9} {entry['description']}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "presets":
        list_presets(args.json)
        return 0
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args, args.command)
    except KuznetsovError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return execute(args.command, cfg, args.quiet)


if __name__ == "__main__":
    sys.exit(main())
