"""Command line entry point ``accelfd``."""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .config import ConfigError, StudyConfig, load_config, validate
from .presets import ALIASES, PRESETS, PresetError
from .report import emit_report
from .study import StudyError, run_study


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="accelfd", description="Finite-difference convergence and extrapolation studies.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", metavar="PATH", help="study configuration file")
            p.add_argument("--preset", metavar="NAME", help="preset to use when no config is given")
        p.add_argument("--out", metavar="PATH", help="write the report here instead of stdout")
        p.add_argument("--format", choices=("csv", "table"), default=None, help="report format (default csv)")
        p.add_argument("--deterministic", action="store_true", help="omit wall times so output is reproducible")
        p.add_argument("--threads", type=int, default=1, metavar="N", help="solve meshes concurrently")

    common(sub.add_parser("solve", help="solve on each configured mesh"))
    common(sub.add_parser("study", help="run the study described by the config"))
    common(sub.add_parser("expansion", help="expansion remainder study"))
    common(sub.add_parser("accept", help="run the full acceptance suite"), config=False)
    sub.add_parser("presets", help="list the preset catalog")
    return ap


def _config(args, mode: str | None) -> StudyConfig:
    if args.config:
        cfg = load_config(args.config)
        if args.preset:
            cfg = dataclasses.replace(cfg, preset=args.preset)
    elif args.preset:
        cfg = StudyConfig(preset=args.preset)
    else:
        raise ConfigError("give --config PATH or --preset NAME")
    if mode is not None:
        cfg = dataclasses.replace(cfg, mode=mode)
    validate(cfg)
    return cfg


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "presets":
        for name, p in PRESETS.items():
            print(f"{name:16s} {p.kind:10s} {p.description}")
        for alias, target in ALIASES.items():
            print(f"{alias:16s} alias of {target}")
        return 0
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return 2
    try:
        if args.command == "accept":
            cfg = StudyConfig(mode="acceptance")
        else:
            cfg = _config(args, {"solve": "single", "expansion": "expansion", "study": None}[args.command])
        report = run_study(cfg, threads=args.threads)
    except (ConfigError, StudyError, PresetError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    fmt = args.format or ("table" if args.command == "accept" else cfg.format)
    out = args.out or cfg.out
    text = emit_report(report, fmt, out, args.deterministic)
    if out is None:
        sys.stdout.write(text)
    elif args.command == "accept":
        for v in report.verdicts:
            print(f"{'PASS' if v.passed else 'FAIL'}  {v.name}")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
