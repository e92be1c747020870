"""Command-line entry point: ``memdc <kind> --config <path-or-preset> [--seed N] [--out DIR]``."""

from __future__ import annotations

import argparse
import json
import sys
from typing import List, Optional

from .config import KINDS, ConfigError, load_config, preset_names, validate
from .runner import run


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="memdc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS + ("validate",):
        p = sub.add_parser(kind, help=f"run a {kind} experiment" if kind != "validate"
                           else "check a config without running it")
        p.add_argument("--config", required=True,
                       help=f"TOML file or bundled preset ({', '.join(preset_names())})")
        p.add_argument("--seed", type=int, help="override master_seed")
        p.add_argument("--out", help="output directory (overrides output_dir)")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg.master_seed = args.seed

    if args.command == "validate":
        diags = validate(cfg)
        for d in diags:
            print(f"error: {d}", file=sys.stderr)
        if not diags:
            print(f"{args.config}: ok ({cfg.kind})")
        return 1 if diags else 0

    if cfg.kind != args.command:
        print(f"error: kind: config describes a {cfg.kind!r} experiment, not {args.command!r}",
              file=sys.stderr)
        return 2
    try:
        manifest = run(cfg, args.out)
    except ConfigError as exc:
        for d in exc.diagnostics:
            print(f"error: {d}", file=sys.stderr)
        return 1
    except Exception as exc:  # any failure is reported, never a traceback
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(json.dumps({"files": sorted(manifest.files), "summary": manifest.summary}, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
