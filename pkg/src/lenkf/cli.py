"""Command line entry point.

    lenkf run --config <path> [--seed-override N] [--out <dir>]
    lenkf validate --config <path>
    lenkf presets list

--config accepts either a JSON file path or the name of a shipped
preset.  Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigInvalid, LenkfError
from .experiments import execute_experiment, load_preset, preset_names, validate_config

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def _load_config(ref: str) -> dict:
    path = Path(ref)
    if path.is_file():
        try:
            return json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(f"{ref}: not valid JSON ({exc})") from None
    if ref in preset_names():
        return load_preset(ref)
    raise ConfigInvalid(f"{ref}: no such file or preset")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lenkf", description="Config-driven ensemble sampling experiments."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="validate a config, run it, write outputs")
    run.add_argument("--config", required=True, help="config file path or preset name")
    run.add_argument("--seed-override", type=int, default=None, metavar="N")
    run.add_argument("--out", default=None, metavar="DIR", help="output directory")

    val = sub.add_parser("validate", help="check a config without running it")
    val.add_argument("--config", required=True, help="config file path or preset name")

    presets = sub.add_parser("presets", help="preset operations")
    presets_sub = presets.add_subparsers(dest="presets_command", required=True)
    presets_sub.add_parser("list", help="list shipped preset names")

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "presets":
            for name in preset_names():
                print(name)
            return EXIT_OK
        if args.command == "validate":
            resolved = validate_config(_load_config(args.config))
            print(f"ok: {resolved['experiment']} (seed {resolved['seed']})")
            return EXIT_OK
        # run
        cfg = _load_config(args.config)
        validate_config(cfg)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        outdir, _ = execute_experiment(cfg, output_dir=args.out, seed_override=args.seed_override)
    except LenkfError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {outdir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
