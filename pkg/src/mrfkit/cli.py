"""Command line interface: ``mrfkit <subcommand> --config run.ini``."""

from __future__ import annotations

import argparse
import sys

from .config import parse_config
from .errors import ConfigError

SUBCOMMANDS = {
    "solve": ("solve",),
    "verify": ("solve", "verify"),
    "synthesize": ("solve", "verify", "synthesize"),
    "converse": ("converse",),
    "bench": None,  # stages from [run] stages
    "plot": (),
}


def build_parser():
    p = argparse.ArgumentParser(prog="mrfkit", description=__doc__)
    p.add_argument("command", choices=sorted(SUBCOMMANDS))
    p.add_argument("--config", help="INI run configuration")
    p.add_argument("--out", help="output directory (overrides [outputs] dir)")
    p.add_argument("--seed", type=int, help="seed (overrides [run] seed)")
    p.add_argument("--quiet", action="store_true", help="print only the verdict")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "plot":
        from .plots import plots_from_directory

        out = args.out
        if out is None:
            if args.config is None:
                print("error: plot needs --out or --config", file=sys.stderr)
                return 2
            out = parse_config(args.config).out_dir
        files = plots_from_directory(out)
        if not args.quiet:
            print("\n".join(files))
        return 0
    if args.config is None:
        print(f"error: {args.command} needs --config", file=sys.stderr)
        return 2
    try:
        plan = parse_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2**64:
            print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
            return 2
        plan.sections["run"]["seed"] = args.seed
    if args.out is not None:
        plan.sections["outputs"]["dir"] = args.out
    from .pipeline import run_pipeline

    stages = SUBCOMMANDS[args.command]
    result = run_pipeline(plan, stages=stages, quiet=args.quiet)
    if not args.quiet:
        print("\n".join(result.report_lines))
    print(f"{args.command}: {'PASS' if result.passed else 'FAIL'} ({plan.out_dir})")
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
