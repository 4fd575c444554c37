"""Command line entry point.

Exit codes: 0 on success, 1 for usage or configuration problems, 2 for
numerical failures inside an experiment, 3 when the experiment ran but a
built-in sanity bound failed.
"""

import argparse
import dataclasses
import os
import sys

from ngrc.errors import ConfigError, NgrcError, NumericalError
from ngrc.harness import commands
from ngrc.harness.config import (PRESETS, apply_desk_scale, load_config,
                                 lorenz_config)


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; remap to our usage code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser():
    parser = _Parser(prog="ngrc",
                     description="train and exercise surrogate models of "
                                 "chaotic flows from time series data")
    sub = parser.add_subparsers(dest="command", required=True)
    runs = {
        "generate": "integrate the configured system and write data CSVs",
        "train": "fit a model on the generated training data",
        "error-curve": "scan one-step error over projection dimensions",
        "rollout": "short-term prediction check plus a long free run",
        "bifurcate": "sweep the exogenous parameter and compare attractors",
        "phase": "estimate asymptotic phase along the test trajectory",
        "feature-hist": "histogram the projected feature values",
        "run-all": "run every task listed in the config, in order",
    }
    for name, help_text in runs.items():
        p = sub.add_parser(name, help=help_text)
        group = p.add_mutually_exclusive_group()
        group.add_argument("--config", metavar="FILE",
                           help="JSON experiment config")
        group.add_argument("--preset", choices=sorted(PRESETS),
                           help="named built-in config")
        p.add_argument("--desk-scale", action="store_true",
                       help="cap the training length for quick runs")
        p.add_argument("--out", metavar="DIR",
                       help="artifact directory (overrides the config)")
        if name in ("train", "rollout", "bifurcate", "phase",
                    "feature-hist"):
            p.add_argument("--model", metavar="FILE",
                           help="model file (default: <out>/model.json)")
        if name == "train":
            p.add_argument("--train", metavar="FILE", action="append",
                           dest="train_files",
                           help="noisy training CSV (repeatable)")
            p.add_argument("--val", metavar="FILE",
                           help="noisy validation CSV")
    return parser


def _load(args):
    if args.config:
        cfg = load_config(args.config)
    elif args.preset:
        cfg = PRESETS[args.preset]()
    else:
        cfg = lorenz_config()
    env_seed = os.environ.get("NGRC_SEED")
    if env_seed is not None:
        try:
            cfg = dataclasses.replace(cfg, master_seed=int(env_seed))
        except ValueError:
            raise ConfigError(f"NGRC_SEED must be an integer, got {env_seed!r}")
    if args.desk_scale:
        cfg = apply_desk_scale(cfg)
    return cfg


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code or 0
    try:
        cfg = _load(args)
        out_dir = args.out
        if args.command == "generate":
            summary = commands.cmd_generate(cfg, out_dir)
        elif args.command == "train":
            summary = commands.cmd_train(cfg, out_dir,
                                         train_paths=args.train_files,
                                         val_path=args.val)
        elif args.command == "error-curve":
            summary = commands.cmd_error_curve(cfg, out_dir)
        elif args.command == "rollout":
            summary = commands.cmd_rollout(cfg, out_dir, args.model)
        elif args.command == "bifurcate":
            summary = commands.cmd_bifurcate(cfg, out_dir, args.model)
        elif args.command == "phase":
            summary = commands.cmd_phase(cfg, out_dir, args.model)
        elif args.command == "feature-hist":
            summary = commands.cmd_feature_hist(cfg, out_dir, args.model)
        else:
            summary = commands.cmd_run_all(cfg, out_dir)
    except ConfigError as exc:
        print(f"ngrc: config error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"ngrc: numerical failure: {exc}", file=sys.stderr)
        return 2
    except NgrcError as exc:
        print(f"ngrc: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"ngrc: {exc}", file=sys.stderr)
        return 1
    status = "ok" if summary["passed"] else "SANITY FAIL"
    print(f"{args.command}: {status} ({summary['runtime_s']:.1f}s)")
    return 0 if summary["passed"] else 3


if __name__ == "__main__":
    sys.exit(main())
