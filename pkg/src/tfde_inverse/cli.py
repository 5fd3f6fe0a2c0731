"""Command line entry point: ``tfde simulate|r-omega|reconstruct|fbm-gen``."""
import argparse
import logging
import sys

from .config import ConfigError, parse_config
from .pipelines import PipelineError, run_direct, run_fbm, run_r_omega, run_reconstruct

COMMANDS = {
    "simulate": run_direct,
    "r-omega": run_r_omega,
    "reconstruct": run_reconstruct,
    "fbm-gen": run_fbm,
}


def _u64(text):
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser():
    p = argparse.ArgumentParser(prog="tfde", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "simulate a boundary ensemble",
        "r-omega": "tabulate the variance kernel R(omega)",
        "reconstruct": "recover |f| from phaseless boundary statistics",
        "fbm-gen": "generate fractional Brownian motion paths",
    }
    for name, text in helps.items():
        sp = sub.add_parser(name, help=text)
        sp.add_argument("--config", required=True, help="key = value configuration file")
        sp.add_argument("--seed", type=_u64, help="override master_seed")
        sp.add_argument("--output", help="override output_dir")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.config)
        cfg = cfg.with_overrides(master_seed=args.seed, output_dir=args.output)
    except (OSError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        result = COMMANDS[args.command](cfg)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.command == "reconstruct":
        print(f"rel_l2_error = {result.metrics['rel_l2_error']!r}")
    print(f"wrote {cfg.output_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
