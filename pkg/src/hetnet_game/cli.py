"""Command-line entry point: ``hetnet-game``.

Exit codes: 0 success, 1 reduction check mismatch, 2 configuration or
output error, 3 solver error.
"""

import argparse
import logging
import sys
from dataclasses import replace

from .errors import ConfigError, HetNetError
from .experiment import emit_outputs, run_experiment
from .gadget import build_network, check_reduction, format_verdict, load_dimacs
from .network import ScenarioConfig, load_config

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3

log = logging.getLogger("hetnet_game")


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def build_parser():
    p = argparse.ArgumentParser(
        prog="hetnet-game",
        description="Joint BS association and MIMO covariance game: Monte-Carlo runs and the 3-SAT gadget check.",
    )
    p.add_argument("--config", metavar="PATH", help="key=value scenario file (defaults apply when omitted)")
    p.add_argument("--mode", choices=("joint", "fixed", "both"), default="both")
    p.add_argument("--trials", type=int, default=5, metavar="K")
    p.add_argument("--seed", type=int, default=None, metavar="S", help="overrides the config seed")
    p.add_argument("--snr-list", type=_float_list, default=[0.0, 10.0, 20.0, 30.0], metavar="DB,DB,...")
    p.add_argument("--out", default="out", metavar="DIR")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for independent trials")
    p.add_argument("--np-check", metavar="SATFILE", help="DIMACS CNF file; run the reduction check instead")
    p.add_argument("--allow-repeated-literals", action="store_true", help="accept clauses such as (x1 or x1 or x1)")
    p.add_argument("--power-levels", type=_float_list, default=[1.0], metavar="P,P,...",
                   help="nonzero power fractions searched by --np-check")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return p


def _np_check(args):
    try:
        sat = load_dimacs(args.np_check, args.allow_repeated_literals)
    except (OSError, ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        check = check_reduction(sat, tuple(args.power_levels))
    except HetNetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    print(format_verdict(check, build_network(sat)))
    return EXIT_OK if check.rate_matches else EXIT_MISMATCH


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    if args.np_check:
        return _np_check(args)
    if args.trials < 1 or args.jobs < 1 or not args.snr_list:
        print("error: --trials and --jobs must be positive and --snr-list nonempty", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config) if args.config else ScenarioConfig()
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
    except (OSError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    modes = ("joint", "fixed") if args.mode == "both" else (args.mode,)
    try:
        results = run_experiment(cfg, modes, args.trials, args.snr_list, args.jobs)
    except HetNetError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    try:
        emit_outputs(results, args.out)
    except OSError as exc:
        print(f"error: cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    log.info("wrote %d trial results to %s", len(results), args.out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
