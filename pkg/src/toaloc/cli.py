"""Command-line front end.

    toaloc simulate --config run.cfg --out meas.csv     # also writes meas_truth.csv
    toaloc track    --config run.cfg --in meas.csv --out track.csv
    toaloc crlb     --config run.cfg --out crlb.csv
    toaloc mc       --config run.cfg --seed 7 --out report.csv

Exit status: 0 success, 1 usage or config error, 2 runtime or data error.
"""

import argparse
import os
import sys

from . import files
from .config import ConfigError, RunConfig, load_config
from .crlb import SingularFim, crlb_trajectory
from .estimator import InvalidRange, track
from .measurement import NoiseSpec, synthesize_run
from .simulation import generate_trajectory, run_monte_carlo

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _parser():
    parser = _Parser(prog="toaloc", description="Joint TOA localization and clock-bias tracking.")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="run config (defaults to the reference experiment)")
    common.add_argument("--seed", type=int, metavar="U64", help="override the master seed")
    common.add_argument("--out", metavar="PATH", help="output CSV (default: config 'output' or stdout)")
    p = sub.add_parser("simulate", parents=[common], help="synthesize measurements and truth")
    p.add_argument("--truth", metavar="PATH", help="truth CSV (default: <out>_truth.csv)")
    p = sub.add_parser("track", parents=[common], help="estimate positions and biases from a measurement CSV")
    p.add_argument("--in", dest="inp", required=True, metavar="PATH", help="measurements CSV")
    sub.add_parser("crlb", parents=[common], help="bounds along the configured trajectory")
    sub.add_parser("mc", parents=[common], help="Monte-Carlo RMSE versus bounds")
    return parser


def _config(args):
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", key=args.config) from None
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("seed must be non-negative", key="--seed")
        cfg = cfg.with_seed(args.seed)
    return cfg


def _out(args, cfg):
    return args.out or cfg.output or sys.stdout


def _truth_path(out):
    root, ext = os.path.splitext(out)
    return f"{root}_truth{ext or '.csv'}"


def cmd_simulate(args, cfg):
    out = args.out or cfg.output
    if out is None:
        raise _UsageError("simulate needs --out (two files are written)")
    traj = generate_trajectory(cfg.trajectory)
    z = synthesize_run(traj, cfg.anchors, cfg.bias, NoiseSpec(cfg.sigma, cfg.mc.noise_seed_base))
    files.write_measurements(out, z)
    files.write_truth(args.truth or _truth_path(out), traj)


def cmd_track(args, cfg):
    z = files.read_measurements(args.inp)
    _, results = track(z, cfg.anchors, cfg.solver)
    bad = sum(int(r.ill_conditioned) for r in results)
    if bad:
        print(f"toaloc: {bad} step(s) hit a singular geometry", file=sys.stderr)
    files.write_track(_out(args, cfg), results)


def cmd_crlb(args, cfg):
    if not cfg.sigma > 0:
        raise ConfigError("bounds need noise.sigma > 0", key="noise.sigma")
    bounds = crlb_trajectory(generate_trajectory(cfg.trajectory), cfg.anchors, cfg.sigma)
    files.write_crlb(_out(args, cfg), bounds)


def cmd_mc(args, cfg):
    report = run_monte_carlo(cfg.trajectory, cfg.anchors, cfg.mc)
    flagged = int(report.flagged.sum())
    if flagged:
        print(f"toaloc: {flagged} trial-step(s) did not converge", file=sys.stderr)
    files.write_report(_out(args, cfg), report)


COMMANDS = {"simulate": cmd_simulate, "track": cmd_track, "crlb": cmd_crlb, "mc": cmd_mc}


def main(argv=None):
    try:
        args = _parser().parse_args(argv)
        cfg = _config(args)
        COMMANDS[args.command](args, cfg)
    except (_UsageError, ConfigError) as exc:
        print(f"toaloc: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, files.CsvFormatError, InvalidRange, SingularFim, ArithmeticError, ValueError) as exc:
        print(f"toaloc: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
