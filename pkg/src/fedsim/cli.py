""" Command-line interface.

    fedsim run --config <file.toml> [--out <dir>] [--seed <int>] [--rounds N] [--workers N]
    fedsim synth --out <file.json> --clients N --samples M --seed S
    fedsim gradcheck [--coords N] [--seed S]"""

import argparse
import logging
import sys

from ._version import __version__
from .data import generate_synthetic, write_leaf_json
from .exceptions import FedSimError
from .experiment import load_config, run_experiment
from .nn.gradcheck import gradcheck_suite

__all__ = ["main", "build_parser"]

logger = logging.getLogger(__name__)

GRADCHECK_TOLERANCE = 1e-4


def _cmd_run(args):
    config = load_config(args.config).with_overrides(
        output_dir=args.out, seed=args.seed, rounds=args.rounds, workers=args.workers
    )
    reports = run_experiment(config)
    last = reports[-1]
    print(
        "round {}: main_acc={:.4f} backdoor_acc={:.4f} backdoor_cummean={:.4f}".format(
            last.round, last.main_acc, last.backdoor_acc, last.backdoor_cummean
        )
    )
    return 0


def _cmd_synth(args):
    fed = generate_synthetic(args.seed, args.clients, args.samples, args.classes, args.side)
    write_leaf_json(fed, args.out)
    print("wrote {} clients x {} examples to {}".format(args.clients, args.samples, args.out))
    return 0


def _cmd_gradcheck(args):
    results = gradcheck_suite(seed=args.seed, coords=args.coords)
    worst = 0.0
    for name, error in sorted(results.items()):
        print("{:<20s} max relative error {:.3e}".format(name, error))
        worst = max(worst, error)
    if worst >= GRADCHECK_TOLERANCE:
        print("FAILED: tolerance is {:.0e}".format(GRADCHECK_TOLERANCE), file=sys.stderr)
        return 1
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fedsim",
        description="Federated-learning backdoor attack and defense simulator.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="warnings only")
    sub = parser.add_subparsers(dest="command")
    sub.required = True

    run = sub.add_parser("run", help="run an experiment from a TOML config")
    run.add_argument("--config", required=True, help="path to the experiment TOML file")
    run.add_argument("--out", default=None, help="output directory (overrides output_dir)")
    run.add_argument("--seed", type=int, default=None, help="root seed (overrides seed)")
    run.add_argument("--rounds", type=int, default=None, help="overrides rounds")
    run.add_argument("--workers", type=int, default=None, help="client-training threads")
    run.set_defaults(func=_cmd_run)

    synth = sub.add_parser("synth", help="write a synthetic dataset as LEAF JSON")
    synth.add_argument("--out", required=True, help="output JSON path")
    synth.add_argument("--clients", type=int, required=True)
    synth.add_argument("--samples", type=int, required=True, help="examples per client")
    synth.add_argument("--seed", type=int, required=True)
    synth.add_argument("--classes", type=int, default=10)
    synth.add_argument("--side", type=int, default=16, help="image side length in pixels")
    synth.set_defaults(func=_cmd_synth)

    grad = sub.add_parser("gradcheck", help="finite-difference gradient check")
    grad.add_argument("--coords", type=int, default=200, help="coordinates checked per model")
    grad.add_argument("--seed", type=int, default=0)
    grad.set_defaults(func=_cmd_gradcheck)
    return parser


def main(argv=None):
    """Entry point of the ``fedsim`` console script.

    Returns
    -------
    int
        0 on success, 1 on any fedsim or I/O error (2 for usage errors, via argparse)."""
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s - %(levelname)s - %(message)s")
    try:
        return args.func(args)
    except (FedSimError, OSError) as err:
        logger.debug("command failed", exc_info=True)
        print("fedsim {}: error: {}".format(args.command, err), file=sys.stderr)
        return 1
