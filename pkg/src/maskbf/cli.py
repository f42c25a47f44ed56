"""``maskbf exp1|exp2|exp3`` command-line entry point."""
import argparse
import logging
import os
import sys

from .errors import MaskBFError
from .experiments import EXPERIMENTS, emit_report, gradient_mode, load_experiment_config, run_experiment

DATASET_ENV = "MASKBF_DATASET_ROOT"


def build_parser():
    parser = argparse.ArgumentParser(prog="maskbf", description="Mask-based beamforming experiments.")
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", help="INI file with [experiment] and [optimizer] sections")
    parser.add_argument("--out", default="results", help="output directory (default: results)")
    parser.add_argument("--dataset-root",
                        help=f"CHiME-3 style dataset root (falls back to ${DATASET_ENV})")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--gradient", choices=("fd", "analytic"))
    parser.add_argument("--iters", type=int, help="optimizer iterations per method")
    parser.add_argument("--scenes", type=int, help="number of synthetic scenes")
    parser.add_argument("--workers", type=int, help="scenes processed in parallel")
    parser.add_argument("--full-framing", action="store_true",
                        help="use 1024/256 STFT framing instead of the fast 256/64")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    dataset_root = args.dataset_root or os.environ.get(DATASET_ENV) or None
    try:
        config = load_experiment_config(
            args.config,
            experiment=args.experiment,
            out_dir=args.out,
            dataset_root=dataset_root,
            seed=args.seed,
            n_scenes=args.scenes,
            workers=args.workers,
            iterations=args.iters,
            gradient_mode=gradient_mode(args.gradient),
            full_framing=args.full_framing,
        )
        result = run_experiment(config)
        code = emit_report(result, os.path.join(config.out_dir, config.experiment))
    except MaskBFError as exc:
        print(f"maskbf: error: {exc}", file=sys.stderr)
        return 2
    with open(os.path.join(config.out_dir, config.experiment, "table.txt")) as fh:
        sys.stdout.write(fh.read())
    return code


if __name__ == "__main__":
    sys.exit(main())
