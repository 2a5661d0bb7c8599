#!/usr/bin/env python3
import argparse
import logging
import os
import sys

# Add the parent directory to the path so we can import our modules
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.checkpoints.checkpoint_manager import CheckpointError
from src.data.mnist import DatasetError
from src.utils.config import ConfigError, ConfigManager
from src.utils.logger import setup_logger

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_IO = 3


def build_parser():
    parser = argparse.ArgumentParser(prog="codenet-sim",
                                     description="Simulator for coded, replicated and uncoded distributed DNN training")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="run one training experiment")
    train.add_argument("--config", help="experiment config file")
    train.add_argument("--resume", help="checkpoint file to resume from")
    train.add_argument("--seed", type=int, help="override experiment.seed")
    train.add_argument("--out", help="override outputs.out_dir")

    curves = sub.add_parser("model-curves", help="expected-time ratio of replication over CodeNet against lambda")
    curves.add_argument("--lambda-min", type=float, default=0.1)
    curves.add_argument("--lambda-max", type=float, default=10.0)
    curves.add_argument("--points", type=int, default=50)
    curves.add_argument("--tau-f", type=float, default=1.0)
    curves.add_argument("--tau-b", type=float, default=1000.0)
    curves.add_argument("--tau-cpt", type=float, default=1000.0)
    curves.add_argument("--iters", type=int, default=1000)
    curves.add_argument("--period", type=int, help="fixed checkpoint period for both strategies")
    curves.add_argument("--out", help="CSV file (default stdout)")
    curves.add_argument("--chart", help="PNG chart of the ratio")

    codec = sub.add_parser("verify-codec", help="run the MDS codec property suite")
    codec.add_argument("--k", type=int, default=4)
    codec.add_argument("--t", type=int, default=1)
    codec.add_argument("--trials", type=int, default=1000)
    codec.add_argument("--seed", type=int, default=0)
    return parser


def cmd_train(args):
    config_manager = ConfigManager(args.config)
    if args.seed is not None:
        config_manager.set("experiment.seed", args.seed)
    if args.out is not None:
        config_manager.set("outputs.out_dir", args.out)
    setup_logger(config_manager.get("outputs.out_dir"), getattr(logging, args.log_level))

    from src.app import ExperimentApp
    app = ExperimentApp(config_manager, resume=args.resume)
    report = app.run()
    logging.getLogger(__name__).info(f"Outcomes {report['outcomes']}, final accuracy {report['final_accuracy']}")
    return EXIT_OK


def cmd_model_curves(args):
    from src.runtime_model.runtime_model import ModelError, emit_tradeoff_csv, lambda_grid
    try:
        lambdas = lambda_grid(args.lambda_min, args.lambda_max, args.points)
        if args.period is not None and args.period < 1:
            raise ModelError("period must be >= 1")
        kwargs = dict(tau_f=args.tau_f, tau_b=args.tau_b, tau_cpt=args.tau_cpt,
                      iterations=args.iters, period=args.period)
        if args.out:
            with open(args.out, "w", newline="") as f:
                rows = emit_tradeoff_csv(lambdas, f, **kwargs)
        else:
            rows = emit_tradeoff_csv(lambdas, sys.stdout, **kwargs)
    except ModelError as e:
        raise ConfigError(str(e)) from e
    if args.chart:
        from src.reporting.chart import render_ratio_chart
        render_ratio_chart(rows, args.chart)
    return EXIT_OK


def cmd_verify_codec(args):
    from src.coding.mds_codec import CodecError
    from src.reporting.codec_suite import print_table, run_codec_suite
    try:
        results = run_codec_suite(args.k, args.t, trials=args.trials, seed=args.seed)
    except CodecError as e:
        raise ConfigError(str(e)) from e
    print_table(results, sys.stdout)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED


COMMANDS = {
    "train": cmd_train,
    "model-curves": cmd_model_curves,
    "verify-codec": cmd_verify_codec,
}


def main(argv=None):
    args = build_parser().parse_args(argv)

    # Set up logging
    # tables and CSV own stdout
    setup_logger(level=getattr(logging, args.log_level),
                 stream=sys.stdout if args.command == "train" else sys.stderr)
    logger = logging.getLogger(__name__)
    logger.debug(f"Starting {args.command}")

    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except (OSError, CheckpointError, DatasetError) as e:
        logger.error(f"I/O error: {e}")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
