# (c) 2024, iterative-binarization contributors
#
# This file is part of iterative-binarization.
#
# iterative-binarization is free software: you can redistribute it and/or modify
# it under the terms of the Apache License as published by
# the Apache Software Foundation, either version 2 of the License, or
# (at your option) any later version.
#
# iterative-binarization is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# Apache License for more details.

import argparse
import logging
import sys

from iterative_binarization import config
from iterative_binarization import constants
from iterative_binarization import experiment
from iterative_binarization.exceptions import BinarizationError

logger = logging.getLogger(__name__)


def main(args=None):
    cfg = config.load_config()
    args = parse_args(args)
    apply_overrides(cfg, args)
    setup_logger(cfg)

    return run_command(args, cfg)


def setup_logger(cfg):
    """Sets up the package logger with custom formatter."""
    package_logger = logging.getLogger(constants.PACKAGE_LOGGER)
    package_logger.setLevel(getattr(logging, cfg.log_level_main, "INFO"))
    if any(isinstance(h.formatter, CustomFormatter) for h in package_logger.handlers):
        return

    ch = logging.StreamHandler(stream=sys.stdout)
    ch.setFormatter(CustomFormatter())
    package_logger.addHandler(ch)


class CustomFormatter(logging.Formatter):
    """Formatter that does not display INFO loglevel."""

    def formatMessage(self, record):
        if record.levelno == logging.INFO:
            return "{message}".format(**vars(record))
        else:
            return "{levelname}: {message}".format(**vars(record))


def parse_seeds(value):
    try:
        return [int(seed) for seed in value.split(",") if seed.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got '{value}'")


def _add_run_arguments(parser):
    parser.add_argument(
        "--config", dest="config", required=True, help="experiment YAML file to run"
    )
    parser.add_argument("--data-dir", dest="data_dir", help="directory with the MNIST IDX files")
    parser.add_argument("--output-dir", dest="output_dir", help="root of the run directories")
    parser.add_argument(
        "--workers", dest="workers", type=int, help="number of runs executed concurrently"
    )
    parser.add_argument(
        "--seeds", dest="seeds", type=parse_seeds, help="comma separated seeds, e.g. 0,1,2"
    )


def parse_args(args):
    parser = argparse.ArgumentParser(
        description="Iterative layer-by-layer binarization of fully connected networks."
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    train = subparsers.add_parser("train", help="train one case over seeds and learning rates")
    _add_run_arguments(train)

    probe = subparsers.add_parser("sensitivity", help="rank layers by single-layer probes")
    _add_run_arguments(probe)
    probe.add_argument(
        "--report-path", dest="report_path", help="where to write the sensitivity report"
    )

    search = subparsers.add_parser("search-orders", help="train every binarization order")
    _add_run_arguments(search)

    report = subparsers.add_parser("report", help="aggregate finished run directories")
    report.add_argument(
        "run_dirs", nargs="+", help="one or two run directories, smaller network first"
    )
    report.add_argument("--output-dir", dest="output_dir", help="where to write the tables")
    report.add_argument(
        "--cases", dest="cases", help="comma separated cases to report, default all found"
    )
    return parser.parse_args(args=args)


def apply_overrides(cfg, args):
    """Command line flags win over the config file and environment."""
    for key in ("data_dir", "output_dir", "workers"):
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)


def _experiment_overrides(args):
    return {
        "seeds": getattr(args, "seeds", None),
        "data_dir": getattr(args, "data_dir", None),
        "output_dir": getattr(args, "output_dir", None),
    }


def run_command(args, cfg):
    """Run the selected subcommand; 0 only if every requested run completed."""
    try:
        if args.command == "report":
            cases = args.cases.split(",") if args.cases else None
            experiment.cmd_report(
                args.run_dirs, output_dir=args.output_dir, cases=cases, logger=logger
            )
            return 0

        exp = experiment.load_experiment(args.config, overrides=_experiment_overrides(args))
        if args.command == "train":
            outcome = experiment.cmd_train(exp, cfg=cfg, logger=logger)
            completed = outcome.completed
        elif args.command == "sensitivity":
            report = experiment.cmd_sensitivity(
                exp, cfg=cfg, report_path=args.report_path, logger=logger
            )
            completed = not any(entry.failed for entry in report.entries)
        else:
            outcome = experiment.cmd_search_orders(exp, cfg=cfg, logger=logger)
            completed = outcome.completed
    except BinarizationError as e:
        logger.error(f"The {args.command} command failed for the following reason: {e}")
        return 1
    except Exception as e:
        logger.exception(f"Unexpected error occurred: {e}")
        return 1

    if not completed:
        logger.error("Not every requested run completed")
        return 1
    logger.info(f"The {args.command} command completed successfully")
    return 0


if __name__ == "__main__":
    exit(main())
