#!/usr/bin/env python3

"""
The ``rotsync`` command line: runs an experiment on a preset or on a
configured system and writes its CSV and JSON results.

  rotsync classify --preset interval
  rotsync diffchain --preset cantor8 --seed 1 --seed 2 --threads 2
  rotsync twopoint --config my-system.yaml --out /tmp/results

Exit codes: 0 on success, 1 for invalid configurations, 2 when a
computation outgrows its cap and 3 when a statistical precondition
fails.
"""

import argparse
import copy
import logging
import logging.config
import sys

import yaml

from . import add_logging_handlers, dictConfig
from .errors import InvalidConfigError, RotSyncError
from .experiments import (EXPERIMENTS, PRESETS, ExperimentConfig,
                          merge_config, run_experiment)

LOGGING_KEYS = ("version", "formatters", "filters", "handlers", "loggers",
                "root", "incremental", "disable_existing_loggers")


def seed(value):
    """
    Parses an unsigned 64 bit seed given in any base python accepts.
    """
    try:
        result = int(value, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {value!r}")
    if not 0 <= result < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed out of range: {value}")
    return result


def load_config(path):
    """
    Loads a YAML (or JSON) configuration file.
    """
    try:
        with open(path, encoding="utf-8") as fp:
            document = yaml.safe_load(fp)
    except (OSError, yaml.YAMLError) as exp:
        raise InvalidConfigError(f"cannot load {path}: {exp}") from exp

    if document is None:
        return {}
    if not isinstance(document, dict):
        raise InvalidConfigError(f"{path} does not hold a mapping")
    return document


def build_config(args):
    """
    The preset, overlaid by the configuration file, overlaid by the
    flags.
    """
    if not args.preset and not args.config:
        raise InvalidConfigError("either --preset or --config is required")

    document = copy.deepcopy(PRESETS[args.preset]) if args.preset else {}
    if args.config:
        document = merge_config(document, load_config(args.config))

    overrides = {"experiment": {}, "output": {}}
    if args.seeds:
        overrides["experiment"]["seeds"] = args.seeds
    if args.threads is not None:
        overrides["experiment"]["threads"] = args.threads
    if args.require_integrable:
        overrides["experiment"]["require_integrable"] = True
    if args.out is not None:
        overrides["output"]["dir"] = args.out
    return merge_config(document, overrides)


def configure_logging(document, verbosity=0):
    """
    Applies the logging sections of `document` when it has handlers or
    loggers; otherwise logs to stderr at a level chosen by the `-v`
    count. The "experiments" section is applied in both cases.
    """
    if any(key in document for key in ("handlers", "loggers", "root")):
        logging_config = {"version": 1, "disable_existing_loggers": False}
        logging_config.update({key: document[key] for key in LOGGING_KEYS
                               if key in document})
        try:
            logging.config.dictConfig(logging_config)
        except (ValueError, TypeError, AttributeError, ImportError) as exp:
            raise InvalidConfigError(
                f"invalid logging configuration: {exp}") from exp
    else:
        level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity,
                                                          logging.DEBUG)
        add_logging_handlers(
            logger_name="rotsync", level=level,
            formatter="{asctime} {levelname} {name} - {message}")

    dictConfig(document)


def run(args):
    """
    experiment sub-commands
    """
    document = build_config(args)
    configure_logging(document, args.verbose)
    config = ExperimentConfig.from_dict(document)

    _, paths = run_experiment(args.experiment, config)
    for path in paths:
        print(path)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rotsync",
        description="Synchronization experiments for random double "
        "rotations of the circle and the torus")
    parser.set_defaults(func=lambda args: parser.print_help() or 1)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", metavar="<file>",
                        help="YAML or JSON configuration, applied on top "
                        "of the preset")
    common.add_argument("-p", "--preset", choices=sorted(PRESETS),
                        help="start from a built-in system")
    common.add_argument("-s", "--seed", dest="seeds", metavar="<u64>",
                        action="append", type=seed,
                        help="master seed; repeat for several runs")
    common.add_argument("-o", "--out", metavar="<dir>",
                        help="output directory")
    common.add_argument("-t", "--threads", metavar="<n>", type=int,
                        help="worker threads")
    common.add_argument("--require-integrable", action="store_true",
                        help="fail with exit code 3 when 1/φ is not "
                        "integrable")
    common.add_argument("-v", "--verbose", action="count", default=0,
                        help="log more; repeat for debug logs")

    sub_parsers = parser.add_subparsers(
        dest="experiment",
        help="rotsync supports the following experiments")

    for kind, cls in EXPERIMENTS.items():
        summary = (cls.__doc__ or "").strip().split("\n\n")[0]
        sub_parser = sub_parsers.add_parser(
            kind, parents=[common], help=" ".join(summary.split()))
        sub_parser.set_defaults(func=run)

    return parser


def main(argv=None):
    """
    The main entrypoint for the application
    """
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        return args.func(args)
    except RotSyncError as exp:
        print(f"rotsync: error: {exp}", file=sys.stderr)
        return exp.exit_code


if __name__ == "__main__":
    sys.exit(main())
