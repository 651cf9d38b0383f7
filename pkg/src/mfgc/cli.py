import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from mfgc.errors import ConfigError, MfgcError
from mfgc.experiments import get_available_experiments, load_config, run_experiment
from mfgc.utils.logger import Logger, configure_logging

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_FAILURE = 2
EXIT_CONFIG = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mfgc",
        description="Run an N-player / mean-field game-of-controls experiment.",
    )
    parser.add_argument("experiment", choices=get_available_experiments())
    parser.add_argument("--config", required=True, type=Path, help="TOML or JSON experiment config")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--out", default=None, help="override the output root")
    parser.add_argument("--threads", type=int, default=None, help="override the worker pool size")
    parser.add_argument("--quiet", action="store_true", help="only print the final summary")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging()
    log = Logger(quiet=args.quiet)

    overrides = {"experiment": args.experiment, "seed": args.seed, "out": args.out, "threads": args.threads}
    try:
        config = load_config(args.config, overrides)
    except ConfigError as e:
        log.log_error(str(e))
        return EXIT_CONFIG

    try:
        outcome = run_experiment(config, log)
    except ValidationError as e:
        # parameter objects built from a valid config can still be rejected, e.g. gamma <= -1
        log.log_error(f"Invalid parameters: {e}")
        return EXIT_CONFIG
    except MfgcError as e:
        logger.debug("experiment aborted", exc_info=True)
        log.log_error(f"{type(e).__name__}: {e}")
        return EXIT_FAILURE

    verdict = "PASS" if outcome.passed else "FAIL"
    lines = outcome.summary + [f"outputs: {outcome.directory}"]
    log.log_summary(f"{outcome.experiment} [{outcome.config_hash}] {verdict}", lines)
    return EXIT_PASS if outcome.passed else EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
