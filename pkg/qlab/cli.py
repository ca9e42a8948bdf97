"""
Command line: ``qlab run|spectral|simulate|exit-time|table61|validate --config FILE``.
"""

import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

from qlab import __version__
from qlab.config import PIPELINES, load_config
from qlab.errors import QlabError
from qlab.reports import write_error
from qlab.runner import run_scenario

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qlab",
        description="Quasi-potential laboratory for compound Poisson processes on bounded domains.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "command",
        choices=("run", *PIPELINES),
        help="'run' executes the pipelines listed in the config; any other command runs only that pipeline",
    )
    parser.add_argument("--config", required=True, type=Path, help="Scenario JSON file")
    parser.add_argument("--threads", type=int, default=None, help="Cap on worker threads")
    parser.add_argument("--out", type=Path, default=None, help="Output directory (overrides output_dir)")
    parser.add_argument("--metrics-file", type=Path, default=None, help="Write stage telemetry in Prometheus text format")
    parser.add_argument(
        "--log-level",
        default="INFO",
        choices=("DEBUG", "INFO", "WARNING", "ERROR"),
        help="Root logger level (default: INFO)",
    )
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """
    Entry point of the ``qlab`` console script.

    :return: Process exit code: 0 success, 2 condition violated, 3 invalid input, 4 numerical failure.
    :rtype: int
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format=LOG_FORMAT)

    try:
        cfg = load_config(args.config)
        cfg = cfg.with_overrides(
            run=None if args.command == "run" else (args.command,),
            threads=args.threads,
            output_dir=args.out,
        )
    except QlabError as exc:
        logger.error("%s: %s", exc.__class__.__name__, exc)
        if args.out is not None:
            write_error(args.out, exc.to_dict())
        return exc.exit_code

    return run_scenario(cfg, metrics_file=args.metrics_file)


if __name__ == "__main__":
    sys.exit(main())
