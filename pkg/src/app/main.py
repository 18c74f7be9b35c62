"""
Pairwise Imaging command line
Main entry point with sub-command registration
"""
import argparse
import logging
import sys
from typing import Optional, Sequence

from ..shared.config import settings
from ..shared.exceptions import EXIT_USAGE, PairwiseImagingError, describe_error, exit_code_for
from ..shared.logsetup import configure_logging

# Import all command groups
from ..features.measurement import cli as measurement_cli
from ..features.theory import cli as theory_cli
from ..features.training import cli as training_cli

logger = logging.getLogger(__name__)

VERSION = "1.0.0"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pairwise-imaging",
        description="Train image estimators from pairs of linear measurements without ground truth",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    parser.add_argument("--log-level", default=None, help="Override PAIRWISE_LOG_LEVEL")
    subparsers = parser.add_subparsers(dest="command", required=True)
    measurement_cli.register(subparsers)
    training_cli.register(subparsers)
    theory_cli.register(subparsers)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 0 for --help/--version and 2 for bad usage
        return EXIT_USAGE if e.code else 0

    configure_logging(args.log_level or settings.log_level)
    logger.info(f"🚀 pairwise-imaging {args.command}")
    logger.debug(f"🔧 Environment: {settings.environment}, threads {settings.threads}")

    try:
        return args.handler(args)
    except PairwiseImagingError as e:
        logger.error(f"❌ {args.command} failed: {describe_error(e)}")
        print(describe_error(e), file=sys.stderr)
        return exit_code_for(e)
    except Exception as e:
        logger.error(f"Unhandled exception: {str(e)}", exc_info=True)
        print(f"internal error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
