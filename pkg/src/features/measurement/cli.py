"""Measurement commands: gen-data, analyze-q"""
import argparse
import logging

from ...shared.cli_args import add_common_arguments, output_dir, resolve_config
from ...shared.exceptions import EXIT_OK
from .service import measurement_service

logger = logging.getLogger(__name__)


def cmd_gen_data(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    written = measurement_service.generate(config, output_dir(args, config, "data"))
    for split, path in written.items():
        print(f"{split}: {path}")
    return EXIT_OK


def cmd_analyze_q(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    analysis = measurement_service.analyze_q(config, output_dir(args, config, "analysis"))
    print(f"full_rank = {str(analysis.full_rank).lower()}")
    print(f"rank = {analysis.rank} / {analysis.dimension}")
    print(f"lambda_min = {analysis.lambda_min:.6e}")
    if analysis.spectrum_min_ratio is not None:
        print(f"spectrum_min_over_max = {analysis.spectrum_min_ratio:.6f}")
    return EXIT_OK


def register(subparsers) -> None:
    gen = subparsers.add_parser("gen-data", help="Generate a paired-measurement dataset")
    add_common_arguments(gen)
    gen.set_defaults(handler=cmd_gen_data)

    analyze = subparsers.add_parser("analyze-q", help="Rank diagnostics of Q = E[theta^T theta]")
    add_common_arguments(analyze)
    analyze.set_defaults(handler=cmd_analyze_q)
