"""Theory command: verify-theory"""
import argparse
import logging

from ...shared.cli_args import add_common_arguments, output_dir, resolve_config
from ...shared.exceptions import EXIT_NUMERICAL, EXIT_OK
from .service import theory_service

logger = logging.getLogger(__name__)


def cmd_verify_theory(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    report = theory_service.verify(config, output_dir(args, config, "theory"))
    identity = report.identity
    print(f"lhs = {identity.lhs:.6e}")
    print(f"rhs = {identity.rhs:.6e}")
    print(f"rel_err = {identity.rel_err:.6e}")
    print(f"zero_estimator_rel_err = {report.zero_rel_err:.6e}")
    print(f"floor_loss = {report.floor.loss:.6e} (2 sigma^2 = {report.floor.floor:.6e}, se {report.floor.se:.2e})")
    print(f"floor_passed = {str(report.floor.passed).lower()}")
    print(f"floor_excess = {report.floor.excess:+.6e} (within 3 se: {str(report.floor.within_band).lower()})")
    if report.oracle is not None:
        print(f"oracle_psnr_gap = {report.oracle.psnr_gap:.4f}")
        print(f"oracle_param_dist = {report.oracle.param_dist:.6e}")
    return EXIT_OK if report.floor.passed else EXIT_NUMERICAL


def register(subparsers) -> None:
    verify = subparsers.add_parser("verify-theory", help="Expected-loss identity, noise floor and linear oracle")
    add_common_arguments(verify)
    verify.set_defaults(handler=cmd_verify_theory)
