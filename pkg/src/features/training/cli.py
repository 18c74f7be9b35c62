"""Training commands: train, eval, reconstruct"""
import argparse
import logging
from pathlib import Path

from ...shared.cli_args import add_common_arguments, output_dir, resolve_config
from ...shared.exceptions import EXIT_OK
from .service import training_service

logger = logging.getLogger(__name__)


def cmd_train(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    out = output_dir(args, config, "train")
    result = training_service.train(config, out, data_dir=args.data, eval_dir=args.eval_data, resume=args.resume)
    last = result.history[-1] if result.history else None
    if last is not None:
        print(f"epochs = {last.epoch}")
        print(f"steps = {last.step}")
        print(f"final_loss = {last.total:.6e}")
        if last.val_psnr is not None:
            print(f"val_psnr = {last.val_psnr:.4f}")
    print(f"checkpoint: {out}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    result = training_service.evaluate(config, args.checkpoint, output_dir(args, config, "eval"), eval_dir=args.eval_data)
    print(f"images = {len(result.psnrs)}")
    print(f"mean_psnr = {result.mean_psnr:.4f}")
    return EXIT_OK


def cmd_reconstruct(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    training_service.reconstruct(config, args.checkpoint, args.input, args.output)
    print(f"reconstruction: {args.output}")
    return EXIT_OK


def register(subparsers) -> None:
    train = subparsers.add_parser("train", help="Train the estimators in the configured regime")
    add_common_arguments(train)
    train.add_argument("--data", type=Path, default=None, help="Training dataset directory (default: generate in memory)")
    train.add_argument("--eval-data", type=Path, default=None, help="Evaluation dataset directory with ground truth")
    train.add_argument("--resume", type=Path, default=None, help="Checkpoint to continue from")
    train.set_defaults(handler=cmd_train)

    evaluate = subparsers.add_parser("eval", help="PSNR report and PGM reconstructions for a checkpoint")
    add_common_arguments(evaluate)
    evaluate.add_argument("--checkpoint", type=Path, required=True)
    evaluate.add_argument("--eval-data", type=Path, default=None, help="Evaluation dataset directory")
    evaluate.set_defaults(handler=cmd_eval)

    reconstruct = subparsers.add_parser("reconstruct", help="Reconstruct a single PGM image")
    add_common_arguments(reconstruct)
    reconstruct.add_argument("--checkpoint", type=Path, required=True)
    reconstruct.add_argument("--input", type=Path, required=True, help="Input PGM/PPM")
    reconstruct.add_argument("--output", type=Path, required=True, help="Output PGM")
    reconstruct.set_defaults(handler=cmd_reconstruct)
