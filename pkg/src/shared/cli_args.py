"""
Shared command-line plumbing.

Every sub-command accepts --config, --seed, --out, --threads and --regime; the
flags override the matching [experiment] keys of the config file.
"""
import argparse
import logging
from pathlib import Path
from typing import Optional

from .configfile import load_config
from .constants import REGIMES
from .entities import ExperimentConfig

logger = logging.getLogger(__name__)


def add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="Experiment config file (key = value sections)")
    parser.add_argument("--seed", type=int, default=None, help="Master seed (overrides [experiment] seed)")
    parser.add_argument("--out", type=Path, default=None, help="Output directory")
    parser.add_argument("--threads", type=int, default=None, help="Worker threads for data generation")
    parser.add_argument("--regime", choices=REGIMES, default=None, help="Training regime override")


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Config file plus command-line overrides"""
    overrides = {
        "experiment": {
            "seed": args.seed,
            "output_dir": str(args.out) if args.out is not None else None,
            "threads": args.threads,
            "regime": args.regime,
        }
    }
    return load_config(args.config, overrides)


def output_dir(args: argparse.Namespace, config: ExperimentConfig, default_child: Optional[str] = None) -> Path:
    """--out when given, else the config's output_dir (optionally a child of it)"""
    if args.out is not None:
        return Path(args.out)
    root = Path(config.experiment.output_dir)
    return root / default_child if default_child else root
