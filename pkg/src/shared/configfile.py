"""
Experiment configuration files.

Flat `key = value` text with `[sections]`, one section per ExperimentConfig field.
Unknown sections and keys are rejected; the resolved configuration is written back
in the same format next to every run's outputs.
"""
import configparser
import logging
from enum import Enum
from pathlib import Path
from typing import Any, Optional, Union

from pydantic import ValidationError

from .constants import RESOLVED_CONFIG_NAME
from .entities import ExperimentConfig
from .exceptions import ConfigError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _parser() -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keys are case-sensitive
    return parser


def parse_config_text(text: str, overrides: Optional[dict[str, dict[str, Any]]] = None) -> ExperimentConfig:
    """Parse config text, apply section overrides and validate"""
    parser = _parser()
    try:
        parser.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"Malformed config file: {str(e)}")

    known = set(ExperimentConfig.model_fields)
    raw: dict[str, dict[str, Any]] = {}
    for section in parser.sections():
        if section not in known:
            raise ConfigError(f"Unknown config section [{section}]")
        raw[section] = dict(parser.items(section))
    for section, values in (overrides or {}).items():
        raw.setdefault(section, {}).update({k: v for k, v in values.items() if v is not None})
    return build_config(raw)


def build_config(raw: dict[str, dict[str, Any]]) -> ExperimentConfig:
    """Validate a section dictionary into an ExperimentConfig"""
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()
        )
        raise ConfigError(f"Invalid configuration - {problems}")


def load_config(path: Optional[PathLike], overrides: Optional[dict[str, dict[str, Any]]] = None) -> ExperimentConfig:
    """Load a config file (or defaults when path is None)"""
    if path is None:
        return build_config(overrides or {})
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}")
    config = parse_config_text(path.read_text(encoding="utf-8"), overrides)
    logger.info(f"Loaded config {path}")
    return config


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, (list, tuple)):
        return ",".join(str(v) for v in value)
    return str(value)


def render_config(config: ExperimentConfig) -> str:
    """Serialize a config back to sectioned key=value text"""
    parser = _parser()
    for section, values in config.model_dump().items():
        parser.add_section(section)
        for key, value in values.items():
            if value is not None:
                parser.set(section, key, _format_value(value))
    lines: list[str] = []
    for section in parser.sections():
        lines.append(f"[{section}]")
        lines.extend(f"{key} = {value}" for key, value in parser.items(section))
        lines.append("")
    return "\n".join(lines)


def write_resolved_config(config: ExperimentConfig, out_dir: PathLike) -> Path:
    """Write resolved_config.ini into out_dir"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / RESOLVED_CONFIG_NAME
    path.write_text(render_config(config), encoding="utf-8")
    return path
