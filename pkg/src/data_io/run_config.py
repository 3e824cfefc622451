"""
RunConfig text files.

UTF-8 ``key = value`` lines; ``#`` at the start of a line or after whitespace
starts a comment, so paths such as ``runs/trial#3.ckpt`` survive. Lists are comma
separated; ``attention_layers = none`` disables attention. Unknown keys are
rejected, missing keys fall back to DEFAULT_RUN_CONFIG with a notice.
"""

import copy
import re
from pathlib import Path
from typing import Dict, Union

from core.config import DEFAULT_RUN_CONFIG
from core.data_models import MsgcNetConfig, TinyNetConfig
from core.errors import ConfigurationError, UnknownConfigKeyError

MODELS = ("msgc", "plain")
DTYPES = ("float32", "float64")
_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}
_COMMENT = re.compile(r"(?:^|(?<=\s))#")


def _parse_value(key: str, text: str, line_number: int):
    default = DEFAULT_RUN_CONFIG[key]
    try:
        if key == "attention_layers":
            if text.lower() in ("none", ""):
                return []
            return [int(v) for v in text.split(",")]
        if isinstance(default, bool):
            lowered = text.lower()
            if lowered in _TRUE:
                return True
            if lowered in _FALSE:
                return False
            raise ValueError(text)
        if isinstance(default, list):
            return [int(v) for v in text.split(",")]
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        return text
    except ValueError as exc:
        raise ConfigurationError(
            f"line {line_number}: invalid value '{text}' for key '{key}'") from exc


def validate_config(config: Dict) -> None:
    """Raise ConfigurationError on values outside their domain."""
    if config["model"] not in MODELS:
        raise ConfigurationError(f"model must be one of {MODELS}, got '{config['model']}'")
    if config["dtype"] not in DTYPES:
        raise ConfigurationError(f"dtype must be one of {DTYPES}, got '{config['dtype']}'")
    for key in ("epochs", "batch_size", "reduction", "gradcheck_trials"):
        if config[key] < 1:
            raise ConfigurationError(f"{key} must be positive, got {config[key]}")
    if config["lambda"] < 0:
        raise ConfigurationError("lambda must be non-negative")
    if not 0 < config["tau_end"] <= 1:
        raise ConfigurationError(f"tau_end must lie in (0, 1], got {config['tau_end']}")
    if not 0 < config["warm_fraction"] <= 1:
        raise ConfigurationError(f"warm_fraction must lie in (0, 1], got {config['warm_fraction']}")
    if len(config["groups"]) != 2:
        raise ConfigurationError(f"groups needs one count per block layer (2), got {config['groups']}")


def parse_config_text(text: str, verbose: bool = True) -> Dict:
    """
    Parse RunConfig text into a complete configuration dictionary.

    Args:
        text: file contents
        verbose: print a notice for every defaulted key

    Raises:
        UnknownConfigKeyError: key not in DEFAULT_RUN_CONFIG
        ConfigurationError: malformed line, duplicate key or invalid value
    """
    values = {}
    for line_number, line in enumerate(text.splitlines(), start=1):
        content = _COMMENT.split(line, 1)[0].strip()
        if not content:
            continue
        if "=" not in content:
            raise ConfigurationError(f"line {line_number}: expected 'key = value', got '{content}'")
        key, _, raw = content.partition("=")
        key, raw = key.strip(), raw.strip()
        if key not in DEFAULT_RUN_CONFIG:
            raise UnknownConfigKeyError(key, line_number)
        if key in values:
            raise ConfigurationError(f"line {line_number}: duplicate key '{key}'")
        values[key] = _parse_value(key, raw, line_number)

    config = {}
    for key, default in DEFAULT_RUN_CONFIG.items():
        if key in values:
            config[key] = values[key]
        else:
            config[key] = copy.deepcopy(default)
            if verbose:
                print(f"[config] notice: '{key}' not set, using default {format_value(default)}")
    validate_config(config)
    return config


def parse_config(path: Union[str, Path], verbose: bool = True) -> Dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"), verbose=verbose)


def format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, list):
        return ",".join(str(v) for v in value) if value else "none"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_config(config: Dict, path: Union[str, Path]) -> Path:
    """Write every known key in canonical order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{key} = {format_value(config[key])}" for key in DEFAULT_RUN_CONFIG]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def net_config(config: Dict) -> TinyNetConfig:
    return TinyNetConfig(
        in_channels=config["in_channels"],
        input_size=config["input_size"],
        stem_width=config["stem_width"],
        widths=config["widths"],
        strides=config["strides"],
        num_classes=config["num_classes"],
    )


def msgc_config(config: Dict) -> MsgcNetConfig:
    return MsgcNetConfig(
        net_config(config),
        groups=config["groups"],
        attention_layers=config["attention_layers"],
        reduction=config["reduction"],
        gumbel_temperature=config["gumbel_temperature"],
        saliency_bias_init=config["saliency_bias_init"],
    )
