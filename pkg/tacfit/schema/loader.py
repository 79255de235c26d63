"""
YAML run-configuration loader with validation.
"""

import yaml
from pathlib import Path
from typing import Union
from pydantic import ValidationError
from ..errors import TacfitError
from .models import RunConfig


class ConfigLoadError(TacfitError):
    """Exception raised when a run configuration cannot be loaded."""
    pass


def format_validation_error(e: ValidationError, title: str) -> str:
    """One bullet per failing location."""
    errors = []
    for error in e.errors():
        loc = " -> ".join(str(x) for x in error['loc']) or "(root)"
        errors.append(f"  • {loc}: {error['msg']}")
    return f"{title}:\n" + "\n".join(errors)


def load_config(path: Union[str, Path]) -> RunConfig:
    """
    Load and validate a run configuration from a YAML file.

    Args:
        path: Path to the YAML file

    Returns:
        Validated RunConfig

    Raises:
        ConfigLoadError: If the file cannot be read or the configuration is invalid
    """
    path = Path(path)

    if not path.exists():
        raise ConfigLoadError(f"Config file not found: {path}")

    if path.suffix not in ['.yaml', '.yml']:
        raise ConfigLoadError(f"Config file must be .yaml or .yml, got: {path.suffix}")

    try:
        with open(path, 'r') as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigLoadError(f"Failed to parse YAML: {e}")
    except OSError as e:
        raise ConfigLoadError(f"Failed to read file: {e}")

    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigLoadError(f"Config must be a key: value mapping, got {type(data).__name__}")

    try:
        return RunConfig(**data)
    except ValidationError as e:
        raise ConfigLoadError(format_validation_error(e, "Config validation failed"))


def save_config(config: RunConfig, path: Union[str, Path]) -> None:
    """
    Save a run configuration to a YAML file.

    Args:
        config: RunConfig to save
        path: Destination path

    Raises:
        ConfigLoadError: If the file cannot be written
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    try:
        data = config.model_dump(exclude_none=True)
        with open(path, 'w') as f:
            yaml.safe_dump(data, f, default_flow_style=None, sort_keys=False)
    except (OSError, yaml.YAMLError) as e:
        raise ConfigLoadError(f"Failed to save config: {e}")
