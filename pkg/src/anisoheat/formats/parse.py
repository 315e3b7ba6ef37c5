"""Helper functions to allow using JSON and YAML interchangeably for configurations."""

import io
import json
from pathlib import Path
from typing import Any, Dict, Union

from ruamel.yaml import YAML

from ..config import ExperimentConfig

yaml = YAML(typ="safe")


def loads_json_or_yaml(dat: str):
    """Parse a JSON or YAML object from a string."""
    try:
        return json.loads(dat)
    except json.JSONDecodeError:
        return yaml.load(io.StringIO(dat))


def load_json_or_yaml(path: Union[str, Path]) -> Dict[str, Any]:
    """Load a JSON or YAML object from a file."""
    res = loads_json_or_yaml(Path(path).read_text(encoding="utf-8"))
    if not isinstance(res, dict):
        raise ValueError(f"Expected a mapping in '{path}', got {type(res).__name__}")
    return res


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """Load and validate an experiment configuration.

    Raises:
        pydantic.ValidationError: If the configuration violates a precondition.
    """
    return ExperimentConfig.parse_obj(load_json_or_yaml(path))
