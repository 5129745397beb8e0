"""
Toolkit configuration.

Defaults live in DEFAULTS; a JSON parameter file (toolkit_params.json next to
this module unless another path is given) and FLOYD_<KEY> environment
variables are layered on top, missing keys being filled from the defaults.
"""

import json
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

from errors import ConfigError

DEFAULT_PARAMS_FILE = Path(__file__).with_name("toolkit_params.json")
ENV_PREFIX = "FLOYD_"

DEFAULTS = {
    'node_budget': 10_000_000,     # derivation-search nodes for enumerate_language
    'config_budget': 2_000_000,    # configurations for enumerate_accepted
    'default_max_len': 8,
    'json_indent': 2,
    'log_level': 'WARNING',
}


@dataclass(frozen=True)
class Settings:
    node_budget: int = DEFAULTS['node_budget']
    config_budget: int = DEFAULTS['config_budget']
    default_max_len: int = DEFAULTS['default_max_len']
    json_indent: int = DEFAULTS['json_indent']
    log_level: str = DEFAULTS['log_level']


def _coerce(key, value):
    expected = type(DEFAULTS[key])
    try:
        return expected(value)
    except (TypeError, ValueError):
        raise ConfigError(f"setting {key!r} expects {expected.__name__}, got {value!r}")


def load_settings(path: Optional[str] = None, environ=None) -> Settings:
    """
    Build a Settings object from defaults, a JSON file and the environment.

    Args:
        path: JSON parameter file; when None the bundled toolkit_params.json is
            used if it exists.
        environ: mapping used instead of os.environ (tests).
    """
    params = {}
    params_path = Path(path) if path else DEFAULT_PARAMS_FILE
    if path or params_path.exists():
        try:
            with open(params_path, "r") as f:
                params = json.load(f)
        except FileNotFoundError:
            raise ConfigError(f"settings file not found: {params_path}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"settings file {params_path} is not valid JSON: {e}")
        if not isinstance(params, dict):
            raise ConfigError(f"settings file {params_path} must hold a JSON object")

    unknown = sorted(set(params) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown settings: {', '.join(unknown)}")

    environ = os.environ if environ is None else environ
    for key in DEFAULTS:
        env_value = environ.get(ENV_PREFIX + key.upper())
        if env_value is not None:
            params[key] = env_value

    # Fill in defaults for anything not given
    for key, value in DEFAULTS.items():
        if key not in params:
            params[key] = value

    return Settings(**{f.name: _coerce(f.name, params[f.name]) for f in fields(Settings)})
