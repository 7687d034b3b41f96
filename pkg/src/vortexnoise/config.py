"""TOML run configuration.

Grammar: one optional ``[run]`` table (bare top-level keys are accepted too)
holding RunConfig fields, plus optional ``[experiment.<name>]`` tables with
per-experiment parameters.  Unknown keys are rejected.  Diagnostics carry
``file:line`` positions where the offending key can be located.

Example:

    [run]
    M = 8
    N_shell = 4
    kappa = 1.0
    nu = 1.0
    delta = 0.25
    R = 10.0
    dt = 0.005
    T_end = 1.0
    seed = 12345

    [experiment.scaling]
    K = 1.0
    N_list = [2, 4, 8]
    paths = 100
"""

from __future__ import annotations

import dataclasses
import re
from pathlib import Path

try:
    import tomllib
except ImportError:  # python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .integrator import RunConfig

__all__ = ["parse_config", "parse_config_full", "config_as_dict", "DEFAULTS"]

_FIELDS = {f.name: f.type for f in dataclasses.fields(RunConfig)}
_INT_FIELDS = {"M", "N_shell", "seed", "snapshot_every"}
_BOOL_FIELDS = {"cutoff_enabled", "nonlinearity"}

DEFAULTS = RunConfig()


def _key_line(text: str, key: str) -> int | None:
    for i, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith(key) and stripped[len(key):].lstrip().startswith("="):
            return i
    return None


def _located(path: Path, text: str, key: str, msg: str) -> ConfigError:
    line = _key_line(text, key)
    where = f"{path}:{line}" if line else str(path)
    return ConfigError(f"{where}: {msg}")


def _coerce(path: Path, text: str, key: str, value):
    if key in _BOOL_FIELDS:
        if not isinstance(value, bool):
            raise _located(path, text, key, f"{key} must be a boolean, got {value!r}")
        return value
    if key in _INT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise _located(path, text, key, f"{key} must be an integer, got {value!r}")
        return value
    if key == "scheme":
        if not isinstance(value, str):
            raise _located(path, text, key, f"scheme must be a string, got {value!r}")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise _located(path, text, key, f"{key} must be a number, got {value!r}")
    return float(value)


def parse_config_full(path) -> tuple[RunConfig, dict]:
    """Parse a config file; returns (RunConfig, experiment sections)."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text()
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as ex:
        raise ConfigError(f"{path}: invalid TOML: {ex}") from ex

    run = dict(data.pop("run", {}))
    experiments = data.pop("experiment", {})
    if not isinstance(experiments, dict):
        raise ConfigError(f"{path}: [experiment] must be a table of tables")
    # bare top-level keys are treated as run keys
    for k, v in data.items():
        if isinstance(v, dict):
            raise ConfigError(f"{path}: unknown section [{k}]")
        run[k] = v

    kwargs = {}
    for key, value in run.items():
        if key not in _FIELDS:
            raise _located(path, text, key, f"unknown configuration key {key!r}")
        kwargs[key] = _coerce(path, text, key, value)

    try:
        cfg = RunConfig(**kwargs)
    except ConfigError as ex:
        # surface the first offending key with its position when possible
        msg = str(ex)
        for key in kwargs:
            if re.search(rf"\b{re.escape(key)}\b", msg):
                raise _located(path, text, key, msg) from ex
        raise ConfigError(f"{path}: {msg}") from ex
    return cfg, experiments


def parse_config(path) -> RunConfig:
    """Validated RunConfig from a TOML file (missing keys take defaults)."""
    cfg, _ = parse_config_full(path)
    return cfg


def write_config(path, cfg: RunConfig) -> None:
    """Serialize a RunConfig as a [run] table; parse_config inverts this."""
    lines = ["[run]"]
    for key, value in dataclasses.asdict(cfg).items():
        if isinstance(value, bool):
            lines.append(f"{key} = {'true' if value else 'false'}")
        elif isinstance(value, str):
            lines.append(f'{key} = "{value}"')
        else:
            lines.append(f"{key} = {value!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def config_as_dict(cfg: RunConfig) -> dict:
    return dataclasses.asdict(cfg)
