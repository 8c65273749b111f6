"""
Experiment configuration: a flat TOML file plus command-line overrides.

Recognised keys::

    cells, users_per_cell, ue_antennas, bs_antennas, relay_antennas, scheme,
    streams_per_ue, alpha, uplink_users, downlink_users, trials, snr_db, seed,
    rank_rel_tol, residual_tol

``relay_antennas`` defaults to the sufficient count for the scheme.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import tomli

from .exceptions import ConfigError
from .linalg import DEFAULT_REL_TOL
from .network import NetworkConfig, required_relay_antennas
from .simulate import DEFAULT_SNR_GRID_DB

NETWORK_KEYS = (
    "cells", "users_per_cell", "ue_antennas", "bs_antennas", "relay_antennas", "scheme",
    "streams_per_ue", "alpha", "uplink_users", "downlink_users",
)
RUN_KEYS = ("trials", "snr_db", "seed", "rank_rel_tol", "residual_tol")
KEYS = NETWORK_KEYS + RUN_KEYS


@dataclass(frozen=True)
class ExperimentConfig:
    network: NetworkConfig
    trials: int = 100
    snr_db: tuple = DEFAULT_SNR_GRID_DB
    seed: int = 0
    rank_rel_tol: float = DEFAULT_REL_TOL
    residual_tol: float = 1e-8
    output: Optional[Path] = None


def _key_line(text: str, key: str) -> Optional[int]:
    pattern = re.compile(rf"^\s*{re.escape(key)}\s*=", re.MULTILINE)
    m = pattern.search(text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def read_config_file(path) -> tuple:
    """Parse a TOML config file.

    Returns
    -------
    values : dict
    lines : dict
        Line number of each key, for error messages.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
    try:
        values = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    lines = {key: _key_line(text, key) for key in values}
    for key, value in values.items():
        if key not in KEYS:
            raise ConfigError(f"{path}, line {lines[key]}: unknown key {key!r}")
        if isinstance(value, dict):
            raise ConfigError(f"{path}, line {lines[key]}: key {key!r} must not be a table")
    return values, {key: f"{path}, line {line}" for key, line in lines.items()}


def _context(where: dict, key: str) -> str:
    return where.get(key, "command line")


def _typed(values: dict, where: dict, key: str, kind, default=None):
    if key not in values or values[key] is None:
        return default
    value = values[key]
    try:
        if kind is int:
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise TypeError
            return int(value)
        if kind is float:
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if kind is tuple:
            seq = value if isinstance(value, (list, tuple)) else [value]
            return tuple(float(v) for v in seq)
    except (TypeError, ValueError):
        pass
    raise ConfigError(f"{_context(where, key)}: key {key!r} has invalid value {value!r}")


def _blamed_key(message: str, values: dict) -> Optional[str]:
    """The configured key mentioned earliest in `message`, if any."""
    hits = []
    for key in values:
        m = re.search(rf"\b{re.escape(key)}\b", message)
        if m:
            hits.append((m.start(), key))
    if "scheme" in message and "scheme" in values:
        hits.append((message.index("scheme"), "scheme"))
    return min(hits)[1] if hits else None


def build_config(values: dict, where: Optional[dict] = None, output=None) -> ExperimentConfig:
    """Validate merged key/value pairs into an :class:`ExperimentConfig`."""
    where = where or {}
    for key in ("cells", "users_per_cell", "ue_antennas", "bs_antennas"):
        if key not in values:
            raise ConfigError(f"missing required key {key!r}")

    net = {key: values.get(key) for key in NETWORK_KEYS if values.get(key) is not None}
    net.setdefault("scheme", "imac")
    net.setdefault("relay_antennas", 1)
    try:
        network = NetworkConfig(**net)
        if values.get("relay_antennas") is None:
            network = network.with_relay_antennas(required_relay_antennas(network))
    except ConfigError as exc:
        key = _blamed_key(str(exc), values)
        prefix = f"{_context(where, key)}: key {key!r}: " if key else ""
        raise ConfigError(f"{prefix}{exc}") from None
    except TypeError as exc:
        raise ConfigError(str(exc)) from None

    trials = _typed(values, where, "trials", int, 100)
    if trials < 1:
        raise ConfigError(f"{_context(where, 'trials')}: key 'trials' must be >= 1, got {trials}")
    snr = _typed(values, where, "snr_db", tuple, DEFAULT_SNR_GRID_DB)
    if not snr:
        raise ConfigError(f"{_context(where, 'snr_db')}: key 'snr_db' must not be empty")
    seed = _typed(values, where, "seed", int, 0)
    if not 0 <= seed < 2**64:
        raise ConfigError(f"{_context(where, 'seed')}: key 'seed' must be a 64-bit unsigned integer")
    rel_tol = _typed(values, where, "rank_rel_tol", float, DEFAULT_REL_TOL)
    if not 0 < rel_tol < 1:
        raise ConfigError(f"{_context(where, 'rank_rel_tol')}: key 'rank_rel_tol' must lie in (0, 1)")
    res_tol = _typed(values, where, "residual_tol", float, 1e-8)
    if not res_tol > 0:
        raise ConfigError(f"{_context(where, 'residual_tol')}: key 'residual_tol' must be positive")

    return ExperimentConfig(
        network=network,
        trials=trials,
        snr_db=snr,
        seed=seed,
        rank_rel_tol=rel_tol,
        residual_tol=res_tol,
        output=Path(output) if output else None,
    )
