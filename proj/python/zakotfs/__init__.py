"""Zak-OTFS modem, bistatic channel and semi-blind ISAC receiver."""

from ._zakotfs import (
    ConfigError,
    GridConfig,
    Path,
    ZakModem,
    config_keys,
    default_config,
    hungarian,
    match_targets,
    default_grid,
    run_sweep,
    selftest,
)

__all__ = [
    "ConfigError",
    "GridConfig",
    "Path",
    "ZakModem",
    "config_keys",
    "default_config",
    "hungarian",
    "match_targets",
    "default_grid",
    "run_sweep",
    "selftest",
]
