"""Python interface to the cached decentralized federated learning simulator.

Configurations are plain dicts keyed by the command-line setting names
(``"cache-size"``, ``"tau-max"``, ...). Missing keys take their defaults.
"""

import json

from . import _core
from ._core import GridMap, IoError, build_grid, detect_contacts, gb_update, lru_update

__all__ = [
    "GridMap",
    "IoError",
    "build_grid",
    "cache_occupancy",
    "default_config",
    "detect_contacts",
    "gb_update",
    "lru_update",
    "metrics_csv",
    "resolve_config",
    "run",
    "speedup_config",
]


def _dump(config):
    return json.dumps(dict(config or {}))


def default_config():
    """Every setting with its default value."""
    return json.loads(_core.default_config_json())


def resolve_config(config=None):
    """Defaults overlaid with ``config``; raises ValueError when invalid."""
    return json.loads(_core.resolve_config_json(_dump(config)))


def speedup_config(config, factor):
    return json.loads(_core.speedup_config_json(_dump(config), int(factor)))


def run(config=None):
    """Runs one experiment and returns its per-epoch metrics as dicts."""
    return json.loads(_core.run_json(_dump(config)))


def metrics_csv(series):
    """CSV text for a series returned by :func:`run`."""
    return _core.metrics_csv_json(json.dumps(series))


def cache_occupancy(config=None, measure_epochs=30):
    """Mean/variance of cache size and age from a training-free simulation."""
    return json.loads(_core.cache_occupancy_json(_dump(config), int(measure_epochs)))
