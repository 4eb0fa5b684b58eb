import json

from . import _core
from ._core import ConfigError, builtin_names, chain_quality_bound, elect, slot_utilization_bound

__all__ = [
    "ConfigError",
    "builtin_names",
    "chain_quality_bound",
    "config_text",
    "elect",
    "simulate",
    "slot_utilization_bound",
    "verify",
]


def simulate(source, seed=None):
    out = _core.simulate(source, seed)
    return {
        "config": out["config"],
        "trace": out["trace"],
        "metrics": json.loads(out["metrics"]),
        "oracle": json.loads(out["oracle"]),
    }


def verify(trace, source):
    return json.loads(_core.verify(trace, source))


def config_text(source):
    return _core.config_text(source)
