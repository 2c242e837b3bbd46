"""Python access to the epcgaze core.

Configuration is passed as keyword overrides using the same keys as the
config file and CLI flags (``mu=0.05``, ``pretrain_epochs=0``, ...).
"""

import csv
import io
import json

from ._epcgaze import (
    ConfigError,
    DimensionMismatch,
    Error,
    ablate_csv,
    angular_error,
    config_keys,
    llr_weights,
    parse_config,
)
from . import _epcgaze

__all__ = [
    "ConfigError",
    "DimensionMismatch",
    "Error",
    "ablate",
    "angular_error",
    "config_keys",
    "config_text",
    "generate",
    "llr_weights",
    "loso",
    "parse_config",
]


def _overrides(kwargs):
    out = {}
    for key, value in kwargs.items():
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, (list, tuple)):
            value = ",".join(str(v) for v in value)
        out[key] = str(value)
    return out


def config_text(**overrides):
    """The config file a run with these overrides would snapshot."""
    return _epcgaze.config_text(_overrides(overrides))


def generate(**overrides):
    """Synthetic world as (features [N, D], gaze [N, 2] in radians, subject ids [N])."""
    return _epcgaze.generate(_overrides(overrides))


def loso(features=None, gaze=None, subjects=None, **overrides):
    """Leave-one-subject-out summary as a dict with per-subject rows under "per_subject".

    Generates the world unless arrays are given.
    """
    summary_json, summary_csv = _epcgaze.loso_tables(_overrides(overrides), features, gaze, subjects)
    summary = json.loads(summary_json)
    summary["per_subject"] = list(csv.DictReader(io.StringIO(summary_csv)))
    return summary


def ablate(axis, values, **overrides):
    """CSV text with one row per value of `axis`."""
    return ablate_csv(_overrides(dict(overrides, ablate_axis=axis, ablate_values=list(values))))
