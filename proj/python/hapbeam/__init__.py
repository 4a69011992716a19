# SPDX-License-Identifier: Apache-2.0
"""HAP downlink beamforming simulator."""

import json as _json

from ._hapbeam import (
    BeamSolution,
    EulerZYX,
    HapbeamError,
    euler_to_rotation,
    rotation_log_vee,
    rotation_to_euler,
    so3_exp,
    solve_snapshot,
    wrap_pi,
)
from ._hapbeam import default_config as _default_config
from ._hapbeam import run_experiment as _run_experiment


def default_config():
    """Default scenario configuration as a dict."""
    return _json.loads(_default_config())


def run_experiment(config=None):
    """Runs a scenario; `config` is a dict of overrides or JSON text."""
    if config is None:
        config = {}
    if not isinstance(config, str):
        config = _json.dumps(config)
    return _run_experiment(config)


__all__ = [
    "BeamSolution",
    "EulerZYX",
    "HapbeamError",
    "default_config",
    "euler_to_rotation",
    "rotation_log_vee",
    "rotation_to_euler",
    "run_experiment",
    "so3_exp",
    "solve_snapshot",
    "wrap_pi",
]
