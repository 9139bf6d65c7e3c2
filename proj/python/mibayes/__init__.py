"""Bayesian inference for moment inequality models.

Thin wrapper over the C++ library. Datasets are (values, columns) pairs
with values an (n, q) float array.
"""

import json

from ._mibayes import (
    MibError,
    Posterior,
    effective_config,
    epsilon_schedule,
    generate,
    orthant_bounds,
    orthant_probability,
    quantile_interval,
    run_config,
)

__all__ = [
    "MibError",
    "Posterior",
    "epsilon_schedule",
    "generate",
    "orthant_bounds",
    "orthant_probability",
    "run",
    "validate",
    "quantile_interval",
]


def validate(config):
    """Effective configuration (defaults filled in) for a config dict."""
    return json.loads(effective_config(json.dumps(config)))


def run(config):
    """Run an experiment described by a config dict; returns written paths."""
    return run_config(json.dumps(config))

