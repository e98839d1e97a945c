"""Non-parametric estimation of marked multivariate Hawkes kernels.

Thin wrapper over the C++ core. Functions that return reports give plain
dicts; kernels, streams, statistics and fits are core objects.
"""

import json

from . import _core
from ._core import (
    ArgumentError,
    EventStream,
    KernelSpec,
    NeuralModel,
    NumericalError,
    SecondOrderStats,
    StatGrid,
    WienerHopfSolution,
    branching_ratio,
    build_grid,
    estimate_second_order,
    fit_wiener_hopf,
    preset,
    preset_names,
    simulate,
)

__all__ = [
    "ArgumentError",
    "EventStream",
    "KernelSpec",
    "NeuralModel",
    "NumericalError",
    "SecondOrderStats",
    "StatGrid",
    "WienerHopfSolution",
    "branching_ratio",
    "build_grid",
    "causality_report",
    "default_train_config",
    "error_report",
    "estimate_second_order",
    "fit_neural",
    "fit_wiener_hopf",
    "kernel_spec",
    "preset",
    "preset_names",
    "simulate",
]


def kernel_spec(spec):
    """KernelSpec from a dict in the CLI's spec JSON format."""
    return KernelSpec.from_json(json.dumps(spec))


def default_train_config():
    return json.loads(_core.default_train_config())


def fit_neural(stats, config=None, jobs=1):
    """Fit every row of the kernel matrix. `config` holds TrainConfig keys;
    missing keys take their defaults."""
    return _core.fit_neural(stats, json.dumps(config or {}), jobs)


def error_report(fit, truth, K=1000, T=0.0):
    return json.loads(_core.error_report(fit, truth, K, T))


def causality_report(norms, rates, volumes=None):
    norms = [list(map(float, row)) for row in norms]
    if volumes is None:
        volumes = [1.0] * len(norms)
    return json.loads(_core.causality_report(norms, list(rates), list(volumes)))
