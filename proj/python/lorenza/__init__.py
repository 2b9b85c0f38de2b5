"""Python access to the native optimizers and experiment harness."""

import json

from ._lorenza import (
    ConfigError,
    LorenzaError,
    cosine_lr,
    gaussian,
    philox4x32,
    rho_schedule,
    selftest,
    ssrf,
)
from . import _lorenza

__all__ = [
    "ConfigError",
    "LorenzaError",
    "Objective",
    "cosine_lr",
    "gaussian",
    "memory_report",
    "philox4x32",
    "rho_schedule",
    "run_experiment",
    "run_trial",
    "selftest",
    "ssrf",
]


def _dump(obj):
    return obj if isinstance(obj, str) else json.dumps(obj)


class Objective(_lorenza.Objective):
    """Objective built from the same spec dict a run config uses."""

    def __init__(self, spec):
        super().__init__(_dump(spec))


def run_trial(config, seed):
    return json.loads(_lorenza.run_trial(_dump(config), seed))


def run_experiment(config):
    return json.loads(_lorenza.run_experiment(_dump(config)))


def memory_report(config):
    return json.loads(_lorenza.memory_report(_dump(config)))
