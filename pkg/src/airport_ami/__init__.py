"""Airport ambient-intelligence agent simulation."""

from .engine import Simulation, SimClock, run, spawn_population
from .metrics import METRIC_NAMES, RunResult, aggregate
from .params import SetupParameters

__all__ = [
    "METRIC_NAMES",
    "RunResult",
    "SetupParameters",
    "SimClock",
    "Simulation",
    "aggregate",
    "run",
    "spawn_population",
]
