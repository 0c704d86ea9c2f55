"""Hybrid (flow plus jump) simulation of reset control systems."""

from ._backend import BACKEND, KERNELS, get_kernel
from .core import (
    SIGNALS,
    DivergenceError,
    EventLog,
    NotConvergedError,
    OpenLoopSetup,
    SimConfig,
    SimulationError,
    SteadyStateRecord,
    Trajectory,
    ZenoError,
    export_csv,
    harmonics,
    prediction_error,
    simulate,
    steady_state,
)

__all__ = [
    "BACKEND",
    "KERNELS",
    "get_kernel",
    "SIGNALS",
    "DivergenceError",
    "EventLog",
    "NotConvergedError",
    "OpenLoopSetup",
    "SimConfig",
    "SimulationError",
    "SteadyStateRecord",
    "Trajectory",
    "ZenoError",
    "export_csv",
    "harmonics",
    "prediction_error",
    "simulate",
    "steady_state",
]
