"""Qutrit heat engines charging a two-level quantum battery.

Natural units throughout: energies in delta, temperatures in delta/k_B,
times in hbar/delta (hbar = k_B = 1).
"""

from .qcore import (
    TOL,
    DomainError,
    NumericTolerances,
    battery_hamiltonian,
    expectation,
    kron,
    partial_trace,
    qutrit_hamiltonian,
    thermal_state,
    trace_distance,
    unitary_evolve,
)
from .engines import CycleMetrics, EngineKind, EngineParams, run_engine
from .optimize import Budget, OptResult, SearchSpace, compare_engines, maximize_work, sweep_TU

__version__ = "0.1.0"

__all__ = [
    "TOL",
    "Budget",
    "CycleMetrics",
    "DomainError",
    "EngineKind",
    "EngineParams",
    "NumericTolerances",
    "OptResult",
    "SearchSpace",
    "battery_hamiltonian",
    "compare_engines",
    "expectation",
    "kron",
    "maximize_work",
    "partial_trace",
    "qutrit_hamiltonian",
    "run_engine",
    "sweep_TU",
    "thermal_state",
    "trace_distance",
    "unitary_evolve",
]
