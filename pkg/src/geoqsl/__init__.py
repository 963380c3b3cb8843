"""Geometric speed limits for ground-state preparation.

Compares the energy-variance length of a driven state path with the
Fubini-Study length of the ground-state path and with orbit distances.
"""

from .dynamics import EngineConfig, Trajectory, evolve_coherent, evolve_gaussian, evolve_matrix
from .experiments import (
    LengthReport,
    PhysicsViolation,
    run_ho_linear,
    run_qubit,
    run_qubit_adiabatic,
    run_qutrit,
    run_squeezed,
)
from .geometry import ParamPath, analytic_metric, fs_distance, path_length, qgt_finite_difference
from .model import (
    MatrixFamily,
    QubitFamily,
    QutritFamily,
    ShiftedOscillatorFamily,
    SqueezedOscillatorFamily,
)
from .protocols import Protocol, RampSpec, adiabatic_protocol, find_hold_time

__version__ = "0.1.0"

__all__ = [
    "EngineConfig",
    "LengthReport",
    "MatrixFamily",
    "ParamPath",
    "PhysicsViolation",
    "Protocol",
    "QubitFamily",
    "QutritFamily",
    "RampSpec",
    "ShiftedOscillatorFamily",
    "SqueezedOscillatorFamily",
    "Trajectory",
    "adiabatic_protocol",
    "analytic_metric",
    "evolve_coherent",
    "evolve_gaussian",
    "evolve_matrix",
    "find_hold_time",
    "fs_distance",
    "path_length",
    "qgt_finite_difference",
    "run_ho_linear",
    "run_qubit",
    "run_qubit_adiabatic",
    "run_qutrit",
    "run_squeezed",
]
