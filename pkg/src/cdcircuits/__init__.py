"""Counterdiabatic adiabatic evolution compressed into shallow circuits with tensor networks."""

from __future__ import annotations

__version__ = "0.1.0"

from .agp import AGPSolverConfig, AGPSolution, fit_nc_coefficients, nc_to_mpo, solve_variational_agp
from .circuit import Circuit, CircuitLayout, apply_circuit, build_brickwork, build_sequential, cost_and_gradient
from .compress import OptimizerConfig, compress_chunks, lbfgs_minimize, trotter_adiabatic_circuit
from .dmrg import DmrgConfig, first_excited, gap_scan, ground_state
from .errors import (
    CdCircuitsError,
    ContractError,
    DivergenceError,
    ResourceError,
    UndefinedMetricError,
    ValidationError,
)
from .metrics import GroundStates, energy_errors, instantaneous_infidelity, target_fidelity
from .mps import MPO, MPS
from .operators import IsingParams, ising_hamiltonian
from .pauli import PauliSum
from .problems import AdiabaticProblem, combinatorial_instance, critical_preparation, gap_traversal, nc_comparison_hamiltonian
from .schedule import Schedule

__all__ = [
    "__version__",
    "AGPSolverConfig",
    "AGPSolution",
    "fit_nc_coefficients",
    "nc_to_mpo",
    "solve_variational_agp",
    "Circuit",
    "CircuitLayout",
    "apply_circuit",
    "build_brickwork",
    "build_sequential",
    "cost_and_gradient",
    "OptimizerConfig",
    "compress_chunks",
    "lbfgs_minimize",
    "trotter_adiabatic_circuit",
    "DmrgConfig",
    "first_excited",
    "gap_scan",
    "ground_state",
    "CdCircuitsError",
    "ContractError",
    "DivergenceError",
    "ResourceError",
    "UndefinedMetricError",
    "ValidationError",
    "GroundStates",
    "energy_errors",
    "instantaneous_infidelity",
    "target_fidelity",
    "MPO",
    "MPS",
    "IsingParams",
    "ising_hamiltonian",
    "PauliSum",
    "AdiabaticProblem",
    "combinatorial_instance",
    "critical_preparation",
    "gap_traversal",
    "nc_comparison_hamiltonian",
    "Schedule",
]
