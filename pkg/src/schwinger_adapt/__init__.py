"""ADAPT-VQE with symmetry-graded operator pools for the lattice Schwinger model."""
__version__ = "0.1.0"

from .kernels import BACKEND
from .pauli import PauliString, PauliSum, PauliTerm, commutator, is_time_reversal_odd, multiply, to_matrix
from .model import ModelParams, PRESETS, build_hamiltonian, charge_operator, reference_state
from .state import apply_pauli_exponential, expectation, fidelity, ground_state, pool_gradient
from .pools import POOL_IDS, OperatorPool, PoolOperator, PoolOptions, Tile, build_pool, build_topdown_pool
from .adapt import AdaptConfig, Trajectory, replay, run_adapt

__all__ = [
    "BACKEND",
    "PauliString",
    "PauliSum",
    "PauliTerm",
    "commutator",
    "is_time_reversal_odd",
    "multiply",
    "to_matrix",
    "ModelParams",
    "PRESETS",
    "build_hamiltonian",
    "charge_operator",
    "reference_state",
    "apply_pauli_exponential",
    "expectation",
    "fidelity",
    "ground_state",
    "pool_gradient",
    "POOL_IDS",
    "OperatorPool",
    "PoolOperator",
    "PoolOptions",
    "Tile",
    "build_pool",
    "build_topdown_pool",
    "AdaptConfig",
    "Trajectory",
    "replay",
    "run_adapt",
]
