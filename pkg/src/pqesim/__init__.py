"""Projective and variational quantum eigensolvers on an exact state-vector simulator."""

__version__ = "0.1.0"

from .ansatz import DuccAnsatz, check_metric, estimate_cnots, ordering_for_fixed_ansatz
from .molecule import (
    MolecularProblem,
    enumerate_pool,
    fci_solve,
    list_fixtures,
    parse_fcidump,
    read_fcidump,
)
from .pqe import PqeConfig, run_pqe
from .qubit import FermionExcitation, PauliString, QubitOperator, jordan_wigner_hamiltonian
from .spqe import SpqeConfig, run_spqe
from .state import StateVector, expectation
from .vqe import VqeConfig, run_adapt_vqe, run_vqe

__all__ = [
    "DuccAnsatz", "FermionExcitation", "MolecularProblem", "PauliString", "PqeConfig",
    "QubitOperator", "SpqeConfig", "StateVector", "VqeConfig", "check_metric",
    "enumerate_pool", "estimate_cnots", "expectation", "fci_solve", "jordan_wigner_hamiltonian",
    "list_fixtures", "ordering_for_fixed_ansatz", "parse_fcidump", "read_fcidump", "run_adapt_vqe",
    "run_pqe", "run_spqe", "run_vqe",
]
