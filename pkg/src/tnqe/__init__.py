"""Classical emulation of the tensor-network quantum eigensolver.

The quantum processor is replaced by an exact sparse-Hamiltonian oracle with
optional Gaussian shot noise.  Start from :func:`tnqe.driver.run_tnqe` or the
``tnqe`` command.
"""

from importlib import resources as _resources

from .chem_io import FermionIntegrals, coeff_l1_norm, parse_fcidump, read_fcidump, write_fcidump
from .driver import ConvergenceTrace, RunParams, TnqeState, correlation_fraction, run_tnqe
from .hamiltonian import Sector, build_sparse_hamiltonian, fci_ground_state, hf_energy
from .mps import Mps
from .rotations import GivensNetwork, RotationRegistry
from .subspace import NoiseModel
from .sweep import SweepConfig, generalized_sweep

__version__ = "0.1.0"


def data_path(name: str):
    """Path of a bundled FCIDUMP, e.g. ``data_path("h6_1.70.fcidump")``."""
    return _resources.files(__name__).joinpath("data", name)


__all__ = [
    "FermionIntegrals",
    "parse_fcidump",
    "read_fcidump",
    "write_fcidump",
    "coeff_l1_norm",
    "Sector",
    "build_sparse_hamiltonian",
    "fci_ground_state",
    "hf_energy",
    "Mps",
    "GivensNetwork",
    "RotationRegistry",
    "NoiseModel",
    "SweepConfig",
    "generalized_sweep",
    "RunParams",
    "ConvergenceTrace",
    "TnqeState",
    "correlation_fraction",
    "run_tnqe",
    "data_path",
]
