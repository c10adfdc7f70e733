"""Multi-reference state: MPS references, their orbital bases and subspace weights."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chem_io import FermionIntegrals
from .hamiltonian import Sector, SparseHamiltonian
from .mps import Mps
from .rotations import RotationRegistry, fock_rotation
from .subspace import NoiseModel, reference_vector, solve_gee

__all__ = ["TnqeState", "rotated_reference", "reference_pencil", "solve_references"]


@dataclass
class TnqeState:
    """Linear combination ``sum_j c_j R(u_j)|phi_j>`` in the RHF frame.

    ``energy`` is the optimizer's current estimate of the lowest pencil
    eigenvalue (noisy when noise is on); ``call_id`` advances once per pencil
    so noise draws never repeat.
    """

    refs: list[Mps]
    registry: RotationRegistry
    ints: FermionIntegrals
    h: SparseHamiltonian
    coeffs: np.ndarray = field(default_factory=lambda: np.ones(1))
    energy: float = np.inf
    call_id: int = 0
    qpu_calls: int = 0
    batches: int = 0

    @property
    def sector(self) -> Sector:
        return self.h.sector

    @property
    def m(self) -> int:
        return len(self.refs)

    def next_call_id(self) -> int:
        self.call_id += 1
        return self.call_id

    def copy(self) -> "TnqeState":
        return TnqeState([r.copy() for r in self.refs], self.registry.copy(), self.ints, self.h,
                         self.coeffs.copy(), self.energy, self.call_id, self.qpu_calls, self.batches)

    def statevector(self) -> np.ndarray:
        """Normalized sector vector of the combined state (noiseless)."""
        vecs = np.column_stack([rotated_reference(self, j) for j in range(self.m)])
        psi = vecs @ self.coeffs
        return psi / np.linalg.norm(psi)

    def exact_energy(self) -> float:
        """Rayleigh quotient of the combined state with the stored weights."""
        psi = self.statevector()
        return float(psi @ (self.h.matrix @ psi))


def rotated_reference(state: TnqeState, j: int) -> np.ndarray:
    vec = reference_vector(state.refs[j], state.sector)
    return fock_rotation(state.registry.bases[j], state.sector).apply(vec)


def reference_pencil(state: TnqeState, noise: NoiseModel | None = None, call_id: int = 0):
    """M x M pencil between the references (exact unless ``noise`` is given)."""
    vecs = np.column_stack([rotated_reference(state, j) for j in range(state.m)])
    hm = vecs.T @ (state.h.matrix @ vecs)
    sm = vecs.T @ vecs
    hm, sm = 0.5 * (hm + hm.T), 0.5 * (sm + sm.T)
    if noise is not None and noise.active:
        rng = noise.rng(call_id, 1 << 30)  # tag disjoint from block indices
        m = state.m
        eh = np.triu(rng.standard_normal((m, m))) * noise.delta_h
        es = np.triu(rng.standard_normal((m, m)), 1) * noise.delta_s
        hm = hm + eh + np.triu(eh, 1).T
        sm = sm + es + es.T
    return hm, sm


def solve_references(state: TnqeState, eps_sv: float = 1e-10, mode: str = "projection",
                     noise: NoiseModel | None = None) -> tuple[float, np.ndarray]:
    hm, sm = reference_pencil(state, noise, state.next_call_id() if noise is not None else 0)
    sol = solve_gee((hm, sm), eps_sv, mode)
    return sol.e1, sol.c1.copy()
