"""Orbital-basis rotations: Givens networks, gate matrices, Fock-space action.

A spatial orthogonal matrix ``u`` acts on Fock space through
``a+_p -> sum_q u[q, p] a+_q``; within a fixed (n_up, n_down) sector this is the
tensor product of determinant-minor matrices for each spin.  Networks of
nearest-neighbour gates give the same operator gate by gate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .hamiltonian import Sector

__all__ = [
    "NetGate",
    "GivensNetwork",
    "RotationRegistry",
    "givens_local",
    "embed_local",
    "gate_matrix",
    "givens_decompose",
    "givens_reconstruct",
    "merge_local",
    "apply_rotation_network",
    "max_entanglement_network",
    "FockRotation",
    "fock_rotation",
    "bitstring_index",
]


def givens_local(theta: float) -> np.ndarray:
    """Single-particle 2x2 block whose Fock representation is the Givens gate."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, s], [-s, c]])


_SWAP_LOCAL = np.array([[0.0, 1.0], [1.0, 0.0]])


def embed_local(n: int, p: int, local: np.ndarray) -> np.ndarray:
    out = np.eye(n)
    out[p:p + 2, p:p + 2] = local
    return out


def _check_orthogonal(u, atol=1e-10):
    u = np.asarray(u, dtype=float)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError("rotation must be square")
    if not np.allclose(u.T @ u, np.eye(len(u)), atol=atol):
        raise ValueError("matrix is not orthogonal")
    return u


# --- gate matrices -----------------------------------------------------------

_F2 = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, -1]], dtype=float)


def _g2(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[1, 0, 0, 0], [0, c, -s, 0], [0, s, c, 0], [0, 0, 0, 1]])


def _lift_d4(g2):
    mid = np.kron(np.kron(np.eye(2), _F2), np.eye(2))
    return mid @ np.kron(g2, g2) @ mid


def gate_matrix(kind: str, d: int = 2, theta: float = 0.0) -> np.ndarray:
    """FSWAP or Givens gate on two adjacent sites, ``d**2 x d**2``.

    The two-site index is ``d * k_left + k_right``.  For d=4 the qubit order
    inside the pair is (left up, left down, right up, right down).
    """
    if kind == "fswap":
        g = _F2
    elif kind == "givens":
        g = _g2(theta)
    else:
        raise ValueError(f"unknown gate kind {kind!r}")
    if d == 2:
        return g.copy()
    if d == 4:
        return _lift_d4(g)
    raise ValueError("d must be 2 or 4")


# --- networks ----------------------------------------------------------------

class NetGate(NamedTuple):
    site: int
    angle: float = 0.0
    fswap: bool = False

    def local(self) -> np.ndarray:
        return _SWAP_LOCAL if self.fswap else givens_local(self.angle)

    def matrix(self, d: int) -> np.ndarray:
        return gate_matrix("fswap", d) if self.fswap else gate_matrix("givens", d, self.angle)


@dataclass(frozen=True)
class GivensNetwork:
    """Ordered nearest-neighbour gates, applied first to last.

    ``sign_flip`` names an orbital whose creation operator is negated before
    any gate (the determinant -1 case of a decomposition).  The whole network
    represents ``R(G_K ... G_1 D)``.
    """

    n_orbitals: int
    gates: tuple[NetGate, ...] = ()
    d: int = 4
    sign_flip: int | None = None

    def __post_init__(self):
        for g in self.gates:
            if not 0 <= g.site < self.n_orbitals - 1:
                raise ValueError(f"gate site {g.site} out of range")

    def __len__(self):
        return len(self.gates)

    @property
    def swaps_only(self) -> bool:
        return self.sign_flip is None and all(g.fswap for g in self.gates)

    def inverse(self) -> "GivensNetwork":
        """Network for ``R(u)^T``; only defined without a sign flag in the middle."""
        gates = tuple(NetGate(g.site, -g.angle, g.fswap) for g in reversed(self.gates))
        if self.sign_flip is None:
            return GivensNetwork(self.n_orbitals, gates, self.d)
        # D^-1 must act last; express it by conjugating through the gates
        u = givens_reconstruct(self).T
        return givens_decompose(u, d=self.d)


def givens_reconstruct(net: GivensNetwork) -> np.ndarray:
    u = np.eye(net.n_orbitals)
    if net.sign_flip is not None:
        u[net.sign_flip, net.sign_flip] = -1.0
    for g in net.gates:
        p = g.site
        u[p:p + 2, :] = g.local() @ u[p:p + 2, :]
    return u


def givens_decompose(u: np.ndarray, d: int = 4, prune: float = 1e-14) -> GivensNetwork:
    """Factor an orthogonal matrix into at most N(N-1)/2 adjacent Givens gates.

    Columns are cleared left to right, each from the bottom row upward, by
    left-multiplied rotations on rows (i-1, i).  Reversing and transposing the
    eliminations gives the network.  Gates with ``|theta| <= prune`` are
    dropped.
    """
    u = _check_orthogonal(u)
    n = len(u)
    m = u.copy()
    elim = []
    for col in range(n - 1):
        for i in range(n - 1, col, -1):
            x, y = m[i - 1, col], m[i, col]
            theta = float(np.arctan2(y, x))
            if abs(theta) <= prune:
                continue
            m[i - 1:i + 1, :] = givens_local(theta) @ m[i - 1:i + 1, :]
            elim.append((i - 1, theta))
    gates = tuple(NetGate(p, -theta) for p, theta in reversed(elim))
    sign = n - 1 if m[n - 1, n - 1] < 0 else None
    return GivensNetwork(n, gates, d, sign)


def merge_local(u: np.ndarray, p: int, update) -> np.ndarray:
    """``u @ embed(local)`` where local is a 2x2 rotation by ``update`` or a swap.

    ``update`` is a float angle or the string ``"swap"``.  To keep a state
    fixed after a tensor-level gate ``g(theta)``, merge ``-theta``.
    """
    n = len(u)
    if not 0 <= p < n - 1:
        raise ValueError("site out of range")
    local = _SWAP_LOCAL if update == "swap" else givens_local(float(update))
    out = u.copy()
    out[:, p:p + 2] = u[:, p:p + 2] @ local
    return out


@dataclass
class RotationRegistry:
    """Absolute orbital basis ``u_j`` per reference, relative to the RHF frame."""

    bases: list[np.ndarray] = field(default_factory=list)
    tag: str = "RHF"
    _cache: dict = field(default_factory=dict, repr=False)

    def __len__(self):
        return len(self.bases)

    def add(self, u: np.ndarray) -> int:
        self.bases.append(_check_orthogonal(u).copy())
        return len(self.bases) - 1

    def set(self, j: int, u: np.ndarray):
        self.bases[j] = _check_orthogonal(u).copy()
        self._invalidate(j)

    def merge(self, j: int, p: int, update):
        self.bases[j] = merge_local(self.bases[j], p, update)
        self._invalidate(j)

    def _invalidate(self, j):
        for key in [k for k in self._cache if j in k[:2]]:
            del self._cache[key]

    def relative(self, i: int, j: int) -> np.ndarray:
        return self.bases[i].T @ self.bases[j]

    def pair_network(self, i: int, j: int, d: int = 4) -> GivensNetwork:
        key = (i, j, d)
        if key not in self._cache:
            self._cache[key] = givens_decompose(self.relative(i, j), d=d)
        return self._cache[key]

    def copy(self) -> "RotationRegistry":
        return RotationRegistry([u.copy() for u in self.bases], self.tag)


# --- statevector action -------------------------------------------------------

_PARITY4 = np.array([1.0, -1.0, -1.0, 1.0])
_PARITY2 = np.array([1.0, -1.0])


def apply_rotation_network(vec: np.ndarray, net: GivensNetwork, d: int | None = None) -> np.ndarray:
    """Apply a network gate by gate to a full-space statevector."""
    d = net.d if d is None else d
    n = net.n_orbitals
    vec = np.asarray(vec, dtype=float)
    if vec.shape[0] != d ** n:
        raise ValueError(f"vector length {vec.shape[0]} != {d}**{n}")
    extra = vec.shape[1:]
    psi = vec.reshape((d,) * n + extra).copy()
    if net.sign_flip is not None:
        shape = [1] * psi.ndim
        shape[net.sign_flip] = d
        psi = psi * (_PARITY4 if d == 4 else _PARITY2).reshape(shape)
    for g in net.gates:
        p = g.site
        m = g.matrix(d).reshape(d, d, d, d)
        psi = np.tensordot(m, psi, axes=([2, 3], [p, p + 1]))
        psi = np.moveaxis(psi, (0, 1), (p, p + 1))
    return psi.reshape(vec.shape)


def bitstring_index(bits) -> int:
    """Full-space index of a d=2 occupation string (first bit most significant)."""
    x = 0
    for b in bits:
        x = 2 * x + int(b)
    return x


def max_entanglement_network(n_qubits: int) -> GivensNetwork:
    """d=2 network taking |1..1 0..0> to maximal Schmidt rank at the centre.

    Each round mixes the two central qubits with a pi/4 rotation, then moves
    the transferred particle and the left-behind hole outward with FSWAPs so
    the next round again finds |10> at the centre.
    """
    if n_qubits < 2 or n_qubits % 2:
        raise ValueError("n_qubits must be even and >= 2")
    half = n_qubits // 2
    gates = []
    for t in range(1, half + 1):
        gates.append(NetGate(half - 1, np.pi / 4))
        for q in range(half, n_qubits - t):
            gates.append(NetGate(q, fswap=True))
        for q in range(half - 2, t - 2, -1):
            gates.append(NetGate(q, fswap=True))
    return GivensNetwork(n_qubits, tuple(gates), d=2)


# --- Fock representation inside a sector ----------------------------------------

def _minor_matrix(u: np.ndarray, strings: np.ndarray, n: int, k: int) -> np.ndarray:
    if k == 0:
        return np.ones((1, 1))
    bits = (strings[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1
    occ = np.array([np.flatnonzero(b) for b in bits], dtype=np.int64).reshape(-1, k)
    sub = u[occ[:, None, :, None], occ[None, :, None, :]]
    return np.linalg.det(sub)


@dataclass(frozen=True, eq=False)
class FockRotation:
    """``R(u)`` restricted to a sector, applied as (R_up x R_down) with signs."""

    sector: Sector
    r_up: np.ndarray
    r_down: np.ndarray

    def apply(self, vecs: np.ndarray) -> np.ndarray:
        s = self.sector
        vecs = np.asarray(vecs, dtype=float)
        if vecs.shape[0] != s.dim:
            raise ValueError(f"expected sector vectors of length {s.dim}")
        one = vecs.ndim == 1
        v = vecs.reshape(s.dim, -1) * s.reorder_sign[:, None]
        grid = np.zeros((len(s.alpha_strings), len(s.beta_strings), v.shape[1]))
        grid[s.alpha_index, s.beta_index] = v
        grid = np.einsum("ai,ijk,bj->abk", self.r_up, grid, self.r_down, optimize=True)
        out = grid[s.alpha_index, s.beta_index] * s.reorder_sign[:, None]
        return out[:, 0] if one else out

    def dense(self) -> np.ndarray:
        return self.apply(np.eye(self.sector.dim))


def fock_rotation(u: np.ndarray, sector: Sector) -> FockRotation:
    u = _check_orthogonal(u)
    n = sector.n_spatial
    if len(u) != n:
        raise ValueError("rotation size does not match sector")
    return FockRotation(sector, _minor_matrix(u, sector.alpha_strings, n, sector.n_up),
                        _minor_matrix(u, sector.beta_strings, n, sector.n_down))
