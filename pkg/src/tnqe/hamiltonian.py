"""Exact determinant-basis Hamiltonian, the classical stand-in for the QPU.

Conventions
-----------
Spin-orbitals are interleaved, ``s = 2 p + sigma`` with ``sigma = 0`` for
spin up.  A full-space basis index is the integer whose binary digits are the
spin-orbital occupations with spin-orbital 0 as the most significant bit.
Read in base 4 the same integer gives the d=4 site occupations
``k_p = 2 n_up + n_down`` with site 0 most significant, so d=2 and d=4
statevectors are literally the same array.  Fermionic states are ordered as
``prod_{s ascending} a+_s |vac>``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import combinations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .chem_io import FermionIntegrals

__all__ = [
    "Sector",
    "SparseHamiltonian",
    "ResourceCapError",
    "SolverError",
    "build_sparse_hamiltonian",
    "hf_energy",
    "hf_determinant",
    "fci_ground_state",
    "oracle_matrix_element",
    "occupation_index",
    "MAX_SPIN_ORBITALS",
]

MAX_SPIN_ORBITALS = 16
DENSE_LIMIT = 4096


class ResourceCapError(RuntimeError):
    """Requested object exceeds the desk-scale size cap."""


class SolverError(RuntimeError):
    """Iterative eigensolver failed to converge."""


def _popcount(x):
    return np.bitwise_count(x).astype(np.int64)


def _strings(n: int, k: int) -> np.ndarray:
    """Sorted N-bit integers with k set bits (orbital 0 = most significant)."""
    out = [sum(1 << (n - 1 - p) for p in occ) for occ in combinations(range(n), k)]
    return np.array(sorted(out), dtype=np.int64)


def _spread(strings: np.ndarray, n: int, offset: int) -> np.ndarray:
    """Place N-bit spin strings on the interleaved 2N-bit layout."""
    out = np.zeros_like(strings)
    for p in range(n):
        bit = (strings >> (n - 1 - p)) & 1
        out |= bit << (2 * n - 1 - (2 * p + offset))
    return out


@dataclass(frozen=True)
class Sector:
    """Fixed (n_up, n_down) block of the Fock space on ``n_spatial`` orbitals."""

    n_spatial: int
    n_up: int
    n_down: int

    def __post_init__(self):
        n = self.n_spatial
        if not (0 <= self.n_up <= n and 0 <= self.n_down <= n):
            raise ValueError(f"sector ({self.n_up}, {self.n_down}) unreachable with {n} orbitals")

    @classmethod
    def of(cls, ints: FermionIntegrals) -> "Sector":
        return cls(ints.n_spatial, ints.n_up, ints.n_down)

    @property
    def n_particles(self) -> int:
        return self.n_up + self.n_down

    @property
    def ms2(self) -> int:
        return self.n_up - self.n_down

    @cached_property
    def alpha_strings(self) -> np.ndarray:
        return _strings(self.n_spatial, self.n_up)

    @cached_property
    def beta_strings(self) -> np.ndarray:
        return _strings(self.n_spatial, self.n_down)

    @cached_property
    def _layout(self):
        n = self.n_spatial
        a = _spread(self.alpha_strings, n, 0)
        b = _spread(self.beta_strings, n, 1)
        full = (a[:, None] | b[None, :]).ravel()
        order = np.argsort(full, kind="stable")
        ia, ib = np.divmod(order, len(b))
        return full[order], ia, ib

    @property
    def basis(self) -> np.ndarray:
        """Sorted full-space indices of the sector's determinants."""
        return self._layout[0]

    @property
    def alpha_index(self) -> np.ndarray:
        return self._layout[1]

    @property
    def beta_index(self) -> np.ndarray:
        return self._layout[2]

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def full_dim(self) -> int:
        return 4 ** self.n_spatial

    @cached_property
    def reorder_sign(self) -> np.ndarray:
        """Sign relating interleaved order to all-up-then-all-down order.

        Every up electron on orbital q must pass each down electron on an
        orbital p < q.
        """
        n = self.n_spatial
        x = self.basis
        count = np.zeros(len(x), dtype=np.int64)
        downs_before = np.zeros(len(x), dtype=np.int64)
        for p in range(n):
            up = (x >> (2 * n - 1 - 2 * p)) & 1
            dn = (x >> (2 * n - 2 - 2 * p)) & 1
            count += up * downs_before
            downs_before += dn
        return 1.0 - 2.0 * (count & 1)

    def index_of(self, full_indices) -> np.ndarray:
        """Position within the sector basis; raises if any index is outside."""
        full_indices = np.asarray(full_indices, dtype=np.int64)
        pos = np.searchsorted(self.basis, full_indices)
        pos = np.minimum(pos, self.dim - 1)
        if not np.all(self.basis[pos] == full_indices):
            raise ValueError("basis state outside sector")
        return pos

    def restrict(self, vec: np.ndarray, atol: float = 1e-10) -> np.ndarray:
        """Full-space amplitudes -> sector amplitudes (checks for leakage)."""
        vec = np.asarray(vec)
        if vec.shape[0] == self.dim and self.dim != self.full_dim:
            return vec
        if vec.shape[0] != self.full_dim:
            raise ValueError(f"vector length {vec.shape[0]} matches neither sector nor full space")
        out = vec[self.basis]
        leak = np.linalg.norm(vec) ** 2 - np.linalg.norm(out) ** 2
        if leak > atol:
            raise ValueError(f"vector has weight {leak:.2e} outside the sector")
        return out

    def embed(self, vec: np.ndarray) -> np.ndarray:
        out = np.zeros((self.full_dim,) + vec.shape[1:], dtype=vec.dtype)
        out[self.basis] = vec
        return out


def occupation_index(n_spatial: int, up, down) -> int:
    """Full-space index of the determinant with the given occupied orbitals."""
    x = 0
    for p in up:
        x |= 1 << (2 * n_spatial - 1 - 2 * p)
    for p in down:
        x |= 1 << (2 * n_spatial - 2 - 2 * p)
    return x


def hf_determinant(ints: FermionIntegrals) -> int:
    return occupation_index(ints.n_spatial, range(ints.n_up), range(ints.n_down))


# --- operator application on bitstrings -------------------------------------

def _apply(x, ok, sgn, so, nso, create):
    bit = np.int64(1) << (nso - 1 - so)
    occ = (x & bit) != 0
    ok = ok & (~occ if create else occ)
    higher = ~((bit << 1) - 1) & ((np.int64(1) << nso) - 1)
    sgn = sgn * (1 - 2 * (_popcount(x & higher) & 1))
    return x ^ bit, ok, sgn


def _terms_action(states, ops, coeffs, nso, chunk=1 << 21):
    """Apply coefficient-weighted operator strings to every basis state.

    ``ops`` is (T, m, 2): rows of (spin-orbital, create flag) applied right to
    left.  Yields (source position, target state, value) triples.
    """
    n_states = len(states)
    step = max(1, chunk // max(n_states, 1))
    for start in range(0, len(ops), step):
        o = ops[start:start + step]
        c = coeffs[start:start + step]
        x = np.broadcast_to(states, (len(o), n_states)).copy()
        ok = np.ones_like(x, dtype=bool)
        sgn = np.ones_like(x)
        for k in range(o.shape[1] - 1, -1, -1):
            so = o[:, k, 0][:, None].astype(np.int64)
            cr = o[:, k, 1][:, None].astype(bool)
            x_c, ok_c, s_c = _apply(x, ok, sgn, so, nso, True)
            x_a, ok_a, s_a = _apply(x, ok, sgn, so, nso, False)
            x = np.where(cr, x_c, x_a)
            ok = np.where(cr, ok_c, ok_a)
            sgn = np.where(cr, s_c, s_a)
        t, src = np.nonzero(ok)
        yield src, x[t, src], c[t] * sgn[t, src]


def _operator_table(ints: FermionIntegrals, drop: float = 1e-15):
    n = ints.n_spatial
    one_ops, one_c = [], []
    for p in range(n):
        for q in range(n):
            v = ints.h1[p, q]
            if abs(v) <= drop:
                continue
            for s in (0, 1):
                one_ops.append([(2 * p + s, 1), (2 * q + s, 0)])
                one_c.append(v)
    # a+_{p s} a+_{r t} a_{s' t} a_{q s} with coefficient (pq|rs)/2
    idx = np.argwhere(np.abs(ints.h2) > drop)
    two_ops, two_c = [], []
    for p, q, r, s in idx:
        v = 0.5 * ints.h2[p, q, r, s]
        for sig in (0, 1):
            for tau in (0, 1):
                if (p, sig) == (r, tau) or (q, sig) == (s, tau):
                    continue
                two_ops.append([(2 * p + sig, 1), (2 * r + tau, 1), (2 * s + tau, 0), (2 * q + sig, 0)])
                two_c.append(v)
    return (np.array(one_ops, dtype=np.int64).reshape(-1, 2, 2), np.array(one_c, dtype=float),
            np.array(two_ops, dtype=np.int64).reshape(-1, 4, 2), np.array(two_c, dtype=float))


@dataclass(frozen=True, eq=False)
class SparseHamiltonian:
    """Real symmetric Hamiltonian on a sector (or on the whole Fock space).

    ``matrix`` includes ``e_core`` on its diagonal.  ``basis`` lists the
    full-space indices of the rows; for the full space it is ``arange``.
    """

    matrix: sp.csr_matrix
    basis: np.ndarray
    n_spatial: int
    d: int
    e_core: float
    sector: Sector | None = None
    ordering: str = "interleaved-up-down"

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def full_dim(self) -> int:
        return 4 ** self.n_spatial

    def to_local(self, vec: np.ndarray) -> np.ndarray:
        """Map a full-space or sector vector onto this operator's basis."""
        vec = np.asarray(vec)
        if self.sector is None:
            if vec.shape[0] != self.dim:
                raise ValueError(f"dimension mismatch: {vec.shape[0]} vs {self.dim}")
            return vec
        return self.sector.restrict(vec)

    def apply(self, vec: np.ndarray) -> np.ndarray:
        return self.matrix @ self.to_local(vec)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


def build_sparse_hamiltonian(ints: FermionIntegrals, d: int = 4,
                             sector: Sector | str | None = "auto") -> SparseHamiltonian:
    """Assemble the second-quantized Hamiltonian in the determinant basis.

    ``sector="auto"`` restricts to the integrals' (n_up, n_down) sector;
    ``None`` builds the full 4**N space.  ``d`` only tags the site layout, the
    matrix is identical for both.
    """
    if d not in (2, 4):
        raise ValueError("d must be 2 or 4")
    n = ints.n_spatial
    nso = 2 * n
    if nso > MAX_SPIN_ORBITALS:
        raise ResourceCapError(f"{nso} spin-orbitals exceeds the cap of {MAX_SPIN_ORBITALS}")
    if isinstance(sector, str):
        sector = Sector.of(ints)
    basis = sector.basis if sector is not None else np.arange(1 << nso, dtype=np.int64)
    dim = len(basis)
    one_ops, one_c, two_ops, two_c = _operator_table(ints)
    rows, cols, vals = [np.arange(dim)], [np.arange(dim)], [np.full(dim, ints.e_core)]
    for ops, coeffs in ((one_ops, one_c), (two_ops, two_c)):
        if len(ops) == 0:
            continue
        for src, tgt, v in _terms_action(basis, ops, coeffs, nso):
            rows.append(np.searchsorted(basis, tgt) if sector is not None else tgt)
            cols.append(src)
            vals.append(v)
    mat = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                        shape=(dim, dim)).tocsr()
    mat.sum_duplicates()
    mat = ((mat + mat.T) * 0.5).tocsr()
    mat.eliminate_zeros()
    return SparseHamiltonian(mat, basis, n, d, float(ints.e_core), sector)


def hf_energy(ints: FermionIntegrals) -> float:
    """Energy of the closed-shell determinant filling the lowest orbitals."""
    if ints.n_electrons % 2 or ints.ms2 != 0:
        raise NotImplementedError("hf_energy supports closed-shell (even, ms2=0) systems only")
    o = ints.n_electrons // 2
    h1 = ints.h1[:o, :o]
    g = ints.h2[:o, :o, :o, :o]
    coul = np.einsum("iijj->", g)
    exch = np.einsum("ijji->", g)
    return float(ints.e_core + 2 * np.trace(h1) + 2 * coul - exch)


def fci_ground_state(h: SparseHamiltonian, sector: Sector | None = None, tol: float = 1e-12,
                     seed: int = 0) -> tuple[float, np.ndarray]:
    """Lowest eigenpair of ``h`` within ``sector``.

    The returned vector lives on ``h``'s own basis.  When ``h`` spans the full
    space and a sector is given, the vector is embedded back into full space.
    """
    if sector is not None and h.sector is None:
        idx = sector.basis
        mat = h.matrix[idx][:, idx]
    else:
        if sector is not None and h.sector != sector:
            raise ValueError("Hamiltonian was built for a different sector")
        mat = h.matrix
        idx = None
    dim = mat.shape[0]
    if dim == 0:
        raise ValueError("empty sector")
    if dim <= DENSE_LIMIT:
        w, v = np.linalg.eigh(mat.toarray())
        e, vec = float(w[0]), v[:, 0]
    else:
        v0 = np.random.default_rng(seed).standard_normal(dim)
        try:
            w, v = spla.eigsh(mat, k=1, which="SA", v0=v0, tol=tol, maxiter=20 * dim)
        except spla.ArpackNoConvergence as exc:
            raise SolverError(f"eigsh failed to converge: {exc}") from None
        e, vec = float(w[0]), v[:, 0]
    vec = vec / np.linalg.norm(vec)
    i = np.argmax(np.abs(vec))
    vec = vec * np.sign(vec[i])
    resid = np.linalg.norm(mat @ vec - e * vec)
    if resid > 1e-7:
        raise SolverError(f"ground state residual {resid:.2e} exceeds 1e-7")
    if idx is not None:
        full = np.zeros(h.dim)
        full[idx] = vec
        vec = full
    return e, vec


def oracle_matrix_element(bra: np.ndarray, op: SparseHamiltonian | None, ket: np.ndarray) -> float:
    """Exact real ``<bra|op|ket>``; ``op=None`` means the identity."""
    bra = np.asarray(bra)
    ket = np.asarray(ket)
    if op is None:
        if bra.shape != ket.shape:
            raise ValueError(f"dimension mismatch: {bra.shape} vs {ket.shape}")
        return float(bra @ ket)
    return float(op.to_local(bra) @ op.apply(ket))
