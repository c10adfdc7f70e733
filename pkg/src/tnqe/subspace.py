"""Expanded subspace pencils built from one-hot decompositions of two-site tensors.

Every reference ``j`` contributes either a block of one-hot states (all
charge-admissible tuples ``(a, k1, k2, b)`` at the current bond) or, in the
mixed expansion, its whole state as a single column.  Columns are mapped to
sector statevectors, rotated into the common RHF frame with ``R(u_j)``, and
contracted with the exact Hamiltonian.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .hamiltonian import Sector, SparseHamiltonian
from .mps import Mps, to_statevector, two_site_tensor
from .rotations import RotationRegistry, fock_rotation

__all__ = [
    "NoiseModel",
    "OneHotBasis",
    "SubspacePencil",
    "GeeSolution",
    "DegeneratePencilError",
    "OracleCounter",
    "ORACLE",
    "one_hot_decompose",
    "whole_state_basis",
    "environments",
    "one_hot_vectors",
    "reference_vector",
    "assemble_pencil",
    "projection_norm",
    "discard_columns",
    "solve_gee",
    "block_coefficients",
    "update_two_site",
    "dump_pencil",
    "load_pencil",
]


class DegeneratePencilError(RuntimeError):
    """No overlap eigenvalue survives the threshold."""


class OracleCounter:
    """Counts matrix elements that would be sent to a quantum processor."""

    def __init__(self):
        self.calls = 0

    def add(self, n: int):
        self.calls += int(n)


ORACLE = OracleCounter()


@dataclass(frozen=True)
class NoiseModel:
    """Gaussian shot-noise emulation; ``delta_h``/``delta_s`` are standard errors."""

    delta_h: float = 0.0
    delta_s: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.delta_h < 0 or self.delta_s < 0:
            raise ValueError("noise levels must be non-negative")

    @property
    def active(self) -> bool:
        return self.delta_h > 0 or self.delta_s > 0

    def rng(self, *counter: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, *counter])


@dataclass
class OneHotBasis:
    """Charge-admissible one-hot tuples of reference ``j`` at bond ``p``.

    ``tuples`` rows are ``(a, k1, k2, b)`` in lexicographic order and ``t``
    the matching two-site tensor entries.  An unexpanded reference has no
    tuples and a single coefficient 1.
    """

    j: int
    p: int
    tuples: np.ndarray
    t: np.ndarray
    shape: tuple[int, int, int, int] | None
    expanded: bool = True
    left_q: np.ndarray | None = None
    right_q: np.ndarray | None = None
    phys_q: np.ndarray | None = None

    def __len__(self):
        return len(self.t)

    def to_tensor(self, coeffs: np.ndarray) -> np.ndarray:
        out = np.zeros(self.shape)
        a, k1, k2, b = self.tuples.T
        out[a, k1, k2, b] = coeffs
        return out

    def from_tensor(self, tensor: np.ndarray) -> np.ndarray:
        a, k1, k2, b = self.tuples.T
        return tensor[a, k1, k2, b]


def one_hot_decompose(mps: Mps, p: int, j: int = 0, filter_charges: bool = True) -> OneHotBasis:
    t = two_site_tensor(mps, p)
    mask = t.mask() if filter_charges else np.ones(t.data.shape, dtype=bool)
    tuples = np.argwhere(mask)
    return OneHotBasis(j, p, tuples, t.data[mask], t.data.shape, True, t.left_q, t.right_q, t.phys_q1)


def whole_state_basis(j: int, p: int) -> OneHotBasis:
    return OneHotBasis(j, p, np.zeros((0, 4), dtype=np.int64), np.ones(1), None, False)


def environments(mps: Mps, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Left block ``(d**p, chi_l)`` and right block ``(chi_r, d**(N-p-2))`` maps."""
    d = mps.d
    left = np.ones((1, 1))
    for t in mps.tensors[:p]:
        left = np.tensordot(left, t, axes=(1, 0)).reshape(-1, t.shape[2])
    right = np.ones((1, 1))
    for t in reversed(mps.tensors[p + 2:]):
        right = np.tensordot(t, right, axes=(2, 0)).reshape(t.shape[0], -1)
    assert left.shape[0] == d ** p
    return left, right


def one_hot_vectors(mps: Mps, basis: OneHotBasis, sector: Sector) -> np.ndarray:
    """Sector statevectors of the one-hot states, one column per tuple."""
    if not basis.expanded:
        return reference_vector(mps, sector)[:, None]
    d, n, p = mps.d, mps.n_sites, basis.p
    left, right = environments(mps, p)
    x = sector.basis
    tail = d ** (n - p - 2)
    i_r = x % tail
    k2 = (x // tail) % d
    k1 = (x // (tail * d)) % d
    i_l = x // (tail * d * d)
    a, tk1, tk2, b = basis.tuples.T
    w = left[i_l][:, a] * right[b][:, i_r].T
    w *= (k1[:, None] == tk1[None, :]) & (k2[:, None] == tk2[None, :])
    return w


def reference_vector(mps: Mps, sector: Sector) -> np.ndarray:
    return to_statevector(mps)[sector.basis]


@dataclass
class SubspacePencil:
    """Expanded pencil with block bookkeeping.

    ``blocks[i] = (j, offset, size, expanded)``.  ``mask`` marks retained
    columns after discarding.
    """

    h: np.ndarray
    s: np.ndarray
    blocks: list[tuple[int, int, int, bool]]
    mask: np.ndarray
    noise: NoiseModel = field(default_factory=NoiseModel)
    qpu_calls: int = 0
    call_id: int = 0

    @property
    def dim(self) -> int:
        return len(self.h)

    def block_slice(self, i: int) -> slice:
        _, off, size, _ = self.blocks[i]
        return slice(off, off + size)

    def reduced(self) -> tuple[np.ndarray, np.ndarray]:
        m = self.mask
        return self.h[np.ix_(m, m)], self.s[np.ix_(m, m)]


def _add_noise(h, s, blocks, noise: NoiseModel, call_id: int):
    h = h.copy()
    s = s.copy()
    for bi, (_, oi, ni, _) in enumerate(blocks):
        for bj in range(bi, len(blocks)):
            _, oj, nj, _ = blocks[bj]
            rng = noise.rng(call_id, bi, bj)
            rows, cols = slice(oi, oi + ni), slice(oj, oj + nj)
            if bi == bj:
                e = rng.standard_normal((ni, ni)) * noise.delta_h
                e = np.triu(e)
                e = e + np.triu(e, 1).T
                h[rows, cols] += e
                continue
            eh = rng.standard_normal((ni, nj)) * noise.delta_h
            es = rng.standard_normal((ni, nj)) * noise.delta_s
            h[rows, cols] += eh
            h[cols, rows] += eh.T
            s[rows, cols] += es
            s[cols, rows] += es.T
    return h, s


def assemble_pencil(refs: list[Mps], bases: list[OneHotBasis], registry: RotationRegistry,
                    h: SparseHamiltonian, noise: NoiseModel | None = None, call_id: int = 0,
                    vectors: dict[int, np.ndarray] | None = None,
                    counter: OracleCounter | None = ORACLE) -> SubspacePencil:
    """Exact expanded pencil through the oracle, plus optional noise.

    ``vectors`` may hold precomputed *rotated* sector vectors keyed by block
    position (used for unexpanded references that do not change in a sweep).
    """
    noise = noise or NoiseModel()
    sector = h.sector
    if sector is None:
        raise ValueError("pencil assembly needs a sector Hamiltonian")
    cols, blocks, off = [], [], 0
    for bi, basis in enumerate(bases):
        ref = refs[basis.j]
        if ref.sector != (sector.n_up, sector.n_down):
            raise ValueError(f"reference {basis.j} is in sector {ref.sector}, expected "
                             f"{(sector.n_up, sector.n_down)}")
        if vectors is not None and bi in vectors:
            v = vectors[bi]
        else:
            w = one_hot_vectors(ref, basis, sector)
            v = fock_rotation(registry.bases[basis.j], sector).apply(w)
        cols.append(v)
        blocks.append((basis.j, off, v.shape[1], basis.expanded))
        off += v.shape[1]
    vmat = np.hstack(cols)
    hv = h.matrix @ vmat
    hp = vmat.T @ hv
    sp = vmat.T @ vmat
    hp = 0.5 * (hp + hp.T)
    sp = 0.5 * (sp + sp.T)
    sizes = [b[2] for b in blocks]
    calls = 2 * sum(sizes[a] * sizes[b] for a in range(len(sizes)) for b in range(a + 1, len(sizes)))
    if counter is not None:
        counter.add(calls)
    if noise.active:
        hp, sp = _add_noise(hp, sp, blocks, noise, call_id)
    return SubspacePencil(hp, sp, blocks, np.ones(len(hp), dtype=bool), noise, calls, call_id)


def projection_norm(s_block: np.ndarray, s_col: np.ndarray) -> float:
    """Squared norm of a candidate's projection onto earlier states, ``s^T S^+ s``."""
    s_col = np.asarray(s_col, dtype=float)
    if s_col.size == 0:
        return 0.0
    s_block = np.asarray(s_block, dtype=float)
    rcond = np.sqrt(np.finfo(float).eps)
    return float(s_col @ np.linalg.pinv(s_block, rcond=rcond, hermitian=True) @ s_col)


def _cond(s: np.ndarray) -> float:
    if len(s) == 0:
        return 1.0
    w = np.linalg.eigvalsh(s)
    if w[0] <= 0:
        return np.inf
    return float(w[-1] / w[0])


def discard_columns(pencil: SubspacePencil, lin_dep_tol: float = 1e-3,
                    cond_max: float = 1e8) -> SubspacePencil:
    """Greedy left-to-right removal of nearly dependent columns.

    The projection test runs as an incremental Gram-Schmidt in the S metric.
    The condition-number test is checked on the final set; only if that fails
    is the scan repeated with an explicit check per column (eigenvalue
    interlacing makes the two scans agree whenever the final set passes).
    """
    s = pencil.s
    n = len(s)
    keep = _gram_schmidt_scan(s, lin_dep_tol, pencil.mask)
    if _cond(s[np.ix_(keep, keep)]) > cond_max:
        keep = _explicit_scan(s, lin_dep_tol, cond_max, pencil.mask)
    mask = np.zeros(n, dtype=bool)
    mask[keep] = True
    return replace(pencil, mask=mask)


def _gram_schmidt_scan(s, tol, allowed):
    kept: list[int] = []
    q = np.zeros((len(s), 0))  # columns: S-orthonormal combinations of kept columns
    for c in range(len(s)):
        if not allowed[c]:
            continue
        scc = s[c, c]
        if scc <= 0:
            continue
        if kept:
            proj = q.T @ s[:, c]
            resid = 1.0 - float(proj @ proj) / scc
        else:
            resid = 1.0
        if resid <= tol:
            continue
        new = np.zeros(len(s))
        new[c] = 1.0
        if kept:
            new -= q @ proj
        nrm2 = float(new @ s @ new)
        if nrm2 <= 0:
            continue
        q = np.hstack([q, (new / np.sqrt(nrm2))[:, None]])
        kept.append(c)
    return kept


def _explicit_scan(s, tol, cond_max, allowed):
    kept: list[int] = []
    for c in range(len(s)):
        if not allowed[c] or s[c, c] <= 0:
            continue
        block = s[np.ix_(kept, kept)]
        pn = projection_norm(block, s[kept, c]) / s[c, c] if kept else 0.0
        if 1.0 - pn <= tol:
            continue
        trial = kept + [c]
        if _cond(s[np.ix_(trial, trial)]) > cond_max:
            continue
        kept = trial
    return kept


@dataclass
class GeeSolution:
    energies: np.ndarray
    coeffs: np.ndarray  # full pencil length, zeros on discarded columns
    kappa: float
    mode: str

    @property
    def e1(self) -> float:
        return float(self.energies[0])

    @property
    def c1(self) -> np.ndarray:
        return self.coeffs[:, 0]


def _solve_reduced(h, s, eps_sv, mode):
    lam, u = np.linalg.eigh(s)
    good = lam > eps_sv
    if not np.any(good):
        raise DegeneratePencilError("all overlap eigenvalues fall below the threshold")
    if mode == "projection":
        ue = u[:, good]
        hp = ue.T @ h @ ue
        x = 1.0 / np.sqrt(lam[good])
        e, y = np.linalg.eigh((x[:, None] * hp) * x[None, :])
        c = ue @ (x[:, None] * y)
    elif mode == "inversion":
        ue = u[:, good]
        sinv = (ue / lam[good]) @ ue.T
        e, c = np.linalg.eig(sinv @ h)
        e, c = e.real, c.real
        norms = np.einsum("im,ij,jm->m", c, s, c)
        ok = norms > eps_sv * np.max(np.abs(norms))
        e, c = e[ok], c[:, ok]
        order = np.argsort(e)
        e, c = e[order], c[:, order]
    else:
        raise ValueError(f"unknown mode {mode!r}")
    norms = np.einsum("im,ij,jm->m", c, s, c)
    c = c / np.sqrt(np.abs(norms))[None, :]
    return e, c


def solve_gee(pencil: SubspacePencil | tuple[np.ndarray, np.ndarray], eps_sv: float = 1e-10,
              mode: str = "projection") -> GeeSolution:
    """Thresholded generalized eigensolver on the retained columns."""
    if isinstance(pencil, tuple):
        h, s = pencil
        mask = np.ones(len(h), dtype=bool)
    else:
        h, s = pencil.reduced()
        mask = pencil.mask
    if len(h) == 0:
        raise DegeneratePencilError("no retained columns")
    e, c = _solve_reduced(h, s, eps_sv, mode)
    full = np.zeros((len(mask), c.shape[1]))
    full[mask] = c
    c1 = c[:, 0]
    kappa = float(c1 @ c1 / np.sqrt(e[0] ** 2 + 1))
    return GeeSolution(e, full, kappa, mode)


def block_coefficients(pencil: SubspacePencil, sol: GeeSolution, block: int) -> np.ndarray:
    return sol.c1[pencil.block_slice(block)]


def update_two_site(basis: OneHotBasis, coeffs: np.ndarray) -> tuple[np.ndarray, float] | None:
    """Normalized slice of the solution vector as a new two-site tensor.

    Returns ``(tensor, weight)`` with ``weight`` the slice norm, or ``None``
    when the slice vanishes (caller keeps the old tensor).
    """
    nrm = float(np.linalg.norm(coeffs))
    if nrm < 1e-14:
        return None
    return basis.to_tensor(coeffs / nrm), nrm


PENCIL_DUMP_VERSION = 1


def dump_pencil(pencil: SubspacePencil) -> str:
    """JSON text with both matrices, block map, mask and noise record."""
    return json.dumps({
        "schema_version": PENCIL_DUMP_VERSION,
        "h": pencil.h.tolist(),
        "s": pencil.s.tolist(),
        "blocks": [list(map(int, b[:3])) + [bool(b[3])] for b in pencil.blocks],
        "mask": pencil.mask.astype(int).tolist(),
        "noise": {"delta_h": pencil.noise.delta_h, "delta_s": pencil.noise.delta_s,
                  "seed": pencil.noise.seed},
        "qpu_calls": pencil.qpu_calls,
        "call_id": pencil.call_id,
    })


def load_pencil(text: str) -> SubspacePencil:
    data = json.loads(text)
    if data.get("schema_version") != PENCIL_DUMP_VERSION:
        raise ValueError("unsupported pencil dump version")
    return SubspacePencil(np.array(data["h"]), np.array(data["s"]),
                          [tuple(b) for b in data["blocks"]], np.array(data["mask"], dtype=bool),
                          NoiseModel(**data["noise"]), data["qpu_calls"], data["call_id"])
