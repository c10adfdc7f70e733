"""Matrix product states with (n_up, n_down) charge labels on every bond.

Tensors are dense ``(chi_left, d, chi_right)`` arrays.  Bond ``b`` sits
between sites ``b-1`` and ``b`` and carries the charge accumulated by the
sites to its left, so bond 0 is ``(0, 0)`` and bond N is the global sector.
All factorizations are done block by block in charge so the labels survive
and every tensor stays exactly in-sector.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field

import numpy as np

from .hamiltonian import SparseHamiltonian

__all__ = [
    "Mps",
    "TwoSiteTensor",
    "SplitResult",
    "block_svd",
    "local_charges",
    "random_mps",
    "product_mps",
    "canonicalize",
    "two_site_tensor",
    "svd_split",
    "schmidt_values",
    "schmidt_entropy",
    "to_statevector",
    "from_statevector",
    "inner",
    "split_d4_to_d2",
    "expectation",
    "save_mps",
    "load_mps",
    "STATEVECTOR_CAP",
]

STATEVECTOR_CAP = 65536
_SNAPSHOT_MAGIC = b"TNQEMPS\x00"
_SNAPSHOT_VERSION = 1


def local_charges(d: int, kind: str = "spatial") -> np.ndarray:
    """Charges ``(n_up, n_down)`` of the local basis states of one site.

    ``kind`` is ``spatial`` (d=4), ``up``/``down`` (d=2 spin-orbital sites) or
    ``spinless`` (d=2, particle number carried in the first slot).
    """
    if kind == "spatial":
        if d != 4:
            raise ValueError("spatial sites have d=4")
        return np.array([[0, 0], [0, 1], [1, 0], [1, 1]])
    if d != 2:
        raise ValueError(f"{kind} sites have d=2")
    if kind in ("up", "spinless"):
        return np.array([[0, 0], [1, 0]])
    if kind == "down":
        return np.array([[0, 0], [0, 1]])
    raise ValueError(f"unknown site kind {kind!r}")


def _default_kinds(n_sites: int, d: int) -> list[str]:
    return ["spatial"] * n_sites if d == 4 else ["up" if i % 2 == 0 else "down" for i in range(n_sites)]


@dataclass
class Mps:
    """Open-boundary MPS.

    ``center`` is the site holding the non-orthogonal tensor, or ``None`` when
    no canonical form is known.
    """

    tensors: list[np.ndarray]
    bond_charges: list[np.ndarray]
    site_kinds: list[str]
    d: int
    center: int | None = None

    def __post_init__(self):
        n = len(self.tensors)
        if len(self.bond_charges) != n + 1 or len(self.site_kinds) != n:
            raise ValueError("inconsistent MPS metadata")
        if self.tensors[0].shape[0] != 1 or self.tensors[-1].shape[2] != 1:
            raise ValueError("boundary bonds must have dimension 1")
        for i, t in enumerate(self.tensors):
            if t.ndim != 3 or t.shape[1] != self.d:
                raise ValueError(f"site {i} has shape {t.shape}")
            if t.shape[0] != len(self.bond_charges[i]) or t.shape[2] != len(self.bond_charges[i + 1]):
                raise ValueError(f"site {i} does not match its bond labels")

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    @property
    def sector(self) -> tuple[int, int]:
        return tuple(int(x) for x in self.bond_charges[-1][0])

    def phys_charges(self, site: int) -> np.ndarray:
        return local_charges(self.d, self.site_kinds[site])

    def copy(self) -> "Mps":
        return Mps([t.copy() for t in self.tensors], [q.copy() for q in self.bond_charges],
                   list(self.site_kinds), self.d, self.center)

    def charge_mask(self, site: int) -> np.ndarray:
        """Boolean mask of the charge-allowed entries of one site tensor."""
        ql = self.bond_charges[site][:, None, None, :]
        qk = self.phys_charges(site)[None, :, None, :]
        qr = self.bond_charges[site + 1][None, None, :, :]
        return np.all(ql + qk == qr, axis=-1)

    def parameter_count(self) -> tuple[int, int]:
        """(dense, in-sector) number of tensor entries."""
        dense = sum(t.size for t in self.tensors)
        allowed = sum(int(self.charge_mask(i).sum()) for i in range(self.n_sites))
        return dense, allowed

    def norm(self) -> float:
        if self.center is not None:
            return float(np.linalg.norm(self.tensors[self.center]))
        return float(np.sqrt(max(inner(self, self), 0.0)))

    def normalize(self) -> "Mps":
        if self.center is None:
            canonicalize(self, 0)
        nrm = np.linalg.norm(self.tensors[self.center])
        if nrm == 0:
            raise ValueError("cannot normalize a zero MPS")
        self.tensors[self.center] = self.tensors[self.center] / nrm
        return self


@dataclass
class TwoSiteTensor:
    """Contraction of sites ``p, p+1`` with its charge labels."""

    data: np.ndarray
    p: int
    left_q: np.ndarray
    right_q: np.ndarray
    phys_q1: np.ndarray
    phys_q2: np.ndarray

    @property
    def shape(self):
        return self.data.shape

    def with_data(self, data: np.ndarray) -> "TwoSiteTensor":
        return TwoSiteTensor(data, self.p, self.left_q, self.right_q, self.phys_q1, self.phys_q2)

    def row_charges(self) -> np.ndarray:
        """Charge of each (l, k1) row of the matricized tensor."""
        return (self.left_q[:, None, :] + self.phys_q1[None, :, :]).reshape(-1, 2)

    def col_charges(self) -> np.ndarray:
        """Charge each (k2, r) column requires to its left."""
        return (self.right_q[None, :, :] - self.phys_q2[:, None, :]).reshape(-1, 2)

    def mask(self) -> np.ndarray:
        rq = self.row_charges()
        cq = self.col_charges()
        return np.all(rq[:, None, :] == cq[None, :, :], axis=-1).reshape(self.data.shape)


@dataclass
class SplitResult:
    left: np.ndarray
    s: np.ndarray
    right: np.ndarray
    xi: float
    bond_q: np.ndarray
    all_s: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _charge_groups(q: np.ndarray):
    keys, inv = np.unique(q, axis=0, return_inverse=True)
    return keys, inv.reshape(-1)


def block_svd(mat: np.ndarray, row_q: np.ndarray, col_q: np.ndarray,
              chi_max: int | None = None, cutoff: float = 0.0):
    """Charge-blocked SVD ``mat = U diag(s) V``.

    Entries connecting rows and columns of different charge must vanish and
    are ignored.  Singular values from all blocks are pooled, sorted
    descending (stable), and the top ``chi_max`` above ``cutoff`` are kept.
    Returns ``U, s, V, bond_q, all_s`` where ``all_s`` holds every singular
    value (descending) for truncation bookkeeping.
    """
    rkeys, rinv = _charge_groups(row_q)
    ckeys, cinv = _charge_groups(col_q)
    pieces = []
    for ri, key in enumerate(rkeys):
        match = np.flatnonzero(np.all(ckeys == key, axis=1))
        if len(match) == 0:
            continue
        rows = np.flatnonzero(rinv == ri)
        cols = np.flatnonzero(cinv == match[0])
        u, s, vt = np.linalg.svd(mat[np.ix_(rows, cols)], full_matrices=False)
        for k in range(len(s)):
            pieces.append((s[k], rows, u[:, k], cols, vt[k], key))
    all_s = np.array(sorted((p[0] for p in pieces), reverse=True))
    order = sorted(range(len(pieces)), key=lambda i: -pieces[i][0])
    keep = [i for i in order if pieces[i][0] > cutoff]
    if chi_max is not None:
        keep = keep[:chi_max]
    if not keep:
        # keep the single largest vector so the bond never vanishes
        keep = order[:1]
    U = np.zeros((mat.shape[0], len(keep)))
    V = np.zeros((len(keep), mat.shape[1]))
    s = np.zeros(len(keep))
    bond_q = np.zeros((len(keep), 2), dtype=np.int64)
    for j, i in enumerate(keep):
        sv, rows, uv, cols, vv, key = pieces[i]
        U[rows, j] = uv
        V[j, cols] = vv
        s[j] = sv
        bond_q[j] = key
    return U, s, V, bond_q, all_s


# --- construction -----------------------------------------------------------

def _reachable(n_sites, d, kinds, sector):
    """Per-bond sets of charges consistent with reaching ``sector``."""
    target = np.asarray(sector)
    fwd = [{(0, 0)}]
    for i in range(n_sites):
        qk = local_charges(d, kinds[i])
        fwd.append({(a + int(k[0]), b + int(k[1])) for a, b in fwd[-1] for k in qk})
    bwd = [None] * (n_sites + 1)
    bwd[n_sites] = {tuple(int(x) for x in target)}
    for i in range(n_sites - 1, -1, -1):
        qk = local_charges(d, kinds[i])
        bwd[i] = {(a - int(k[0]), b - int(k[1])) for a, b in bwd[i + 1] for k in qk}
    out = [sorted(f & b) for f, b in zip(fwd, bwd)]
    if not out[-1]:
        raise ValueError(f"sector {tuple(sector)} unreachable with {n_sites} sites of d={d}")
    return out


def random_mps(n_sites: int, d: int, sector, chi: int, seed=0, site_kinds=None) -> Mps:
    """Random normalized in-sector MPS with bond dimensions at most ``chi``.

    Entries are standard Gaussians on the charge-allowed pattern with ``chi``
    copies of every reachable bond charge; the state is then compressed to
    ``chi`` by a truncating right-to-left sweep.  Returned centered at site 0.
    """
    kinds = list(site_kinds) if site_kinds is not None else _default_kinds(n_sites, d)
    reach = _reachable(n_sites, d, kinds, sector)
    rng = np.random.default_rng(seed)
    bonds = []
    for b, charges in enumerate(reach):
        mult = 1 if b in (0, n_sites) else chi
        bonds.append(np.array([c for c in charges for _ in range(mult)], dtype=np.int64).reshape(-1, 2))
    tensors = []
    for i in range(n_sites):
        shape = (len(bonds[i]), d, len(bonds[i + 1]))
        t = rng.standard_normal(shape)
        tensors.append(t)
    mps = Mps(tensors, bonds, kinds, d, None)
    for i in range(n_sites):
        mps.tensors[i] = mps.tensors[i] * mps.charge_mask(i)
    # left-to-right exact orthogonalization, then truncating sweep back
    _move_center(mps, 0, n_sites - 1, chi_max=None)
    _move_center(mps, n_sites - 1, 0, chi_max=chi)
    mps.center = 0
    return mps.normalize()


def product_mps(occupations, d: int = 4, site_kinds=None) -> Mps:
    """Bond-dimension-1 MPS of one basis state (local indices per site)."""
    occupations = [int(k) for k in occupations]
    n = len(occupations)
    kinds = list(site_kinds) if site_kinds is not None else _default_kinds(n, d)
    tensors, bonds = [], [np.zeros((1, 2), dtype=np.int64)]
    for i, k in enumerate(occupations):
        t = np.zeros((1, d, 1))
        t[0, k, 0] = 1.0
        tensors.append(t)
        bonds.append(bonds[-1] + local_charges(d, kinds[i])[k])
    return Mps(tensors, bonds, kinds, d, 0)


# --- canonical forms ---------------------------------------------------------

def _step_right(mps: Mps, i: int, chi_max=None, cutoff=0.0):
    t = mps.tensors[i]
    cl, d, cr = t.shape
    row_q = (mps.bond_charges[i][:, None, :] + mps.phys_charges(i)[None, :, :]).reshape(-1, 2)
    U, s, V, q, _ = block_svd(t.reshape(cl * d, cr), row_q, mps.bond_charges[i + 1], chi_max, cutoff)
    mps.tensors[i] = U.reshape(cl, d, -1)
    mps.tensors[i + 1] = np.tensordot(s[:, None] * V, mps.tensors[i + 1], axes=(1, 0))
    mps.bond_charges[i + 1] = q


def _step_left(mps: Mps, i: int, chi_max=None, cutoff=0.0):
    t = mps.tensors[i]
    cl, d, cr = t.shape
    col_q = (mps.bond_charges[i + 1][None, :, :] - mps.phys_charges(i)[:, None, :]).reshape(-1, 2)
    U, s, V, q, _ = block_svd(t.reshape(cl, d * cr), mps.bond_charges[i], col_q, chi_max, cutoff)
    mps.tensors[i] = V.reshape(-1, d, cr)
    mps.tensors[i - 1] = np.tensordot(mps.tensors[i - 1], U * s[None, :], axes=(2, 0))
    mps.bond_charges[i] = q


def _move_center(mps: Mps, start: int, stop: int, chi_max=None, cutoff=0.0):
    if stop > start:
        for i in range(start, stop):
            _step_right(mps, i, chi_max, cutoff)
    else:
        for i in range(start, stop, -1):
            _step_left(mps, i, chi_max, cutoff)


_ZERO_SV = 1e-14


def canonicalize(mps: Mps, p: int) -> Mps:
    """Bring the orthogonality center to site ``p`` (in place, also returned).

    Exactly-zero singular directions are dropped; everything else is kept.
    """
    if not 0 <= p < mps.n_sites:
        raise ValueError("site out of range")
    if mps.center is None:
        _move_center(mps, 0, mps.n_sites - 1, cutoff=0.0)
        _move_center(mps, mps.n_sites - 1, p, cutoff=0.0)
    elif mps.center != p:
        _move_center(mps, mps.center, p, cutoff=0.0)
    mps.center = p
    return mps


def two_site_tensor(mps: Mps, p: int) -> TwoSiteTensor:
    if mps.center not in (p, p + 1):
        raise RuntimeError(f"center {mps.center} is not at site {p} or {p + 1}")
    data = np.tensordot(mps.tensors[p], mps.tensors[p + 1], axes=(2, 0))
    return TwoSiteTensor(data, p, mps.bond_charges[p], mps.bond_charges[p + 2],
                         mps.phys_charges(p), mps.phys_charges(p + 1))


def svd_split(t: TwoSiteTensor, chi_max: int, cutoff: float = 0.0) -> SplitResult:
    """Truncated SVD of a two-site tensor.

    ``xi`` is the discarded weight relative to the full norm; ``s`` is
    renormalized so the kept values have unit sum of squares.
    """
    if chi_max < 1:
        raise ValueError("chi_max must be >= 1")
    cl, d1, d2, cr = t.data.shape
    U, s, V, q, all_s = block_svd(t.data.reshape(cl * d1, d2 * cr), t.row_charges(), t.col_charges(),
                                  chi_max, cutoff)
    total = float(np.sum(all_s ** 2))
    kept = float(np.sum(s ** 2))
    xi = 0.0 if total == 0 else max(0.0, 1.0 - kept / total)
    s_norm = s / np.sqrt(kept) if kept > 0 else s
    return SplitResult(U.reshape(cl, d1, -1), s_norm, V.reshape(-1, d2, cr), xi, q,
                       all_s / np.sqrt(total) if total > 0 else all_s)


def put_two_site(mps: Mps, split: SplitResult, p: int, center: int) -> Mps:
    """Write a split back into sites ``p, p+1`` with the center on ``center``."""
    if center == p + 1:
        mps.tensors[p] = split.left
        mps.tensors[p + 1] = split.s[:, None, None] * split.right
    elif center == p:
        mps.tensors[p] = split.left * split.s[None, None, :]
        mps.tensors[p + 1] = split.right
    else:
        raise ValueError("center must be p or p+1")
    mps.bond_charges[p + 1] = split.bond_q
    mps.center = center
    return mps


def schmidt_values(mps: Mps, bond: int) -> np.ndarray:
    """Schmidt coefficients across bond ``bond`` (sites < bond vs >= bond)."""
    if not 1 <= bond < mps.n_sites:
        raise ValueError("bond must lie strictly inside the chain")
    work = canonicalize(mps.copy(), bond)
    t = work.tensors[bond]
    cl, d, cr = t.shape
    col_q = (work.bond_charges[bond + 1][None, :, :] - work.phys_charges(bond)[:, None, :]).reshape(-1, 2)
    _, s, _, _, _ = block_svd(t.reshape(cl, d * cr), work.bond_charges[bond], col_q)
    s = np.sort(s)[::-1]
    return s / np.linalg.norm(s)


def schmidt_entropy(mps: Mps, bond: int) -> float:
    s2 = schmidt_values(mps, bond) ** 2
    s2 = s2[s2 > 0]
    return float(-np.sum(s2 * np.log(s2)))


# --- dense bridges -------------------------------------------------------------

def to_statevector(mps: Mps) -> np.ndarray:
    if mps.d ** mps.n_sites > STATEVECTOR_CAP:
        raise MemoryError(f"statevector of {mps.d}**{mps.n_sites} exceeds cap {STATEVECTOR_CAP}")
    psi = mps.tensors[0].reshape(mps.d, -1)
    for t in mps.tensors[1:]:
        psi = np.tensordot(psi, t, axes=(1, 0)).reshape(-1, t.shape[2])
    return psi.reshape(-1)


def from_statevector(vec: np.ndarray, d: int, site_kinds=None, chi_max=None, cutoff=1e-14) -> Mps:
    """TT-SVD of an in-sector statevector, optionally truncated; not renormalized."""
    vec = np.asarray(vec, dtype=float)
    n = int(round(np.log(len(vec)) / np.log(d)))
    if d ** n != len(vec):
        raise ValueError("length is not a power of d")
    kinds = list(site_kinds) if site_kinds is not None else _default_kinds(n, d)
    qs = [local_charges(d, k) for k in kinds]
    # total charge of the dominant component fixes the sector
    idx = int(np.argmax(np.abs(vec)))
    digits = np.unravel_index(idx, (d,) * n)
    sector = sum(qs[i][digits[i]] for i in range(n))
    tensors, bonds = [], [np.zeros((1, 2), dtype=np.int64)]
    rest = vec.reshape(1, -1)
    for i in range(n - 1):
        cl = rest.shape[0]
        m = rest.reshape(cl * d, -1)
        row_q = (bonds[-1][:, None, :] + qs[i][None, :, :]).reshape(-1, 2)
        col_q = np.array(sector)[None, :] - _suffix_charges(qs[i + 1:])
        U, s, V, q, _ = block_svd(m, row_q, col_q, chi_max, cutoff)
        tensors.append(U.reshape(cl, d, -1))
        bonds.append(q)
        rest = s[:, None] * V
    tensors.append(rest.reshape(rest.shape[0], d, 1))
    bonds.append(np.array([sector], dtype=np.int64))
    return Mps(tensors, bonds, kinds, d, n - 1)


def _suffix_charges(qs):
    """Charge of every basis string on the given sites (C order)."""
    total = np.zeros((1, 2), dtype=np.int64)
    for q in qs:
        total = (total[:, None, :] + q[None, :, :]).reshape(-1, 2)
    return total


def inner(a: Mps, b: Mps) -> float:
    """``<a|b>`` by left-to-right transfer matrices."""
    if a.n_sites != b.n_sites or a.d != b.d:
        raise ValueError("MPS shapes differ")
    env = np.ones((1, 1))
    for ta, tb in zip(a.tensors, b.tensors):
        env = np.einsum("ij,ikl,jkm->lm", env, ta, tb, optimize=True)
    return float(env[0, 0])


def split_d4_to_d2(mps: Mps) -> Mps:
    """Split every spatial site into (up, down) spin-orbital sites."""
    if mps.d != 4:
        raise ValueError("input must have d=4")
    tensors, bonds, kinds = [], [mps.bond_charges[0]], []
    up_q, dn_q = local_charges(2, "up"), local_charges(2, "down")
    for i, t in enumerate(mps.tensors):
        cl, _, cr = t.shape
        m = t.reshape(cl, 2, 2, cr).reshape(cl * 2, 2 * cr)
        row_q = (mps.bond_charges[i][:, None, :] + up_q[None, :, :]).reshape(-1, 2)
        col_q = (mps.bond_charges[i + 1][None, :, :] - dn_q[:, None, :]).reshape(-1, 2)
        U, s, V, q, _ = block_svd(m, row_q, col_q, cutoff=_ZERO_SV * max(1.0, np.abs(m).max()))
        tensors += [U.reshape(cl, 2, -1), (s[:, None] * V).reshape(-1, 2, cr)]
        bonds += [q, mps.bond_charges[i + 1]]
        kinds += ["up", "down"]
    center = None if mps.center is None else 2 * mps.center + 1
    return Mps(tensors, bonds, kinds, 2, center)


def expectation(mps: Mps, h: SparseHamiltonian) -> float:
    psi = to_statevector(mps)
    local = h.to_local(psi)
    return float(local @ (h.matrix @ local))


# --- snapshots ------------------------------------------------------------------

_KIND_CODES = {"spatial": 0, "up": 1, "down": 2, "spinless": 3}


def save_mps(mps: Mps, fh) -> None:
    """Binary snapshot: header, then per-site shapes, charges and float64 data (LE)."""
    if isinstance(fh, str) or hasattr(fh, "__fspath__"):
        with open(fh, "wb") as f:
            return save_mps(mps, f)
    n = mps.n_sites
    center = -1 if mps.center is None else mps.center
    nu, nd = mps.sector
    fh.write(_SNAPSHOT_MAGIC)
    fh.write(struct.pack("<6i", _SNAPSHOT_VERSION, n, mps.d, nu, nd, center))
    fh.write(struct.pack(f"<{n}i", *[_KIND_CODES[k] for k in mps.site_kinds]))
    for q in mps.bond_charges:
        fh.write(struct.pack("<i", len(q)))
        fh.write(np.ascontiguousarray(q, dtype="<i4").tobytes())
    for t in mps.tensors:
        fh.write(np.ascontiguousarray(t, dtype="<f8").tobytes())


def load_mps(fh) -> Mps:
    if isinstance(fh, (bytes, bytearray)):
        fh = io.BytesIO(fh)
    elif isinstance(fh, str) or hasattr(fh, "__fspath__"):
        with open(fh, "rb") as f:
            return load_mps(f)
    if fh.read(8) != _SNAPSHOT_MAGIC:
        raise ValueError("not an MPS snapshot")
    version, n, d, _, _, center = struct.unpack("<6i", fh.read(24))
    if version != _SNAPSHOT_VERSION:
        raise ValueError(f"unsupported snapshot version {version}")
    codes = struct.unpack(f"<{n}i", fh.read(4 * n))
    inv = {v: k for k, v in _KIND_CODES.items()}
    kinds = [inv[c] for c in codes]
    bonds = []
    for _ in range(n + 1):
        (m,) = struct.unpack("<i", fh.read(4))
        bonds.append(np.frombuffer(fh.read(8 * m), dtype="<i4").reshape(m, 2).astype(np.int64))
    tensors = []
    for i in range(n):
        shape = (len(bonds[i]), d, len(bonds[i + 1]))
        size = int(np.prod(shape))
        tensors.append(np.frombuffer(fh.read(8 * size), dtype="<f8").reshape(shape).copy())
    return Mps(tensors, bonds, kinds, d, None if center < 0 else center)
