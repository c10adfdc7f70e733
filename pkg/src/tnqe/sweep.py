"""Generalized two-site sweep over a multi-reference MPS state.

At each bond every optimized reference is expanded in one-hot states, the
shared pencil is solved, each two-site tensor is updated, optionally rotated
(FSWAP trial or optimal Givens angle) and truncated, the truncation penalty is
reduced by single-site passes that reuse the pencil, and the bond is accepted
or reverted by the energy-tolerance rule.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .mps import Mps, SplitResult, TwoSiteTensor, block_svd, canonicalize, svd_split, two_site_tensor
from .rotations import gate_matrix
from .state import TnqeState, rotated_reference
from .subspace import (
    DegeneratePencilError,
    NoiseModel,
    OneHotBasis,
    SubspacePencil,
    assemble_pencil,
    discard_columns,
    one_hot_decompose,
    solve_gee,
    whole_state_basis,
)

__all__ = [
    "SweepConfig",
    "BondRecord",
    "SweepReport",
    "apply_two_site_gate",
    "fswap_trial",
    "truncation_error",
    "optimize_theta",
    "rotation_block_matrix",
    "single_site_tuples",
    "single_site_isometry",
    "single_site_pass",
    "generalized_sweep",
]

log = logging.getLogger(__name__)

ROTATION_TYPES = ("none", "fswap", "givens")

# Under shot noise an update whose ground-state condition number exceeds this is
# rejected: noise in H' is amplified by roughly ||c||^2 in the energy estimate.
KAPPA_NOISY = 10.0


@dataclass
class SweepConfig:
    chi_max: int
    jset: tuple[int, ...] | None = None  # None = all references
    rotation: str = "none"
    nreps: int = 2
    e_tol: float = 1e-3
    noise: NoiseModel = field(default_factory=NoiseModel)
    eps_sv: float | None = None
    mode: str = "projection"
    lin_dep_tol: float = 1e-3
    cond_max: float = 1e8
    theta_grid: int = 33
    theta_tol: float = 1e-6
    kappa_max: float | None = None  # None: unlimited when noiseless, KAPPA_NOISY under noise

    def __post_init__(self):
        if self.rotation not in ROTATION_TYPES:
            raise ValueError(f"rotation must be one of {ROTATION_TYPES}")
        if self.e_tol < 0 or self.nreps < 0:
            raise ValueError("e_tol and nreps must be non-negative")

    @property
    def threshold(self) -> float:
        if self.eps_sv is not None:
            return self.eps_sv
        return max(1e-10, 10 * self.noise.delta_s)

    @property
    def kappa_limit(self) -> float:
        if self.kappa_max is not None:
            return self.kappa_max
        return KAPPA_NOISY if self.noise.active else np.inf


@dataclass
class BondRecord:
    p: int
    e_old: float
    e_new: float
    accepted: bool
    xi: dict[int, float] = field(default_factory=dict)
    rotations: dict[int, object] = field(default_factory=dict)
    qpu_calls: int = 0
    kept_columns: int = 0
    kappa: float = 0.0
    skipped: str = ""


@dataclass
class SweepReport:
    rotation: str
    jset: tuple[int, ...]
    bonds: list[BondRecord] = field(default_factory=list)
    energy: float = np.nan
    wall: float = 0.0

    @property
    def qpu_calls(self) -> int:
        return sum(b.qpu_calls for b in self.bonds)

    @property
    def batches(self) -> int:
        return sum(1 for b in self.bonds if b.qpu_calls > 0 or not b.skipped)

    @property
    def n_rotations(self) -> int:
        return sum(len(b.rotations) for b in self.bonds if b.accepted)


# --- local rotation heuristics ---------------------------------------------------

def apply_two_site_gate(gate: np.ndarray, data: np.ndarray) -> np.ndarray:
    cl, d1, d2, cr = data.shape
    out = np.einsum("xy,ayb->axb", gate, data.reshape(cl, d1 * d2, cr))
    return out.reshape(data.shape)


def truncation_error(t: TwoSiteTensor, chi_max: int) -> float:
    return svd_split(t, chi_max).xi


def fswap_trial(t: TwoSiteTensor, chi_max: int):
    """Swap the two sites if that strictly raises the retained weight.

    Returns ``(accept, swapped tensor, xi_before, xi_after)``.
    """
    d = t.data.shape[1]
    swapped = t.with_data(apply_two_site_gate(gate_matrix("fswap", d), t.data))
    xi = truncation_error(t, chi_max)
    xi_sw = truncation_error(swapped, chi_max)
    return xi_sw < xi, swapped, xi, xi_sw


def optimize_theta(t: TwoSiteTensor, chi_max: int, grid: int = 33, tol: float = 1e-6):
    """Angle in [-pi/2, pi/2] minimizing the truncation error of ``g(theta) T``.

    A coarse grid guards against the multi-modal landscape; golden-section
    search then refines inside the neighbouring grid cells.
    """
    d = t.data.shape[1]

    def xi(theta):
        return truncation_error(t.with_data(apply_two_site_gate(gate_matrix("givens", d, theta), t.data)),
                                chi_max)

    thetas = np.linspace(-np.pi / 2, np.pi / 2, grid)
    vals = np.array([xi(th) for th in thetas])
    i = int(np.argmin(vals))
    best_theta, best = float(thetas[i]), float(vals[i])
    if best <= 1e-15:
        return best_theta, best
    step = thetas[1] - thetas[0]
    lo, hi = best_theta - step, best_theta + step
    invphi = (np.sqrt(5) - 1) / 2
    c, dd = hi - invphi * (hi - lo), lo + invphi * (hi - lo)
    fc, fd = xi(c), xi(dd)
    while hi - lo > tol:
        if fc < fd:
            hi, dd, fd = dd, c, fc
            c = hi - invphi * (hi - lo)
            fc = xi(c)
        else:
            lo, c, fc = c, dd, fd
            dd = lo + invphi * (hi - lo)
            fd = xi(dd)
    mid = 0.5 * (lo + hi)
    fm = xi(mid)
    for th, f in ((mid, fm), (c, fc), (dd, fd)):
        if f < best:
            best_theta, best = float(th), float(f)
    # keep the angle inside the bracket (period pi)
    best_theta = (best_theta + np.pi / 2) % np.pi - np.pi / 2
    return best_theta, best


def rotation_block_matrix(gate: np.ndarray, basis: OneHotBasis) -> np.ndarray:
    """Matrix of a two-site gate in the one-hot basis, ``G[m, n]``."""
    if not basis.expanded:
        return np.ones((1, 1))
    d = basis.shape[1]
    a, k1, k2, b = basis.tuples.T
    kk = k1 * d + k2
    same = (a[:, None] == a[None, :]) & (b[:, None] == b[None, :])
    return gate[kk[:, None], kk[None, :]] * same


# --- single-site machinery ---------------------------------------------------------

def single_site_tuples(left_q: np.ndarray, phys_q: np.ndarray, right_q: np.ndarray) -> np.ndarray:
    mask = np.all(left_q[:, None, None, :] + phys_q[None, :, None, :] == right_q[None, None, :, :], axis=-1)
    return np.argwhere(mask)


def single_site_isometry(basis: OneHotBasis, fixed: np.ndarray, bond_q: np.ndarray,
                         site: str = "left", atol: float = 1e-10):
    """Map from the two-site one-hot basis to single-site one-hot states.

    ``site="left"`` varies site p with ``fixed`` the right-orthogonal tensor
    ``(l, k2, b)`` of site p+1; ``site="right"`` varies site p+1 with
    ``fixed`` the left-orthogonal tensor ``(a, k1, l)`` of site p.  Returns
    ``(T, tuples)`` with orthonormal rows.
    """
    if not basis.expanded:
        return np.ones((1, 1)), None
    cl, d, _, cr = basis.shape
    a, k1, k2, b = basis.tuples.T
    if site == "left":
        gram = np.einsum("lkb,mkb->lm", fixed, fixed)
        if not np.allclose(gram, np.eye(len(gram)), atol=atol):
            raise ValueError("right tensor is not right-orthogonal")
        left_q = basis.left_q
        tup = single_site_tuples(left_q, basis.phys_q, bond_q)
        ma, mk, ml = tup.T
        match = (ma[:, None] == a[None, :]) & (mk[:, None] == k1[None, :])
        t = fixed[ml[:, None], k2[None, :], b[None, :]] * match
    elif site == "right":
        gram = np.einsum("akl,akm->lm", fixed, fixed)
        if not np.allclose(gram, np.eye(len(gram)), atol=atol):
            raise ValueError("left tensor is not left-orthogonal")
        right_q = basis.right_q
        tup = single_site_tuples(bond_q, basis.phys_q, right_q)
        ml, mk, mb = tup.T
        match = (mk[:, None] == k2[None, :]) & (mb[:, None] == b[None, :])
        t = fixed[a[None, :], k1[None, :], ml[:, None]] * match
    else:
        raise ValueError("site must be 'left' or 'right'")
    return t, tup


def _transform_pencil(h, s, blocks, mats):
    """Apply block-diagonal row transforms: X -> B X B^T."""
    sizes = [m.shape[0] for m in mats]
    total = sum(sizes)
    big = np.zeros((total, h.shape[0]))
    r = 0
    new_blocks = []
    for (j, off, size, exp), m in zip(blocks, mats):
        big[r:r + m.shape[0], off:off + size] = m
        new_blocks.append((j, r, m.shape[0], exp))
        r += m.shape[0]
    h2 = big @ h @ big.T
    s2 = big @ s @ big.T
    return 0.5 * (h2 + h2.T), 0.5 * (s2 + s2.T), new_blocks


@dataclass
class _LocalState:
    """Working copy of one reference's tensors at sites p, p+1."""

    left: np.ndarray   # (a, k1, l)
    right: np.ndarray  # (l, k2, b)
    bond_q: np.ndarray
    center: str        # which of the two holds the norm


def _split_left_center(ls: _LocalState, phys_q2, right_q):
    """Move the norm into the left tensor; right becomes right-orthogonal."""
    l, d, b = ls.right.shape
    col_q = (right_q[None, :, :] - phys_q2[:, None, :]).reshape(-1, 2)
    u, s, v, q, _ = block_svd(ls.right.reshape(l, d * b), ls.bond_q, col_q)
    ls.right = v.reshape(-1, d, b)
    ls.left = np.tensordot(ls.left, u * s[None, :], axes=(2, 0))
    ls.bond_q = q
    ls.center = "left"


def _split_right_center(ls: _LocalState, left_q, phys_q1):
    a, d, l = ls.left.shape
    row_q = (left_q[:, None, :] + phys_q1[None, :, :]).reshape(-1, 2)
    u, s, v, q, _ = block_svd(ls.left.reshape(a * d, l), row_q, ls.bond_q)
    ls.left = u.reshape(a, d, -1)
    ls.right = np.tensordot(s[:, None] * v, ls.right, axes=(1, 0))
    ls.bond_q = q
    ls.center = "right"


def single_site_pass(pencil_h: np.ndarray, pencil_s: np.ndarray, blocks, bases: list[OneHotBasis],
                     locals_: dict[int, _LocalState], nreps: int, cfg: SweepConfig):
    """Alternating single-site solves at p and p+1 using only the given pencil.

    ``locals_`` maps block index to the working tensors of expanded
    references and is updated in place.  Returns the last energy or ``None``
    when no solve succeeded.
    """
    energy = None
    for _ in range(nreps):
        for side in ("left", "right"):
            mats, tuples = [], {}
            for bi, basis in enumerate(bases):
                if bi not in locals_:
                    mats.append(np.ones((1, 1)))
                    continue
                ls = locals_[bi]
                if side == "left":
                    if ls.center != "left":
                        _split_left_center(ls, basis.phys_q, basis.right_q)
                    t, tup = single_site_isometry(basis, ls.right, ls.bond_q, "left")
                else:
                    if ls.center != "right":
                        _split_right_center(ls, basis.left_q, basis.phys_q)
                    t, tup = single_site_isometry(basis, ls.left, ls.bond_q, "right")
                mats.append(t)
                tuples[bi] = tup
            h1, s1, blocks1 = _transform_pencil(pencil_h, pencil_s, blocks, mats)
            pen = SubspacePencil(h1, s1, blocks1, np.ones(len(h1), dtype=bool))
            pen = discard_columns(pen, cfg.lin_dep_tol, cfg.cond_max)
            try:
                sol = solve_gee(pen, cfg.threshold, cfg.mode)
            except DegeneratePencilError:
                log.warning("single-site pencil degenerate at bond %d; pass skipped", bases[0].p)
                continue
            energy = sol.e1
            for bi, tup in tuples.items():
                coeffs = sol.c1[pen.block_slice(bi)]
                nrm = np.linalg.norm(coeffs)
                if nrm < 1e-14:
                    continue
                ls = locals_[bi]
                target = ls.left if side == "left" else ls.right
                new = np.zeros_like(target)
                new[tuple(tup.T)] = coeffs / nrm
                if side == "left":
                    ls.left = new
                else:
                    ls.right = new
    return energy


# --- the sweep --------------------------------------------------------------------

def _two_site_from_local(ls: _LocalState) -> np.ndarray:
    return np.tensordot(ls.left, ls.right, axes=(2, 0))


def _current_estimate(pencil, bases, twosite, coeffs, fallback):
    """Energy of the unchanged state within this bond's (noisy) pencil.

    Comparing against an estimate from an earlier noise draw would let one
    lucky low value block every later update.
    """
    c = np.zeros(pencil.dim)
    for bi, basis in enumerate(bases):
        blk = pencil.block_slice(bi)
        coords = basis.from_tensor(twosite[basis.j].data) if basis.expanded else np.ones(1)
        c[blk] = coeffs[basis.j] * coords
    norm = float(c @ pencil.s @ c)
    if norm <= 0:
        return fallback
    return float(c @ pencil.h @ c) / norm


def _bond_step(state: TnqeState, p: int, cfg: SweepConfig, jset, cached) -> BondRecord:
    m = state.m
    e_old = state.energy
    backups = {j: (state.refs[j].copy(), state.registry.bases[j].copy()) for j in jset}
    bases, twosite = [], {}
    for j in range(m):
        if j in jset:
            canonicalize(state.refs[j], p)
            t = two_site_tensor(state.refs[j], p)
            basis = one_hot_decompose(state.refs[j], p, j)
            twosite[j] = t
        else:
            basis = whole_state_basis(j, p)
        bases.append(basis)
    vectors = {j: cached[j][:, None] for j in range(m) if j not in jset}
    pencil = assemble_pencil(state.refs, bases, state.registry, state.h, cfg.noise,
                             call_id=state.next_call_id(), vectors=vectors)
    if cfg.noise.active:
        e_old = _current_estimate(pencil, bases, twosite, state.coeffs, e_old)
    record = BondRecord(p, e_old, e_old, False, qpu_calls=pencil.qpu_calls)
    try:
        pencil = discard_columns(pencil, cfg.lin_dep_tol, cfg.cond_max)
        sol = solve_gee(pencil, cfg.threshold, cfg.mode)
    except (DegeneratePencilError, np.linalg.LinAlgError) as exc:
        record.skipped = str(exc)
        return _finish_bond(state, p, jset, backups, record)
    record.kept_columns = int(pencil.mask.sum())

    gates, locals_ = [], {}
    for bi, basis in enumerate(bases):
        j = basis.j
        if j not in jset:
            gates.append(np.ones((1, 1)))
            continue
        coeffs = sol.c1[pencil.block_slice(bi)]
        nrm = np.linalg.norm(coeffs)
        t = twosite[j]
        if nrm > 1e-14:
            t = t.with_data(basis.to_tensor(coeffs / nrm))
        d = t.data.shape[1]
        gate = np.eye(d * d)
        if cfg.rotation == "fswap":
            accept, swapped, _, _ = fswap_trial(t, cfg.chi_max)
            if accept:
                t, gate = swapped, gate_matrix("fswap", d)
                state.registry.merge(j, p, "swap")
                record.rotations[j] = "swap"
        elif cfg.rotation == "givens":
            theta, _ = optimize_theta(t, cfg.chi_max, cfg.theta_grid, cfg.theta_tol)
            if theta != 0.0:
                gate = gate_matrix("givens", d, theta)
                t = t.with_data(apply_two_site_gate(gate, t.data))
                state.registry.merge(j, p, -theta)
                record.rotations[j] = theta
        split: SplitResult = svd_split(t, cfg.chi_max)
        record.xi[j] = split.xi
        gates.append(rotation_block_matrix(gate, basis))
        locals_[bi] = _LocalState(split.left, split.s[:, None, None] * split.right, split.bond_q, "right")

    # rotate the pencil into the post-rotation one-hot bases
    h2, s2, blocks2 = _transform_pencil(pencil.h, pencil.s, pencil.blocks, gates)
    if cfg.nreps > 0:
        single_site_pass(h2, s2, blocks2, bases, locals_, cfg.nreps, cfg)

    # energy of the actual updated references, from the same pencil
    coords = []
    for bi, basis in enumerate(bases):
        if bi in locals_:
            coords.append(basis.from_tensor(_two_site_from_local(locals_[bi])))
        else:
            coords.append(np.ones(1))
    red = np.zeros((h2.shape[0], m))
    for bi, (_, off, size, _) in enumerate(blocks2):
        red[off:off + size, bi] = coords[bi]
    hm, sm = red.T @ h2 @ red, red.T @ s2 @ red
    try:
        ref_sol = solve_gee((0.5 * (hm + hm.T), 0.5 * (sm + sm.T)), cfg.threshold, cfg.mode)
    except DegeneratePencilError as exc:
        record.skipped = str(exc)
        return _finish_bond(state, p, jset, backups, record)
    record.e_new = ref_sol.e1
    record.kappa = ref_sol.kappa
    if ref_sol.e1 < e_old + cfg.e_tol and ref_sol.kappa <= cfg.kappa_limit:
        record.accepted = True
        for bi, ls in locals_.items():
            j = bases[bi].j
            if ls.center != "right":
                _split_right_center(ls, bases[bi].left_q, bases[bi].phys_q)
            ref = state.refs[j]
            ref.tensors[p] = ls.left
            ref.tensors[p + 1] = ls.right
            ref.bond_charges[p + 1] = ls.bond_q
            ref.center = p + 1
            nrm = np.linalg.norm(ref.tensors[p + 1])
            ref.tensors[p + 1] = ref.tensors[p + 1] / nrm
        state.energy = ref_sol.e1
        state.coeffs = ref_sol.c1.copy()
    return _finish_bond(state, p, jset, backups, record)


def _finish_bond(state, p, jset, backups, record):
    if not record.accepted:
        for j, (ref, u) in backups.items():
            state.refs[j] = ref
            state.registry.set(j, u)
        record.rotations = {}
    for j in jset:
        canonicalize(state.refs[j], min(p + 1, state.refs[j].n_sites - 1))
    state.qpu_calls += record.qpu_calls
    if record.qpu_calls:
        state.batches += 1
    return record


def generalized_sweep(state: TnqeState, cfg: SweepConfig) -> SweepReport:
    """One left-to-right pass over all bonds (in place on ``state``)."""
    t0 = time.perf_counter()
    jset = tuple(range(state.m)) if cfg.jset is None else tuple(sorted(set(cfg.jset)))
    if any(j < 0 or j >= state.m for j in jset):
        raise ValueError("jset refers to a missing reference")
    cached = {j: rotated_reference(state, j) for j in range(state.m) if j not in jset}
    report = SweepReport(cfg.rotation, jset)
    n = state.refs[0].n_sites
    for p in range(n - 1):
        report.bonds.append(_bond_step(state, p, cfg, jset, cached))
    report.energy = state.energy
    report.wall = time.perf_counter() - t0
    return report
