"""Iterative subspace construction: stage-wise growth of the reference set.

Stage M=1 is a rotation-free sweep (the classical DMRG role).  Each later
stage adds a random reference that inherits the previous reference's orbital
basis, sweeps it alone, then alternates sweeps over all references whose
rotation type depends on the variant.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .chem_io import FermionIntegrals, read_fcidump, rotate_integrals
from .hamiltonian import Sector, build_sparse_hamiltonian, fci_ground_state, hf_energy
from .mps import random_mps
from .rotations import RotationRegistry, fock_rotation
from .state import TnqeState, solve_references
from .subspace import NoiseModel
from .sweep import SweepConfig, SweepReport, generalized_sweep

__all__ = [
    "RunParams",
    "TraceRecord",
    "ConvergenceTrace",
    "RunResult",
    "ConfigError",
    "TnqeState",
    "VARIANTS",
    "initial_ordering",
    "orbital_mutual_information",
    "permute_integrals",
    "correlation_fraction",
    "run_tnqe",
    "run_single",
    "parse_config",
    "load_config",
    "CHEMICAL_ACCURACY",
]

log = logging.getLogger(__name__)

CHEMICAL_ACCURACY = 1.6e-3
VARIANTS = ("lcmps", "tnqe_f", "tnqe_g")
SCHEMA_VERSION = 1


@dataclass
class RunParams:
    m_max: int = 4
    chi_max: int = 4
    ns1: int = 4
    ns2: int = 6
    variant: str = "tnqe_g"
    ordering: str = "mutual_information"
    seeds: tuple[int, ...] = (0, 1, 2)
    n_dmrg: int = 4
    noise: NoiseModel = field(default_factory=NoiseModel)
    e_tol: float = 1e-3
    nreps: int = 2
    eps_sv: float | None = None
    mode: str = "projection"
    lin_dep_tol: float = 1e-3
    cond_max: float = 1e8
    success_tol: float = CHEMICAL_ACCURACY
    label: str = ""
    fcidump: str = ""

    def __post_init__(self):
        if self.m_max < 1:
            raise ValueError("m_max must be >= 1")
        if self.ns1 < 0 or self.ns2 < 0 or self.n_dmrg < 0:
            raise ValueError("sweep counts must be non-negative")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        self.seeds = tuple(int(s) for s in self.seeds)

    def sweep_config(self, rotation: str, jset=None, noisy: bool = True) -> SweepConfig:
        return SweepConfig(self.chi_max, jset, rotation, self.nreps, self.e_tol,
                           self.noise if noisy else NoiseModel(), self.eps_sv, self.mode,
                           self.lin_dep_tol, self.cond_max)


# --- orderings ---------------------------------------------------------------------

def _entropy(p: np.ndarray) -> float:
    p = p[p > 1e-14]
    return float(-np.sum(p * np.log(p)))


def orbital_mutual_information(vec: np.ndarray, sector: Sector) -> tuple[np.ndarray, np.ndarray]:
    """Single-orbital entropies and pairwise mutual information of a sector vector.

    One-orbital density matrices are diagonal by symmetry.  For each pair the
    two orbitals are first moved to the front of the chain with a fermionic
    permutation, so the traced two-orbital density matrix carries the right
    Jordan-Wigner signs.
    """
    n = sector.n_spatial
    full = np.zeros(4 ** n)
    full[sector.basis] = vec
    t = full.reshape((4,) * n) ** 2
    s1 = np.array([_entropy(t.sum(axis=tuple(k for k in range(n) if k != i))) for i in range(n)])
    mi = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            perm = [i, j] + [k for k in range(n) if k not in (i, j)]
            w = fock_rotation(np.eye(n)[:, perm].T, sector).apply(vec)
            full[:] = 0.0
            full[sector.basis] = w
            m = full.reshape(16, -1)
            s2 = _entropy(np.linalg.eigvalsh(m @ m.T))
            mi[i, j] = mi[j, i] = s1[i] + s1[j] - s2
    return s1, mi


def _fiedler_order(weights: np.ndarray) -> np.ndarray:
    k = np.abs(weights)
    np.fill_diagonal(k, 0.0)
    lap = np.diag(k.sum(1)) - k
    _, vecs = np.linalg.eigh(lap)
    f = vecs[:, 1]
    # fix the sign so the ordering is deterministic
    if f[np.argmax(np.abs(f))] < 0:
        f = -f
    return np.argsort(f, kind="stable")


# Bond dimension of the DMRG pre-run behind the mutual-information ordering.
MI_PRERUN_CHI = 8


def initial_ordering(ints: FermionIntegrals, strategy: str = "given") -> np.ndarray:
    """Site permutation: ``perm[i]`` is the orbital placed at site ``i``.

    ``strategy`` is ``given``, ``random`` or ``random:<seed>``,
    ``fiedler_exchange`` (Fiedler vector of the graph weighted by ``|(pq|qp)|``)
    or ``mutual_information[:<chi>]`` (Fiedler vector of the orbital mutual
    information of a short DMRG run in the given order, at bond dimension
    ``chi``, default ``MI_PRERUN_CHI``).
    """
    n = ints.n_spatial
    if strategy == "given":
        return np.arange(n)
    if strategy.startswith("random"):
        _, _, seed = strategy.partition(":")
        return np.random.default_rng(int(seed) if seed else 0).permutation(n)
    if strategy == "fiedler_exchange":
        return _fiedler_order(np.einsum("pqqp->pq", ints.h2))
    if strategy.startswith("mutual_information"):
        _, _, chi = strategy.partition(":")
        pre = RunParams(m_max=1, chi_max=int(chi) if chi else MI_PRERUN_CHI, n_dmrg=4, seeds=(0,))
        state, _ = run_single(ints, pre, 0)
        _, mi = orbital_mutual_information(state.statevector(), state.sector)
        return _fiedler_order(mi)
    raise ValueError(f"unknown ordering strategy {strategy!r}")


def permute_integrals(ints: FermionIntegrals, perm) -> FermionIntegrals:
    perm = np.asarray(perm)
    if sorted(perm.tolist()) != list(range(ints.n_spatial)):
        raise ValueError("not a permutation")
    u = np.eye(ints.n_spatial)[:, perm]
    return rotate_integrals(ints, u)


def correlation_fraction(e: float, e_hf: float, e_fci: float) -> float:
    den = e_hf - e_fci
    if abs(den) < 1e-14:
        raise ZeroDivisionError("E_HF equals E_FCI; correlation fraction undefined")
    return float((e_hf - e) / den)


# --- traces ------------------------------------------------------------------------

@dataclass
class TraceRecord:
    stage: int
    sweep: int
    rotation: str
    jset: str
    energy: float
    true_energy: float
    corr_fraction: float
    qpu_calls: int
    batches: int
    accepted: int
    n_rotations: int
    max_xi: float
    wall: float


# wall-clock time stays out of the CSV so reruns are byte-identical
_TRACE_FIELDS = [f.name for f in fields(TraceRecord) if f.name != "wall"]


@dataclass
class ConvergenceTrace:
    variant: str = ""
    label: str = ""
    seed: int = 0
    e_hf: float = float("nan")
    e_fci: float = float("nan")
    records: list[TraceRecord] = field(default_factory=list)

    def append(self, rec: TraceRecord):
        if self.records:
            last = self.records[-1]
            if rec.qpu_calls < last.qpu_calls or rec.batches < last.batches:
                raise ValueError("cumulative counters must not decrease")
        self.records.append(rec)

    @property
    def final(self) -> TraceRecord | None:
        return self.records[-1] if self.records else None

    @property
    def n_sweeps(self) -> int:
        return len(self.records)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(_TRACE_FIELDS)
        for r in self.records:
            row = asdict(r)
            w.writerow([f"{row[k]:.12g}" if isinstance(row[k], float) else row[k] for k in _TRACE_FIELDS])
        return buf.getvalue()

    def to_json(self) -> str:
        payload = {
            "schema_version": SCHEMA_VERSION,
            "variant": self.variant,
            "label": self.label,
            "seed": self.seed,
            "e_hf": self.e_hf,
            "e_fci": self.e_fci,
            "records": [asdict(r) for r in self.records],
        }
        return json.dumps(payload, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "ConvergenceTrace":
        data = json.loads(text)
        if data.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported trace schema {data.get('schema_version')!r}")
        recs = [TraceRecord(**r) for r in data["records"]]
        return cls(data["variant"], data["label"], data["seed"], data["e_hf"], data["e_fci"], recs)


@dataclass
class RunResult:
    state: TnqeState
    trace: ConvergenceTrace
    attempts: list[tuple[int, float]]
    success: bool
    site_order: tuple[int, ...] = ()

    @property
    def energy(self) -> float:
        return self.trace.final.true_energy if self.trace.final else self.state.exact_energy()


# --- the run -----------------------------------------------------------------------

def _schedule(params: RunParams):
    """Yield (stage, rotation, jset, noisy) for every sweep."""
    for _ in range(params.n_dmrg):
        yield 1, "none", None, False
    lc = params.variant == "lcmps"
    second = {"lcmps": "none", "tnqe_f": "fswap", "tnqe_g": "givens"}[params.variant]
    for m in range(2, params.m_max + 1):
        for _ in range(params.ns1):
            yield m, "none" if lc else "fswap", (m - 1,), True
        for _ in range(params.ns2):
            yield m, "none" if lc else "fswap", None, True
            yield m, second, None, True


def run_single(ints: FermionIntegrals, params: RunParams, seed: int, e_ref: tuple[float, float] | None = None,
               h=None, on_sweep=None) -> tuple[TnqeState, ConvergenceTrace]:
    """One attempt with a fixed seed; ``ints`` must already be in site order."""
    if h is None:
        h = build_sparse_hamiltonian(ints)
    if e_ref is None:
        e_ref = (hf_energy(ints), fci_ground_state(h)[0])
    e_hf, e_fci = e_ref
    params = replace(params, noise=replace(params.noise, seed=params.noise.seed * 7919 + seed))
    n = ints.n_spatial
    sector = (ints.n_up, ints.n_down)
    registry = RotationRegistry()
    registry.add(np.eye(n))
    state = TnqeState([random_mps(n, 4, sector, params.chi_max, seed=[seed, 1])], registry, ints, h)
    state.energy, state.coeffs = solve_references(state)
    trace = ConvergenceTrace(params.variant, params.label, seed, e_hf, e_fci)
    sweep_index = 0
    stage = 1
    for m, rotation, jset, noisy in _schedule(params):
        if m != stage:
            stage = m
            sweep_index = 0
            state.refs.append(random_mps(n, 4, sector, params.chi_max, seed=[seed, m]))
            state.registry.add(state.registry.bases[-1])
            noise = params.noise if params.noise.active else None
            state.energy, state.coeffs = solve_references(state, params.sweep_config("none").threshold,
                                                          params.mode, noise)
        cfg = params.sweep_config(rotation, jset, noisy)
        try:
            rep: SweepReport = generalized_sweep(state, cfg)
        except Exception as exc:  # keep going; the trace records the failed sweep
            log.warning("sweep failed at stage %d: %s", m, exc)
            rep = SweepReport(rotation, tuple(jset or ()), energy=state.energy)
        sweep_index += 1
        e_true = state.exact_energy()
        xis = [x for b in rep.bonds for x in b.xi.values()]
        rec = TraceRecord(
            stage=m, sweep=sweep_index, rotation=rotation,
            jset="all" if jset is None else ",".join(str(j) for j in jset),
            energy=float(state.energy), true_energy=float(e_true),
            corr_fraction=correlation_fraction(e_true, e_hf, e_fci),
            qpu_calls=state.qpu_calls, batches=state.batches,
            accepted=sum(b.accepted for b in rep.bonds), n_rotations=rep.n_rotations,
            max_xi=float(max(xis)) if xis else 0.0, wall=rep.wall)
        trace.append(rec)
        if on_sweep is not None:
            on_sweep(trace)
    return state, trace


def run_tnqe(ints: FermionIntegrals, params: RunParams, on_sweep=None, jobs: int = 1) -> RunResult:
    """Run with the restart policy: try seeds in order until the final energy is
    within ``success_tol`` of FCI; return the first success, else the best attempt.

    With ``jobs > 1`` all seeds run in worker processes and the same selection
    rule is applied afterwards, so the result does not depend on ``jobs``.
    """
    perm = initial_ordering(ints, params.ordering)
    ints = permute_integrals(ints, perm) if params.ordering != "given" else ints
    h = build_sparse_hamiltonian(ints)
    e_ref = (hf_energy(ints), fci_ground_state(h)[0])
    if jobs > 1 and len(params.seeds) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=min(jobs, len(params.seeds))) as pool:
            futures = [pool.submit(run_single, ints, params, seed, e_ref) for seed in params.seeds]
            outcomes = [f.result() for f in futures]
    else:
        outcomes = None
    best = None
    attempts = []
    for i, seed in enumerate(params.seeds):
        t0 = time.perf_counter()
        state, trace = outcomes[i] if outcomes else run_single(ints, params, seed, e_ref, h, on_sweep)
        err = trace.final.true_energy - e_ref[1] if trace.final else state.exact_energy() - e_ref[1]
        attempts.append((seed, float(err)))
        log.info("seed %d: error %.3e Ha in %.1f s", seed, err, time.perf_counter() - t0)
        if best is None or err < best[2]:
            best = (state, trace, err)
        if err <= params.success_tol:
            best = (state, trace, err)
            break
    state, trace, err = best
    return RunResult(state, trace, attempts, bool(err <= params.success_tol), tuple(int(x) for x in perm))


# --- key-value configuration ----------------------------------------------------------

class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


_INT_KEYS = {"m_max", "chi_max", "ns1", "ns2", "n_dmrg", "nreps"}
_FLOAT_KEYS = {"e_tol", "lin_dep_tol", "cond_max", "success_tol"}
_STR_KEYS = {"variant", "ordering", "mode", "label", "fcidump"}
_NOISE_KEYS = {"delta_h", "delta_s", "noise_seed"}


def parse_config(text: str) -> RunParams:
    """Parse ``key = value`` lines (``#`` starts a comment) into RunParams."""
    kw, noise = {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = key.strip().lower(), value.strip()
        try:
            if key in _INT_KEYS:
                kw[key] = int(value)
            elif key in _FLOAT_KEYS:
                kw[key] = float(value)
            elif key in _STR_KEYS:
                kw[key] = value
            elif key == "eps_sv":
                kw[key] = None if value.lower() in ("", "auto", "none") else float(value)
            elif key == "seeds":
                kw[key] = tuple(int(s) for s in value.replace(",", " ").split())
            elif key in _NOISE_KEYS:
                noise[key] = int(value) if key == "noise_seed" else float(value)
            else:
                raise ConfigError(f"unknown key {key!r}", lineno)
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad value for {key}: {value!r}", lineno) from None
    try:
        nm = NoiseModel(noise.get("delta_h", 0.0), noise.get("delta_s", 0.0), noise.get("noise_seed", 0))
        return RunParams(noise=nm, **kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> tuple[RunParams, FermionIntegrals]:
    path = Path(path)
    params = parse_config(path.read_text())
    if not params.fcidump:
        raise ConfigError("config has no 'fcidump' key")
    dump = Path(params.fcidump)
    if not dump.is_absolute():
        dump = path.parent / dump
    return params, read_fcidump(dump)
