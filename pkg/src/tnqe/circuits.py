"""Two-qubit netlists for MPS state preparation, their controlled versions, and
a small statevector simulator for Hadamard-test readout.

Qubit 0 is the most significant bit of a statevector, matching the
spin-orbital order used everywhere else (site p -> qubits 2p, 2p+1).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .rotations import GivensNetwork, apply_rotation_network

__all__ = [
    "Gate",
    "Netlist",
    "CZ",
    "CompileResult",
    "disentangler_compile",
    "controlled_lift",
    "real_sqrt_orthogonal",
    "pauli_matrix",
    "hadamard_test",
    "truncate_chi2",
    "staircase_layer",
]

log = logging.getLogger(__name__)

CZ = np.diag([1.0, 1.0, 1.0, -1.0])
_H = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)
_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.diag([1.0, -1.0]).astype(complex),
}


class Gate(NamedTuple):
    qubits: tuple[int, ...]
    matrix: np.ndarray
    control: int | None = None


def _apply_gate(psi: np.ndarray, gate: Gate) -> np.ndarray:
    """Apply a gate to a state of shape (2,)*n (copying)."""
    k = len(gate.qubits)
    m = gate.matrix.reshape((2,) * (2 * k))
    if gate.control is None:
        out = np.tensordot(m, psi, axes=(list(range(k, 2 * k)), list(gate.qubits)))
        return np.moveaxis(out, list(range(k)), list(gate.qubits))
    out = psi.copy()
    idx = [slice(None)] * psi.ndim
    idx[gate.control] = 1
    sub = psi[tuple(idx)]
    # qubit positions shift down by one above the removed control axis
    qs = [q - (q > gate.control) for q in gate.qubits]
    new = np.tensordot(m, sub, axes=(list(range(k, 2 * k)), qs))
    out[tuple(idx)] = np.moveaxis(new, list(range(k)), qs)
    return out


@dataclass
class Netlist:
    n_qubits: int
    gates: list[Gate] = field(default_factory=list)

    def append(self, qubits, matrix, control: int | None = None) -> "Netlist":
        qubits = tuple(int(q) for q in qubits)
        matrix = np.asarray(matrix)
        if matrix.shape != (2 ** len(qubits),) * 2:
            raise ValueError("matrix does not match the number of qubits")
        used = qubits + (() if control is None else (control,))
        if len(set(used)) != len(used) or any(not 0 <= q < self.n_qubits for q in used):
            raise ValueError(f"bad qubit indices {used}")
        self.gates.append(Gate(qubits, matrix, control))
        return self

    def extend(self, other: "Netlist") -> "Netlist":
        for g in other.gates:
            self.append(g.qubits, g.matrix, g.control)
        return self

    def __len__(self):
        return len(self.gates)

    def check_orthogonal(self, atol: float = 1e-10) -> bool:
        return all(np.allclose(g.matrix.T @ g.matrix, np.eye(len(g.matrix)), atol=atol) for g in self.gates)

    def apply(self, vec: np.ndarray) -> np.ndarray:
        psi = np.asarray(vec).reshape((2,) * self.n_qubits)
        for g in self.gates:
            psi = _apply_gate(psi, g)
        return psi.reshape(-1)

    def prepare(self) -> np.ndarray:
        v = np.zeros(2 ** self.n_qubits)
        v[0] = 1.0
        return self.apply(v)

    def inverse(self) -> "Netlist":
        return Netlist(self.n_qubits, [Gate(g.qubits, g.matrix.conj().T, g.control) for g in reversed(self.gates)])

    def dense(self) -> np.ndarray:
        eye = np.eye(2 ** self.n_qubits)
        return np.column_stack([self.apply(eye[:, i]) for i in range(len(eye))])

    def to_text(self) -> str:
        lines = [f"netlist {self.n_qubits}"]
        for g in self.gates:
            head = "" if g.control is None else f"c{g.control} "
            vals = " ".join(repr(float(x)) for x in np.real(g.matrix).ravel())
            lines.append(f"{head}{' '.join(str(q) for q in g.qubits)} {vals}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Netlist":
        rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        if not rows or rows[0][0] != "netlist":
            raise ValueError("missing 'netlist <n>' header")
        net = cls(int(rows[0][1]))
        for lineno, row in enumerate(rows[1:], 2):
            control = None
            if row[0].startswith("c"):
                control = int(row[0][1:])
                row = row[1:]
            if len(row) == 2 + 16:
                qubits, vals = row[:2], row[2:]
            elif len(row) == 1 + 4:
                qubits, vals = row[:1], row[1:]
            else:
                raise ValueError(f"line {lineno}: cannot parse gate")
            k = len(qubits)
            net.append(qubits, np.array(vals, dtype=float).reshape(2 ** k, 2 ** k), control)
        return net


# --- compilation by iterated disentanglers ------------------------------------------

def truncate_chi2(vec: np.ndarray, n: int) -> list[np.ndarray]:
    """Left-canonical chi<=2 tensors of the best-per-bond truncation of ``vec``.

    Plain SVD sweep without symmetry labels (intermediate states of the
    compiler do not conserve particle number).  Output is normalized.
    """
    tensors = []
    rest = np.asarray(vec, dtype=float).reshape(1, -1)
    for _ in range(n - 1):
        cl = rest.shape[0]
        m = rest.reshape(cl * 2, -1)
        u, s, vt = np.linalg.svd(m, full_matrices=False)
        k = min(2, int(np.sum(s > 1e-14 * s[0])) or 1)
        tensors.append(u[:, :k].reshape(cl, 2, k))
        rest = s[:k, None] * vt[:k]
    last = rest.reshape(rest.shape[0], 2, 1)
    tensors.append(last / np.linalg.norm(last))
    return tensors


def _complete(cols: np.ndarray) -> np.ndarray:
    """4x4 orthogonal matrix whose leading columns are ``cols`` (det +1)."""
    k = cols.shape[1]
    q, _ = np.linalg.qr(np.hstack([cols, np.eye(4)]))
    # QR may flip signs of the given columns; restore them
    sign = np.sign(np.sum(q[:, :k] * cols, axis=0))
    q[:, :k] *= sign
    out = q[:, :4]
    out[:, :k] = cols
    if np.linalg.det(out) < 0:
        out[:, -1] *= -1
    return out


def staircase_layer(tensors: list[np.ndarray]) -> Netlist:
    """Gates preparing the chi<=2 left-canonical MPS from |0...0>.

    The last pair is prepared first; each following gate on (i, i+1) maps
    ``|0>|b>`` to ``sum A[a, s, b] |a>|s>``, pushing the bond one qubit left.
    A final single-qubit gate maps the bond on qubit 0 to site 0.
    """
    n = len(tensors)
    net = Netlist(n)
    if n == 1:
        v = tensors[0].reshape(2)
        net.append((0,), _complete2(v))
        return net
    a = _pad(tensors[n - 1], 2, 1)  # (2, 2, 1)
    col = a.reshape(4, 1)  # index 2*b + s
    net.append((n - 2, n - 1), _complete(col))
    for i in range(n - 3, -1, -1):
        rb = tensors[i + 1].shape[2]
        cols = _pad(tensors[i + 1], 2, rb).reshape(4, rb)  # rows 2*a + s, columns b
        net.append((i, i + 1), _complete(cols))
    # qubit 0 now holds the bond into site 1; apply site 0's isometry
    t0 = tensors[0].reshape(2, -1)  # (s, a)
    net.append((0,), _complete2_iso(t0))
    return net


def _pad(t, left, right):
    out = np.zeros((left, 2, right))
    out[:t.shape[0], :, :t.shape[2]] = t
    return out


def _complete2(v):
    v = v / np.linalg.norm(v)
    return np.array([[v[0], -v[1]], [v[1], v[0]]])


def _complete2_iso(m):
    # m[s, a] with orthonormal columns; one column means a one-dimensional bond
    return _complete2(m[:, 0]) if m.shape[1] == 1 else m


def _layer_from_state(vec: np.ndarray, n: int) -> Netlist:
    return staircase_layer(truncate_chi2(vec, n))


def _overlap_sweep(net: Netlist, target: np.ndarray, iters: int) -> float:
    """Coordinate ascent of <target|net|0> over each gate via polar factors."""
    n = net.n_qubits
    shape = (2,) * n
    zero = np.zeros(2 ** n)
    zero[0] = 1.0
    for _ in range(iters):
        # backward states: beta_k = (gates after k)^T target
        betas = [None] * len(net.gates)
        b = target.reshape(shape)
        for k in range(len(net.gates) - 1, -1, -1):
            betas[k] = b
            g = net.gates[k]
            b = _apply_gate(b, Gate(g.qubits, g.matrix.T, g.control))
        alpha = zero.reshape(shape)
        for k, g in enumerate(net.gates):
            qs = list(g.qubits)
            rest = [q for q in range(n) if q not in qs]
            a = np.transpose(alpha, qs + rest).reshape(2 ** len(qs), -1)
            bb = np.transpose(betas[k], qs + rest).reshape(2 ** len(qs), -1)
            env = bb @ a.T  # <beta| g |alpha> = sum g * env
            u, _, vt = np.linalg.svd(env)
            new = u @ vt
            net.gates[k] = Gate(g.qubits, new, g.control)
            alpha = _apply_gate(alpha, net.gates[k])
    return float(target @ net.prepare())


@dataclass
class CompileResult:
    netlist: Netlist
    fidelity: float
    layer_fidelities: list[float]

    @property
    def infidelity(self) -> float:
        return 1.0 - self.fidelity


def disentangler_compile(mps_or_vec, d_max: int, reopt_iters: int = 10, tol: float = 1e-13) -> CompileResult:
    """Compile a real state into ``d_max`` staircase layers of two-qubit gates.

    Each round truncates what is left of the target (after undoing the
    current circuit) to chi=2, prepends that layer's preparation circuit, and
    re-optimizes every gate.  A layer that would lower the fidelity is
    replaced by identities, so the fidelity never decreases with depth.
    Stops early once the infidelity is below ``tol``.
    """
    vec = _as_qubit_vector(mps_or_vec)
    n = int(round(np.log2(len(vec))))
    vec = vec / np.linalg.norm(vec)
    circuit = Netlist(n)
    fids = []
    best = 0.0
    for _ in range(d_max):
        residual = circuit.inverse().apply(vec)
        layer = _layer_from_state(residual, n)
        trial = Netlist(n).extend(layer).extend(circuit)
        f = float(vec @ trial.prepare()) ** 2
        if f < best:
            trial = Netlist(n).extend(Netlist(n, [Gate(g.qubits, np.eye(len(g.matrix)), None)
                                                  for g in layer.gates])).extend(circuit)
        if reopt_iters > 0:
            ov = _overlap_sweep(trial, vec, reopt_iters)
            f = ov ** 2
        else:
            f = float(vec @ trial.prepare()) ** 2
        circuit = trial
        best = max(best, f)
        fids.append(f)
        if 1.0 - f < tol:
            break
    fid = float(vec @ circuit.prepare()) ** 2
    return CompileResult(circuit, fid, fids)


def _as_qubit_vector(obj) -> np.ndarray:
    from .mps import Mps, split_d4_to_d2, to_statevector

    if isinstance(obj, Mps):
        if obj.d == 4:
            obj = split_d4_to_d2(obj)
        return to_statevector(obj)
    return np.asarray(obj, dtype=float).reshape(-1)


# --- controlled versions ------------------------------------------------------------

def real_sqrt_orthogonal(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Real orthogonal ``w`` with ``w @ w = u`` and ``k`` with ``k w.T k = w``.

    Needs det(u) = +1.  Built from the real Schur form ``u = q t q.T``: each
    2x2 rotation block gets its half angle, and eigenvalues +-1 are paired.
    ``k`` is ``q diag(1, -1, ...) q.T``, an involution.
    """
    n = len(u)
    if np.linalg.det(u) < 0:
        raise ValueError("real square root requires det = +1")
    t, q = scipy.linalg.schur(u, output="real")
    pairs, plus, minus = [], [], []
    i = 0
    while i < n:
        if i + 1 < n and abs(t[i + 1, i]) > 1e-9:
            pairs.append((q[:, i], q[:, i + 1], np.arctan2(t[i + 1, i], t[i, i])))
            i += 2
        else:
            (plus if t[i, i] > 0 else minus).append(q[:, i])
            i += 1
    if len(minus) % 2 or len(plus) % 2:
        raise AssertionError("unpaired real eigenvalues in an orthogonal matrix")
    for group, ang in ((plus, 0.0), (minus, np.pi)):
        for a in range(0, len(group), 2):
            pairs.append((group[a], group[a + 1], ang))
    basis = np.column_stack([c for p in pairs for c in p[:2]])
    half = np.zeros((n, n))
    zz = np.zeros(n)
    for b, (_, _, ang) in enumerate(pairs):
        c, s = np.cos(ang / 2), np.sin(ang / 2)
        half[2 * b:2 * b + 2, 2 * b:2 * b + 2] = [[c, -s], [s, c]]
        zz[2 * b:2 * b + 2] = [1.0, -1.0]
    w = basis @ half @ basis.T
    k = basis @ np.diag(zz) @ basis.T
    return w, k


def controlled_lift(net: Netlist, ancilla: int | None = None) -> Netlist:
    """Controlled version of a netlist using uncontrolled gates plus CZ-type gates.

    For each two-qubit gate ``u`` with det +1: ``C-u = w . C-k . w.T . C-k``
    where ``w`` is a real square root and ``k = q (I x Z) q.T``; ``C-k`` is a
    CZ from the ancilla to the second qubit conjugated by ``q``.  A det -1
    gate is first written as ``(u CZ) CZ`` and the extra CZ becomes a
    doubly-controlled Z.  Single-qubit gates are handled the same way in 2D,
    where a reflection is split as ``(u Z) Z``.  Negating ``u`` never helps:
    in even dimension ``det(-u) = det(u)``.
    """
    anc = net.n_qubits if ancilla is None else ancilla
    n_total = max(net.n_qubits, anc + 1)
    out = Netlist(n_total)
    for g in net.gates:
        if g.control is not None:
            raise ValueError("netlist is already controlled")
        u = np.real(g.matrix)
        if len(g.qubits) == 1:
            (q,) = g.qubits
            z = np.diag([1.0, -1.0])
            if np.linalg.det(u) < 0:
                # reflection: u = (u z) z, and C-z is a plain CZ
                out.append((q,), z, control=anc)
                u = u @ z
            # 2D rotation: sqrt is the half-angle rotation, k = Z
            ang = np.arctan2(u[1, 0], u[0, 0])
            c, s_ = np.cos(ang / 2), np.sin(ang / 2)
            w = np.array([[c, -s_], [s_, c]])
            # C-u = w C-z w.T C-z, rightmost applied first
            out.append((q,), z, control=anc)
            out.append((q,), w.T)
            out.append((q,), z, control=anc)
            out.append((q,), w)
            continue
        q1, q2 = g.qubits
        if np.linalg.det(u) < 0:
            out.append((q1, q2), CZ, control=anc)
            u = u @ CZ
        w, k = real_sqrt_orthogonal(u)
        # C-u = w  C-k  w.T  C-k, applied right to left; C-k = q C-(I x Z) q.T
        _, qmat = _k_basis(k)
        out.append((q1, q2), qmat.T)
        out.append((q2,), np.diag([1.0, -1.0]), control=anc)
        out.append((q1, q2), qmat.T @ w.T @ qmat)
        out.append((q2,), np.diag([1.0, -1.0]), control=anc)
        out.append((q1, q2), w @ qmat)
    return out


def _k_basis(k):
    """Orthogonal ``q`` with ``k = q (I x Z) q.T`` for an involution ``k`` of trace 0."""
    vals, vecs = np.linalg.eigh(0.5 * (k + k.T))
    plus = vecs[:, vals > 0]
    minus = vecs[:, vals < 0]
    if plus.shape[1] != 2 or minus.shape[1] != 2:
        raise AssertionError("k must have two +1 and two -1 eigenvalues")
    # I x Z = diag(1, -1, 1, -1)
    q = np.column_stack([plus[:, 0], minus[:, 0], plus[:, 1], minus[:, 1]])
    return k, q


# --- Hadamard test ------------------------------------------------------------------

def pauli_matrix(label: str) -> np.ndarray:
    m = np.ones((1, 1), dtype=complex)
    for ch in label:
        m = np.kron(m, _PAULI[ch])
    return m


def _apply_pauli(psi: np.ndarray, label: str, n: int) -> np.ndarray:
    for q, ch in enumerate(label):
        if ch != "I":
            psi = _apply_gate(psi, Gate((q,), _PAULI[ch]))
    return psi


def hadamard_test(u_i: Netlist, u_j: Netlist, rotation: GivensNetwork | None = None,
                  pauli: str | None = None, lift: bool = False) -> float:
    """Simulate the ancilla interference circuit and return P(0) - P(1).

    Circuit: H on the ancilla, controlled ``u_i``, the uncontrolled
    particle-conserving rotation, controlled Pauli string, controlled
    ``u_j^T``, H.  The rotation leaves the vacuum fixed, so the result is
    ``Re <0| u_j^T P G u_i |0>``.  With ``lift=True`` the controlled
    netlists come from :func:`controlled_lift` instead of direct control.
    """
    n = u_i.n_qubits
    if u_j.n_qubits != n:
        raise ValueError("netlists act on different registers")
    if pauli is not None and len(pauli) != n:
        raise ValueError("Pauli string length does not match the register")
    if rotation is not None and rotation.d ** rotation.n_orbitals != 2 ** n:
        raise ValueError("rotation network does not match the register")
    anc = n
    psi = np.zeros((2,) * (n + 1), dtype=complex)
    psi[(0,) * (n + 1)] = 1.0
    psi = _apply_gate(psi, Gate((anc,), _H))

    def controlled(netlist: Netlist, state):
        if lift:
            for g in controlled_lift(netlist, anc).gates:
                state = _apply_gate(state, g)
            return state
        for g in netlist.gates:
            state = _apply_gate(state, Gate(g.qubits, g.matrix, anc))
        return state

    psi = controlled(u_i, psi)
    if rotation is not None:
        flat = np.moveaxis(psi, anc, 0).reshape(2, -1)
        rot = np.stack([apply_rotation_network(flat[a].real, rotation) +
                        1j * apply_rotation_network(flat[a].imag, rotation) for a in range(2)])
        psi = np.moveaxis(rot.reshape((2,) + (2,) * n), 0, anc)
    if pauli is not None:
        idx = [slice(None)] * (n + 1)
        idx[anc] = 1
        sub = _apply_pauli(psi[tuple(idx)], pauli, n)
        psi = psi.copy()
        psi[tuple(idx)] = sub
    psi = controlled(u_j.inverse(), psi)
    psi = _apply_gate(psi, Gate((anc,), _H))
    probs = np.abs(np.moveaxis(psi, anc, 0).reshape(2, -1)) ** 2
    return float(probs[0].sum() - probs[1].sum())
