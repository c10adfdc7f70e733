"""Closed-form circuit and shot arithmetic plus run-level resource tallies."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

__all__ = [
    "cnot_count",
    "layer_depth",
    "shots_per_element",
    "ResourceReport",
    "UCCSD_REFERENCE",
    "PUBLISHED_SCHEDULE_QPU_CALLS",
    "tally",
    "estimate",
    "format_table",
]

# cited reference values for the single-circuit UCCSD comparison (H6, STO-3G);
# these are never computed here
UCCSD_REFERENCE = {
    "cnots_per_circuit": 3.0e3,
    "qubits": 12,
    "layer_depth": 3.9e3,
    "qpu_calls": 2.5e4,
    "batches": 1.6e4,
    "delta": 1.0e-8,
    "total_shots": 5.4e23,
    "total_cnots": 1.6e27,
    "correlation_fraction": 0.332,
}

PUBLISHED_SCHEDULE_QPU_CALLS = 5.6e5


def _check(n_qubits, d_layers):
    if n_qubits < 1 or d_layers < 0:
        raise ValueError("need n_qubits >= 1 and d_layers >= 0")


def cnot_count(n_qubits: int, d_layers: int) -> int:
    """Two-qubit gates per matrix-element circuit: N^2 + (16D - 1)N - 16D."""
    _check(n_qubits, d_layers)
    n, d = int(n_qubits), int(d_layers)
    return n * n + (16 * d - 1) * n - 16 * d


def layer_depth(n_qubits: int, d_layers: int, ghz: bool = False) -> int:
    """CNOT layer depth: 28ND + 17 with one ancilla, 28N + 56D - 13 with GHZ ancillas."""
    _check(n_qubits, d_layers)
    n, d = int(n_qubits), int(d_layers)
    return 28 * n + 56 * d - 13 if ghz else 28 * n * d + 17


def shots_per_element(delta: float, l1_norm: float | None = None) -> float:
    """Shots to reach standard error ``delta``: (l1/delta)^2, or delta^-2 for overlaps."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    scale = 1.0 if l1_norm is None else float(l1_norm)
    return (scale / delta) ** 2


@dataclass
class ResourceReport:
    n_spatial: int
    d_layers: int
    cnots_per_circuit: int
    qubits: int
    qubits_ghz: int
    layer_depth: int
    layer_depth_ghz: int
    qpu_calls: float
    batches: int
    delta_h: float
    delta_s: float
    l1_norm: float
    shots_per_h_element: float
    shots_per_s_element: float
    total_shots: float
    total_cnots: float
    correlation_fraction: float | None = None
    mode: str = "measured"

    def to_json(self) -> str:
        return json.dumps({"schema_version": 1, "tnqe": asdict(self), "uccsd_reference": UCCSD_REFERENCE},
                          indent=1)


def estimate(n_spatial: int, d_layers: int, delta_h: float, delta_s: float, l1_norm: float,
             qpu_calls: float, batches: int = 0, correlation: float | None = None,
             mode: str = "measured") -> ResourceReport:
    """Combine the closed forms; QPU calls split evenly between H and S elements."""
    n_q = 2 * n_spatial
    nh = shots_per_element(delta_h, l1_norm)
    ns = shots_per_element(delta_s)
    total = 0.5 * qpu_calls * nh + 0.5 * qpu_calls * ns
    cpc = cnot_count(n_q, d_layers)
    return ResourceReport(
        n_spatial=n_spatial, d_layers=d_layers, cnots_per_circuit=cpc,
        qubits=n_q + 1, qubits_ghz=n_q + n_spatial,
        layer_depth=layer_depth(n_q, d_layers), layer_depth_ghz=layer_depth(n_q, d_layers, ghz=True),
        qpu_calls=float(qpu_calls), batches=int(batches), delta_h=delta_h, delta_s=delta_s,
        l1_norm=float(l1_norm), shots_per_h_element=nh, shots_per_s_element=ns,
        total_shots=total, total_cnots=total * cpc, correlation_fraction=correlation, mode=mode)


def tally(trace, n_spatial: int, l1_norm: float, delta_h: float, delta_s: float, d_layers: int = 6,
          published_schedule: bool = False) -> ResourceReport:
    """Resource report for a finished run.

    ``trace`` is a ConvergenceTrace (or None for an empty run).  With
    ``published_schedule`` the measured QPU-call count is replaced by the
    published schedule value while batches stay measured.
    """
    final = trace.final if trace is not None else None
    calls = final.qpu_calls if final else 0
    batches = final.batches if final else 0
    corr = final.corr_fraction if final else None
    if published_schedule:
        calls = PUBLISHED_SCHEDULE_QPU_CALLS
    return estimate(n_spatial, d_layers, delta_h, delta_s, l1_norm, calls, batches, corr,
                    "published-schedule" if published_schedule else "measured")


def _sci(x):
    return "-" if x is None else f"{x:.1e}"


def format_table(rep: ResourceReport) -> str:
    """Aligned text table with TNQE and UCCSD-reference columns."""
    u = UCCSD_REFERENCE
    corr = "-" if rep.correlation_fraction is None else f"{100 * rep.correlation_fraction:.1f}%"
    rows = [
        ("CNOTs per circuit", f"{rep.cnots_per_circuit:.1e}", _sci(u["cnots_per_circuit"])),
        ("Qubits (GHZ)", f"{rep.qubits} ({rep.qubits_ghz})", str(u["qubits"])),
        ("Layer depth (GHZ)", f"{rep.layer_depth:.1e} ({rep.layer_depth_ghz:.1e})", _sci(u["layer_depth"])),
        ("QPU calls (batches)", f"{rep.qpu_calls:.1e} ({rep.batches:.1e})",
         f"{u['qpu_calls']:.1e} ({u['batches']:.1e})"),
        ("Noise tol. (overlap)", f"{rep.delta_h:.1e} ({rep.delta_s:.1e})", _sci(u["delta"])),
        ("Total shots", _sci(rep.total_shots), _sci(u["total_shots"])),
        ("Total CNOTs", _sci(rep.total_cnots), _sci(u["total_cnots"])),
        ("Correlation energy", corr, f"{100 * u['correlation_fraction']:.1f}%"),
    ]
    w0 = max(len(r[0]) for r in rows)
    w1 = max(len(r[1]) for r in rows + [("", "TNQE", "")])
    lines = [f"{'':<{w0}}  {'TNQE':<{w1}}  UCCSD (cited)"]
    lines += [f"{a:<{w0}}  {b:<{w1}}  {c}" for a, b, c in rows]
    lines.append(f"mode: {rep.mode}; l1 = {rep.l1_norm:.2f} Ha; D = {rep.d_layers}")
    return "\n".join(lines)

