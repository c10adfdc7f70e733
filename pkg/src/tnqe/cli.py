"""Command-line entry point: ``tnqe <command> ...``.

Exit codes: 0 success, 1 numerical failure, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

EXIT_OK, EXIT_NUMERICAL, EXIT_INPUT = 0, 1, 2

PLOT_SCRIPT = """\
# Plot a TNQE convergence trace: python3 plot_trace.py trace.csv
import csv, sys
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open(sys.argv[1] if len(sys.argv) > 1 else "trace.csv")))
x = range(1, len(rows) + 1)
e_fci = float(sys.argv[2]) if len(sys.argv) > 2 else None
err = [float(r["true_energy"]) - e_fci for r in rows] if e_fci is not None else None
fig, ax = plt.subplots()
if err is not None:
    ax.semilogy(x, [max(e, 1e-10) for e in err])
    ax.axhline(1.6e-3, ls="--", c="k")
    ax.set_ylabel("E - E_FCI (Ha)")
else:
    ax.plot(x, [float(r["true_energy"]) for r in rows])
    ax.set_ylabel("E (Ha)")
ax.set_xlabel("sweep")
fig.savefig("trace.png", dpi=150)
"""


class InputError(Exception):
    pass


def _load_ints(path):
    from .chem_io import read_fcidump

    p = Path(path)
    if not p.is_file():
        raise InputError(f"no such file: {path}")
    return read_fcidump(p)


def cmd_fci(args) -> int:
    from .hamiltonian import Sector, build_sparse_hamiltonian, fci_ground_state, hf_energy

    ints = _load_ints(args.fcidump)
    sector = "auto"
    if args.sector:
        try:
            nu, nd = (int(x) for x in args.sector.split(","))
        except ValueError:
            raise InputError("--sector expects 'n_up,n_down'") from None
        sector = Sector(ints.n_spatial, nu, nd)
    h = build_sparse_hamiltonian(ints, sector=sector)
    e_fci = fci_ground_state(h)[0]
    e_hf = hf_energy(ints)
    print(f"E_FCI   {e_fci:.10f}")
    print(f"E_HF    {e_hf:.10f}")
    print(f"E_corr  {e_fci - e_hf:.10f}")
    return EXIT_OK


def _write_state(state, out: Path, site_order=()):
    from .mps import save_mps

    for j, ref in enumerate(state.refs):
        save_mps(ref, out / f"ref_{j}.mps")
    meta = {
        "schema_version": 1,
        "m": state.m,
        "energy": float(state.energy),
        "exact_energy": float(state.exact_energy()),
        "coeffs": [float(c) for c in state.coeffs],
        "bases": [u.tolist() for u in state.registry.bases],
        "qpu_calls": int(state.qpu_calls),
        "batches": int(state.batches),
        "site_order": list(site_order),
    }
    (out / "state.json").write_text(json.dumps(meta, indent=1))


def cmd_tnqe(args) -> int:
    from dataclasses import replace

    from .chem_io import coeff_l1_norm
    from .driver import load_config, run_tnqe
    from .resources import format_table, tally

    params, ints = load_config(args.config)
    if args.seeds:
        params = replace(params, seeds=tuple(int(s) for s in args.seeds.split(",")))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def flush(trace):
        (out / "trace.csv").write_text(trace.to_csv())
        (out / "trace.json").write_text(trace.to_json())

    result = run_tnqe(ints, params, on_sweep=flush, jobs=args.jobs)
    flush(result.trace)
    _write_state(result.state, out, result.site_order)
    rep = tally(result.trace, ints.n_spatial, coeff_l1_norm(ints),
                params.noise.delta_h or 1e-4, params.noise.delta_s or 1e-5, args.layers)
    (out / "resources.json").write_text(rep.to_json())
    (out / "resources.txt").write_text(format_table(rep) + "\n")
    (out / "plot_trace.py").write_text(PLOT_SCRIPT)
    tr = result.trace
    err = tr.final.true_energy - tr.e_fci
    print(f"variant {params.variant}  seed {tr.seed}  E {tr.final.true_energy:.10f}  "
          f"E_FCI {tr.e_fci:.10f}  error {err:.3e}  corr {100 * tr.final.corr_fraction:.2f}%")
    print("attempts: " + ", ".join(f"seed {s}: {e:.3e}" for s, e in result.attempts))
    print(f"success: {result.success}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    from .resources import PUBLISHED_SCHEDULE_QPU_CALLS, estimate, format_table

    if args.qubits % 2:
        raise InputError("--qubits must be even (two spin-orbitals per spatial orbital)")
    if args.l1 is None and args.fcidump is None:
        raise InputError("give --l1 or --fcidump")
    if args.fcidump is not None:
        from .chem_io import coeff_l1_norm

        l1 = coeff_l1_norm(_load_ints(args.fcidump))
    else:
        l1 = args.l1
    n_q = PUBLISHED_SCHEDULE_QPU_CALLS if args.published_schedule else args.n_q
    rep = estimate(args.qubits // 2, args.layers, args.delta_h, args.delta_s, l1, n_q, args.batches,
                   mode="published-schedule" if args.published_schedule else "measured")
    print(rep.to_json() if args.json else format_table(rep))
    return EXIT_OK


def _random_pair(args):
    from .mps import random_mps

    n = args.sites
    sector = (n // 2, n // 2) if args.d == 4 else (n // 4, n // 4)
    a = random_mps(n, args.d, sector, args.chi, seed=[args.seed, 0])
    b = a.copy() if args.identical else random_mps(n, args.d, sector, args.chi, seed=[args.seed, 1])
    return a, b


def cmd_sample_overlap(args) -> int:
    from .dequantize import overlap_batches
    from .mps import to_statevector
    from .rotations import GivensNetwork, NetGate, apply_rotation_network

    a, b = _random_pair(args)
    swaps = [int(s) for s in args.swaps.split(",")] if args.swaps else []
    net = GivensNetwork(args.sites, tuple(NetGate(p, fswap=True) for p in swaps), d=args.d)
    res = overlap_batches(a, b, net, args.batches, args.samples, args.seed)
    est = res[:, 0].mean()
    err = res[:, 0].std(ddof=1) / np.sqrt(len(res)) if len(res) > 1 else res[0, 1]
    print(f"estimate {est:.8f} +- {err:.2e}")
    if args.d ** args.sites <= 1 << 16:
        exact = float(to_statevector(a) @ apply_rotation_network(to_statevector(b), net))
        dev = abs(est - exact)
        sig = f"{dev / err:.2f} sigma" if err > 0 else f"deviation {dev:.1e}"
        print(f"exact    {exact:.8f}  ({sig})")
    return EXIT_OK


def cmd_compile(args) -> int:
    from .circuits import disentangler_compile
    from .mps import load_mps

    if args.mps:
        p = Path(args.mps)
        if not p.is_file():
            raise InputError(f"no such file: {args.mps}")
        target = load_mps(p)
    else:
        from .mps import random_mps

        target = random_mps(args.sites, 2, (args.sites // 4, args.sites // 4), args.chi, seed=args.seed)
    res = disentangler_compile(target, args.depth, args.reopt)
    print(f"layers {len(res.layer_fidelities)}  gates {len(res.netlist)}  infidelity {res.infidelity:.3e}")
    if args.out:
        Path(args.out).write_text(res.netlist.to_text())
    return EXIT_OK


def cmd_entangle_demo(args) -> int:
    from .mps import from_statevector, schmidt_entropy, schmidt_values
    from .rotations import apply_rotation_network, bitstring_index, max_entanglement_network

    n = args.qubits
    if n % 2 or n < 2:
        raise InputError("--qubits must be even and >= 2")
    net = max_entanglement_network(n)
    v = np.zeros(2 ** n)
    v[bitstring_index([1] * (n // 2) + [0] * (n // 2))] = 1.0
    psi = apply_rotation_network(v, net)
    mps = from_statevector(psi, 2, site_kinds=["spinless"] * n)
    s = schmidt_values(mps, n // 2)
    ent = schmidt_entropy(mps, n // 2)
    print(f"gates {len(net)}  schmidt rank {int(np.sum(s > 1e-12))} (max {2 ** (n // 2)})")
    print(f"entropy {ent:.12f}  (N/2) ln 2 = {(n // 2) * np.log(2):.12f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tnqe", description="Tensor-network quantum eigensolver emulation")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fci", help="exact ground state and RHF energy of an FCIDUMP")
    p.add_argument("fcidump")
    p.add_argument("--sector", help="n_up,n_down (default from the file)")
    p.set_defaults(func=cmd_fci)

    p = sub.add_parser("tnqe", help="run the optimizer from a key-value config")
    p.add_argument("config")
    p.add_argument("--out", default="tnqe_out")
    p.add_argument("--seeds", help="comma-separated seed override")
    p.add_argument("--layers", type=int, default=6, help="disentangler depth for the resource report")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for independent seeds")
    p.set_defaults(func=cmd_tnqe)

    p = sub.add_parser("estimate", help="closed-form resource table")
    p.add_argument("--qubits", type=int, default=12)
    p.add_argument("--layers", type=int, default=6)
    p.add_argument("--delta-h", type=float, default=1e-4)
    p.add_argument("--delta-s", type=float, default=1e-5)
    p.add_argument("--l1", type=float)
    p.add_argument("--fcidump")
    p.add_argument("--n-q", type=float, default=0.0, help="QPU calls")
    p.add_argument("--batches", type=int, default=0)
    p.add_argument("--published-schedule", action="store_true", help="use the published QPU-call count")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("sample-overlap", help="sampled overlap through an FSWAP network")
    p.add_argument("--sites", type=int, default=4)
    p.add_argument("--d", type=int, default=4, choices=(2, 4))
    p.add_argument("--chi", type=int, default=3)
    p.add_argument("--swaps", default="", help="comma-separated swap sites")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--batches", type=int, default=30)
    p.add_argument("--identical", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sample_overlap)

    p = sub.add_parser("compile", help="compile an MPS into a two-qubit netlist")
    p.add_argument("--mps", help="MPS snapshot (default: random d=2 MPS)")
    p.add_argument("--sites", type=int, default=8)
    p.add_argument("--chi", type=int, default=2)
    p.add_argument("--depth", type=int, default=1)
    p.add_argument("--reopt", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("entangle-demo", help="maximal-entanglement Givens network")
    p.add_argument("--qubits", type=int, default=8)
    p.set_defaults(func=cmd_entangle_demo)
    return ap


def main(argv=None) -> int:
    from .chem_io import FcidumpError
    from .driver import ConfigError
    from .hamiltonian import ResourceCapError, SolverError
    from .subspace import DegeneratePencilError

    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (InputError, FcidumpError, ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SolverError, DegeneratePencilError, ResourceCapError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
