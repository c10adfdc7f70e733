"""Compile every one-hot state of a chi=4 H6 DMRG reference into a D-layer circuit.

The one-hot states are the basis states the subspace expansion prepares at
each bond.  Prints the worst infidelity per bond.

    python3 scripts/compile_onehots.py [--depth 6] [--reopt 10]
"""

import argparse

import numpy as np

from tnqe import RunParams, data_path, read_fcidump
from tnqe.circuits import disentangler_compile
from tnqe.driver import run_single
from tnqe.mps import canonicalize
from tnqe.subspace import one_hot_decompose, one_hot_vectors


def one_hot_states(ints, chi=4, seed=0):
    """Yield (bond, full-space vector) for every one-hot state of a DMRG reference."""
    state, _ = run_single(ints, RunParams(m_max=1, chi_max=chi, seeds=(seed,)), seed)
    sector = state.sector
    for p in range(ints.n_spatial - 1):
        mps = canonicalize(state.refs[0].copy(), p)
        w = one_hot_vectors(mps, one_hot_decompose(mps, p), sector)
        for k in range(w.shape[1]):
            full = np.zeros(4 ** ints.n_spatial)
            full[sector.basis] = w[:, k]
            yield p, full


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--depth", type=int, default=6)
    ap.add_argument("--reopt", type=int, default=10)
    args = ap.parse_args()
    worst = {}
    for p, vec in one_hot_states(read_fcidump(data_path("h6_1.70.fcidump"))):
        res = disentangler_compile(vec, args.depth, args.reopt)
        n, w = worst.get(p, (0, 0.0))
        worst[p] = (n + 1, max(w, res.infidelity))
    for p, (n, w) in sorted(worst.items()):
        print(f"bond {p}: {n:3d} states, worst infidelity {w:.2e}")
    print(f"overall worst: {max(w for _, w in worst.values()):.2e}")


if __name__ == "__main__":
    main()
