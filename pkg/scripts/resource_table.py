"""Quantum resource table for H6 (12 qubits, 6 disentangler layers).

Without arguments the published QPU-call schedule is used; with a trace
JSON written by ``tnqe tnqe`` the measured tallies are used instead.

    python3 scripts/resource_table.py [tnqe_out/trace.json]
"""

import sys
from pathlib import Path

from tnqe import coeff_l1_norm, data_path, read_fcidump
from tnqe.driver import ConvergenceTrace
from tnqe.resources import PUBLISHED_SCHEDULE_QPU_CALLS, estimate, format_table, tally

# l1 norm of the H6 qubit Hamiltonian used by the published estimate
PUBLISHED_L1 = 46.95


def main():
    ints = read_fcidump(data_path("h6_1.70.fcidump"))
    print(f"l1 norm from the bundled integrals: {coeff_l1_norm(ints):.2f} (published: {PUBLISHED_L1})")
    if len(sys.argv) > 1:
        trace = ConvergenceTrace.from_json(Path(sys.argv[1]).read_text())
        rep = tally(trace, ints.n_spatial, PUBLISHED_L1, 1e-4, 1e-5)
    else:
        # 48 noisy sweeps over 5 bonds
        rep = estimate(ints.n_spatial, 6, 1e-4, 1e-5, PUBLISHED_L1, PUBLISHED_SCHEDULE_QPU_CALLS, 48 * 5,
                       mode="published-schedule")
    print(format_table(rep))


if __name__ == "__main__":
    main()
