"""Stretched H2O/STO-3G at O-H = 2.0, 2.5, 3.0 A with chi=3, M=3 (TNQE-G).

    python3 scripts/h2o_scan.py [--seeds 0,1,2] [--ordering mutual_information]
"""

import argparse

from tnqe import RunParams, data_path, read_fcidump, run_tnqe


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--chi", type=int, default=3)
    ap.add_argument("--m", type=int, default=3)
    ap.add_argument("--ordering", default="mutual_information")
    ap.add_argument("--seeds", default="0,1,2")
    args = ap.parse_args()
    params = RunParams(m_max=args.m, chi_max=args.chi, ordering=args.ordering,
                       seeds=tuple(int(s) for s in args.seeds.split(",")))
    print(f"{'r_OH':>5s} {'E_FCI':>14s} {'E':>14s} {'error/mHa':>10s} {'corr':>7s}  attempts")
    for r in ("2.0", "2.5", "3.0"):
        res = run_tnqe(read_fcidump(data_path(f"h2o_{r}.fcidump")), params)
        tr = res.trace
        print(f"{r:>5s} {tr.e_fci:14.8f} {res.energy:14.8f} {1e3 * (res.energy - tr.e_fci):10.4f} "
              f"{100 * tr.final.corr_fraction:6.2f}%  {len(res.attempts)}", flush=True)


if __name__ == "__main__":
    main()
