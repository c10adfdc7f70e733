"""H6/STO-3G at r = 1.70 A with the TNQE-G variant, noiseless or with shot noise.

    python3 scripts/run_h6.py                  # chi=4, M=4, noiseless
    python3 scripts/run_h6.py --noise          # delta_H=1e-4, delta_S=1e-5
    python3 scripts/run_h6.py --out runs/h6    # also write trace.csv / resources.txt
"""

import argparse
import logging
from pathlib import Path

from tnqe import RunParams, coeff_l1_norm, data_path, read_fcidump, run_tnqe
from tnqe.resources import format_table, tally
from tnqe.subspace import NoiseModel


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--chi", type=int, default=4)
    ap.add_argument("--m", type=int, default=4)
    ap.add_argument("--variant", default="tnqe_g")
    ap.add_argument("--ordering", default="mutual_information")
    ap.add_argument("--noise", action="store_true")
    ap.add_argument("--seeds", default="0,1,2")
    ap.add_argument("--out")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    ints = read_fcidump(data_path("h6_1.70.fcidump"))
    noise = NoiseModel(1e-4, 1e-5, 0) if args.noise else NoiseModel()
    params = RunParams(m_max=args.m, chi_max=args.chi, variant=args.variant, ordering=args.ordering,
                       noise=noise, seeds=tuple(int(s) for s in args.seeds.split(",")))

    def show(trace):
        r = trace.final
        print(f"stage {r.stage} sweep {r.sweep:2d} {r.rotation:6s} error {r.true_energy - trace.e_fci:.3e} "
              f"corr {100 * r.corr_fraction:6.2f}%  qpu {r.qpu_calls}", flush=True)

    res = run_tnqe(ints, params, on_sweep=show)
    print("site order:", res.site_order)
    print("attempts:", ", ".join(f"seed {s}: {e:.3e} Ha" for s, e in res.attempts))
    print(f"success (<= 1.6 mHa): {res.success}")
    rep = tally(res.trace, ints.n_spatial, coeff_l1_norm(ints), 1e-4, 1e-5)
    print(format_table(rep))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "trace.csv").write_text(res.trace.to_csv())
        (out / "resources.txt").write_text(format_table(rep) + "\n")


if __name__ == "__main__":
    main()
