"""Regenerate the bundled FCIDUMP files from RHF/STO-3G calculations.

Needs pyscf, which is not a runtime dependency of the package.  Run once:

    python3 scripts/make_fcidumps.py [outdir]
"""

import sys
from pathlib import Path

import numpy as np
from pyscf import gto, scf, ao2mo

from tnqe.chem_io import FermionIntegrals, write_fcidump


def h2_atoms(r=0.7414):
    return [("H", (0, 0, 0)), ("H", (0, 0, r))]


def h6_octahedral(r):
    """Octahedron whose nearest-neighbour H-H distance is r (Angstrom)."""
    a = r / np.sqrt(2.0)
    atoms = []
    for axis in range(3):
        for sgn in (1, -1):
            xyz = [0.0, 0.0, 0.0]
            xyz[axis] = sgn * a
            atoms.append(("H", tuple(xyz)))
    return atoms


def h2o_symmetric(r_oh, angle_deg=104.5):
    half = np.deg2rad(angle_deg) / 2
    return [
        ("O", (0, 0, 0)),
        ("H", (r_oh * np.sin(half), 0, r_oh * np.cos(half))),
        ("H", (-r_oh * np.sin(half), 0, r_oh * np.cos(half))),
    ]


def rhf_integrals(atoms, label):
    mol = gto.M(atom=atoms, basis="sto-3g", unit="Angstrom", verbose=0, symmetry=False)
    mf = scf.RHF(mol)
    mf.conv_tol = 1e-12
    mf.max_cycle = 500
    mf.level_shift = 0.3
    mf.kernel()
    if not mf.converged:
        mf = mf.newton().run()
    # stability check: follow internal instabilities to the lowest RHF solution
    for _ in range(5):
        mo, _, stable, _ = mf.stability(return_status=True)
        if stable:
            break
        dm = mf.make_rdm1(mo, mf.mo_occ)
        mf.kernel(dm0=dm)
    c = mf.mo_coeff
    n = c.shape[1]
    h1 = c.T @ mf.get_hcore() @ c
    h2 = ao2mo.restore(1, ao2mo.kernel(mol, c), n)
    ints = FermionIntegrals(n, mol.nelectron, mol.spin, float(mol.energy_nuc()),
                            0.5 * (h1 + h1.T), np.asarray(h2), label=label)
    return ints, mf.e_tot


def main(outdir):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    jobs = {"h2_0.7414": h2_atoms(0.7414), "h6_1.70": h6_octahedral(1.70)}
    for r in (2.0, 2.5, 3.0):
        jobs[f"h2o_{r:.1f}"] = h2o_symmetric(r)
    for name, atoms in jobs.items():
        ints, e_hf = rhf_integrals(atoms, name)
        (outdir / f"{name}.fcidump").write_text(write_fcidump(ints, tol=1e-14))
        print(f"{name}: norb={ints.n_spatial} nelec={ints.n_electrons} E_RHF={e_hf:.10f}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).parents[1] / "src/tnqe/data")
