from functools import reduce

import numpy as np
import pytest

from conftest import E_FCI, E_HF, load
from test_chem_io import random_integrals
from tnqe.hamiltonian import (ResourceCapError, Sector, build_sparse_hamiltonian, fci_ground_state,
                              hf_determinant, hf_energy, occupation_index, oracle_matrix_element)
from tnqe.chem_io import FermionIntegrals


def jw_dense(ints):
    """Independent dense Jordan-Wigner build (spin-orbital 2p+sigma, first mode most significant)."""
    n = 2 * ints.n_spatial
    z, eye = np.diag([1.0, -1.0]), np.eye(2)
    low = np.array([[0.0, 1.0], [0.0, 0.0]])
    ann = [reduce(np.kron, [z] * k + [low] + [eye] * (n - k - 1)) for k in range(n)]
    cre = [a.T for a in ann]
    h = ints.e_core * np.eye(2 ** n)
    norb = ints.n_spatial
    for p in range(norb):
        for q in range(norb):
            for s in range(2):
                h += ints.h1[p, q] * cre[2 * p + s] @ ann[2 * q + s]
    for p in range(norb):
        for q in range(norb):
            for r in range(norb):
                for t in range(norb):
                    v = ints.h2[p, q, r, t]
                    if v == 0:
                        continue
                    for s in range(2):
                        for u in range(2):
                            h += 0.5 * v * cre[2 * p + s] @ cre[2 * r + u] @ ann[2 * t + u] @ ann[2 * q + s]
    return h


@pytest.mark.parametrize("name", ["h2_0.7414", "h6_1.70", "h2o_2.0", "h2o_2.5", "h2o_3.0"])
def test_frozen_reference_energies(name):
    ints = load(name)
    e = fci_ground_state(build_sparse_hamiltonian(ints))[0]
    assert e == pytest.approx(E_FCI[name], abs=1e-9)
    assert hf_energy(ints) == pytest.approx(E_HF[name], abs=1e-9)
    assert e < hf_energy(ints)


def test_h2_literature_value(h2):
    # STO-3G H2 at 0.7414 A, widely tabulated
    assert E_FCI["h2_0.7414"] == pytest.approx(-1.13727, abs=1e-5)


def test_h6_correlation_energy():
    assert E_HF["h6_1.70"] - E_FCI["h6_1.70"] == pytest.approx(0.3468018, abs=1e-6)


@pytest.mark.parametrize("seed", range(3))
def test_matches_jordan_wigner(seed):
    ints = random_integrals(3, seed, n_electrons=3, ms2=1)
    h = build_sparse_hamiltonian(ints, sector=None)
    np.testing.assert_allclose(h.dense(), jw_dense(ints), atol=1e-12)


def test_h2_matches_jordan_wigner(h2):
    h = build_sparse_hamiltonian(h2, sector=None)
    np.testing.assert_allclose(h.dense(), jw_dense(h2), atol=1e-12)


def test_sector_restriction_consistent(h2):
    full = build_sparse_hamiltonian(h2, sector=None)
    sec = Sector.of(h2)
    e_sub, v_sub = fci_ground_state(full, sec)
    h_sec = build_sparse_hamiltonian(h2)
    e, v = fci_ground_state(h_sec)
    assert e == pytest.approx(e_sub, abs=1e-12)
    assert abs(abs(v_sub[sec.basis] @ v) - 1) < 1e-10
    assert h_sec.dim == sec.dim == 4


def test_d2_and_d4_share_matrix(h2):
    a = build_sparse_hamiltonian(h2, d=2)
    b = build_sparse_hamiltonian(h2, d=4)
    assert (a.matrix != b.matrix).nnz == 0


def test_sector_dims():
    s = Sector(6, 3, 3)
    assert s.dim == 400
    assert s.full_dim == 4 ** 6
    assert np.all(np.diff(s.basis) > 0)
    with pytest.raises(ValueError):
        Sector(2, 3, 0)


def test_hf_determinant_energy(h6, h6_ham):
    idx = hf_determinant(h6)
    row = np.searchsorted(h6_ham.basis, idx)
    assert h6_ham.matrix[row, row] == pytest.approx(hf_energy(h6), abs=1e-12)
    assert idx == occupation_index(6, [0, 1, 2], [0, 1, 2])


def test_oracle_matrix_element(h2, rng):
    h = build_sparse_hamiltonian(h2)
    a, b = rng.standard_normal((2, h.dim))
    assert oracle_matrix_element(a, h, b) == pytest.approx(a @ h.dense() @ b, abs=1e-12)
    assert oracle_matrix_element(a, None, b) == pytest.approx(a @ b)
    with pytest.raises(ValueError):
        oracle_matrix_element(a, None, b[:2])


def test_resource_cap():
    with pytest.raises(ResourceCapError):
        build_sparse_hamiltonian(FermionIntegrals.zeros(40, 2))


def test_hf_energy_open_shell_rejected():
    with pytest.raises(NotImplementedError):
        hf_energy(FermionIntegrals.zeros(2, 1, 1))
