import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import eigh

from conftest import random_orthogonal
from tnqe.hamiltonian import Sector, build_sparse_hamiltonian
from tnqe.mps import canonicalize, random_mps, to_statevector
from tnqe.rotations import RotationRegistry, apply_rotation_network, givens_decompose
from tnqe.subspace import (DegeneratePencilError, NoiseModel, OracleCounter, SubspacePencil,
                           assemble_pencil, discard_columns, dump_pencil, load_pencil,
                           one_hot_decompose, one_hot_vectors, projection_norm, solve_gee,
                           update_two_site, whole_state_basis)


@pytest.fixture(scope="module")
def small():
    from conftest import load
    ints = load("h6_1.70")
    return ints, build_sparse_hamiltonian(ints)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10 ** 6), p=st.integers(0, 4))
def test_one_hot_gram_identity(seed, p):
    sec = Sector(6, 3, 3)
    mps = canonicalize(random_mps(6, 4, (3, 3), 4, seed=seed), p)
    basis = one_hot_decompose(mps, p)
    w = one_hot_vectors(mps, basis, sec)
    np.testing.assert_allclose(w.T @ w, np.eye(len(basis)), atol=1e-12)
    # the coefficients reproduce the state
    np.testing.assert_allclose(w @ basis.t, to_statevector(mps)[sec.basis], atol=1e-12)


def _dense_pencil(refs, bases, reg, h):
    """Independent dense build: full-space vectors through the gate network."""
    cols = []
    for b in bases:
        mps = refs[b.j]
        if b.expanded:
            vecs = []
            for k in range(len(b)):
                c = np.zeros(len(b))
                c[k] = 1.0
                m = mps.copy()
                t = b.to_tensor(c)
                cl, d1, d2, cr = t.shape
                m.tensors[b.p] = t.reshape(cl, d1, d2 * cr)
                m.tensors[b.p + 1] = np.eye(d2 * cr).reshape(d2 * cr, d2, cr)
                vecs.append(to_statevector(m))
            v = np.column_stack(vecs)
        else:
            v = to_statevector(mps)[:, None]
        v = apply_rotation_network(v, givens_decompose(reg.bases[b.j]))
        cols.append(v)
    v = np.hstack(cols)
    hd = h.dense()
    vs = v[h.basis]
    return vs.T @ hd @ vs, v.T @ v


def test_pencil_matches_dense_oracle(small):
    ints, h = small
    rng = np.random.default_rng(0)
    sec = h.sector
    refs = [canonicalize(random_mps(6, 4, (3, 3), 3, seed=s), 2) for s in (1, 2)]
    reg = RotationRegistry()
    for _ in refs:
        reg.add(random_orthogonal(6, rng))
    bases = [one_hot_decompose(r, 2, j) for j, r in enumerate(refs)]
    pen = assemble_pencil(refs, bases, reg, h)
    hd, sd = _dense_pencil(refs, bases, reg, h)
    np.testing.assert_allclose(pen.h, hd, atol=1e-12)
    np.testing.assert_allclose(pen.s, sd, atol=1e-12)
    # mixed expansion: second reference kept whole
    mixed = [bases[0], whole_state_basis(1, 2)]
    pen2 = assemble_pencil(refs, mixed, reg, h)
    hd2, sd2 = _dense_pencil(refs, mixed, reg, h)
    np.testing.assert_allclose(pen2.h, hd2, atol=1e-12)
    np.testing.assert_allclose(pen2.s, sd2, atol=1e-12)
    assert sec.dim == 400


def test_single_reference_overlap_identity(small):
    _, h = small
    ref = canonicalize(random_mps(6, 4, (3, 3), 4, seed=3), 1)
    reg = RotationRegistry()
    reg.add(np.eye(6))
    pen = assemble_pencil([ref], [one_hot_decompose(ref, 1)], reg, h)
    np.testing.assert_allclose(pen.s, np.eye(pen.dim), atol=1e-12)
    assert pen.qpu_calls == 0


def test_identical_references_offdiag_identity(small):
    _, h = small
    ref = canonicalize(random_mps(6, 4, (3, 3), 3, seed=4), 3)
    reg = RotationRegistry()
    reg.add(np.eye(6))
    reg.add(np.eye(6))
    b = one_hot_decompose(ref, 3)
    counter = OracleCounter()
    pen = assemble_pencil([ref, ref.copy()], [b, one_hot_decompose(ref, 3, 1)], reg, h, counter=counter)
    n = len(b)
    np.testing.assert_allclose(pen.s[:n, n:], np.eye(n), atol=1e-12)
    assert pen.qpu_calls == 2 * n * n == counter.calls


def test_noise_determinism_and_structure(small):
    _, h = small
    refs = [canonicalize(random_mps(6, 4, (3, 3), 3, seed=s), 0) for s in (5, 6)]
    reg = RotationRegistry()
    reg.add(np.eye(6))
    reg.add(random_orthogonal(6, np.random.default_rng(1)))
    bases = [one_hot_decompose(r, 0, j) for j, r in enumerate(refs)]
    noise = NoiseModel(1e-3, 1e-4, seed=7)
    a = assemble_pencil(refs, bases, reg, h, noise, call_id=3)
    b = assemble_pencil(refs, bases, reg, h, noise, call_id=3)
    c = assemble_pencil(refs, bases, reg, h, noise, call_id=4)
    exact = assemble_pencil(refs, bases, reg, h)
    assert np.array_equal(a.h, b.h) and np.array_equal(a.s, b.s)
    assert not np.array_equal(a.h, c.h)
    n0 = len(bases[0])
    # diagonal overlap blocks stay exact, everything else is perturbed and symmetric
    np.testing.assert_array_equal(a.s[:n0, :n0], exact.s[:n0, :n0])
    assert np.abs(a.s[:n0, n0:] - exact.s[:n0, n0:]).max() > 0
    np.testing.assert_array_equal(a.h, a.h.T)
    np.testing.assert_array_equal(a.s, a.s.T)


def test_projection_norm_cases(rng):
    s = np.eye(3)
    assert projection_norm(s, np.zeros(3)) == 0.0
    assert projection_norm(s, s[:, 1]) == pytest.approx(1.0)
    vecs = rng.standard_normal((10, 4))
    gram = vecs.T @ vecs
    cand = rng.standard_normal(10)
    cand /= np.linalg.norm(cand)
    q, _ = np.linalg.qr(vecs)
    expected = np.linalg.norm(q.T @ cand) ** 2
    assert projection_norm(gram, vecs.T @ cand) == pytest.approx(expected, abs=1e-10)


def _pencil(h, s):
    n = len(h)
    return SubspacePencil(h, s, [(0, 0, n, True)], np.ones(n, dtype=bool))


def test_discard_columns_cases(rng):
    eye = _pencil(np.eye(4), np.eye(4))
    assert discard_columns(eye).mask.all()
    v = rng.standard_normal((8, 3))
    v = np.column_stack([v, v[:, 1]])
    s = v.T @ v
    assert discard_columns(_pencil(s, s)).mask.tolist() == [True, True, True, False]


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_discard_bounds_condition_number(seed):
    rng = np.random.default_rng(seed)
    base = rng.standard_normal((30, 12))
    v = base + 1e-5 * rng.standard_normal(base.shape)
    v = np.column_stack([v, base[:, :6] + 1e-7 * rng.standard_normal((30, 6))])
    s = v.T @ v
    pen = discard_columns(_pencil(s, s), lin_dep_tol=1e-3, cond_max=1e4)
    kept = s[np.ix_(pen.mask, pen.mask)]
    assert np.linalg.cond(kept) <= 1e4


def test_solve_gee_modes_agree_on_identity(rng):
    a = rng.standard_normal((5, 5))
    h = a + a.T
    p = solve_gee((h, np.eye(5)), mode="projection")
    i = solve_gee((h, np.eye(5)), mode="inversion")
    np.testing.assert_allclose(p.energies, np.linalg.eigvalsh(h), atol=1e-10)
    np.testing.assert_allclose(i.energies, p.energies, atol=1e-10)


def test_solve_gee_one_by_one():
    sol = solve_gee((np.array([[3.0]]), np.array([[2.0]])))
    assert sol.e1 == pytest.approx(1.5)


def test_solve_gee_matches_dense(rng):
    a = rng.standard_normal((6, 6))
    b = rng.standard_normal((6, 6))
    h, s = a + a.T, b @ b.T + 6 * np.eye(6)
    sol = solve_gee((h, s))
    ref = eigh(h, s, eigvals_only=True)
    assert sol.e1 == pytest.approx(ref[0], abs=1e-10)
    c = sol.c1
    assert np.linalg.norm(h @ c - sol.e1 * s @ c) < 1e-8
    assert c @ s @ c == pytest.approx(1.0)
    assert sol.kappa == pytest.approx(c @ c / np.sqrt(sol.e1 ** 2 + 1))


def test_solve_gee_degenerate():
    with pytest.raises(DegeneratePencilError):
        solve_gee((np.eye(2), 1e-14 * np.eye(2)))


def test_update_two_site():
    from tnqe.subspace import OneHotBasis
    b = OneHotBasis(0, 0, np.array([[0, 0, 0, 0], [0, 1, 1, 0]]), np.array([1.0, 0.0]), (1, 2, 2, 1))
    t, w = update_two_site(b, np.array([0.3, 0.4]))
    assert w == pytest.approx(0.5)
    np.testing.assert_allclose(b.from_tensor(t), [0.6, 0.8])
    assert update_two_site(b, np.zeros(2)) is None


def test_variational_update_single_reference(small):
    _, h = small
    ref = canonicalize(random_mps(6, 4, (3, 3), 4, seed=8), 2)
    reg = RotationRegistry()
    reg.add(np.eye(6))
    b = one_hot_decompose(ref, 2)
    pen = assemble_pencil([ref], [b], reg, h)
    e_before = float(b.t @ pen.h @ b.t)
    assert solve_gee(pen).e1 <= e_before + 1e-10


def test_pencil_dump_roundtrip(small):
    _, h = small
    ref = canonicalize(random_mps(6, 4, (3, 3), 2, seed=9), 0)
    reg = RotationRegistry()
    reg.add(np.eye(6))
    pen = discard_columns(assemble_pencil([ref], [one_hot_decompose(ref, 0)], reg, h, NoiseModel(1e-3, 0, 1), 2))
    back = load_pencil(dump_pencil(pen))
    np.testing.assert_array_equal(back.h, pen.h)
    np.testing.assert_array_equal(back.s, pen.s)
    np.testing.assert_array_equal(back.mask, pen.mask)
    assert back.blocks == pen.blocks
