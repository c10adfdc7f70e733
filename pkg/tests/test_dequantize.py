import numpy as np
import pytest

from tnqe.dequantize import (SampledBitstring, UnsupportedRegimeError, amplitude, double_sampling_hits,
                             fswap_propagate, overlap_batches, overlap_sampled, sample_bitstring,
                             sample_many, uniform_superposition_mps)
from tnqe.mps import random_mps, to_statevector
from tnqe.rotations import GivensNetwork, NetGate, apply_rotation_network


def swap_net(n, sites, d):
    return GivensNetwork(n, tuple(NetGate(p, fswap=True) for p in sites), d=d)


def test_sampling_distribution_matches_born_rule():
    mps = random_mps(3, 4, (1, 1), 3, seed=0)
    probs = to_statevector(mps) ** 2
    rng = np.random.default_rng(0)
    n = 20000
    counts = np.zeros(len(probs))
    for s in sample_many(mps, n, rng):
        counts[np.ravel_multi_index(s.local, (4,) * 3)] += 1
        assert s.probability == pytest.approx(probs[np.ravel_multi_index(s.local, (4,) * 3)])
    # chi-square style bound on the largest deviation
    sigma = np.sqrt(probs * (1 - probs) / n)
    assert np.all(np.abs(counts / n - probs) <= 5 * sigma + 1e-12)


def test_amplitude_matches_statevector():
    mps = random_mps(4, 4, (2, 1), 3, seed=1)
    v = to_statevector(mps)
    s = sample_bitstring(mps, np.random.default_rng(2))
    assert amplitude(mps, s.local) == pytest.approx(v[np.ravel_multi_index(s.local, (4,) * 4)])
    assert SampledBitstring((3, 1), 0.5, 4).bits == (1, 1, 0, 1)


@pytest.mark.parametrize("d", [2, 4])
def test_fswap_propagate_matches_dense(d):
    n = 4
    rng = np.random.default_rng(d)
    sites = [0, 2, 1, 0, 2]
    net = swap_net(n, sites, d)
    for _ in range(20):
        x = tuple(int(k) for k in rng.integers(0, d, n))
        v = np.zeros(d ** n)
        v[np.ravel_multi_index(x, (d,) * n)] = 1.0
        w = apply_rotation_network(v, net)
        y, phase = fswap_propagate(x, net, d)
        expected = np.zeros_like(w)
        expected[np.ravel_multi_index(y, (d,) * n)] = phase
        np.testing.assert_array_equal(w, expected)


def test_givens_network_rejected():
    mps = random_mps(3, 4, (1, 1), 2, seed=0)
    net = GivensNetwork(3, (NetGate(0, 0.2),))
    with pytest.raises(UnsupportedRegimeError):
        overlap_sampled(mps, mps, net, 10, np.random.default_rng(0))


@pytest.mark.parametrize("d,n,sector,sites", [(4, 4, (2, 2), [1, 0, 2]), (2, 6, (2, 1), [0, 2, 4, 1, 3])])
def test_sampled_overlap_within_three_sigma(d, n, sector, sites):
    a = random_mps(n, d, sector, 3, seed=[d, 0])
    b = random_mps(n, d, sector, 3, seed=[d, 1])
    net = swap_net(n, sites, d)
    exact = float(to_statevector(a) @ apply_rotation_network(to_statevector(b), net))
    res = overlap_batches(a, b, net, n_batches=30, n_samples=500, seed=5)
    assert np.all(np.abs(res[:, 0] - exact) <= 3 * res[:, 1] + 1e-12)
    pooled = res[:, 0].mean()
    assert abs(pooled - exact) <= 3 * res[:, 0].std(ddof=1) / np.sqrt(30)


def test_identical_states_overlap_exact():
    a = random_mps(4, 4, (2, 2), 3, seed=4)
    est, err = overlap_sampled(a, a, [], 50, np.random.default_rng(0))
    assert est == pytest.approx(1.0, abs=1e-12) and err < 1e-12


def test_double_sampling_negative_control():
    a = uniform_superposition_mps(20)
    b = uniform_superposition_mps(20)
    assert double_sampling_hits(a, b, 10_000, np.random.default_rng(0)) == 0


def test_rare_shared_support_is_a_known_blind_spot():
    # the two supports share one determinant carrying ~1.6e-6 of the sampled
    # weight: no sample reaches it, so the estimate and its stderr are both 0
    # while the exact overlap is not
    a = random_mps(5, 4, (2, 3), 3, seed=[4, 5, 0])
    b = random_mps(5, 4, (2, 3), 3, seed=[4, 5, 1])
    net = swap_net(5, [3, 1, 2, 0, 3], 4)
    exact = float(to_statevector(a) @ apply_rotation_network(to_statevector(b), net))
    est, err = overlap_sampled(a, b, net, 1000, np.random.default_rng(0))
    assert est == 0.0 and err == 0.0
    assert abs(exact) > 1e-5
