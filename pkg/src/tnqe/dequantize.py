"""Classical overlap estimation when the basis change is a pure FSWAP network.

Bitstrings are drawn exactly from an MPS, pushed through the permutation
network (bits are reordered and a sign is collected), and the overlap is the
sample mean of amplitude ratios.  Any genuine Givens angle in the network
breaks this route; that case raises.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mps import Mps, canonicalize, local_charges
from .rotations import GivensNetwork

__all__ = [
    "SampledBitstring",
    "UnsupportedRegimeError",
    "sample_bitstring",
    "sample_many",
    "amplitude",
    "fswap_propagate",
    "overlap_sampled",
    "overlap_batches",
    "uniform_superposition_mps",
    "double_sampling_hits",
]


class UnsupportedRegimeError(ValueError):
    """The network mixes orbitals, so sampled overlaps are not available."""


@dataclass(frozen=True)
class SampledBitstring:
    local: tuple[int, ...]  # local basis index per site
    amplitude: float
    d: int

    @property
    def probability(self) -> float:
        return self.amplitude ** 2

    @property
    def bits(self) -> tuple[int, ...]:
        """Occupation per spin-orbital (d=4 sites expand to (up, down) pairs)."""
        if self.d == 2:
            return self.local
        return tuple(b for k in self.local for b in (k >> 1, k & 1))


def _right_canonical(mps: Mps) -> Mps:
    if mps.center == 0:
        return mps
    out = mps.copy()
    canonicalize(out, 0)
    return out


def sample_bitstring(mps: Mps, rng: np.random.Generator) -> SampledBitstring:
    """One exact sample from ``|<x|phi>|^2`` for a normalized MPS."""
    mps = _right_canonical(mps)
    env = np.ones(1)
    picks = []
    for t in mps.tensors:
        cand = np.einsum("a,akb->kb", env, t)
        w = np.einsum("kb,kb->k", cand, cand)
        total = w.sum()
        k = int(rng.choice(len(w), p=w / total))
        picks.append(k)
        env = cand[k]
    return SampledBitstring(tuple(picks), float(env[0]), mps.d)


def sample_many(mps: Mps, n: int, rng: np.random.Generator) -> list[SampledBitstring]:
    mps = _right_canonical(mps)
    return [sample_bitstring(mps, rng) for _ in range(n)]


def amplitude(mps: Mps, local) -> float:
    """``<x|phi>`` by direct contraction along the chain."""
    env = np.ones(1)
    for t, k in zip(mps.tensors, local):
        env = env @ t[:, int(k), :]
    return float(env[0])


def _site_parity(d: int) -> np.ndarray:
    # particle-number parity of each local state
    return local_charges(d, "spatial").sum(1) % 2 if d == 4 else np.array([0, 1])


def _swap_sites(network) -> list[int]:
    if isinstance(network, GivensNetwork):
        if not network.swaps_only:
            raise UnsupportedRegimeError(
                "network contains Givens rotations; sampled overlaps need a pure FSWAP network")
        return [g.site for g in network.gates]
    return [int(p) for p in network]


def fswap_propagate(x, network, d: int = 2) -> tuple[tuple[int, ...], int]:
    """Apply an FSWAP network to basis state ``x``: returns ``(x', phase)``.

    ``network`` is a swaps-only GivensNetwork or a sequence of left sites of
    adjacent transpositions, applied first to last.  Two exchanged sites pick
    up a -1 when both carry odd particle number.
    """
    par = _site_parity(d)
    x = list(int(k) for k in x)
    phase = 1
    for p in _swap_sites(network):
        a, b = x[p], x[p + 1]
        if par[a] and par[b]:
            phase = -phase
        x[p], x[p + 1] = b, a
    return tuple(x), phase


def overlap_sampled(mps_i: Mps, mps_j: Mps, network, n_samples: int,
                    rng: np.random.Generator) -> tuple[float, float]:
    """Estimate ``<phi_i| F |phi_j>`` for an FSWAP network ``F``.

    Samples ``x ~ |<x|phi_i>|^2`` and averages ``<x|F|phi_j> / <x|phi_i>``.
    Because every gate is a signed permutation and symmetric,
    ``<x|F = phase <x'|`` with ``x'`` obtained by running the network backwards.
    Returns (estimate, standard error).
    """
    if mps_i.n_sites != mps_j.n_sites or mps_i.d != mps_j.d:
        raise ValueError("MPS shapes differ")
    sites = _swap_sites(network)[::-1]
    mps_i = _right_canonical(mps_i)
    ratios = np.empty(n_samples)
    for s in range(n_samples):
        smp = sample_bitstring(mps_i, rng)
        y, phase = fswap_propagate(smp.local, sites, mps_i.d)
        ratios[s] = phase * amplitude(mps_j, y) / smp.amplitude
    est = float(ratios.mean())
    err = float(ratios.std(ddof=1) / np.sqrt(n_samples)) if n_samples > 1 else float("inf")
    return est, err


def overlap_batches(mps_i: Mps, mps_j: Mps, network, n_batches: int, n_samples: int,
                    seed: int = 0) -> np.ndarray:
    """Batch means and errors, shape (n_batches, 2); batch b uses seed stream (seed, b)."""
    out = np.empty((n_batches, 2))
    for b in range(n_batches):
        out[b] = overlap_sampled(mps_i, mps_j, network, n_samples, np.random.default_rng([seed, b]))
    return out


def uniform_superposition_mps(n_sites: int) -> Mps:
    """Product state ``|+>^n`` on d=2 sites.

    This state does not conserve particle number, so the bond labels are
    placeholders; it is only meant for sampling.
    """
    t = np.full((1, 2, 1), 1.0 / np.sqrt(2.0))
    bonds = [np.zeros((1, 2), dtype=np.int64) for _ in range(n_sites + 1)]
    return Mps([t.copy() for _ in range(n_sites)], bonds, ["spinless"] * n_sites, 2, 0)


def double_sampling_hits(mps_a: Mps, mps_b: Mps, n_samples: int, rng: np.random.Generator) -> int:
    """Count coincidences between independent samples of two states.

    This is the naive estimator that samples both states separately; for
    spread-out distributions the coincidence rate is exponentially small.
    """
    a, b = _right_canonical(mps_a), _right_canonical(mps_b)
    hits = 0
    for _ in range(n_samples):
        if sample_bitstring(a, rng).local == sample_bitstring(b, rng).local:
            hits += 1
    return hits
