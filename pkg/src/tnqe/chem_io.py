"""Electronic-structure integrals: FCIDUMP parsing/writing and orbital rotations.

Two-electron integrals are stored in chemists' notation ``(pq|rs)`` with the
full 8-fold permutation symmetry populated.  All arrays are real.
"""

from __future__ import annotations

import io
import re
from dataclasses import dataclass, field, replace
from itertools import product

import numpy as np

__all__ = [
    "FcidumpError",
    "FermionIntegrals",
    "parse_fcidump",
    "read_fcidump",
    "write_fcidump",
    "rotate_integrals",
    "coeff_l1_norm",
]


class FcidumpError(ValueError):
    """Malformed FCIDUMP input."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def _eightfold(p, q, r, s):
    return {
        (p, q, r, s), (q, p, r, s), (p, q, s, r), (q, p, s, r),
        (r, s, p, q), (s, r, p, q), (r, s, q, p), (s, r, q, p),
    }


@dataclass(frozen=True)
class FermionIntegrals:
    """Spatial-orbital Hamiltonian coefficients.

    Attributes:
        n_spatial: number of spatial orbitals.
        n_electrons: total electron count.
        ms2: twice the z-spin, ``n_up - n_down``.
        e_core: constant energy (nuclear repulsion plus frozen contributions).
        h1: one-electron integrals, shape ``(n, n)``.
        h2: two-electron integrals ``(pq|rs)``, shape ``(n, n, n, n)``.
        label: free-form provenance string.
    """

    n_spatial: int
    n_electrons: int
    ms2: int
    e_core: float
    h1: np.ndarray
    h2: np.ndarray
    label: str = field(default="", compare=False)

    def __post_init__(self):
        n = self.n_spatial
        if self.h1.shape != (n, n) or self.h2.shape != (n,) * 4:
            raise ValueError("integral shapes do not match n_spatial")
        if self.n_electrons > 2 * n or self.n_electrons < 0:
            raise ValueError("n_electrons must lie in [0, 2 n_spatial]")
        if abs(self.ms2) > self.n_electrons or (self.n_electrons - self.ms2) % 2:
            raise ValueError("ms2 incompatible with n_electrons")

    @property
    def n_up(self) -> int:
        return (self.n_electrons + self.ms2) // 2

    @property
    def n_down(self) -> int:
        return (self.n_electrons - self.ms2) // 2

    @classmethod
    def zeros(cls, n_spatial: int, n_electrons: int = 0, ms2: int = 0, e_core: float = 0.0):
        return cls(n_spatial, n_electrons, ms2, e_core,
                   np.zeros((n_spatial,) * 2), np.zeros((n_spatial,) * 4))

    def check_symmetry(self, atol: float = 1e-12) -> bool:
        h2 = self.h2
        return (
            np.allclose(self.h1, self.h1.T, atol=atol)
            and np.allclose(h2, h2.transpose(1, 0, 2, 3), atol=atol)
            and np.allclose(h2, h2.transpose(0, 1, 3, 2), atol=atol)
            and np.allclose(h2, h2.transpose(2, 3, 0, 1), atol=atol)
        )


_HEADER_RE = re.compile(r"&FCI(.*?)(&END|/)", re.S | re.I)
_KEY_RE = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)\s*=")


def _parse_header(block: str) -> dict[str, list[str]]:
    keys = {}
    matches = list(_KEY_RE.finditer(block))
    for m, nxt in zip(matches, matches[1:] + [None]):
        raw = block[m.end(): nxt.start() if nxt else len(block)]
        keys[m.group(1).upper()] = [v for v in re.split(r"[,\s]+", raw) if v]
    return keys


def parse_fcidump(text: str | io.TextIOBase) -> FermionIntegrals:
    """Parse Molpro-style FCIDUMP text into :class:`FermionIntegrals`."""
    if not isinstance(text, str):
        text = text.read()
    lines = text.splitlines()
    header_end = None
    for i, line in enumerate(lines):
        stripped = line.strip().upper()
        if stripped in ("&END", "/") or stripped.endswith("&END") or stripped.endswith("/"):
            header_end = i
            break
    if header_end is None:
        raise FcidumpError("missing header terminator (&END or /)", 1)
    match = _HEADER_RE.search("\n".join(lines[: header_end + 1]))
    if match is None:
        raise FcidumpError("missing &FCI header", 1)
    keys = _parse_header(match.group(1))
    for key in ("NORB", "NELEC"):
        if key not in keys or not keys[key]:
            raise FcidumpError(f"missing header key {key}", 1)
    try:
        norb = int(keys["NORB"][0])
        nelec = int(keys["NELEC"][0])
        ms2 = int(keys.get("MS2", ["0"])[0])
    except ValueError as exc:
        raise FcidumpError(f"bad header value: {exc}", 1) from None

    h1 = np.zeros((norb, norb))
    h2 = np.zeros((norb,) * 4)
    e_core = 0.0
    seen: dict[tuple, float] = {}
    for lineno, line in enumerate(lines[header_end + 1:], start=header_end + 2):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 5:
            raise FcidumpError("expected 'value i j k l'", lineno)
        try:
            value = float(parts[0].replace("D", "E").replace("d", "e"))
            i, j, k, l = (int(x) for x in parts[1:])
        except ValueError:
            raise FcidumpError("unparsable record", lineno) from None
        if any(x < 0 or x > norb for x in (i, j, k, l)):
            raise FcidumpError(f"orbital index out of range [1, {norb}]", lineno)
        if i == j == k == l == 0:
            key = ("core",)
        elif k == l == 0:
            if i == 0 or j == 0:
                raise FcidumpError("one-electron record with zero index", lineno)
            key = ("h1",) + tuple(sorted((i, j)))
        else:
            if 0 in (i, j, k, l):
                raise FcidumpError("two-electron record with zero index", lineno)
            key = ("h2",) + min(_eightfold(i, j, k, l))
        if key in seen:
            if seen[key] != value:
                raise FcidumpError(f"conflicting duplicate record for {key[1:]}", lineno)
            continue
        seen[key] = value
        if key[0] == "core":
            e_core = value
        elif key[0] == "h1":
            h1[i - 1, j - 1] = h1[j - 1, i - 1] = value
        else:
            for idx in _eightfold(i - 1, j - 1, k - 1, l - 1):
                h2[idx] = value
    return FermionIntegrals(norb, nelec, ms2, e_core, h1, h2, label=keys.get("LABEL", [""])[0])


def read_fcidump(path) -> FermionIntegrals:
    with open(path) as fh:
        ints = parse_fcidump(fh.read())
    return replace(ints, label=ints.label or str(path))


def write_fcidump(ints: FermionIntegrals, tol: float = 0.0) -> str:
    """Serialize to FCIDUMP text; values printed with 17 significant digits."""
    n = ints.n_spatial
    out = [f"&FCI NORB={n},NELEC={ints.n_electrons},MS2={ints.ms2},",
           "  ORBSYM=" + ",".join(["1"] * n) + ",", "  ISYM=1,", "&END"]
    h2 = ints.h2
    for p, q, r, s in product(range(n), repeat=4):
        if p < q or r < s or (p * n + q) < (r * n + s):
            continue
        v = h2[p, q, r, s]
        if abs(v) > tol:
            out.append(f"{v: .17e} {p + 1} {q + 1} {r + 1} {s + 1}")
    for p in range(n):
        for q in range(p + 1):
            v = ints.h1[p, q]
            if abs(v) > tol:
                out.append(f"{v: .17e} {p + 1} {q + 1} 0 0")
    out.append(f"{ints.e_core: .17e} 0 0 0 0")
    return "\n".join(out) + "\n"


def _check_orthogonal(u: np.ndarray, n: int, atol: float = 1e-10):
    if u.shape != (n, n):
        raise ValueError(f"rotation must be {n}x{n}, got {u.shape}")
    if not np.allclose(u.T @ u, np.eye(n), atol=atol):
        raise ValueError("rotation matrix is not orthogonal")


def rotate_integrals(ints: FermionIntegrals, u: np.ndarray) -> FermionIntegrals:
    """Express the integrals in the orbitals ``phi'_p = sum_q u[q, p] phi_q``."""
    u = np.asarray(u, dtype=float)
    _check_orthogonal(u, ints.n_spatial)
    h1 = u.T @ ints.h1 @ u
    h2 = ints.h2
    # four one-index transforms, O(n^5)
    h2 = np.einsum("pqrs,pa->aqrs", h2, u, optimize=True)
    h2 = np.einsum("aqrs,qb->abrs", h2, u, optimize=True)
    h2 = np.einsum("abrs,rc->abcs", h2, u, optimize=True)
    h2 = np.einsum("abcs,sd->abcd", h2, u, optimize=True)
    h1 = 0.5 * (h1 + h1.T)
    h2 = 0.5 * (h2 + h2.transpose(1, 0, 2, 3))
    h2 = 0.5 * (h2 + h2.transpose(0, 1, 3, 2))
    h2 = 0.5 * (h2 + h2.transpose(2, 3, 0, 1))
    return replace(ints, h1=h1, h2=h2)


def coeff_l1_norm(ints: FermionIntegrals, spin_orbital: bool = True) -> float:
    """Sum of absolute Hamiltonian coefficients ``|h_pq| + |h_pqrs|``.

    With ``spin_orbital`` (default) the sum runs over spin-orbital
    coefficients with ``h_pqrs = (ps|qr) / 2`` for every spin-conserving
    assignment, the convention the sparse Hamiltonian is built with: each
    spatial one-body term appears twice and each two-body term four times.
    Otherwise the plain spatial sums ``sum|h1| + sum|(pq|rs)|`` are returned.
    """
    if not spin_orbital:
        return float(np.abs(ints.h1).sum() + np.abs(ints.h2).sum())
    return float(2.0 * np.abs(ints.h1).sum() + 4.0 * 0.5 * np.abs(ints.h2).sum())
