"""FCIDUMP ingestion and closed-shell reference quantities.

Spin-orbital convention (frozen for the whole package): spatial orbital ``p``
maps to spin-orbitals ``2p`` (alpha) and ``2p + 1`` (beta).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np

_SYM_TOL = 1e-10
_ORBITAL_ENERGY_TOL = 1e-8
DEGENERACY_TOL = 1e-8


class FcidumpError(ValueError):
    """Malformed or inconsistent FCIDUMP input."""


class DegenerateOrbitalError(ValueError):
    """An excitation denominator vanished."""


@dataclass(frozen=True)
class MolecularIntegrals:
    """Spatial-orbital integrals, 0-based; ``two_body`` in chemists' notation (pq|rs)."""

    n_spatial: int
    n_electrons: int
    ms2: int
    core_energy: float
    one_body: np.ndarray
    two_body: np.ndarray
    orbital_energies: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        n = self.n_spatial
        if self.one_body.shape != (n, n) or self.two_body.shape != (n, n, n, n):
            raise ValueError("integral tensor shapes do not match n_spatial")
        if self.n_electrons % 2:
            raise ValueError(f"odd electron count {self.n_electrons}: closed-shell reference required")
        if self.n_electrons > 2 * n:
            raise ValueError("more electrons than spin-orbitals")
        self.one_body.flags.writeable = False
        self.two_body.flags.writeable = False

    @property
    def n_occupied_spatial(self) -> int:
        return self.n_electrons // 2

    def physicist_spin_orbital(self) -> np.ndarray:
        """Spin-orbital <pq|rs> (physicists' notation), interleaved spin ordering."""
        return _spin_orbital_physicist(self.two_body)

    def antisymmetrized(self) -> np.ndarray:
        """Spin-orbital <pq||rs> = <pq|rs> - <pq|sr>."""
        g = self.physicist_spin_orbital()
        return g - g.transpose(0, 1, 3, 2)


@dataclass(frozen=True)
class SpinOrbitalBasis:
    n_spin: int
    occupied: tuple[int, ...]
    epsilon: np.ndarray

    @property
    def virtual(self) -> tuple[int, ...]:
        occ = set(self.occupied)
        return tuple(p for p in range(self.n_spin) if p not in occ)

    @property
    def reference_mask(self) -> int:
        mask = 0
        for p in self.occupied:
            mask |= 1 << p
        return mask


def spin_of(p: int) -> int:
    """0 for alpha, 1 for beta."""
    return p & 1


def _expand(two_body: np.ndarray, i: int, j: int, k: int, l: int, value: float) -> None:
    for a, b, c, d in {
        (i, j, k, l), (j, i, k, l), (i, j, l, k), (j, i, l, k),
        (k, l, i, j), (l, k, i, j), (k, l, j, i), (l, k, j, i),
    }:
        two_body[a, b, c, d] = value


def _parse_header(text: str) -> dict[str, str]:
    body = re.sub(r"^\s*&FCI", "", text.strip(), flags=re.I)
    body = re.sub(r"(&END|/)\s*$", "", body.strip(), flags=re.I)
    parts = re.split(r"([A-Za-z_][A-Za-z0-9_]*)\s*=", body)
    fields = {}
    for key, value in zip(parts[1::2], parts[2::2]):
        fields[key.upper()] = value.strip().rstrip(",").strip()
    for key in ("NORB", "NELEC"):
        if key not in fields:
            raise FcidumpError(f"line 1: header lacks {key}")
    return fields


def parse_fcidump(stream: TextIO | Iterable[str]) -> MolecularIntegrals:
    """Parse FCIDUMP text (Knowles-Handy layout) into :class:`MolecularIntegrals`.

    ``ORBSYM``/``ISYM`` are read but ignored. Optional orbital-energy records
    ``e i 0 0 0`` are kept for cross-checking in :func:`orbital_energies`.
    """
    lines = list(stream)
    header_lines = []
    idx = 0
    while idx < len(lines):
        line = lines[idx]
        header_lines.append(line)
        idx += 1
        if re.search(r"&END|^\s*/\s*$", line, re.I):
            break
    else:
        raise FcidumpError("line 1: no &END terminating the &FCI header")
    if not re.match(r"\s*&FCI", header_lines[0], re.I):
        raise FcidumpError("line 1: expected '&FCI' header")
    fields = _parse_header("".join(header_lines))
    try:
        norb = int(fields["NORB"])
        nelec = int(fields["NELEC"])
        ms2 = int(fields.get("MS2", "0") or 0)
    except ValueError as exc:
        raise FcidumpError(f"line 1: malformed header value ({exc})") from None
    if norb <= 0:
        raise FcidumpError(f"line 1: NORB must be positive, got {norb}")
    if nelec % 2:
        raise FcidumpError(f"line 1: odd NELEC={nelec}; only closed-shell references are supported")

    one = np.zeros((norb, norb))
    two = np.zeros((norb, norb, norb, norb))
    seen_one = np.zeros((norb, norb), dtype=bool)
    seen_two = np.zeros((norb,) * 4, dtype=bool)
    eps = np.full(norb, np.nan)
    core = None
    for lineno, line in enumerate(lines[idx:], start=idx + 1):
        tokens = line.split()
        if not tokens:
            continue
        if len(tokens) != 5:
            raise FcidumpError(f"line {lineno}: expected 'value i j k l', got {line.strip()!r}")
        try:
            value = float(tokens[0].replace("D", "E").replace("d", "e"))
            i, j, k, l = (int(t) for t in tokens[1:])
        except ValueError:
            raise FcidumpError(f"line {lineno}: malformed record {line.strip()!r}") from None
        if any(t < 0 or t > norb for t in (i, j, k, l)):
            raise FcidumpError(f"line {lineno}: index out of range 0..{norb}")
        if i and j and k and l:
            key = (i - 1, j - 1, k - 1, l - 1)
            if seen_two[key] and abs(two[key] - value) > _SYM_TOL:
                raise FcidumpError(f"line {lineno}: conflicts with a symmetry-equivalent record")
            _expand(two, *key, value)
            _expand(seen_two, *key, True)
        elif i and j and not k and not l:
            if seen_one[i - 1, j - 1] and abs(one[i - 1, j - 1] - value) > _SYM_TOL:
                raise FcidumpError(f"line {lineno}: conflicts with a symmetry-equivalent record")
            one[i - 1, j - 1] = one[j - 1, i - 1] = value
            seen_one[i - 1, j - 1] = seen_one[j - 1, i - 1] = True
        elif i and not (j or k or l):
            eps[i - 1] = value
        elif not (i or j or k or l):
            core = value
        else:
            raise FcidumpError(f"line {lineno}: unrecognised index pattern {i} {j} {k} {l}")
    if core is None:
        raise FcidumpError("missing core-energy record 'value 0 0 0 0'")
    return MolecularIntegrals(
        n_spatial=norb,
        n_electrons=nelec,
        ms2=ms2,
        core_energy=core,
        one_body=one,
        two_body=two,
        orbital_energies=None if np.isnan(eps).all() else eps,
    )


def load_fcidump(path: str | Path) -> MolecularIntegrals:
    with open(path) as fh:
        return parse_fcidump(fh)


def write_fcidump(ints: MolecularIntegrals, stream: TextIO, tol: float = 1e-15) -> None:
    """Write unique (8-fold reduced) records; inverse of :func:`parse_fcidump`."""
    n = ints.n_spatial
    stream.write(f" &FCI NORB={n},NELEC={ints.n_electrons},MS2={ints.ms2},\n &END\n")
    for i in range(n):
        for j in range(i + 1):
            for k in range(n):
                for l in range(k + 1):
                    if i * (i + 1) // 2 + j < k * (k + 1) // 2 + l:
                        continue
                    v = ints.two_body[i, j, k, l]
                    if abs(v) > tol:
                        stream.write(f" {float(v)!r} {i + 1} {j + 1} {k + 1} {l + 1}\n")
    for i in range(n):
        for j in range(i + 1):
            v = ints.one_body[i, j]
            if abs(v) > tol:
                stream.write(f" {float(v)!r} {i + 1} {j + 1} 0 0\n")
    stream.write(f" {float(ints.core_energy)!r} 0 0 0 0\n")


def _spin_orbital_physicist(eri: np.ndarray) -> np.ndarray:
    n = eri.shape[0]
    chem = np.zeros((2 * n,) * 4)
    for s1 in (0, 1):
        for s2 in (0, 1):
            chem[s1::2, s1::2, s2::2, s2::2] = eri
    # <pq|rs> = (pr|qs)
    return chem.transpose(0, 2, 1, 3)


def orbital_energies(ints: MolecularIntegrals) -> SpinOrbitalBasis:
    """Canonical orbital energies from the Fock diagonal, spin-interleaved.

    Raises:
        FcidumpError: the file carried orbital-energy records that disagree
            with the integrals by more than 1e-8.
    """
    nocc = ints.n_occupied_spatial
    h = ints.one_body
    g = ints.two_body
    eps = np.array([
        h[p, p] + sum(2.0 * g[p, p, i, i] - g[p, i, i, p] for i in range(nocc))
        for p in range(ints.n_spatial)
    ])
    if ints.orbital_energies is not None:
        given = ints.orbital_energies
        mask = ~np.isnan(given)
        if np.any(np.abs(given[mask] - eps[mask]) > _ORBITAL_ENERGY_TOL):
            raise FcidumpError("orbital-energy records disagree with the Fock diagonal")
    return SpinOrbitalBasis(
        n_spin=2 * ints.n_spatial,
        occupied=tuple(range(ints.n_electrons)),
        epsilon=np.repeat(eps, 2),
    )


def hf_energy(ints: MolecularIntegrals) -> float:
    occ = range(ints.n_occupied_spatial)
    h, g = ints.one_body, ints.two_body
    e = ints.core_energy + 2.0 * sum(h[i, i] for i in occ)
    e += sum(2.0 * g[i, i, j, j] - g[i, j, j, i] for i in occ for j in occ)
    return float(e)


def mp2_amplitudes(basis: SpinOrbitalBasis, ints: MolecularIntegrals) -> dict[tuple[tuple[int, int], tuple[int, int]], float]:
    """Spin-orbital MP2 doubles ``t[(i, j), (a, b)]`` with ``i < j`` occupied, ``a < b`` virtual.

    Amplitudes follow ``<ab||ij> / (e_i + e_j - e_a - e_b)``; spin-forbidden
    combinations are omitted rather than stored as zeros.
    """
    anti = ints.antisymmetrized()
    eps = basis.epsilon
    occ, virt = basis.occupied, basis.virtual
    t2 = {}
    for x, i in enumerate(occ):
        for j in occ[x + 1:]:
            for y, a in enumerate(virt):
                for b in virt[y + 1:]:
                    if spin_of(i) + spin_of(j) != spin_of(a) + spin_of(b):
                        continue
                    denom = eps[i] + eps[j] - eps[a] - eps[b]
                    if abs(denom) < DEGENERACY_TOL:
                        raise DegenerateOrbitalError(
                            f"vanishing MP2 denominator for excitation {i},{j}->{a},{b}")
                    t2[(i, j), (a, b)] = float(anti[a, b, i, j] / denom)
    return t2


def mp2_energy(t2: dict, ints: MolecularIntegrals) -> float:
    """Correlation energy sum_{i<j,a<b} t_ij^ab <ij||ab>."""
    anti = ints.antisymmetrized()
    return float(sum(t * anti[i, j, a, b] for ((i, j), (a, b)), t in t2.items()))
