"""Pauli-string algebra and the Jordan-Wigner mapping.

A Pauli string is stored as a pair of bitmasks ``(x, z)`` over qubits; qubit
``q`` carries ``I`` for (0, 0), ``X`` for (1, 0), ``Z`` for (0, 1) and ``Y``
for (1, 1). Qubit ``q`` is spin-orbital ``q``, and ``a_p^dagger`` maps to
``(X_p - i Y_p)/2 Z_{p-1} ... Z_0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .integrals import MolecularIntegrals, SpinOrbitalBasis

DROP_TOL = 1e-14

_LETTERS = {(0, 0): "I", (1, 0): "X", (0, 1): "Z", (1, 1): "Y"}
_BITS = {v: k for k, v in _LETTERS.items()}
_I_POWERS = (1, 1j, -1, -1j)


@dataclass(frozen=True)
class PauliString:
    coefficient: complex
    letters: str  # letters[q] acts on qubit q

    @property
    def n_qubits(self) -> int:
        return len(self.letters)

    @property
    def weight(self) -> int:
        return sum(ch != "I" for ch in self.letters)


def _masks_from_letters(letters: str) -> tuple[int, int]:
    x = z = 0
    for q, ch in enumerate(letters.upper()):
        bx, bz = _BITS[ch]
        x |= bx << q
        z |= bz << q
    return x, z


def _letters_from_masks(x: int, z: int, n: int) -> str:
    return "".join(_LETTERS[(x >> q) & 1, (z >> q) & 1] for q in range(n))


def _multiply(x1: int, z1: int, x2: int, z2: int) -> tuple[int, int, complex]:
    # P(x, z) = i^{|x&z|} X^x Z^z, and Z^z1 X^x2 = (-1)^{|z1&x2|} X^x2 Z^z1.
    x3, z3 = x1 ^ x2, z1 ^ z2
    power = (x1 & z1).bit_count() + (x2 & z2).bit_count() + 2 * (z1 & x2).bit_count() - (x3 & z3).bit_count()
    return x3, z3, _I_POWERS[power % 4]


class PauliSum:
    """Weighted sum of Pauli strings; duplicates merged, |c| < 1e-14 dropped."""

    __slots__ = ("n_qubits", "_terms")

    def __init__(self, n_qubits: int, terms: Mapping[tuple[int, int], complex] | None = None):
        self.n_qubits = n_qubits
        self._terms: dict[tuple[int, int], complex] = {}
        for key, c in (terms or {}).items():
            if abs(c) >= DROP_TOL:
                self._terms[key] = complex(c)

    @classmethod
    def from_strings(cls, strings: Iterable[tuple[complex, str]]) -> PauliSum:
        strings = list(strings)
        n = len(strings[0][1]) if strings else 0
        acc: dict[tuple[int, int], complex] = {}
        for c, letters in strings:
            if len(letters) != n:
                raise ValueError("Pauli strings must share n_qubits")
            key = _masks_from_letters(letters)
            acc[key] = acc.get(key, 0.0) + c
        return cls(n, acc)

    @classmethod
    def identity(cls, n_qubits: int, coefficient: complex = 1.0) -> PauliSum:
        return cls(n_qubits, {(0, 0): coefficient})

    def items(self) -> Iterator[tuple[int, int, complex]]:
        for (x, z), c in self._terms.items():
            yield x, z, c

    @property
    def terms(self) -> list[PauliString]:
        return [PauliString(c, _letters_from_masks(x, z, self.n_qubits)) for x, z, c in self.sorted_items()]

    def sorted_items(self) -> list[tuple[int, int, complex]]:
        return sorted(self.items(), key=lambda t: (t[0], t[1]))

    def __len__(self) -> int:
        return len(self._terms)

    def coefficient(self, letters: str) -> complex:
        return self._terms.get(_masks_from_letters(letters), 0.0)

    def __add__(self, other: PauliSum) -> PauliSum:
        self._check(other)
        acc = dict(self._terms)
        for key, c in other._terms.items():
            acc[key] = acc.get(key, 0.0) + c
        return PauliSum(self.n_qubits, acc)

    def __sub__(self, other: PauliSum) -> PauliSum:
        return self + other * -1.0

    def __mul__(self, other):
        if isinstance(other, PauliSum):
            self._check(other)
            acc: dict[tuple[int, int], complex] = {}
            for (x1, z1), c1 in self._terms.items():
                for (x2, z2), c2 in other._terms.items():
                    x3, z3, phase = _multiply(x1, z1, x2, z2)
                    acc[x3, z3] = acc.get((x3, z3), 0.0) + phase * c1 * c2
            return PauliSum(self.n_qubits, acc)
        return PauliSum(self.n_qubits, {k: c * other for k, c in self._terms.items()})

    __rmul__ = __mul__

    def adjoint(self) -> PauliSum:
        return PauliSum(self.n_qubits, {k: c.conjugate() for k, c in self._terms.items()})

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return all(abs(c.imag) <= tol for c in self._terms.values())

    def is_anti_hermitian(self, tol: float = 1e-12) -> bool:
        return all(abs(c.real) <= tol for c in self._terms.values())

    def commutes_pairwise(self) -> bool:
        keys = list(self._terms)
        for a, (x1, z1) in enumerate(keys):
            for x2, z2 in keys[a + 1:]:
                if ((x1 & z2).bit_count() + (z1 & x2).bit_count()) % 2:
                    return False
        return True

    def equals(self, other: PauliSum, tol: float = 1e-12) -> bool:
        diff = self - other
        return all(abs(c) <= tol for c in diff._terms.values())

    def to_matrix(self) -> np.ndarray:
        """Dense 2^n x 2^n matrix via Kronecker products (small n only)."""
        single = {
            "I": np.eye(2, dtype=complex),
            "X": np.array([[0, 1], [1, 0]], dtype=complex),
            "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
            "Z": np.array([[1, 0], [0, -1]], dtype=complex),
        }
        dim = 2**self.n_qubits
        out = np.zeros((dim, dim), dtype=complex)
        for term in self.terms:
            mat = np.ones((1, 1), dtype=complex)
            # Basis index bit q is qubit q, so qubit 0 is the rightmost factor.
            for ch in reversed(term.letters):
                mat = np.kron(mat, single[ch])
            out += term.coefficient * mat
        return out

    def dump(self) -> str:
        return "".join(f"{t.coefficient.real!r}{t.coefficient.imag:+}j {t.letters}\n" for t in self.terms)

    def _check(self, other: PauliSum) -> None:
        if other.n_qubits != self.n_qubits:
            raise ValueError(f"qubit count mismatch: {self.n_qubits} vs {other.n_qubits}")

    def __repr__(self) -> str:
        return f"PauliSum(n_qubits={self.n_qubits}, n_terms={len(self)})"


Ladder = tuple[int, bool]  # (spin-orbital, is_creation)


@dataclass(frozen=True)
class FermionOperator:
    """Sum of raw (not normal-ordered) ladder-operator products."""

    products: tuple[tuple[complex, tuple[Ladder, ...]], ...]

    def adjoint(self) -> FermionOperator:
        return FermionOperator(tuple(
            (complex(c).conjugate(), tuple((p, not dag) for p, dag in reversed(ops)))
            for c, ops in self.products
        ))

    def __add__(self, other: FermionOperator) -> FermionOperator:
        return FermionOperator(self.products + other.products)

    def max_index(self) -> int:
        return max((p for _, ops in self.products for p, _ in ops), default=-1)


def excitation_operator(occ: Sequence[int], virt: Sequence[int]) -> FermionOperator:
    """kappa = tau - tau^dagger with tau = a+_a a+_b ... a_j a_i for sorted occ (i, j, ...) and virt (a, b, ...)."""
    tau = tuple((a, True) for a in virt) + tuple((i, False) for i in reversed(occ))
    tau_op = FermionOperator(((1.0, tau),))
    dag = tau_op.adjoint()
    return FermionOperator(tau_op.products + tuple((-c, ops) for c, ops in dag.products))


def _ladder_image(p: int, creation: bool, n: int) -> PauliSum:
    z_chain = (1 << p) - 1
    bit = 1 << p
    # (X - iY)/2 for creation, (X + iY)/2 for annihilation, times Z_{p-1}..Z_0.
    y_sign = -0.5j if creation else 0.5j
    return PauliSum(n, {(bit, z_chain): 0.5, (bit, z_chain | bit): y_sign})


def jordan_wigner(op: FermionOperator, n_spin: int) -> PauliSum:
    if op.max_index() >= n_spin:
        raise ValueError(f"spin-orbital index {op.max_index()} outside 0..{n_spin - 1}")
    cache: dict[Ladder, PauliSum] = {}
    acc: dict[tuple[int, int], complex] = {}
    for coeff, ops in op.products:
        term = PauliSum.identity(n_spin, coeff)
        for ladder in ops:
            if ladder not in cache:
                cache[ladder] = _ladder_image(*ladder, n_spin)
            term = term * cache[ladder]
        for x, z, c in term.items():
            acc[x, z] = acc.get((x, z), 0.0) + c
    return PauliSum(n_spin, acc)


def hamiltonian_from_integrals(ints: MolecularIntegrals, basis: SpinOrbitalBasis) -> PauliSum:
    """Qubit Hamiltonian core + sum h_pq a+_p a_q + 1/2 sum <pq|rs> a+_p a+_q a_s a_r."""
    n = basis.n_spin
    products: list[tuple[complex, tuple[Ladder, ...]]] = []
    h1 = np.kron(ints.one_body, np.eye(2))
    for p, q in zip(*np.nonzero(np.abs(h1) > DROP_TOL)):
        products.append((h1[p, q], ((int(p), True), (int(q), False))))
    g = ints.physicist_spin_orbital()
    for p, q, r, s in zip(*np.nonzero(np.abs(g) > DROP_TOL)):
        if p == q or r == s:
            continue
        products.append((0.5 * g[p, q, r, s], ((int(p), True), (int(q), True), (int(s), False), (int(r), False))))
    h = jordan_wigner(FermionOperator(tuple(products)), n) + PauliSum.identity(n, ints.core_energy)
    if not h.is_hermitian(1e-12):
        raise ArithmeticError("Jordan-Wigner Hamiltonian came out non-Hermitian")
    return PauliSum(n, {(x, z): c.real for x, z, c in h.items()})


def excitation_image(kappa: FermionOperator, n_spin: int, occupied: Sequence[int] | None = None) -> PauliSum:
    """JW image of a particle-hole generator ``tau - tau^dagger``.

    Raises:
        ValueError: ``kappa`` is not of the form ``tau - tau^dagger`` with
            disjoint creation/annihilation index sets (and, when ``occupied`` is
            given, holes inside and particles outside the reference).
    """
    if len(kappa.products) != 2:
        raise ValueError("excitation generator must be tau - tau^dagger (two products)")
    (c1, tau), (c2, tau_dag) = kappa.products
    expected = FermionOperator(((c1, tau),)).adjoint().products[0]
    if abs(c1 - 1.0) > 1e-12 or abs(c2 + 1.0) > 1e-12 or expected[1] != tau_dag:
        raise ValueError("excitation generator must be tau - tau^dagger with unit weight")
    creators = [p for p, dag in tau if dag]
    annihilators = [p for p, dag in tau if not dag]
    if (not creators or len(creators) != len(annihilators) or len(set(creators)) != len(creators)
            or len(set(annihilators)) != len(annihilators) or set(creators) & set(annihilators)
            or tau[:len(creators)] != tuple((p, True) for p in creators)):
        raise ValueError("tau is not a particle-hole excitation string")
    if occupied is not None:
        occ = set(occupied)
        if not set(annihilators) <= occ or set(creators) & occ:
            raise ValueError("excitation does not map the reference to an excited determinant")
    image = jordan_wigner(kappa, n_spin)
    rank = len(creators)
    if len(image) != 2 ** (2 * rank - 1) or not image.is_anti_hermitian() or not image.commutes_pairwise():
        raise ArithmeticError("unexpected Jordan-Wigner image for a particle-hole generator")
    return image


def one_norm(h: PauliSum) -> float:
    """sum_l |h_l| over non-identity strings."""
    return float(sum(abs(c) for x, z, c in h.items() if x or z))
