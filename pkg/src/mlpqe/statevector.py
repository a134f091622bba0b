"""Dense statevector simulation.

Basis index bit ``q`` is the occupation of qubit (spin-orbital) ``q``, so a
determinant bitmask is directly its basis index. Public functions accept
arrays of shape ``(2**n,)`` or a batch ``(m, 2**n)``.

:class:`Simulator` is the fast path used by the solvers. It keeps amplitudes
only on the fixed particle-number sector and applies each excitation factor as
one fused two-level rotation; both are exact for number-conserving inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .pauli import PauliSum

NORM_TOL = 1e-10
_IMAG_TOL = 1e-10
_DENSE_EIGH_LIMIT = 4000


def _popcount(values: np.ndarray) -> np.ndarray:
    return np.bitwise_count(values.astype(np.uint64)).astype(np.int64)


def _indices(n_qubits: int) -> np.ndarray:
    return np.arange(2**n_qubits, dtype=np.int64)


def _pauli_phase(b: np.ndarray, x: int, z: int) -> np.ndarray:
    """Phase of P(x, z)|b> = phase * |b ^ x>."""
    base = (1, 1j, -1, -1j)[(x & z).bit_count() % 4]
    sign = 1 - 2 * (_popcount(b & z) & 1)
    return base * sign


def basis_state(det: int, n_qubits: int) -> np.ndarray:
    if not 0 <= det < 2**n_qubits:
        raise ValueError(f"determinant mask {det} does not fit in {n_qubits} qubits")
    psi = np.zeros(2**n_qubits, dtype=complex)
    psi[det] = 1.0
    return psi


def apply_pauli(psi: np.ndarray, x: int, z: int) -> np.ndarray:
    b = _indices(int(np.log2(psi.shape[-1])))
    src = b ^ x
    return _pauli_phase(src, x, z) * psi[..., src]


def apply_pauli_sum(h: PauliSum, psi: np.ndarray) -> np.ndarray:
    out = np.zeros_like(psi, dtype=complex)
    for x, z, c in h.items():
        out += c * apply_pauli(psi, x, z)
    return out


def expectation(h: PauliSum, psi: np.ndarray) -> float | np.ndarray:
    """<psi|h|psi> for a Hermitian ``h``; real-valued.

    Raises:
        ValueError: ``h`` is not Hermitian, or the qubit counts differ.
    """
    if psi.shape[-1] != 2**h.n_qubits:
        raise ValueError("state and operator qubit counts differ")
    if not h.is_hermitian():
        raise ValueError("expectation requires a Hermitian operator")
    value = np.sum(psi.conj() * apply_pauli_sum(h, psi), axis=-1)
    if np.any(np.abs(np.imag(value)) > _IMAG_TOL):
        raise ArithmeticError("Hermitian expectation acquired an imaginary part")
    value = np.real(value)
    return float(value) if np.ndim(value) == 0 else value


def _check_generator(kappa_image: PauliSum) -> None:
    if not kappa_image.is_anti_hermitian():
        raise ValueError("excitation generator image must be anti-Hermitian")
    if not kappa_image.commutes_pairwise():
        raise ValueError("excitation generator terms must commute pairwise")


def apply_pauli_rotation(psi: np.ndarray, x: int, z: int, angle: float) -> np.ndarray:
    """exp(i * angle * P(x, z)) psi."""
    return np.cos(angle) * psi + 1j * np.sin(angle) * apply_pauli(psi, x, z)


def apply_excitation_exp(psi: np.ndarray, kappa_image: PauliSum, theta: float) -> np.ndarray:
    """exp(theta * kappa) psi as an ordered product of single-string rotations.

    Exact because the strings of a particle-hole generator commute.
    """
    _check_generator(kappa_image)
    out = np.array(psi, dtype=complex, copy=True)
    if theta == 0.0:
        return out
    for x, z, c in kappa_image.sorted_items():
        # theta * (i b) P = i (theta b) P
        out = apply_pauli_rotation(out, x, z, theta * c.imag)
    return out


def apply_ansatz(psi0: np.ndarray, kappa_images: Sequence[PauliSum], theta: Sequence[float]) -> np.ndarray:
    """Apply the dUCC product; ``kappa_images[0]`` acts on ``psi0`` first."""
    if len(kappa_images) != len(theta):
        raise ValueError("one parameter per generator required")
    psi = np.array(psi0, dtype=complex, copy=True)
    for image, t in zip(kappa_images, theta):
        psi = apply_excitation_exp(psi, image, float(t))
    return psi


def sector_indices(n_qubits: int, n_electrons: int) -> np.ndarray:
    b = _indices(n_qubits)
    return b[_popcount(b) == n_electrons]


def sector_matrix(h: PauliSum, sector: np.ndarray) -> scipy.sparse.csr_matrix:
    """Matrix of ``h`` projected onto the basis states listed in ``sector``."""
    dim = 2**h.n_qubits
    position = np.full(dim, -1, dtype=np.int64)
    position[sector] = np.arange(len(sector))
    rows, cols, vals = [], [], []
    col_pos = np.arange(len(sector))
    for x, z, c in h.items():
        target = position[sector ^ x]
        keep = target >= 0
        rows.append(target[keep])
        cols.append(col_pos[keep])
        vals.append(c * _pauli_phase(sector[keep], x, z))
    n = len(sector)
    if not rows:
        return scipy.sparse.csr_matrix((n, n), dtype=complex)
    mat = scipy.sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()
    mat.sum_duplicates()
    return mat


def exact_ground_energy(h: PauliSum, n_electrons: int) -> float:
    """Lowest eigenvalue of ``h`` within the ``n_electrons`` particle-number sector."""
    sector = sector_indices(h.n_qubits, n_electrons)
    if len(sector) == 0:
        raise ValueError(f"no basis states with {n_electrons} particles on {h.n_qubits} qubits")
    mat = sector_matrix(h, sector)
    if len(sector) <= _DENSE_EIGH_LIMIT:
        return float(scipy.linalg.eigvalsh(mat.toarray())[0])
    vals = scipy.sparse.linalg.eigsh(mat, k=1, which="SA", tol=1e-12)[0]
    return float(vals[0])


@dataclass(frozen=True)
class FusedRotation:
    """exp(theta * kappa) for a generator whose strings share one flip mask.

    ``kappa`` acts as ``(kappa psi)[r] = coupling[r] * psi[partner[r]]`` on the
    listed rows and annihilates every other basis state, so the exponential is
    a set of independent 2x2 rotations.
    """

    rows: np.ndarray
    partners: np.ndarray
    coupling: np.ndarray
    magnitude: np.ndarray

    @classmethod
    def from_image(cls, kappa_image: PauliSum, basis: np.ndarray) -> FusedRotation:
        """Compile ``kappa_image`` restricted to ``basis`` (sorted basis-state indices).

        Rows and partners are positions within ``basis``; pairs leaving it are
        dropped, which is exact when ``kappa`` conserves the sector.
        """
        _check_generator(kappa_image)
        masks = {x for x, _, _ in kappa_image.items()}
        if len(masks) != 1:
            raise ValueError("fused rotation needs a single shared flip mask")
        (x,) = masks
        coupling = np.zeros(len(basis), dtype=complex)
        src = basis ^ x
        for xm, z, c in kappa_image.items():
            coupling += c * _pauli_phase(src, xm, z)
        position = np.searchsorted(basis, src)
        position = np.minimum(position, len(basis) - 1)
        inside = basis[position] == src
        keep = inside & (np.abs(coupling) > 1e-12)
        rows = np.nonzero(keep)[0]
        partners = position[keep]
        magnitude = np.abs(coupling[keep])
        full = np.zeros(len(basis))
        full[rows] = magnitude
        if not np.allclose(full[partners], magnitude, atol=1e-12):
            raise ArithmeticError("generator is not a two-level rotation")
        coupling = coupling[keep]
        if np.all(np.abs(coupling.imag) < 1e-15):
            coupling = coupling.real.copy()
        return cls(rows, partners, coupling, magnitude)

    def apply_(self, psi: np.ndarray, theta: float) -> None:
        """In place on the last axis of ``psi``."""
        if theta == 0.0 or len(self.rows) == 0:
            return
        angle = theta * self.magnitude
        cos, sin = np.cos(angle), np.sin(angle) / self.magnitude
        own = psi[..., self.rows]
        other = psi[..., self.partners]
        psi[..., self.rows] = cos * own + (sin * self.coupling) * other


class Simulator:
    """Sector-restricted engine: amplitudes live on the ``n_electrons`` sector.

    States handled here are compressed arrays of length ``len(self.sector)``;
    use :meth:`embed`/:meth:`compress` to move between that and dense form.
    """

    def __init__(self, hamiltonian: PauliSum, n_electrons: int):
        if not hamiltonian.is_hermitian():
            raise ValueError("Hamiltonian must be Hermitian")
        self.hamiltonian = hamiltonian
        self.n_qubits = hamiltonian.n_qubits
        self.n_electrons = n_electrons
        self.sector = sector_indices(self.n_qubits, n_electrons)
        h = sector_matrix(hamiltonian, self.sector)
        if h.nnz == 0 or abs(h.imag).max() < 1e-14:
            h = h.real.tocsr()
        self.h_matrix = h
        self._position = {int(b): k for k, b in enumerate(self.sector)}
        self._rotations: dict[object, FusedRotation] = {}

    @property
    def dim(self) -> int:
        return len(self.sector)

    def position(self, det: int) -> int:
        try:
            return self._position[det]
        except KeyError:
            raise ValueError(f"determinant {det:b} lies outside the {self.n_electrons}-particle sector") from None

    def basis_state(self, det: int) -> np.ndarray:
        psi = np.zeros(self.dim)
        psi[self.position(det)] = 1.0
        return psi

    def embed(self, psi: np.ndarray) -> np.ndarray:
        out = np.zeros(psi.shape[:-1] + (2**self.n_qubits,), dtype=complex)
        out[..., self.sector] = psi
        return out

    def compress(self, psi: np.ndarray) -> np.ndarray:
        return np.array(psi[..., self.sector], copy=True)

    def rotation(self, key: object, kappa_image: PauliSum) -> FusedRotation:
        rot = self._rotations.get(key)
        if rot is None:
            rot = FusedRotation.from_image(kappa_image, self.sector)
            self._rotations[key] = rot
        return rot

    def apply_ansatz(self, psi: np.ndarray, operators: Sequence, theta: Sequence[float], adjoint: bool = False) -> np.ndarray:
        """U psi (or U^dagger psi); ``operators`` need ``label`` and ``kappa_image``."""
        rots = [self.rotation(op.label, op.kappa_image) for op in operators]
        needs_complex = any(np.iscomplexobj(r.coupling) for r in rots)
        out = np.array(psi, dtype=complex if needs_complex or np.iscomplexobj(psi) else float, copy=True)
        order = range(len(rots))
        if adjoint:
            order = reversed(order)
        for k in order:
            rots[k].apply_(out, -theta[k] if adjoint else theta[k])
        return out

    def apply_hamiltonian(self, psi: np.ndarray) -> np.ndarray:
        return (self.h_matrix @ psi.T).T

    def expectation(self, psi: np.ndarray) -> float | np.ndarray:
        value = np.sum(np.conj(psi) * self.apply_hamiltonian(psi), axis=-1)
        value = np.real(value)
        return float(value) if np.ndim(value) == 0 else value

    def ground_energy(self) -> float:
        if self.dim <= _DENSE_EIGH_LIMIT:
            return float(scipy.linalg.eigvalsh(self.h_matrix.toarray())[0])
        return float(scipy.sparse.linalg.eigsh(self.h_matrix, k=1, which="SA", tol=1e-12)[0][0])
