"""Disentangled UCC excitation pool."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .integrals import DEGENERACY_TOL, DegenerateOrbitalError, SpinOrbitalBasis, spin_of
from .pauli import PauliSum, excitation_image, excitation_operator

MAX_RANK = 4


def excitation_label(occ: Sequence[int], virt: Sequence[int]) -> str:
    return f"{len(occ)}_{','.join(map(str, occ))}->{','.join(map(str, virt))}"


def apply_ladder_string(ops: Sequence[tuple[int, bool]], det: int) -> tuple[int, int]:
    """Act with a ladder string (rightmost first) on a determinant bitmask.

    Returns ``(sign, det')``; ``sign == 0`` when the result vanishes.
    """
    sign = 1
    for p, creation in reversed(ops):
        occupied = (det >> p) & 1
        if occupied == creation:
            return 0, det
        if (det & ((1 << p) - 1)).bit_count() % 2:
            sign = -sign
        det ^= 1 << p
    return sign, det


@dataclass(frozen=True)
class ExcitationOperator:
    label: str
    occ: tuple[int, ...]
    virt: tuple[int, ...]
    kappa_image: PauliSum = field(repr=False, compare=False)
    denominator: float
    target: int  # bitmask of Phi_mu
    phase: int  # kappa |Phi_0> = phase * |target>

    @property
    def rank(self) -> int:
        return len(self.occ)


def make_excitation(occ: Sequence[int], virt: Sequence[int], basis: SpinOrbitalBasis) -> ExcitationOperator:
    occ, virt = tuple(sorted(occ)), tuple(sorted(virt))
    kappa = excitation_operator(occ, virt)
    image = excitation_image(kappa, basis.n_spin, basis.occupied)
    denom = float(sum(basis.epsilon[i] for i in occ) - sum(basis.epsilon[a] for a in virt))
    label = excitation_label(occ, virt)
    if abs(denom) < DEGENERACY_TOL:
        raise DegenerateOrbitalError(f"vanishing denominator for excitation {label}")
    phase, target = apply_ladder_string(kappa.products[0][1], basis.reference_mask)
    return ExcitationOperator(label, occ, virt, image, denom, target, phase)


@dataclass(frozen=True)
class AnsatzPool:
    """Ordered generators plus an aligned parameter vector (copied on update)."""

    operators: tuple[ExcitationOperator, ...]
    theta: np.ndarray

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float)
        if theta.shape != (len(self.operators),):
            raise ValueError("theta must align with operators")
        labels = [op.label for op in self.operators]
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate operator labels in pool")
        theta.flags.writeable = False
        object.__setattr__(self, "theta", theta)

    @property
    def n_par(self) -> int:
        return len(self.operators)

    @property
    def labels(self) -> list[str]:
        return [op.label for op in self.operators]

    @property
    def denominators(self) -> np.ndarray:
        return np.array([op.denominator for op in self.operators])

    def index(self, label: str) -> int:
        for k, op in enumerate(self.operators):
            if op.label == label:
                return k
        raise KeyError(f"operator {label!r} not in pool")

    def with_theta(self, theta: Sequence[float]) -> AnsatzPool:
        return replace(self, theta=np.array(theta, dtype=float))

    def dump(self) -> str:
        return "".join(f"{op.label} {op.denominator!r} {t!r}\n" for op, t in zip(self.operators, self.theta))

    def __len__(self) -> int:
        return len(self.operators)


def generate_pool(basis: SpinOrbitalBasis, max_rank: int) -> AnsatzPool:
    """All S_z-conserving particle-hole excitations up to ``max_rank``.

    Ordered by rank, then occupied tuple, then virtual tuple (lexicographic).
    """
    if not 1 <= max_rank <= MAX_RANK:
        raise ValueError(f"max_rank must be in 1..{MAX_RANK}")
    ops = []
    for rank in range(1, max_rank + 1):
        for occ in itertools.combinations(basis.occupied, rank):
            n_alpha = sum(1 for i in occ if spin_of(i) == 0)
            for virt in itertools.combinations(basis.virtual, rank):
                if sum(1 for a in virt if spin_of(a) == 0) == n_alpha:
                    ops.append(make_excitation(occ, virt, basis))
    return AnsatzPool(tuple(ops), np.zeros(len(ops)))


def mp2_screen(pool: AnsatzPool, t2: Mapping, cutoff: float) -> AnsatzPool:
    """Drop doubles whose |t_MP2| <= cutoff (missing amplitudes count as zero)."""
    if cutoff < 0:
        raise ValueError("cutoff must be non-negative")
    keep = [
        k for k, op in enumerate(pool.operators)
        if op.rank != 2 or cutoff == 0 or abs(t2.get((op.occ, op.virt), 0.0)) > cutoff
    ]
    return AnsatzPool(tuple(pool.operators[k] for k in keep), pool.theta[keep])


def init_params_mp2(pool: AnsatzPool, t2: Mapping) -> AnsatzPool:
    theta = [t2.get((op.occ, op.virt), 0.0) if op.rank == 2 else 0.0 for op in pool.operators]
    return pool.with_theta(theta)
