"""Measurement-count bounds and a C-X gate ledger.

Gate model: every Pauli rotation exp(i a P) with weight w compiles to a CNOT
staircase of 2(w - 1) C-X gates; no cancellation between rotations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .pauli import PauliSum


def _exact_bound(n: int, one_norm: float, eps: float) -> Fraction:
    if eps <= 0:
        raise ValueError("residue precision must be positive")
    if n < 0:
        raise ValueError("parameter count must be non-negative")
    return 3 * n * Fraction(one_norm) ** 2 / Fraction(eps) ** 2


def measurement_bound(n: int, one_norm: float, eps: float) -> int:
    """ceil(3 n (sum_l |h_l|)^2 / eps^2)."""
    return math.ceil(_exact_bound(n, one_norm, eps))


@dataclass(frozen=True)
class MeasurementBudget:
    epsilon_res: float
    one_norm: float
    n_params_measured: int

    @property
    def bound(self) -> Fraction:
        """Exact rational value of the bound, so ratios of budgets are exact."""
        return _exact_bound(self.n_params_measured, self.one_norm, self.epsilon_res)

    @property
    def count(self) -> int:
        return math.ceil(self.bound)


def cx_count_factor(kappa_image: PauliSum) -> int:
    return sum(2 * ((x | z).bit_count() - 1) for x, z, _ in kappa_image.items() if (x | z))


def ansatz_cx(operators: Iterable) -> int:
    return sum(cx_count_factor(op.kappa_image) for op in operators)


def ledger_iteration(operators: Sequence, measured_labels: Iterable[str]) -> int:
    """C-X gates spent on one residue-vector construction.

    Per measured residue: the ansatz after the probe factor exp(pi/4 kappa_mu)
    for <Omega|H|Omega>, and the ansatz alone for E_mu. One more ansatz
    circuit per iteration gives the shared E_0.
    """
    by_label = {op.label: op for op in operators}
    base = ansatz_cx(operators)
    total = base
    for label in measured_labels:
        total += 2 * base + cx_count_factor(by_label[label].kappa_image)
    return total


@dataclass
class GateLedger:
    """Per-iteration C-X counts, residue counts and measurement bounds."""

    one_norm: float
    epsilon_res: float
    cx: list[int] = field(default_factory=list)
    cx_cumulative: list[int] = field(default_factory=list)
    n_residues: list[int] = field(default_factory=list)
    bounds: list[Fraction] = field(default_factory=list)
    bounds_cumulative: list[Fraction] = field(default_factory=list)

    def record(self, operators: Sequence, measured_labels: Sequence[str]) -> dict:
        cx = ledger_iteration(operators, measured_labels)
        bound = MeasurementBudget(self.epsilon_res, self.one_norm, len(measured_labels)).bound
        self.cx.append(cx)
        self.cx_cumulative.append((self.cx_cumulative[-1] if self.cx_cumulative else 0) + cx)
        self.n_residues.append(len(measured_labels))
        self.bounds.append(bound)
        self.bounds_cumulative.append((self.bounds_cumulative[-1] if self.bounds_cumulative else Fraction(0)) + bound)
        return {
            "cx": cx,
            "cx_cumulative": self.cx_cumulative[-1],
            "n_residues_measured": len(measured_labels),
            "measurement_bound": bound,
            "measurement_bound_cumulative": self.bounds_cumulative[-1],
        }
