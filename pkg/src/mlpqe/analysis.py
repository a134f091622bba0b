"""Trace diagnostics: distance matrices, energy error and wave-function error."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .pqe import IterationTrace


class MissingSnapshotsError(ValueError):
    """The trace was stored without parameter vectors."""


def _snapshots(trace: IterationTrace) -> np.ndarray:
    if not trace.records or any(r.theta is None for r in trace.records):
        raise MissingSnapshotsError("trace has no parameter snapshots; record it with theta dumping enabled")
    return np.array([r.theta for r in trace.records], dtype=float)


@dataclass(frozen=True)
class DistanceMatrix:
    values: np.ndarray
    subset: tuple[str, ...]

    def relative_difference(self, other: DistanceMatrix) -> float:
        """||self - other||_F / ||self||_F."""
        return float(np.linalg.norm(self.values - other.values) / np.linalg.norm(self.values))

    def to_csv(self, log10: bool = False) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        n = len(self.values)
        writer.writerow(["iteration"] + [str(k) for k in range(n)])
        for k, row in enumerate(self.values):
            cells = [_log10(v) for v in row] if log10 else [repr(float(v)) for v in row]
            writer.writerow([k] + cells)
        return buf.getvalue()


def _log10(v: float) -> str:
    return repr(math.log10(v)) if v > 0 else "-inf"


def distance_matrix(trace: IterationTrace, subset: Sequence[str] | None = None) -> DistanceMatrix:
    """M[x, y] = ||theta_x - theta_y|| over the labels in ``subset`` (all when None).

    Raises:
        MissingSnapshotsError: a record carries no parameter vector.
        KeyError: a subset label is not in the trace.
    """
    data = _snapshots(trace)
    labels = list(trace.labels)
    if subset is None:
        subset = labels
    index = {label: k for k, label in enumerate(labels)}
    missing = [s for s in subset if s not in index]
    if missing:
        raise KeyError(f"labels not in trace: {missing}")
    cols = [index[s] for s in subset]
    values = squareform(pdist(data[:, cols])) if len(data) > 1 else np.zeros((1, 1))
    return DistanceMatrix(values, tuple(subset))


def top_fraction_labels(trace: IterationTrace, fraction: float) -> list[str]:
    """Labels of the largest-|theta| parameters at the end of the trace."""
    from .surrogate import partition

    return partition(trace.final_theta, fraction, trace.labels).principal_labels


def energy_error(trace: IterationTrace, e_ref: float) -> np.ndarray:
    return np.abs(trace.energies - e_ref)


def wavefunction_error(trace: IterationTrace, theta_ref: Sequence[float]) -> np.ndarray:
    """||theta_k - theta_ref|| over the full parameter vector, per record."""
    data = _snapshots(trace)
    theta_ref = np.asarray(theta_ref, dtype=float)
    if theta_ref.shape != (data.shape[1],):
        raise ValueError(f"reference has {theta_ref.size} parameters, trace has {data.shape[1]}")
    return np.linalg.norm(data - theta_ref, axis=1)


def series_csv(values: Sequence[float], log10: bool = True) -> str:
    """``iteration value`` rows, with an extra ``log10_value`` column by default."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["iteration", "value"] + (["log10_value"] if log10 else []))
    for k, v in enumerate(values):
        writer.writerow([k, repr(float(v))] + ([_log10(float(v))] if log10 else []))
    return buf.getvalue()
