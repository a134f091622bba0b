"""Gaussian residue noise, replica ensembles and averaged-parameter training.

Draws come from :class:`GaussianStream`: numpy's PCG64 bit generator (whose
raw 64-bit output is fixed across platforms and numpy releases) turned into
uniform doubles with the top 53 bits and then into normals with the
Box-Muller transform. The distribution methods of ``numpy.random.Generator``
are avoided on purpose since their algorithms may change between versions.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .ansatz import AnsatzPool
from .pqe import IterationTrace, PQESettings, Problem, ResidueVector, run_conventional
from .surrogate import MLRun, MLSettings, Surrogate, TrainingSet, train_surrogate

DEFAULT_REPLICAS = 50
PLATEAU_WINDOW = 10


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float = 0.0
    seed: int = 0
    replicas: int = DEFAULT_REPLICAS

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if self.replicas < 1:
            raise ValueError("replicas must be at least 1")

    def replica_seed(self, i: int) -> int:
        return self.seed + i


class GaussianStream:
    """Seeded N(0, 1) draws: PCG64 raw output, 53-bit uniforms, Box-Muller pairs."""

    def __init__(self, seed: int):
        self._bits = np.random.PCG64(seed)
        self._spare: list[float] = []

    def _uniform(self, n: int) -> np.ndarray:
        raw = self._bits.random_raw(n).astype(np.uint64)
        return (raw >> np.uint64(11)).astype(float) * 2.0**-53

    def normal(self, n: int) -> np.ndarray:
        out = np.empty(n)
        take = min(n, len(self._spare))
        out[:take] = self._spare[:take]
        del self._spare[:take]
        need = n - take
        if need:
            pairs = (need + 1) // 2
            u = self._uniform(2 * pairs).reshape(pairs, 2)
            radius = np.sqrt(-2.0 * np.log1p(-u[:, 0]))  # 1 - u lies in (0, 1]
            angle = 2.0 * math.pi * u[:, 1]
            z = np.column_stack([radius * np.cos(angle), radius * np.sin(angle)]).ravel()
            out[take:] = z[:need]
            self._spare = z[need:].tolist()
        return out


def perturb(residues: ResidueVector, spec: NoiseSpec, stream: GaussianStream) -> ResidueVector:
    """Add independent N(0, sigma^2) draws to every entry; sigma = 0 is the identity."""
    if spec.sigma == 0:
        return residues
    eta = spec.sigma * stream.normal(len(residues))
    return ResidueVector(residues.labels, residues.values + eta, residues.energy)


def perturbation(spec: NoiseSpec, replica: int = 0):
    """A fresh seeded perturbation callable for one replica (``None`` when noiseless)."""
    if spec.sigma == 0:
        return None
    stream = GaussianStream(spec.replica_seed(replica))
    return lambda res: perturb(res, spec, stream)


@dataclass
class EnsembleSummary:
    """Per-iteration mean and population standard deviation across replicas."""

    mean_energy_error: np.ndarray
    std_energy_error: np.ndarray
    mean_wf_error: np.ndarray
    std_wf_error: np.ndarray
    traces: list[IterationTrace] = field(default_factory=list, repr=False)

    def plateau(self, window: int = PLATEAU_WINDOW) -> float:
        """Mean of the last ``window`` points of the mean energy-error curve."""
        return float(np.mean(self.mean_energy_error[-window:]))

    def wf_plateau(self, window: int = PLATEAU_WINDOW) -> float:
        return float(np.mean(self.mean_wf_error[-window:]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["iteration", "mean_energy_error", "std_energy_error", "mean_wf_error", "std_wf_error"])
        for k in range(len(self.mean_energy_error)):
            writer.writerow([k] + [repr(float(v[k])) for v in
                                   (self.mean_energy_error, self.std_energy_error, self.mean_wf_error, self.std_wf_error)])
        return buf.getvalue()


def _pad(series: Sequence[np.ndarray], length: int | None = None) -> np.ndarray:
    length = max([len(s) for s in series] + [length or 0])
    return np.array([np.concatenate([s, np.full(length - len(s), s[-1])]) for s in series])


def summarize(traces: Sequence[IterationTrace], e_ref: float, theta_ref: np.ndarray,
              length: int | None = None) -> EnsembleSummary:
    """Fold replica traces in order; shorter ones carry their final value forward.

    Curves are padded to the longest trace, or to ``length`` when that is longer.
    """
    from .analysis import energy_error, wavefunction_error

    energies = _pad([energy_error(t, e_ref) for t in traces], length)
    wf = _pad([wavefunction_error(t, theta_ref) for t in traces], length)
    return EnsembleSummary(energies.mean(axis=0), energies.std(axis=0), wf.mean(axis=0), wf.std(axis=0), list(traces))


def run_replicas(problem: Problem, pool: AnsatzPool, spec: NoiseSpec, settings: PQESettings | None = None,
                 e_ref: float | None = None, theta_ref: np.ndarray | None = None) -> EnsembleSummary:
    """Independent noisy conventional trajectories; replica i is seeded with seed + i.

    ``theta_ref`` defaults to the converged noiseless conventional parameters
    and ``e_ref`` to the exact ground energy.
    """
    settings = settings or PQESettings()
    if theta_ref is None:
        theta_ref = run_conventional(problem, pool).final_theta
    e_ref = problem.fci_energy if e_ref is None else e_ref
    traces = [run_conventional(problem, pool, settings, perturbation(spec, i)) for i in range(spec.replicas)]
    return summarize(traces, e_ref, theta_ref, settings.max_iterations)


def averaged_training(training_sets: Sequence[TrainingSet]) -> TrainingSet:
    """Across-replica mean of each training sample.

    Raises:
        ValueError: replicas recorded different numbers of samples.
    """
    lengths = {len(ts) for ts in training_sets}
    if len(lengths) != 1:
        raise ValueError(f"replica training lengths differ: {sorted(lengths)}")
    stacked = np.array([ts.snapshots for ts in training_sets])
    mean = stacked.mean(axis=0)
    return TrainingSet([row for row in mean], training_sets[0].lrnt)


def noiseless_training_length(problem: Problem, pool: AnsatzPool, settings: PQESettings, ml: MLSettings) -> int:
    """Full-space iterations the noiseless run needs to reach the LRNT."""
    run = MLRun(problem, pool, settings, ml)
    run.train_phase()
    return len(run.trace.records)


def run_ml_replicas(problem: Problem, pool: AnsatzPool, spec: NoiseSpec, settings: PQESettings | None = None,
                    ml: MLSettings | None = None, e_ref: float | None = None,
                    theta_ref: np.ndarray | None = None) -> tuple[EnsembleSummary, Surrogate]:
    """Noisy ML-PQE ensemble with one surrogate trained on replica-averaged parameters.

    Every replica runs the same number of training iterations, taken from the
    noiseless LRNT crossing. Their parameter snapshots are averaged, a single
    partition and model are fitted, and each replica then continues with
    reduced iterations on its own noise stream.
    """
    settings = settings or PQESettings()
    ml = ml or MLSettings()
    if theta_ref is None:
        theta_ref = run_conventional(problem, pool).final_theta
    e_ref = problem.fci_energy if e_ref is None else e_ref
    length = noiseless_training_length(problem, pool, settings, ml)
    runs = [MLRun(problem, pool, settings, ml, perturbation(spec, i)) for i in range(spec.replicas)]
    for run in runs:
        run.train_phase(n_iterations=length)
    training = averaged_training([run.training for run in runs])
    surrogate = train_surrogate(training, pool.labels, ml)
    traces = []
    for run in runs:
        run.training = training
        traces.append(run.reduced_phase(surrogate) if not run.trace.converged else run.finish())
    return summarize(traces, e_ref, theta_ref, settings.max_iterations), surrogate


def fixed_iterations(settings: PQESettings, n_iterations: int) -> PQESettings:
    """Copy of ``settings`` with a different iteration cap."""
    return PQESettings(settings.threshold, n_iterations, settings.residue_method, settings.epsilon_res)


__all__ = [
    "EnsembleSummary", "GaussianStream", "NoiseSpec", "averaged_training", "fixed_iterations",
    "noiseless_training_length", "perturb", "perturbation", "run_ml_replicas", "run_replicas", "summarize",
]
