"""Kernel-ridge surrogate for the auxiliary parameters and the reduced (ML-PQE) loop.

Phase 1 runs full-space quasi-Newton iterations and stores the updated
parameter vector of each one until the residue norm reaches the LRNT. The
parameters are then split by final magnitude into a principal subset (measured)
and an auxiliary subset (predicted by kernel ridge regression from the
principal ones). Phase 2 iterates only the principal residues, re-predicting
the auxiliary parameters before every measurement.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
from scipy.spatial.distance import cdist

from .ansatz import AnsatzPool
from .pqe import Engine, IterationTrace, PQESettings, Perturbation, Problem

DEFAULT_LRNT = 0.007
DEFAULT_FRACTION = 0.20
DEFAULT_ALPHA = 1e-10
LRNT_BAND = (1e-4, 0.1)
LRNT_PAPER_BAND = (0.005, 0.02)
SCALE_FLOOR = 1e-12
SOLVE_RTOL = 1e-8


class TrainingInsufficientError(RuntimeError):
    """Too few full-space iterations were recorded to fit the surrogate."""


class IllConditionedFitWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class Partition:
    principal: tuple[int, ...]  # pool indices, in pool order
    auxiliary: tuple[int, ...]
    fraction: float
    labels: tuple[str, ...] = ()

    @property
    def n_principal(self) -> int:
        return len(self.principal)

    @property
    def n_auxiliary(self) -> int:
        return len(self.auxiliary)

    @property
    def principal_labels(self) -> list[str]:
        return [self.labels[k] for k in self.principal]

    @property
    def auxiliary_labels(self) -> list[str]:
        return [self.labels[k] for k in self.auxiliary]


def n_principal(n_par: int, fraction: float) -> int:
    # round half up; max(1, .) keeps at least one measured parameter
    return min(n_par, max(1, math.floor(fraction * n_par + 0.5)))


def partition(theta: Sequence[float], fraction: float, labels: Sequence[str] | None = None) -> Partition:
    """Principal = the n_P largest |theta|; ties go to the earlier pool position."""
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie in (0, 1)")
    theta = np.asarray(theta, dtype=float)
    n = len(theta)
    n_p = n_principal(n, fraction)
    order = sorted(range(n), key=lambda k: (-abs(theta[k]), k))
    principal = tuple(sorted(order[:n_p]))
    auxiliary = tuple(sorted(order[n_p:]))
    labels = tuple(labels) if labels is not None else tuple(str(k) for k in range(n))
    return Partition(principal, auxiliary, fraction, labels)


def check_lrnt(lrnt: float) -> None:
    lo, hi = LRNT_BAND
    if not lo < lrnt < hi:
        raise ValueError(f"LRNT {lrnt} outside the supported band ({lo}, {hi})")
    if not LRNT_PAPER_BAND[0] <= lrnt <= LRNT_PAPER_BAND[1]:
        warnings.warn(f"LRNT {lrnt} is outside the empirically recommended range "
                      f"[{LRNT_PAPER_BAND[0]}, {LRNT_PAPER_BAND[1]}]", stacklevel=3)


@dataclass
class TrainingSet:
    """Full parameter vectors visited in training: the start, then one per iteration."""

    snapshots: list[np.ndarray] = field(default_factory=list)
    lrnt: float = DEFAULT_LRNT

    def __len__(self) -> int:
        return len(self.snapshots)

    def split(self, part: Partition, use_deltas: bool = False) -> tuple[np.ndarray, np.ndarray]:
        """Features theta_P (optionally with consecutive differences) and targets theta_A."""
        data = np.array(self.snapshots)
        x = data[:, list(part.principal)]
        y = data[:, list(part.auxiliary)]
        if use_deltas:
            x = np.hstack([x[1:], np.diff(x, axis=0)])
            y = y[1:]
        return x, y


def _check_iterations(n_iterations: int, lrnt: float) -> None:
    if n_iterations < 2:
        raise TrainingInsufficientError(
            f"only {n_iterations} full-space iteration(s) before the residue norm reached "
            f"LRNT={lrnt}; use a smaller LRNT")


def record_training(trace: IterationTrace, lrnt: float) -> TrainingSet:
    """Training samples from the full-space prefix of ``trace``.

    The set holds every parameter vector the trajectory visited: the starting
    vector, then the updated vector of each iteration up to and including the
    first one with ``||r|| <= lrnt``.

    Raises:
        TrainingInsufficientError: the crossing happened within one iteration.
    """
    check_lrnt(lrnt)
    ts = TrainingSet(lrnt=lrnt)
    n_iterations = 0
    for record in trace.records:
        if record.mode not in ("conventional", "training") or record.theta is None:
            break
        if not ts.snapshots:
            ts.snapshots.append(record.theta.copy())
        n_iterations += 1
        after = record.theta if record.theta_updated is None else record.theta_updated
        ts.snapshots.append(after.copy())
        if record.residue_norm <= lrnt:
            break
    _check_iterations(n_iterations, lrnt)
    return ts


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> Standardizer:
        x = np.asarray(x, dtype=float)
        return cls(x.mean(axis=0), np.maximum(x.std(axis=0), SCALE_FLOOR))

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.mean) / self.scale

    def inverse_transform(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float) * self.scale + self.mean


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    return np.exp(-gamma * cdist(np.atleast_2d(a), np.atleast_2d(b), "sqeuclidean"))


@dataclass(frozen=True)
class KrrModel:
    alpha: float
    gamma: float
    training_features: np.ndarray  # standardized
    dual_coefficients: np.ndarray  # (n_samples, n_targets)

    @property
    def n_features(self) -> int:
        return self.training_features.shape[1]

    def predict_standardized(self, x: np.ndarray) -> np.ndarray:
        k = rbf_kernel(x, self.training_features, self.gamma)
        return k @ self.dual_coefficients


def fit(x: np.ndarray, y: np.ndarray, alpha: float = DEFAULT_ALPHA, gamma: float | None = None) -> tuple[Standardizer, KrrModel]:
    """Standardize features, then solve (K + alpha I) c = y for all targets at once.

    ``gamma=None`` uses 1 / n_features. Targets stay unscaled.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).reshape(len(x), -1)
    if len(x) < 2:
        raise TrainingInsufficientError("at least two samples are needed to fit")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    scaler = Standardizer.fit(x)
    xs = scaler.transform(x)
    gamma = 1.0 / x.shape[1] if gamma is None else float(gamma)
    k = rbf_kernel(xs, xs, gamma)
    a = k + alpha * np.eye(len(k))
    try:
        coef = scipy.linalg.cho_solve(scipy.linalg.cho_factor(a), y)
    except np.linalg.LinAlgError:
        warnings.warn("Cholesky failed on K + alpha I; falling back to least squares",
                      IllConditionedFitWarning, stacklevel=2)
        coef = scipy.linalg.lstsq(a, y)[0]
    coef = np.ascontiguousarray(coef)
    if len(np.unique(xs, axis=0)) < len(xs):
        warnings.warn("duplicate feature rows in the training set; the regularized solve is ill-conditioned",
                      IllConditionedFitWarning, stacklevel=2)
    if y.size:
        residual = np.linalg.norm(a @ coef - y)
        if residual > SOLVE_RTOL * np.linalg.norm(y):
            warnings.warn(f"kernel ridge solve residual {residual:.2e} exceeds {SOLVE_RTOL:.0e} * |y|",
                          IllConditionedFitWarning, stacklevel=2)
    return scaler, KrrModel(alpha, gamma, np.ascontiguousarray(xs), coef)


def predict(model: KrrModel, scaler: Standardizer, theta_p: np.ndarray) -> np.ndarray:
    theta_p = np.asarray(theta_p, dtype=float)
    if theta_p.shape[-1] != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got {theta_p.shape[-1]}")
    out = model.predict_standardized(scaler.transform(theta_p))
    return out[0] if theta_p.ndim == 1 else out


@dataclass
class MLSettings:
    lrnt: float = DEFAULT_LRNT
    fraction: float = DEFAULT_FRACTION
    alpha: float = DEFAULT_ALPHA
    gamma: float | None = None
    use_deltas: bool = False


@dataclass
class Surrogate:
    """A fitted model plus the partition it maps across."""

    partition: Partition
    scaler: Standardizer
    model: KrrModel
    use_deltas: bool = False

    def predict(self, theta_p: np.ndarray, previous_theta_p: np.ndarray | None = None) -> np.ndarray:
        if self.partition.n_auxiliary == 0:
            return np.zeros(0)
        features = theta_p
        if self.use_deltas:
            prev = theta_p if previous_theta_p is None else previous_theta_p
            features = np.concatenate([theta_p, theta_p - prev])
        return predict(self.model, self.scaler, features)

    def to_dict(self) -> dict:
        return {
            "alpha": self.model.alpha,
            "gamma": self.model.gamma,
            "use_deltas": self.use_deltas,
            "standardizer_mean": self.scaler.mean.tolist(),
            "standardizer_scale": self.scaler.scale.tolist(),
            "training_features": self.model.training_features.tolist(),
            "dual_coefficients": self.model.dual_coefficients.tolist(),
            "fraction": self.partition.fraction,
            "principal": list(self.partition.principal_labels),
            "auxiliary": list(self.partition.auxiliary_labels),
        }

    @classmethod
    def from_dict(cls, data: dict, labels: Sequence[str]) -> Surrogate:
        index = {label: k for k, label in enumerate(labels)}
        part = Partition(tuple(index[s] for s in data["principal"]), tuple(index[s] for s in data["auxiliary"]),
                         data["fraction"], tuple(labels))
        scaler = Standardizer(np.array(data["standardizer_mean"]), np.array(data["standardizer_scale"]))
        n_aux = len(data["auxiliary"])
        coef = np.array(data["dual_coefficients"], dtype=float).reshape(-1, n_aux)
        model = KrrModel(data["alpha"], data["gamma"], np.array(data["training_features"], dtype=float), coef)
        return cls(part, scaler, model, data["use_deltas"])


def train_surrogate(ts: TrainingSet, labels: Sequence[str], settings: MLSettings) -> Surrogate:
    part = partition(ts.snapshots[-1], settings.fraction, labels)
    x, y = ts.split(part, settings.use_deltas)
    if len(x) < 2:
        raise TrainingInsufficientError(f"{len(x)} usable sample(s) after forming differences")
    scaler, model = fit(x, y, settings.alpha, settings.gamma)
    return Surrogate(part, scaler, model, settings.use_deltas)


class MLRun:
    """One ML-PQE trajectory, split into phases so ensembles can share training."""

    def __init__(self, problem: Problem, pool: AnsatzPool, settings: PQESettings | None = None,
                 ml: MLSettings | None = None, perturb: Perturbation | None = None):
        self.ml = ml or MLSettings()
        self.engine = Engine(problem, pool, settings or PQESettings(), perturb)
        self.training = TrainingSet(lrnt=self.ml.lrnt)
        self.surrogate: Surrogate | None = None

    @property
    def trace(self) -> IterationTrace:
        return self.engine.trace

    def train_phase(self, n_iterations: int | None = None) -> TrainingSet:
        """Full-space iterations; stop at the LRNT crossing or after ``n_iterations``."""
        if n_iterations is None:
            check_lrnt(self.ml.lrnt)
        engine = self.engine
        every = list(range(engine.pool.n_par))
        limit = engine.settings.max_iterations if n_iterations is None else n_iterations
        self.training.snapshots = [engine.theta.copy()]
        done = 0
        for _ in range(limit):
            record = engine.step(every, "training")
            done += 1
            if engine.trace.converged:
                break
            self.training.snapshots.append(record.theta_updated.copy())
            if n_iterations is None and record.residue_norm <= self.ml.lrnt:
                break
        if not engine.trace.converged:
            _check_iterations(done, self.ml.lrnt)
        return self.training

    def fit(self) -> Surrogate:
        self.surrogate = train_surrogate(self.training, self.engine.pool.labels, self.ml)
        return self.surrogate

    def reduced_phase(self, surrogate: Surrogate | None = None) -> IterationTrace:
        """Principal-only iterations: predict theta_A, measure r_P, update theta_P."""
        engine = self.engine
        if surrogate is not None:
            self.surrogate = surrogate
        sur = self.surrogate
        part = sur.partition
        p_idx = list(part.principal)
        a_idx = list(part.auxiliary)
        previous = engine.theta[p_idx].copy()
        budget = engine.settings.max_iterations - len(engine.trace.records)
        for _ in range(max(budget, 0)):
            if engine.trace.converged:
                break
            current = engine.theta[p_idx].copy()
            if a_idx:
                engine.theta[a_idx] = sur.predict(current, previous)
            previous = current
            engine.step(p_idx, "reduced")
        return self.finish()

    def finish(self) -> IterationTrace:
        trace = self.engine.finish()
        trace.info["n_training"] = len(self.training)
        if self.surrogate is not None:
            part = self.surrogate.partition
            trace.info["n_principal"] = part.n_principal
            trace.info["n_par"] = part.n_principal + part.n_auxiliary
            trace.info["principal"] = part.principal_labels
        return trace

    def full_residue_norm(self) -> float:
        every = list(range(self.engine.pool.n_par))
        saved = self.engine.theta
        self.engine.theta = self.trace.final_theta.copy()
        try:
            perturb, self.engine.perturb = self.engine.perturb, None
            norm = self.engine.measure(every).norm2
        finally:
            self.engine.theta = saved
            self.engine.perturb = perturb
        return norm


def run_ml_pqe(problem: Problem, pool: AnsatzPool, settings: PQESettings | None = None,
               ml: MLSettings | None = None, perturb: Perturbation | None = None) -> IterationTrace:
    """Training phase, surrogate fit, then reduced iterations to convergence.

    Convergence is declared on the principal (reduced) residue norm; the full
    residue norm at the final parameters is reported in ``trace.info``.
    """
    run = MLRun(problem, pool, settings, ml, perturb)
    run.train_phase()
    if run.trace.converged:
        return run.finish()
    run.fit()
    trace = run.reduced_phase()
    trace.info["full_residue_norm"] = run.full_residue_norm()
    return trace
