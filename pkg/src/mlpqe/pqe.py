"""Projective quantum eigensolver: residues, energies and the quasi-Newton loop."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .accounting import GateLedger
from .ansatz import AnsatzPool, generate_pool, init_params_mp2, mp2_screen
from .integrals import (
    MolecularIntegrals,
    SpinOrbitalBasis,
    hf_energy,
    load_fcidump,
    mp2_amplitudes,
    orbital_energies,
)
from .pauli import PauliSum, hamiltonian_from_integrals, one_norm
from .statevector import Simulator

DEFAULT_THRESHOLD = 1e-5
DEFAULT_MAX_ITERATIONS = 200
_IMAG_TOL = 1e-10
_PROBE_ANGLE = math.pi / 4


@dataclass(frozen=True)
class ResidueVector:
    labels: tuple[str, ...]
    values: np.ndarray
    energy: float | None = None  # E_0 measured alongside, when available

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def norm2(self) -> float:
        return float(np.linalg.norm(self.values))

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.labels, self.values.tolist()))

    def __len__(self) -> int:
        return len(self.labels)


class Problem:
    """Everything fixed by the molecule: integrals, H, reference, simulator."""

    def __init__(self, ints: MolecularIntegrals, name: str = ""):
        self.name = name
        self.ints = ints
        self.basis: SpinOrbitalBasis = orbital_energies(ints)
        self.hamiltonian: PauliSum = hamiltonian_from_integrals(ints, self.basis)
        self.reference = self.basis.reference_mask
        self.simulator = Simulator(self.hamiltonian, ints.n_electrons)

    @classmethod
    def from_fcidump(cls, path: str | Path) -> Problem:
        return cls(load_fcidump(path), name=Path(path).stem)

    @cached_property
    def t2(self) -> dict:
        return mp2_amplitudes(self.basis, self.ints)

    @cached_property
    def fci_energy(self) -> float:
        return self.simulator.ground_energy()

    @cached_property
    def hf_energy(self) -> float:
        return hf_energy(self.ints)

    @cached_property
    def one_norm(self) -> float:
        return one_norm(self.hamiltonian)

    @property
    def phi0(self) -> np.ndarray:
        return self.simulator.basis_state(self.reference)

    def build_pool(self, max_rank: int = 2, mp2_cutoff: float = 1e-5) -> AnsatzPool:
        """MP2-screened, MP2-initialised pool."""
        pool = generate_pool(self.basis, max_rank)
        pool = mp2_screen(pool, self.t2, mp2_cutoff)
        return init_params_mp2(pool, self.t2)


def _resolve(h: PauliSum | Simulator | Problem, phi0) -> tuple[Simulator, np.ndarray, int]:
    """Normalise (h, phi0) to a simulator, a compressed reference state and its mask."""
    if isinstance(h, Problem):
        sim = h.simulator
    elif isinstance(h, Simulator):
        sim = h
    else:
        sim = None
    if isinstance(phi0, (int, np.integer)):
        det = int(phi0)
    else:
        phi0 = np.asarray(phi0)
        support = np.flatnonzero(np.abs(phi0) > 1e-12)
        if len(support) != 1:
            raise ValueError("reference must be a single determinant")
        det = int(support[0]) if sim is None or phi0.shape[-1] != sim.dim else int(sim.sector[support[0]])
    if sim is None:
        sim = Simulator(h, det.bit_count())
    return sim, sim.basis_state(det), det


def _subset_indices(pool: AnsatzPool, subset: Sequence[str] | None) -> list[int]:
    if subset is None:
        return list(range(pool.n_par))
    lookup = {label: k for k, label in enumerate(pool.labels)}
    missing = [s for s in subset if s not in lookup]
    if missing:
        raise KeyError(f"labels not in pool: {missing}")
    return [lookup[s] for s in subset]


def _real(values: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(values):
        if np.any(np.abs(values.imag) > _IMAG_TOL):
            raise ArithmeticError("residue acquired an imaginary part")
        values = values.real
    return np.asarray(values, dtype=float)


def energy(pool: AnsatzPool, h: PauliSum | Simulator | Problem, phi0) -> float:
    sim, psi0, _ = _resolve(h, phi0)
    return sim.expectation(sim.apply_ansatz(psi0, pool.operators, pool.theta))


def residue_direct(pool: AnsatzPool, h, phi0, subset: Sequence[str] | None = None) -> ResidueVector:
    """r_mu = <Phi_mu| U^dagger H U |Phi_0> read off one U^dagger H U |Phi_0>."""
    sim, psi0, _ = _resolve(h, phi0)
    idx = _subset_indices(pool, subset)
    psi = sim.apply_ansatz(psi0, pool.operators, pool.theta)
    hpsi = sim.apply_hamiltonian(psi)
    e0 = float(np.real(np.vdot(psi, hpsi)))
    hbar = sim.apply_ansatz(hpsi, pool.operators, pool.theta, adjoint=True)
    ops = [pool.operators[k] for k in idx]
    positions = [sim.position(op.target) for op in ops]
    values = np.array([op.phase for op in ops]) * hbar[positions] if ops else np.zeros(0)
    return ResidueVector(tuple(op.label for op in ops), _real(np.asarray(values)), e0)


def residue_probes(pool: AnsatzPool, sim: Simulator, psi0: np.ndarray, idx: Sequence[int]) -> np.ndarray:
    """Batch [Phi_0, Omega_mu(pi/4)..., Phi_mu...] before the ansatz is applied."""
    n = len(idx)
    probes = np.zeros((1 + 2 * n, sim.dim), dtype=psi0.dtype)
    probes[0] = psi0
    for row, k in enumerate(idx, start=1):
        op = pool.operators[k]
        omega = np.array(psi0, copy=True)
        sim.rotation(op.label, op.kappa_image).apply_(omega, _PROBE_ANGLE)
        probes[row] = omega
        probes[row + n, sim.position(op.target)] = op.phase
    return probes


def residue_diagonal(pool: AnsatzPool, h, phi0, subset: Sequence[str] | None = None) -> ResidueVector:
    """r_mu = <Omega_mu|Hbar|Omega_mu> - E_mu/2 - E_0/2 from three expectation values."""
    sim, psi0, _ = _resolve(h, phi0)
    idx = _subset_indices(pool, subset)
    n = len(idx)
    states = sim.apply_ansatz(residue_probes(pool, sim, psi0, idx), pool.operators, pool.theta)
    energies = np.atleast_1d(sim.expectation(states))
    e0 = float(energies[0])
    values = energies[1:n + 1] - 0.5 * energies[n + 1:] - 0.5 * e0
    return ResidueVector(tuple(pool.operators[k].label for k in idx), values, e0)


def quasi_newton_step(
    theta: Mapping[str, float], residues: ResidueVector, denominators: Mapping[str, float]
) -> dict[str, float]:
    """theta_mu + r_mu / D_mu for every label in ``residues``; others untouched."""
    out = dict(theta)
    for label, r in zip(residues.labels, residues.values):
        if label not in out:
            raise KeyError(f"residue label {label!r} has no parameter")
        d = denominators[label]
        if d == 0:
            raise ZeroDivisionError(f"zero denominator for {label!r}")
        out[label] = out[label] + float(r) / d
    return out


@dataclass
class PQESettings:
    threshold: float = DEFAULT_THRESHOLD
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    residue_method: str = "diagonal"  # or "direct"
    epsilon_res: float | None = None  # measurement-bound precision; defaults to threshold

    def __post_init__(self):
        if self.threshold <= 0 or self.max_iterations < 1:
            raise ValueError("threshold must be positive and max_iterations >= 1")
        if self.residue_method not in ("diagonal", "direct"):
            raise ValueError(f"unknown residue method {self.residue_method!r}")

    @property
    def bound_precision(self) -> float:
        return self.threshold if self.epsilon_res is None else self.epsilon_res


@dataclass
class IterationRecord:
    k: int
    mode: str  # conventional | training | reduced
    theta: np.ndarray | None
    residue_norm: float
    energy: float
    cost: dict
    theta_updated: np.ndarray | None = None


@dataclass
class IterationTrace:
    labels: tuple[str, ...]
    records: list[IterationRecord] = field(default_factory=list)
    converged: bool = False
    final_theta: np.ndarray | None = None
    final_energy: float | None = None
    diagnostic: str = ""
    info: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def energies(self) -> np.ndarray:
        return np.array([r.energy for r in self.records])

    @property
    def residue_norms(self) -> np.ndarray:
        return np.array([r.residue_norm for r in self.records])

    def count(self, mode: str) -> int:
        return sum(1 for r in self.records if r.mode == mode)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["k", "mode", "energy", "residue_norm", "n_residues_measured",
                         "cx_cumulative", "measurements_bound_cumulative"])
        for r in self.records:
            writer.writerow([r.k, r.mode, repr(r.energy), repr(r.residue_norm), r.cost["n_residues_measured"],
                             r.cost["cx_cumulative"], math.ceil(r.cost["measurement_bound_cumulative"])])
        return buf.getvalue()

    def to_json(self, include_theta: bool = True) -> str:
        def rec(r: IterationRecord) -> dict:
            d = {
                "k": r.k, "mode": r.mode, "energy": r.energy, "residue_norm": r.residue_norm,
                "cx": r.cost["cx"], "cx_cumulative": r.cost["cx_cumulative"],
                "n_residues_measured": r.cost["n_residues_measured"],
                "measurement_bound": str(r.cost["measurement_bound"]),
                "measurement_bound_cumulative": str(r.cost["measurement_bound_cumulative"]),
            }
            if include_theta and r.theta is not None:
                d["theta"] = r.theta.tolist()
            return d

        payload = {
            "labels": list(self.labels),
            "converged": self.converged,
            "final_energy": self.final_energy,
            "final_theta": None if self.final_theta is None else self.final_theta.tolist(),
            "diagnostic": self.diagnostic,
            "info": self.info,
            "records": [rec(r) for r in self.records],
        }
        return json.dumps(payload, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> IterationTrace:
        from fractions import Fraction

        data = json.loads(text)
        records = [
            IterationRecord(
                k=d["k"], mode=d["mode"], residue_norm=d["residue_norm"], energy=d["energy"],
                theta=np.array(d["theta"]) if "theta" in d else None,
                cost={
                    "cx": d["cx"], "cx_cumulative": d["cx_cumulative"],
                    "n_residues_measured": d["n_residues_measured"],
                    "measurement_bound": Fraction(d["measurement_bound"]),
                    "measurement_bound_cumulative": Fraction(d["measurement_bound_cumulative"]),
                },
            )
            for d in data["records"]
        ]
        final = data["final_theta"]
        return cls(tuple(data["labels"]), records, data["converged"],
                   None if final is None else np.array(final), data["final_energy"],
                   data["diagnostic"], data["info"])


Perturbation = Callable[[ResidueVector], ResidueVector]


class Engine:
    """Mutable state of one solver run: parameters, trace and gate ledger."""

    def __init__(self, problem: Problem, pool: AnsatzPool, settings: PQESettings,
                 perturb: Perturbation | None = None):
        self.problem = problem
        self.pool = pool
        self.settings = settings
        self.perturb = perturb
        self.theta = np.array(pool.theta, dtype=float)
        self.denominators = pool.denominators
        self.psi0 = problem.phi0
        self.trace = IterationTrace(tuple(pool.labels))
        self.ledger = GateLedger(problem.one_norm, settings.bound_precision)

    def measure(self, idx: Sequence[int]) -> ResidueVector:
        pool = self.pool.with_theta(self.theta)
        subset = [pool.operators[k].label for k in idx]
        sim = self.problem.simulator
        if self.settings.residue_method == "diagonal":
            res = residue_diagonal(pool, sim, self.problem.reference, subset)
        else:
            res = residue_direct(pool, sim, self.problem.reference, subset)
        if self.perturb is not None:
            res = self.perturb(res)
        return res

    def step(self, idx: Sequence[int], mode: str) -> IterationRecord:
        """Measure residues on ``idx``, record, and update those parameters unless converged."""
        res = self.measure(idx)
        cost = self.ledger.record(self.pool.operators, res.labels)
        record = IterationRecord(len(self.trace.records), mode, self.theta.copy(), res.norm2, res.energy, cost)
        self.trace.records.append(record)
        if res.norm2 < self.settings.threshold:
            self.trace.converged = True
        else:
            idx = np.asarray(idx, dtype=int)
            self.theta[idx] = self.theta[idx] + res.values / self.denominators[idx]
            record.theta_updated = self.theta.copy()
        return record

    def finish(self) -> IterationTrace:
        trace = self.trace
        last = trace.records[-1]
        trace.final_theta = last.theta.copy()
        trace.final_energy = last.energy
        if not trace.converged:
            trace.diagnostic = (
                f"not converged after {len(trace.records)} iterations; "
                f"last residue norm {last.residue_norm:.3e} >= {self.settings.threshold:.1e}"
            )
        return trace


def run_conventional(problem: Problem, pool: AnsatzPool, settings: PQESettings | None = None,
                     perturb: Perturbation | None = None) -> IterationTrace:
    """Full-space quasi-Newton iterations until ||r|| < threshold or max_iterations."""
    settings = settings or PQESettings()
    engine = Engine(problem, pool, settings, perturb)
    every = list(range(pool.n_par))
    for _ in range(settings.max_iterations):
        engine.step(every, "conventional")
        if engine.trace.converged:
            break
    return engine.finish()
