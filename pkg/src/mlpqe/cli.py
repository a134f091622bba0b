"""Command-line entry point: ``mlpqe run|compare|noise-sweep|report``.

Configuration comes from an optional ``key = value`` file (values are JSON
literals, ``#`` starts a comment) with command-line flags taking precedence.
Relative output directories are placed under ``$MLPQE_OUTPUT_ROOT`` when set.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import os
import sys
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import FIXTURES, fixture_path
from .analysis import distance_matrix, energy_error, series_csv, top_fraction_labels, wavefunction_error
from .integrals import FcidumpError
from .noise import NoiseSpec, perturbation, run_ml_replicas, run_replicas
from .pqe import IterationTrace, PQESettings, Problem, run_conventional
from .surrogate import MLRun, MLSettings, TrainingInsufficientError

OUTPUT_ROOT_ENV = "MLPQE_OUTPUT_ROOT"
EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED, EXIT_TRAINING = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    fcidump_path: str = "h2"
    max_rank: int = 2
    mp2_cutoff: float = 1e-5
    threshold: float = 1e-5
    max_iterations: int = 200
    residue_method: str = "diagonal"
    lrnt: float = 0.007
    fraction: float = 0.20
    alpha: float = 1e-10
    gamma: float | None = None  # None: 1 / n_P
    features: str = "theta_p"  # or theta_p_plus_delta
    sigma: float = 0.0
    seed: int = 0
    replicas: int = 50
    mode: str = "both"  # conventional | ml | both
    output_dir: str = "mlpqe-output"
    dump_theta: bool = False
    geometries: list = field(default_factory=list)
    sigmas: list = field(default_factory=lambda: [1e-5, 1e-4, 1e-3])
    alpha_schedule: dict = field(default_factory=dict)  # sigma (as written) -> alpha
    noise_iterations: int = 100

    def validate(self) -> None:
        if not 1 <= self.max_rank <= 4:
            raise ConfigError("max_rank must be 1..4")
        for name in ("threshold", "lrnt", "alpha"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.mp2_cutoff < 0:
            raise ConfigError("mp2_cutoff must be non-negative")
        if not 0 < self.fraction < 1:
            raise ConfigError("fraction must lie in (0, 1)")
        if self.features not in ("theta_p", "theta_p_plus_delta"):
            raise ConfigError("features must be theta_p or theta_p_plus_delta")
        if self.mode not in ("conventional", "ml", "both"):
            raise ConfigError("mode must be conventional, ml or both")
        if self.residue_method not in ("diagonal", "direct"):
            raise ConfigError("residue_method must be diagonal or direct")
        if self.sigma < 0 or self.replicas < 1:
            raise ConfigError("sigma must be >= 0 and replicas >= 1")

    @property
    def pqe_settings(self) -> PQESettings:
        return PQESettings(self.threshold, self.max_iterations, self.residue_method)

    def ml_settings(self, alpha: float | None = None) -> MLSettings:
        return MLSettings(self.lrnt, self.fraction, self.alpha if alpha is None else alpha, self.gamma,
                          self.features == "theta_p_plus_delta")

    def alpha_for(self, sigma: float) -> float:
        for key, value in self.alpha_schedule.items():
            if math.isclose(float(key), sigma, rel_tol=1e-12):
                return float(value)
        return self.alpha


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def parse_config_text(text: str) -> dict:
    """``key = value`` lines with JSON-literal values."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value  # bare strings such as paths
    return out


def build_config(file_values: dict, overrides: dict) -> RunConfig:
    values = {**file_values, **{k: v for k, v in overrides.items() if v is not None}}
    try:
        cfg = RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    cfg.validate()
    return cfg


def resolve_fcidump(name: str) -> Path:
    path = Path(name)
    if path.exists():
        return path
    if name in FIXTURES:
        return fixture_path(name)
    raise FileNotFoundError(f"FCIDUMP not found: {name} (bundled fixtures: {', '.join(FIXTURES)})")


def resolve_output(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not out.is_absolute():
        out = Path(root) / out
    return out


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _dump_json(payload) -> str:
    return json.dumps(payload, indent=1, sort_keys=True) + "\n"


def _cost_summary(trace: IterationTrace) -> dict:
    last = trace.records[-1].cost
    return {
        "cx_cumulative": last["cx_cumulative"],
        "measurement_bound_cumulative": str(last["measurement_bound_cumulative"]),
        "measurement_bound_cumulative_ceil": math.ceil(last["measurement_bound_cumulative"]),
    }


def _phase_costs(trace: IterationTrace) -> dict:
    out = {}
    for mode in ("training", "reduced"):
        recs = [r for r in trace.records if r.mode == mode]
        if recs:
            out[f"{mode}_cx_per_iteration"] = recs[-1].cost["cx"]
            out[f"{mode}_measurement_bound_per_iteration"] = str(recs[-1].cost["measurement_bound"])
    return out


def execute_run(cfg: RunConfig, out: Path | None = None) -> tuple[dict, int]:
    """Solve one geometry and write its artifacts; returns (summary, exit status)."""
    path = resolve_fcidump(cfg.fcidump_path)
    problem = Problem.from_fcidump(path)
    pool = problem.build_pool(cfg.max_rank, cfg.mp2_cutoff)
    summary: dict = {
        "fixture": problem.name,
        "n_par": pool.n_par,
        "e_fci": problem.fci_energy,
        "e_hf": problem.hf_energy,
        "one_norm": problem.one_norm,
        "config": {k: v for k, v in dataclasses.asdict(cfg).items() if k != "output_dir"},
    }
    status = EXIT_OK
    traces: dict[str, IterationTrace] = {}
    spec = NoiseSpec(cfg.sigma, cfg.seed, 1)
    if cfg.mode in ("conventional", "both"):
        conv = run_conventional(problem, pool, cfg.pqe_settings, perturbation(spec, 0))
        traces["conventional"] = conv
        summary["conventional"] = {
            "energy": conv.final_energy, "error_vs_fci": conv.final_energy - problem.fci_energy,
            "iterations": len(conv), "converged": conv.converged, "diagnostic": conv.diagnostic,
            **_cost_summary(conv),
        }
        if not conv.converged:
            status = EXIT_NOT_CONVERGED
    if cfg.mode in ("ml", "both"):
        run = MLRun(problem, pool, cfg.pqe_settings, cfg.ml_settings(), perturbation(spec, 0))
        run.train_phase()
        if not run.trace.converged:
            run.fit()
            ml = run.reduced_phase()
            ml.info["full_residue_norm"] = run.full_residue_norm()
        else:
            ml = run.finish()
        traces["ml"] = ml
        part = run.surrogate.partition if run.surrogate else None
        summary["ml"] = {
            "energy": ml.final_energy, "error_vs_fci": ml.final_energy - problem.fci_energy,
            "iterations": len(ml), "training_iterations": ml.count("training"),
            "reduced_iterations": ml.count("reduced"), "training_samples": len(run.training),
            "converged": ml.converged, "diagnostic": ml.diagnostic,
            "full_residue_norm": ml.info.get("full_residue_norm"),
            "n_principal": part.n_principal if part else None,
            "principal_fraction": str(Fraction(part.n_principal, pool.n_par)) if part else None,
            **_cost_summary(ml), **_phase_costs(ml),
        }
        if run.surrogate is not None and out is not None:
            _write(out / "model.json", _dump_json(run.surrogate.to_dict()))
        if not ml.converged:
            status = EXIT_NOT_CONVERGED
    if "conventional" in summary and "ml" in summary:
        summary["ml_minus_conventional"] = summary["ml"]["energy"] - summary["conventional"]["energy"]
    if out is not None:
        for mode, trace in traces.items():
            _write(out / f"{mode}_trace.csv", trace.to_csv())
            _write(out / f"{mode}_trace.json", trace.to_json(include_theta=cfg.dump_theta) + "\n")
        _write(out / "summary.json", _dump_json(summary))
    return summary, status


def cmd_run(cfg: RunConfig) -> int:
    out = resolve_output(cfg)
    summary, status = execute_run(cfg, out)
    print(json.dumps({k: summary[k] for k in summary if k != "config"}, indent=1, sort_keys=True))
    print(f"artifacts written to {out}")
    return status


def cmd_compare(cfg: RunConfig) -> int:
    geometries = cfg.geometries or [cfg.fcidump_path]
    out = resolve_output(cfg)
    rows, status = [], EXIT_OK
    for geometry in geometries:
        sub = dataclasses.replace(cfg, fcidump_path=geometry, mode="both")
        try:
            summary, _ = execute_run(sub, out / Path(geometry).stem)
        except (FcidumpError, FileNotFoundError, TrainingInsufficientError) as exc:
            print(f"{geometry}: {exc}", file=sys.stderr)
            status = EXIT_INPUT
            continue
        c, m = summary["conventional"], summary["ml"]
        rows.append([summary["fixture"], repr(c["energy"]), repr(m["energy"]), repr(m["energy"] - c["energy"]),
                     m["training_samples"], m["iterations"], c["iterations"]])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["geometry", "e_conventional", "e_ml", "difference", "training_samples",
                     "ml_iterations", "conventional_iterations"])
    writer.writerows(rows)
    _write(out / "compare.csv", buf.getvalue())
    print(buf.getvalue(), end="")
    return status


def _sigma_tag(sigma: float) -> str:
    return f"{sigma:.0e}".replace("+", "")


def cmd_noise_sweep(cfg: RunConfig) -> int:
    path = resolve_fcidump(cfg.fcidump_path)
    problem = Problem.from_fcidump(path)
    pool = problem.build_pool(cfg.max_rank, cfg.mp2_cutoff)
    settings = dataclasses.replace(cfg.pqe_settings, max_iterations=cfg.noise_iterations)
    theta_ref = run_conventional(problem, pool, cfg.pqe_settings).final_theta
    out = resolve_output(cfg)
    table = {}
    for sigma in cfg.sigmas:
        spec = NoiseSpec(float(sigma), cfg.seed, cfg.replicas)
        alpha = cfg.alpha_for(float(sigma))
        tag = _sigma_tag(float(sigma))
        row = {"alpha": alpha}
        if cfg.mode in ("conventional", "both"):
            conv = run_replicas(problem, pool, spec, settings, theta_ref=theta_ref)
            _write(out / f"conventional_sigma_{tag}.csv", conv.to_csv())
            row["conventional_plateau"] = conv.plateau()
        if cfg.mode in ("ml", "both"):
            ml, surrogate = run_ml_replicas(problem, pool, spec, settings, cfg.ml_settings(alpha), theta_ref=theta_ref)
            _write(out / f"ml_sigma_{tag}.csv", ml.to_csv())
            row["ml_plateau"] = ml.plateau()
            row["training_samples"] = len(surrogate.model.training_features)
        table[repr(float(sigma))] = row
        print(f"sigma={sigma}: " + ", ".join(f"{k}={v:.3e}" if isinstance(v, float) else f"{k}={v}"
                                             for k, v in row.items()))
    _write(out / "noise_summary.json", _dump_json({"fixture": problem.name, "sigmas": table}))
    return EXIT_OK


def cmd_report(cfg: RunConfig, run_dir: Path) -> int:
    """Distance matrices and error series from a finished run directory."""
    summary = json.loads((run_dir / "summary.json").read_text())
    theta_ref = None
    for mode in ("conventional", "ml"):
        path = run_dir / f"{mode}_trace.json"
        if not path.exists():
            continue
        trace = IterationTrace.from_json(path.read_text())
        _write(run_dir / f"{mode}_energy_error.csv", series_csv(energy_error(trace, summary["e_fci"])))
        if any(r.theta is None for r in trace.records):
            print(f"{mode}: no parameter snapshots (rerun with --dump-theta) - skipping matrices", file=sys.stderr)
            continue
        if mode == "conventional":
            theta_ref = trace.final_theta
            full = distance_matrix(trace)
            top = distance_matrix(trace, top_fraction_labels(trace, cfg.fraction))
            _write(run_dir / "distance_full.csv", full.to_csv(log10=True))
            _write(run_dir / "distance_top.csv", top.to_csv(log10=True))
            print(f"relative Frobenius difference (top {cfg.fraction:.0%} vs all): {full.relative_difference(top):.4f}")
        if theta_ref is not None:
            _write(run_dir / f"{mode}_wf_error.csv", series_csv(wavefunction_error(trace, theta_ref)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mlpqe", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", type=Path, help="key = value file with JSON-literal values")
        p.add_argument("--fcidump", dest="fcidump_path", help="FCIDUMP path or bundled fixture name")
        p.add_argument("--max-rank", type=int)
        p.add_argument("--mp2-cutoff", type=float)
        p.add_argument("--threshold", type=float)
        p.add_argument("--max-iterations", type=int)
        p.add_argument("--residue-method", choices=["diagonal", "direct"])
        p.add_argument("--lrnt", type=float)
        p.add_argument("--fraction", type=float)
        p.add_argument("--alpha", type=float)
        p.add_argument("--gamma", type=float)
        p.add_argument("--features", choices=["theta_p", "theta_p_plus_delta"])
        p.add_argument("--sigma", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--replicas", type=int)
        p.add_argument("--mode", choices=["conventional", "ml", "both"])
        p.add_argument("--output-dir")
        p.add_argument("--dump-theta", action="store_true", default=None)
        p.add_argument("-v", "--verbose", action="store_true")

    common(sub.add_parser("run", help="solve one geometry"))
    p = sub.add_parser("compare", help="conventional vs ML-PQE over several geometries")
    common(p)
    p.add_argument("--geometries", nargs="+")
    p = sub.add_parser("noise-sweep", help="replica ensembles at several noise levels")
    common(p)
    p.add_argument("--sigmas", nargs="+", type=float)
    p.add_argument("--alpha-schedule", type=json.loads, help='JSON object, e.g. {"1e-4": 1e-6}')
    p.add_argument("--noise-iterations", type=int)
    p = sub.add_parser("report", help="distance matrices and error series for a run directory")
    common(p)
    p.add_argument("run_dir", type=Path)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    overrides = {k: v for k, v in vars(args).items() if k in _FIELDS}
    try:
        file_values = parse_config_text(args.config.read_text()) if args.config else {}
        cfg = build_config(file_values, overrides)
        with warnings.catch_warnings():
            if not args.verbose:
                warnings.simplefilter("ignore", RuntimeWarning)
            if args.command == "run":
                return cmd_run(cfg)
            if args.command == "compare":
                return cmd_compare(cfg)
            if args.command == "noise-sweep":
                return cmd_noise_sweep(cfg)
            return cmd_report(cfg, args.run_dir)
    except (ConfigError, FcidumpError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except TrainingInsufficientError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRAINING


if __name__ == "__main__":
    sys.exit(main())
