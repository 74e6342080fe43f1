"""Orchestration of configured experiments and their artifacts."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import bounds as bnd
from . import nonlinear as nl
from .config import ExperimentConfig
from .errors import ConfigError, FdlError, NoConvergence
from .floquet import principal_eigenvalue
from .report import emit

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_AUDIT, EXIT_NUMERICS = 0, 1, 2, 3

EIGEN_COLUMNS = ("omega", "mu", "rho", "iterations", "residual", "M", "Nt")
TIMESERIES_COLUMNS = ("n", "t", "sup_norm", "distance_to_ustar", "energy")


@dataclass
class RunOutcome:
    exit_code: int
    artifacts: list[Path] = field(default_factory=list)
    summary: dict = field(default_factory=dict)


def _failure(out: Path, kind: str, exc: Exception) -> RunOutcome:
    code = EXIT_NUMERICS if isinstance(exc, FdlError) else EXIT_CONFIG
    report = {"run": kind, "error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, NoConvergence):
        report["iterations"] = exc.iterations
    return RunOutcome(code, [emit(report, "json", out / "error.json")], report)


def run_eigen(cfg: ExperimentConfig, out: Path, refine: int = 0, jobs: Optional[int] = None) -> RunOutcome:
    spec, rx, step = cfg.domain_spec(), cfg.reaction_spec(), cfg.step_config(refine)
    res = principal_eigenvalue(spec, rx.D, step, cfg.numerics.tol, cfg.numerics.max_periods)
    row = res.report_row(spec, step)
    header = ("t", *(f"xi_{i}" for i in range(1, step.M + 1)))
    arts = [
        emit([[row[c] for c in EIGEN_COLUMNS]], "csv", out / "eigen.csv", EIGEN_COLUMNS),
        emit([f.csv_row() for f in res.phi_snapshots], "csv", out / "eigenfunction.csv", header),
    ]
    return RunOutcome(EXIT_OK, arts, row)


def run_bounds(cfg: ExperimentConfig, out: Path, refine: int = 0, jobs: Optional[int] = None) -> RunOutcome:
    spec, rx, step = cfg.domain_spec(), cfg.reaction_spec(), cfg.step_config(refine)
    res = principal_eigenvalue(spec, rx.D, step, cfg.numerics.tol, cfg.numerics.max_periods)
    report = bnd.audit(spec, rx.D, res.mu)
    body = {"omega": spec.omega, **report.to_dict(), "omega_zero_limit": bnd.omega_zero_limit(spec, rx.D),
            "regime": bnd.scaling_regime(spec), "M": step.M, "Nt": res.steps_per_period}
    code = EXIT_OK if report.passed else EXIT_AUDIT
    return RunOutcome(code, [emit(body, "json", out / "bounds.json")], body)


def run_sweep(cfg: ExperimentConfig, out: Path, refine: int = 0, jobs: Optional[int] = None) -> RunOutcome:
    if not cfg.run.omegas:
        raise ConfigError("run.omegas: required for a sweep")
    spec, rx, step = cfg.domain_spec(), cfg.reaction_spec(), cfg.step_config(refine)
    res = bnd.sweep(spec, rx.D, cfg.run.omegas, step, jobs=jobs, tol=cfg.numerics.tol,
                    max_periods=cfg.numerics.max_periods)
    verdict = {
        "monotone": res.monotone,
        "violations": [list(v) for v in res.violations],
        "omega_zero_limit": res.zero_limit,
        "smallest_omega_gap": res.zero_gap,
        "failures": [{"omega": p.omega, "error": p.error} for p in res.failures],
    }
    arts = [
        emit([p.row() for p in res.points], "csv", out / "sweep.csv", bnd.SWEEP_COLUMNS),
        emit(verdict, "json", out / "sweep_verdict.json"),
    ]
    code = EXIT_NUMERICS if res.failures else (EXIT_OK if res.monotone else EXIT_AUDIT)
    return RunOutcome(code, arts, verdict)


def _series_rows(spec, sups, dists, energies):
    return [[n, n * spec.period, s, d, e] for n, (s, d, e) in enumerate(zip(sups, dists, energies))]


def _trajectory(pmap, u0: np.ndarray, periods: int, spec, ustar: Optional[np.ndarray]):
    u = u0.reshape(-1, 1).copy()
    sups, dists, energies = [], [], []
    for n in range(periods + 1):
        if n:
            pmap.advance(u)
        v = u[:, 0]
        sups.append(float(np.max(np.abs(v))))
        dists.append(float(np.max(np.abs(v - ustar))) if ustar is not None else float(np.max(np.abs(v))))
        energies.append(nl.energy(v, spec, 0.0))
    return sups, dists, energies, u[:, 0]


def run_nonlinear(cfg: ExperimentConfig, out: Path, refine: int = 0, jobs: Optional[int] = None) -> RunOutcome:
    spec, rx, step = cfg.domain_spec(), cfg.reaction_spec(), cfg.step_config(refine)
    if rx.kind != "logistic":
        raise ConfigError("reaction.kind: nonlinear runs need a logistic reaction")
    floq = principal_eigenvalue(spec, rx.D, step, cfg.numerics.tol, cfg.numerics.max_periods)
    mu = floq.mu
    pmap = nl.nonlinear_map(spec, rx, step)
    u0 = 0.5 * rx.K * np.sin(np.pi * pmap.grid.nodes / spec.L0)
    verdict = {"mu": mu, "fprime0": rx.fprime0, "K": rx.K, "M": step.M, "Nt": pmap.Nt}

    if rx.fprime0 < mu:
        periods = cfg.run.horizon_periods or 40
        sups, dists, energies, _ = _trajectory(pmap, u0, periods, spec, None)
        rate = nl.fit_decay_rate(np.arange(periods + 1) * spec.period, np.array(sups))
        expected = mu - rx.fprime0
        ok = rate >= expected - 1e-2 and sups[-1] < 1e-3 * sups[0]
        verdict.update(regime="extinction", fitted_rate=rate, expected_rate=expected,
                       final_ratio=sups[-1] / sups[0], passed=bool(ok))
    else:
        sol = nl.find_periodic_solution(spec, rx, step, floquet=floq)
        ustar = sol.u0
        periods = cfg.run.horizon_periods or max(40, 2 * sol.iterations)
        sups, dists, energies, _ = _trajectory(pmap, u0, periods, spec, ustar)
        seeds = cfg.run.seeds if cfg.run.seeds is not None else [0, 1, 2]
        finals, seed_rows = [], []
        for seed in seeds:
            start = nl.random_admissible_start(pmap.grid, rx.K, np.random.default_rng(seed))
            conv = nl.convergence_experiment(spec, rx, step, start, periods, ustar=ustar)
            finals.append(conv.final)
            seed_rows.append({"seed": seed, "final_distance": float(conv.distances[-1]),
                              "tail_ratio": conv.tail_ratio})
        spread = max((float(np.max(np.abs(a - b))) for a in finals for b in finals), default=0.0)
        ok = (sol.periodicity_residual <= 1e-6 and spread <= 2e-6 and dists[-1] <= 1e-5
              and sol.floor > 0 and sol.upper_monotone_violation <= 1e-10
              and sol.lower_monotone_violation <= 1e-10)
        verdict.update(regime="persistence", bracket_iterations=sol.iterations, bracket_gap=sol.bracket_gap,
                       periodicity_residual=sol.periodicity_residual, floor=sol.floor,
                       upper_monotone_violation=sol.upper_monotone_violation,
                       lower_monotone_violation=sol.lower_monotone_violation,
                       final_distance=dists[-1], seeds=seed_rows, seed_spread=spread, passed=bool(ok))
    arts = [
        emit(_series_rows(spec, sups, dists, energies), "csv", out / "timeseries.csv", TIMESERIES_COLUMNS),
        emit(verdict, "json", out / "verdict.json"),
    ]
    return RunOutcome(EXIT_OK if verdict["passed"] else EXIT_AUDIT, arts, verdict)


RUNNERS = {"eigen": run_eigen, "bounds": run_bounds, "sweep": run_sweep, "nonlinear": run_nonlinear}


def execute(kind: str, cfg: ExperimentConfig, out, refine: int = 0, jobs: Optional[int] = None) -> RunOutcome:
    """Run ``kind``; numerical failures become an ``error.json`` and exit 3."""
    out = Path(out)
    try:
        return RUNNERS[kind](cfg, out, refine, jobs)
    except FdlError as exc:
        log.error("%s run failed: %s", kind, exc)
        return _failure(out, kind, exc)
