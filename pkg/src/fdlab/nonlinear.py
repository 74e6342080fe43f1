"""Monostable reaction-diffusion on the periodic domain.

Below threshold (``f'(0) < mu``) solutions die out; above it every
admissible start converges to one positive periodic solution ``u*``. The
Poincare map ``P_T`` is computed with the order-preserving step count from
:func:`fdlab.solver.monotone_guard`, so its monotonicity and sublinearity
hold for the discrete map as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from .domain import DomainSpec, ReactionSpec, operator_table
from .errors import NoConvergence, ThresholdNotExceeded
from .floquet import FloquetResult, principal_eigenvalue
from .solver import Field, Grid1D, PeriodMap, StepConfig, _as2d, _run


@dataclass
class PeriodicSolution:
    snapshots: list[Field]
    periodicity_residual: float
    floor: float
    iterations: int = 0
    bracket_gap: float = 0.0
    upper_monotone_violation: float = 0.0
    lower_monotone_violation: float = 0.0
    mu: float = math.nan

    @property
    def u0(self) -> np.ndarray:
        return self.snapshots[0].values


@dataclass
class ExtinctionResult:
    rate: float
    expected_rate: float
    sup_norms: np.ndarray
    times: np.ndarray


@dataclass
class ConvergenceResult:
    distances: np.ndarray
    sup_norms: np.ndarray
    times: np.ndarray
    final: np.ndarray
    tail_ratio: float = math.nan

    @property
    def converged(self) -> bool:
        return bool(self.distances[-1] <= 1e-5)


@dataclass
class EnergyResult:
    max_violation: float
    max_violation_continuous: float
    times: np.ndarray = field(repr=False)
    energies: np.ndarray = field(repr=False)


def _cacheable(reaction: ReactionSpec) -> bool:
    return reaction.kind != "custom-monostable"


@lru_cache(maxsize=16)
def _cached_map(spec: DomainSpec, reaction: ReactionSpec, config: StepConfig) -> PeriodMap:
    return PeriodMap(spec, reaction.D, config, reaction=reaction)


def nonlinear_map(spec: DomainSpec, reaction: ReactionSpec, config: StepConfig) -> PeriodMap:
    if _cacheable(reaction):
        return _cached_map(spec, reaction, config)
    return PeriodMap(spec, reaction.D, config, reaction=reaction)


def poincare_map(u0, spec: DomainSpec, reaction: ReactionSpec, config: StepConfig = StepConfig()):
    """Nonlinear evolution over exactly one period.

    Accepts a Field (returns a Field) or an ``M`` / ``M x k`` array (each
    column mapped independently).
    """
    pmap = nonlinear_map(spec, reaction, config)
    if isinstance(u0, Field):
        u = _as2d(u0.values)
        pmap.advance(u)
        return Field(u[:, 0], u0.time + spec.period)
    u = _as2d(u0)
    pmap.advance(u)
    return u[:, 0] if np.ndim(u0) == 1 else u


def _trajectory(pmap: PeriodMap, u: np.ndarray, samples: int) -> list[Field]:
    steps = np.unique(np.round(np.linspace(0, pmap.Nt, samples + 1)).astype(int))
    w = _as2d(u).copy()
    out = [Field(w[:, 0].copy(), 0.0)]
    k = 0
    for s in steps[1:]:
        pmap.advance(w, start=k, nsteps=int(s - k))
        k = int(s)
        out.append(Field(w[:, 0].copy(), k * pmap.dt))
    return out


def find_periodic_solution(spec: DomainSpec, reaction: ReactionSpec, config: StepConfig = StepConfig(),
                           max_iters: int = 4000, tol: float = 1e-6,
                           floquet: Optional[FloquetResult] = None, samples: int = 32) -> PeriodicSolution:
    """Two-sided monotone iteration of ``P_T`` towards ``u*``.

    The upper sequence starts at the supersolution ``K``; the lower one at
    the Floquet eigenfunction scaled to sup ``1e-3 K``. Both are iterated
    together until they agree to ``tol`` in sup-norm; the midpoint is then
    carried through one period to give the snapshots.
    """
    if max_iters < 64:
        raise ValueError("max_iters must be >= 64")
    if floquet is None:
        floquet = principal_eigenvalue(spec, reaction.D, config)
    mu = floquet.mu
    if reaction.fprime0 <= mu + 1e-8 * (1.0 + abs(mu)):
        raise ThresholdNotExceeded(f"f'(0)={reaction.fprime0} does not exceed mu={mu:.10g}")
    pmap = nonlinear_map(spec, reaction, config)
    K = reaction.K
    pair = np.empty((config.M, 2))
    pair[:, 0] = K
    phi0 = floquet.phi0
    pair[:, 1] = 1e-3 * K * phi0 / np.max(phi0)
    up_viol = lo_viol = 0.0
    gap = math.inf
    for it in range(1, max_iters + 1):
        prev = pair.copy()
        pmap.advance(pair)
        up_viol = max(up_viol, float(np.max(pair[:, 0] - prev[:, 0])))
        lo_viol = max(lo_viol, float(np.max(prev[:, 1] - pair[:, 1])))
        gap = float(np.max(np.abs(pair[:, 0] - pair[:, 1])))
        if gap < tol:
            break
    else:
        raise NoConvergence(f"bracket gap {gap:.3e} after {max_iters} periods", max_iters)
    mid = 0.5 * (pair[:, 0] + pair[:, 1])
    snaps = _trajectory(pmap, mid, samples)
    residual = float(np.max(np.abs(snaps[-1].values - snaps[0].values)))
    return PeriodicSolution(snapshots=snaps, periodicity_residual=residual, floor=float(np.min(mid)),
                            iterations=it, bracket_gap=gap, upper_monotone_violation=up_viol,
                            lower_monotone_violation=lo_viol, mu=mu)


def _sine_start(grid: Grid1D, amplitude: float) -> np.ndarray:
    return amplitude * np.sin(np.pi * grid.nodes / grid.L0)


def extinction_experiment(spec: DomainSpec, reaction: ReactionSpec, config: StepConfig = StepConfig(),
                          horizon_periods: int = 40, mu: Optional[float] = None,
                          u0: Optional[np.ndarray] = None) -> ExtinctionResult:
    """Sub-threshold run from ``0.5 K sin(pi xi/L0)``; the log of the sup-norm
    is fitted over the second half of the horizon. ``rate`` is the decay
    rate (positive when the solution dies out)."""
    if mu is None:
        mu = principal_eigenvalue(spec, reaction.D, config).mu
    if not reaction.fprime0 < mu:
        raise ValueError(f"extinction needs f'(0) < mu (f'(0)={reaction.fprime0}, mu={mu:.10g})")
    pmap = nonlinear_map(spec, reaction, config)
    u = _sine_start(pmap.grid, 0.5 * reaction.K) if u0 is None else np.array(u0, dtype=float)
    u = _as2d(u)
    sups = [float(np.max(np.abs(u)))]
    for _ in range(horizon_periods):
        pmap.advance(u)
        sups.append(float(np.max(np.abs(u))))
    sups = np.array(sups)
    times = np.arange(horizon_periods + 1) * spec.period
    return ExtinctionResult(rate=fit_decay_rate(times, sups), expected_rate=mu - reaction.fprime0,
                            sup_norms=sups, times=times)


def fit_decay_rate(times: np.ndarray, sups: np.ndarray) -> float:
    """Least-squares decay rate of ``log sup`` over the second half of the series."""
    times, sups = np.asarray(times, dtype=float), np.asarray(sups, dtype=float)
    keep = (np.arange(times.size) >= (times.size - 1) // 2) & (sups > 0)
    if keep.sum() < 2:
        return math.nan
    return float(-np.polyfit(times[keep], np.log(sups[keep]), 1)[0])


def convergence_experiment(spec: DomainSpec, reaction: ReactionSpec, config: StepConfig, u0,
                           horizon_periods: int = 200, ustar: Optional[np.ndarray] = None) -> ConvergenceResult:
    """Iterate ``P_T`` from ``u0``; distances are sup-norm gaps to ``u*(., 0)``."""
    u0 = np.array(u0.values if isinstance(u0, Field) else u0, dtype=float)
    if np.any(u0 < 0) or np.all(u0 == 0) or np.any(u0 > reaction.K):
        raise ValueError("u0 must lie in [0, K] and not vanish identically")
    if ustar is None:
        ustar = find_periodic_solution(spec, reaction, config).u0
    pmap = nonlinear_map(spec, reaction, config)
    u = _as2d(u0)
    dist = [float(np.max(np.abs(u[:, 0] - ustar)))]
    sups = [float(np.max(u))]
    steps = []
    for _ in range(horizon_periods):
        prev = u[:, 0].copy()
        pmap.advance(u)
        steps.append(float(np.max(np.abs(u[:, 0] - prev))))
        dist.append(float(np.max(np.abs(u[:, 0] - ustar))))
        sups.append(float(np.max(u)))
    return ConvergenceResult(distances=np.array(dist), sup_norms=np.array(sups),
                             times=np.arange(horizon_periods + 1) * spec.period,
                             final=u[:, 0].copy(), tail_ratio=_geometric_ratio(np.array(steps)))


def _geometric_ratio(steps: np.ndarray) -> float:
    """Per-period contraction fitted to the last quarter of the increments
    ``||u_{n+1} - u_n||`` that are still above round-off."""
    idx = np.flatnonzero(steps > 1e-13)
    if idx.size < 2:
        return math.nan
    idx = idx[-max(2, idx.size // 4):]
    return float(np.exp(np.polyfit(idx, np.log(steps[idx]), 1)[0]))


def discrete_dirichlet_eigenvalue(L, M: int):
    """Smallest eigenvalue of the ``M``-point second difference on ``(0, L)``.

    The grid analogue of ``pi^2/L^2``; it sits slightly below it, so it is
    the constant for which the energy bound holds on the grid.
    """
    dx = L / (M + 1)
    return 4.0 / dx**2 * np.sin(np.pi * dx / (2.0 * L)) ** 2


def energy(u: np.ndarray, spec: DomainSpec, t: float) -> float:
    """``1/2 int_{Omega(t)} psi^2 dx`` from reference-grid values."""
    h = spec.L0 / (u.size + 1)
    return 0.5 * spec.L(t) / spec.L0 * h * float(np.dot(u, u))


def energy_diagnostic(spec: DomainSpec, reaction: ReactionSpec, config: StepConfig = StepConfig(),
                      horizon: int = 4, u0: Optional[np.ndarray] = None) -> EnergyResult:
    """Step-by-step check of ``E(t+dt) <= E(t) exp(2 int (f'(0) - D lambda(t)))``.

    ``max_violation`` uses the grid eigenvalue of the moving interval,
    ``max_violation_continuous`` uses ``pi^2/L(t)^2``. Both are relative to
    ``E(t)``.
    """
    if reaction.kind != "linear":
        raise ValueError("energy diagnostic is defined for the linear reaction")
    D, M = reaction.D, config.M
    grid = Grid1D(spec.L0, M)
    dt = spec.period / config.steps_per_period
    n = horizon * config.steps_per_period
    u = (_sine_start(grid, 1.0) if u0 is None else np.array(u0, dtype=float)).reshape(-1, 1)
    times = np.arange(n + 1) * dt
    table = operator_table(spec, D, times[:-1] + config.theta * dt, rate=reaction.fprime0)
    mids = times[:-1] + 0.5 * dt
    quad_t = np.stack([times[:-1], mids, times[1:]])
    lam_h = D * discrete_dirichlet_eigenvalue(spec.L(quad_t), M)
    lam_c = D * np.pi**2 / spec.L(quad_t) ** 2
    simpson = np.array([1.0, 4.0, 1.0])[:, None] / 6.0 * dt
    growth_h = np.exp(2.0 * np.sum(simpson * (reaction.fprime0 - lam_h), axis=0))
    growth_c = np.exp(2.0 * np.sum(simpson * (reaction.fprime0 - lam_c), axis=0))
    energies = np.empty(n + 1)
    energies[0] = energy(u[:, 0], spec, 0.0)
    worst = worst_c = -math.inf
    for k in range(n):
        _run(u, grid.spacing, dt, config.theta, table[k:k + 1])
        energies[k + 1] = energy(u[:, 0], spec, times[k + 1])
        worst = max(worst, (energies[k + 1] - energies[k] * growth_h[k]) / energies[k])
        worst_c = max(worst_c, (energies[k + 1] - energies[k] * growth_c[k]) / energies[k])
    return EnergyResult(max_violation=max(0.0, worst), max_violation_continuous=max(0.0, worst_c),
                        times=times, energies=energies)


def random_admissible_start(grid: Grid1D, K: float, rng: np.random.Generator) -> np.ndarray:
    """Random smooth profile in ``(0, K]`` vanishing at both ends."""
    x = grid.nodes / grid.L0
    weights = rng.uniform(0.0, 1.0, 5)
    weights[0] += 0.1
    shape = sum(w * np.sin((j + 1) * np.pi * x) ** 2 for j, w in enumerate(weights))
    shape = np.sqrt(shape)
    return K * rng.uniform(0.05, 1.0) * shape / np.max(shape)
