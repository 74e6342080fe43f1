"""Principal periodic eigenvalue by power iteration on the period map.

The discrete period map ``P`` (one period of the linear theta scheme) is a
positive operator; its spectral radius ``rho`` gives ``mu = -ln(rho)/T`` and
its Perron vector, carried through the period with the factor ``e^{mu t}``,
is the periodic eigenfunction.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .domain import DomainSpec, time_reverse
from .errors import DegenerateState, NoConvergence, SizeExceeded
from .solver import Field, Grid1D, PeriodMap, StepConfig

log = logging.getLogger(__name__)


@dataclass
class FloquetResult:
    mu: float
    phi_snapshots: list[Field]
    growth_factor: float
    iterations: int
    residual: float
    period: float
    log_growth: float = field(default=0.0, repr=False)
    steps_per_period: int = 0

    @property
    def phi0(self) -> np.ndarray:
        return self.phi_snapshots[0].values

    def periodicity_gap(self) -> float:
        return float(np.max(np.abs(self.phi_snapshots[0].values - self.phi_snapshots[-1].values)))

    def report_row(self, spec: DomainSpec, config: StepConfig) -> dict:
        return {
            "omega": spec.omega,
            "mu": self.mu,
            "rho": self.growth_factor,
            "iterations": self.iterations,
            "residual": self.residual,
            "M": config.M,
            "Nt": self.steps_per_period or config.steps_per_period,
        }


def _snapshot_steps(Nt: int, samples: int) -> np.ndarray:
    return np.unique(np.round(np.linspace(0, Nt, samples + 1)).astype(int))


def principal_eigenvalue(spec: DomainSpec, D: float = 1.0, config: StepConfig = StepConfig(),
                         tol: float = 1e-10, max_periods: int = 400, *, form: str = "u",
                         rate: float = 0.0, start: Optional[np.ndarray] = None,
                         samples: int = 64) -> FloquetResult:
    """Power iteration ``v <- P v`` with sup-norm renormalisation each period.

    Stops once the per-period growth factor changes by less than ``tol``
    (relative) with a non-negative iterate, and returns ``mu`` together with ``samples + 1`` eigenfunction
    snapshots spanning ``[0, T]``.
    """
    if max_periods < 16:
        raise ValueError("max_periods must be >= 16")
    if not tol > 0:
        raise ValueError("tol must be positive")
    pmap = PeriodMap(spec, D, config, form=form, rate=rate)
    grid, T = pmap.grid, spec.period
    v = np.sin(np.pi * grid.nodes / spec.L0) if start is None else np.array(start, dtype=float)
    v = (v / np.max(np.abs(v))).reshape(-1, 1)

    prev = None
    residual = math.inf
    for it in range(1, max_periods + 1):
        logscale = pmap.advance(v, renorm=True)
        m = float(np.max(np.abs(v)))
        if not m > 1e-300 or not math.isfinite(m):
            raise DegenerateState(f"iterate collapsed (sup={m:g}) after {it} periods")
        log_rho = logscale + math.log(m)
        v /= m
        if prev is not None:
            residual = abs(math.expm1(log_rho - prev))
            # a settled growth factor only counts once the iterate is a Perron
            # (sign-definite) vector; a sign-changing start can otherwise stall
            # on a higher mode
            if residual < tol and float(np.min(v)) > -1e-10:
                break
        prev = log_rho
    else:
        raise NoConvergence(f"power iteration did not settle in {max_periods} periods "
                            f"(last relative change {residual:.2e})", max_periods)

    mu = -log_rho / T
    steps = _snapshot_steps(pmap.Nt, samples)
    snaps = [v[:, 0].copy()]
    w = v.copy()
    logacc, k = 0.0, 0
    for s in steps[1:]:
        logacc += pmap.advance(w, start=k, nsteps=int(s - k), renorm=True)
        k = int(s)
        t = k * pmap.dt
        snaps.append(w[:, 0] * math.exp(logacc + mu * t))
    scale = float(np.max(snaps[0]))
    phi = [Field(sv / scale, float(s) * pmap.dt) for sv, s in zip(snaps, steps)]
    log.debug("mu=%.12g after %d periods (residual %.2e)", mu, it, residual)
    return FloquetResult(mu=mu, phi_snapshots=phi, growth_factor=math.exp(log_rho), iterations=it,
                         residual=residual, period=T, log_growth=log_rho,
                         steps_per_period=pmap.Nt)


def monodromy_dense(spec: DomainSpec, D: float = 1.0, config: StepConfig = StepConfig(), *,
                    form: str = "u", rate: float = 0.0) -> np.ndarray:
    """The M x M matrix of the discrete period map, one column per basis vector."""
    if config.M > 512:
        raise SizeExceeded(f"dense monodromy limited to M <= 512 (got {config.M})")
    pmap = PeriodMap(spec, D, config, form=form, rate=rate)
    U = np.eye(config.M)
    logscale = pmap.advance(U, renorm=True)
    return U * math.exp(logscale)


def dominant_eigenvalue(matrix: np.ndarray) -> float:
    """Largest-modulus eigenvalue of a (Perron) matrix, returned as a real."""
    eigs = np.linalg.eigvals(matrix)
    lead = eigs[np.argmax(np.abs(eigs))]
    return float(lead.real)


def monodromy_mu(spec: DomainSpec, D: float = 1.0, config: StepConfig = StepConfig(), **kw) -> float:
    return -math.log(dominant_eigenvalue(monodromy_dense(spec, D, config, **kw))) / spec.period


def reversal_check(spec: DomainSpec, D: float = 1.0, config: StepConfig = StepConfig(), **kw):
    """(mu for Omega(t), mu for Omega(-t), relative gap)."""
    plus = principal_eigenvalue(spec, D, config, **kw).mu
    minus = principal_eigenvalue(time_reverse(spec), D, config, **kw).mu
    return plus, minus, abs(plus - minus) / (1.0 + abs(plus))


def pairing_integrals(spec: DomainSpec, D: float = 1.0, config: StepConfig = StepConfig(),
                      samples: int = 16, **kw) -> np.ndarray:
    """``I(t_k) = int psi_+(x, t_k) psi_-(x, -t_k) dx`` at ``t_k = k T/samples``.

    Both eigenfunctions live on the same interval at these times, so the
    integral is taken on the reference grid with Jacobian ``L(t)/L0``.
    """
    if samples < 8:
        raise ValueError("samples must be >= 8")
    if config.steps_per_period % samples:
        raise ValueError("steps_per_period must be a multiple of samples")
    plus = principal_eigenvalue(spec, D, config, samples=samples, **kw)
    minus = principal_eigenvalue(time_reverse(spec), D, config, samples=samples, **kw)
    h = Grid1D(spec.L0, config.M).spacing
    out = np.empty(samples + 1)
    for k in range(samples + 1):
        t = plus.phi_snapshots[k].time
        jac = spec.L(t) / spec.L0
        # psi_- is T-periodic, so psi_-(-t_k) is the snapshot at T - t_k
        out[k] = jac * h * float(np.dot(plus.phi_snapshots[k].values, minus.phi_snapshots[samples - k].values))
    return out


def pairing_invariant(spec: DomainSpec, D: float = 1.0, config: StepConfig = StepConfig(),
                      samples: int = 16, **kw) -> float:
    """Max relative deviation of ``I(t_k)`` from ``I(0)``."""
    values = pairing_integrals(spec, D, config, samples, **kw)
    return float(np.max(np.abs(values - values[0])) / abs(values[0]))


def generic_positive_start(grid: Grid1D) -> np.ndarray:
    """Deterministic positive profile that is not an eigenfunction."""
    x = grid.nodes / grid.L0
    return x * (1.0 - x) * (1.0 + 0.6 * x + 0.3 * np.sin(5.0 * np.pi * x) ** 2)


def linear_growth_check(spec: DomainSpec, D: float, fprime0: float,
                        config: StepConfig = StepConfig(), horizon_periods: int = 16) -> float:
    """Fitted exponential rate of ``||u(nT)||_inf`` for ``u_t = L u + f'(0) u``.

    Least squares over the second half of the horizon; compare with
    ``f'(0) - mu``.
    """
    if horizon_periods < 8:
        raise ValueError("horizon_periods must be >= 8")
    pmap = PeriodMap(spec, D, config, rate=fprime0)
    u = generic_positive_start(pmap.grid).reshape(-1, 1)
    logs = [math.log(float(np.max(np.abs(u))))]
    acc = logs[0]
    for _ in range(horizon_periods):
        acc += pmap.advance(u, renorm=True)
        m = float(np.max(np.abs(u)))
        acc += math.log(m)
        u /= m
        logs.append(acc)
    n = np.arange(horizon_periods + 1)
    keep = n >= horizon_periods // 2
    slope = np.polyfit(n[keep] * spec.period, np.array(logs)[keep], 1)[0]
    return float(slope)
