"""Closed-form bounds, limits and scaling laws for the periodic eigenvalue.

All period averages are taken in the phase variable ``s = t/T`` so that
``avg g(t) = int_0^1 g(sT) ds``.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .domain import DomainSpec, mean_adot_sq_over_4d
from .errors import FdlError
from .floquet import principal_eigenvalue
from .periodic import (TWO_PI, derivative1, derivative2, kink_quadrature, periodic_extremum,
                       periodic_quadrature, value)
from .solver import StepConfig

log = logging.getLogger(__name__)

PI2 = math.pi**2


def _slack(mu: float) -> float:
    return 1e-6 * (1.0 + abs(mu))


@dataclass
class BoundFlag:
    passed: bool
    margin: float

    def __post_init__(self):
        self.passed = bool(self.passed)
        self.margin = float(self.margin)


@dataclass
class BoundsReport:
    mu_computed: float
    lower_avg: float
    upper_inclusion: Optional[float]
    q_lower: float
    q_upper: float
    scaling_lower: float
    scaling_upper: float
    flags: dict[str, BoundFlag] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(f.passed for f in self.flags.values())

    def to_dict(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        return out


@dataclass(frozen=True)
class AsymptoticConstants:
    c1: float
    c2: float
    c3: float
    c4: float
    c5: float
    c6: float

    def __post_init__(self):
        vals = (self.c1, self.c2, self.c3, self.c4, self.c5, self.c6)
        if not all(math.isfinite(c) and c >= -1e-12 for c in vals):
            raise ValueError(f"asymptotic constants must be finite and non-negative: {vals}")


def lower_bound_average(spec: DomainSpec, D: float = 1.0) -> float:
    """Period average of ``D pi^2 / L(t)^2``."""
    return D * PI2 / spec.L0**2 * periodic_quadrature(lambda s: value(spec.l, s) ** -2, 1024)


def upper_bound_inclusion(spec: DomainSpec, D: float = 1.0) -> Optional[float]:
    """``D pi^2 / width^2`` for the largest fixed interval inside every ``Omega(t)``,
    or None when the intervals have no common part."""
    lo = periodic_extremum(lambda s: spec.A0 * value(spec.a, s), "max")
    hi = periodic_extremum(lambda s: spec.A0 * value(spec.a, s) + spec.L0 * value(spec.l, s), "min")
    width = hi - lo
    if not width > 0:
        return None
    return D * PI2 / width**2


def _accel(spec: DomainSpec, s):
    """(Lddot L, Addot L) at phase ``s``."""
    f2 = (spec.omega / TWO_PI) ** 2
    L = spec.L0 * value(spec.l, s)
    return spec.L0 * derivative2(spec.l, s) * f2 * L, spec.A0 * derivative2(spec.a, s) * f2 * L


def _q_extremes(p, r):
    """Max and min over ``eta in [0, 1]`` of ``eta^2 p/2 + eta r``."""
    p, r = np.broadcast_arrays(np.asarray(p, dtype=float), np.asarray(r, dtype=float))
    one = 0.5 * p + r
    qmax = np.maximum(0.0, one)
    qmin = np.minimum(0.0, one)
    with np.errstate(divide="ignore", invalid="ignore"):
        eta = np.where(p != 0.0, -r / p, -1.0)
    inside = (eta > 0.0) & (eta < 1.0)
    vertex = np.where(inside, 0.5 * p * eta**2 + r * eta, 0.0)
    qmax = np.where(inside, np.maximum(qmax, vertex), qmax)
    qmin = np.where(inside, np.minimum(qmin, vertex), qmin)
    return qmax, qmin


def q_envelopes(spec: DomainSpec, t):
    """``(Q_bar, Q_under)`` at time ``t``: ``max q`` and ``-min q`` over the
    relative position ``eta in [0, 1]`` of the acceleration potential."""
    p, r = _accel(spec, spec.phase(t))
    qmax, qmin = _q_extremes(p, r)
    if np.ndim(qmax) == 0:
        return float(qmax), float(-qmin)
    return qmax, -qmin


def q_bounds(spec: DomainSpec, D: float = 1.0) -> tuple[float, float]:
    """Two-sided window on ``mu`` from the pointwise envelopes."""
    base = lower_bound_average(spec, D) + mean_adot_sq_over_4d(spec, D)
    if spec.is_fixed:
        return base, base

    def p_of(s):
        return _accel(spec, s)[0]

    def r_of(s):
        return _accel(spec, s)[1]

    # the envelopes switch branch where q(1), the vertex position or p vanish
    kinks = (lambda s: 0.5 * p_of(s) + r_of(s), r_of, lambda s: p_of(s) + r_of(s), p_of)
    qbar = kink_quadrature(lambda s: _q_extremes(p_of(s), r_of(s))[0], kinks)
    qund = kink_quadrature(lambda s: -_q_extremes(p_of(s), r_of(s))[1], kinks)
    return float(base - qbar / (2.0 * D)), float(base + qund / (2.0 * D))


def mu_w_relation(spec: DomainSpec, D: float = 1.0, config: StepConfig = StepConfig(), **kw):
    """``(mu_u, mu_w, gap)`` with ``gap = |mu_u - mu_w - avg(Adot^2/4D)|/(1+|mu_u|)``."""
    mu_u = principal_eigenvalue(spec, D, config, form="u", **kw).mu
    mu_w = principal_eigenvalue(spec, D, config, form="w", **kw).mu
    gap = abs(mu_u - mu_w - mean_adot_sq_over_4d(spec, D)) / (1.0 + abs(mu_u))
    return mu_u, mu_w, gap


def asymptotic_constants(spec: DomainSpec) -> AsymptoticConstants:
    l, a = spec.l, spec.a

    def lval(s):
        return value(l, s)

    def a2(s):
        return derivative2(a, s)

    def l2(s):
        return derivative2(l, s)

    c1 = periodic_quadrature(lambda s: lval(s) ** -2, 1024)
    c2 = periodic_quadrature(lambda s: derivative1(a, s) ** 2, 1024)
    c3 = kink_quadrature(lambda s: lval(s) * np.maximum(a2(s), 0.0), (a2,)) if not a.is_constant else 0.0
    c5 = kink_quadrature(lambda s: lval(s) * np.maximum(-a2(s), 0.0), (a2,)) if not a.is_constant else 0.0
    c4 = kink_quadrature(lambda s: lval(s) * np.maximum(l2(s), 0.0), (l2,)) if not l.is_constant else 0.0
    c6 = kink_quadrature(lambda s: lval(s) * np.maximum(-l2(s), 0.0), (l2,)) if not l.is_constant else 0.0
    return AsymptoticConstants(*(float(c) for c in (c1, c2, c3, c4, c5, c6)))


def omega_scaling_window(spec: DomainSpec, D: float = 1.0, omega: Optional[float] = None,
                         constants: Optional[AsymptoticConstants] = None) -> tuple[float, float]:
    """Bounds on ``mu`` whose frequency dependence is explicit: a constant
    term plus ``(omega/2pi)^2`` times combinations of ``c1..c6``."""
    omega = spec.omega if omega is None else float(omega)
    if not omega > 0:
        raise ValueError("omega must be positive")
    c = asymptotic_constants(spec) if constants is None else constants
    A0, L0 = spec.A0 * (0.0 if spec.a.is_constant else 1.0), spec.L0
    f2 = (omega / TWO_PI) ** 2
    base = D * PI2 * c.c1 / L0**2
    lower = base + f2 * (A0**2 * c.c2 / (4 * D) - A0 * L0 * c.c3 / (2 * D) - L0**2 * c.c4 / (4 * D))
    upper = base + f2 * (A0**2 * c.c2 / (4 * D) + A0 * L0 * c.c5 / (2 * D) + L0**2 * c.c6 / (4 * D))
    return float(lower), float(upper)


def scaling_regime(spec: DomainSpec, constants: Optional[AsymptoticConstants] = None) -> dict:
    """Sufficient conditions for bounded (``O(1)``) and quadratic (``Theta(omega^2)``)
    growth of ``mu`` in ``omega``. Neither is sharp; both may be False."""
    c = asymptotic_constants(spec) if constants is None else constants
    spread = (periodic_extremum(lambda s: value(spec.a, s), "max")
              - periodic_extremum(lambda s: value(spec.a, s), "min"))
    lmin = periodic_extremum(lambda s: value(spec.l, s), "min")
    ratio = spec.A0 / spec.L0
    bounded_threshold = math.inf if spread <= 0 else lmin / spread
    quad = spec.A0**2 * c.c2 / 4 - spec.A0 * spec.L0 * c.c3 / 2 - spec.L0**2 * c.c4 / 4
    return {
        "ratio": ratio,
        "bounded_threshold": bounded_threshold,
        "bounded": ratio < bounded_threshold,
        "quadratic_coefficient": float(quad),
        "quadratic": bool(quad > 0),
    }


def omega_zero_limit(spec: DomainSpec, D: float = 1.0) -> float:
    """Average over the phase of the Dirichlet eigenvalue of the frozen interval."""
    val = D * PI2 / spec.L0**2 * periodic_quadrature(lambda s: value(spec.l, s) ** -2, 1024)
    assert abs(val - lower_bound_average(spec, D)) <= 1e-12 * max(1.0, val)
    return val


def audit(spec: DomainSpec, D: float, mu: float) -> BoundsReport:
    """Evaluate every bound at ``spec`` and flag it against ``mu``."""
    lower = lower_bound_average(spec, D)
    incl = upper_bound_inclusion(spec, D)
    ql, qu = q_bounds(spec, D)
    sl, su = omega_scaling_window(spec, D)
    slack = _slack(mu)
    scale_slack = max(slack, 1e-3 * spec.omega**2)
    flags = {
        "lower_avg": BoundFlag(mu >= lower - slack, mu - lower),
        "q_lower": BoundFlag(mu >= ql - slack, mu - ql),
        "q_upper": BoundFlag(mu <= qu + slack, qu - mu),
        "scaling_lower": BoundFlag(mu >= sl - scale_slack, mu - sl),
        "scaling_upper": BoundFlag(mu <= su + scale_slack, su - mu),
    }
    if incl is not None:
        flags["upper_inclusion"] = BoundFlag(mu <= incl + slack, incl - mu)
    return BoundsReport(mu, lower, incl, ql, qu, sl, su, flags)


def bounds_report(spec: DomainSpec, D: float = 1.0, config: StepConfig = StepConfig(), **kw) -> BoundsReport:
    return audit(spec, D, principal_eigenvalue(spec, D, config, **kw).mu)


@dataclass
class SweepPoint:
    omega: float
    mu: float
    lower_avg: float
    upper_inclusion: Optional[float]
    q_lower: float
    q_upper: float
    scaling_lower: float
    scaling_upper: float
    error: Optional[str] = None

    def row(self) -> list:
        return [self.omega, self.mu, self.lower_avg, self.upper_inclusion, self.q_lower, self.q_upper,
                self.scaling_lower, self.scaling_upper]


SWEEP_COLUMNS = ("omega", "mu", "lower_avg", "upper_inclusion", "q_lower", "q_upper",
                 "scaling_lower", "scaling_upper")


@dataclass
class SweepResult:
    points: list[SweepPoint]
    monotone: bool
    violations: list[tuple[float, float]]
    zero_limit: float
    zero_gap: float

    @property
    def failures(self) -> list[SweepPoint]:
        return [p for p in self.points if p.error is not None]

    @property
    def mus(self) -> np.ndarray:
        return np.array([p.mu for p in self.points])


def _sweep_point(args) -> SweepPoint:
    spec, D, omega, config, kw = args
    s = spec.with_omega(omega)
    ql, qu = q_bounds(s, D)
    sl, su = omega_scaling_window(s, D)
    common = dict(lower_avg=lower_bound_average(s, D), upper_inclusion=upper_bound_inclusion(s, D),
                  q_lower=ql, q_upper=qu, scaling_lower=sl, scaling_upper=su)
    try:
        mu = principal_eigenvalue(s, D, config, **kw).mu
        return SweepPoint(omega, mu, **common)
    except FdlError as exc:
        return SweepPoint(omega, math.nan, error=f"{type(exc).__name__}: {exc}", **common)


def sweep(spec_template: DomainSpec, D: float, omegas: Sequence[float], config: StepConfig = StepConfig(),
          jobs: Optional[int] = None, **kw) -> SweepResult:
    """``mu`` over an increasing frequency grid with a monotonicity verdict.

    Points run in a process pool of ``jobs`` workers (default: all cores);
    results are folded in frequency order, so output does not depend on
    scheduling. Failed points carry their error and are skipped by the
    verdict.
    """
    omegas = [float(w) for w in omegas]
    if not omegas or any(w <= 0 for w in omegas) or any(b <= a for a, b in zip(omegas, omegas[1:])):
        raise ValueError("omegas must be positive and strictly increasing")
    jobs = (os.cpu_count() or 1) if jobs is None else int(jobs)
    work = [(spec_template, D, w, config, kw) for w in omegas]
    if jobs <= 1 or len(work) == 1:
        points = [_sweep_point(a) for a in work]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(work))) as pool:
            points = list(pool.map(_sweep_point, work))
    points.sort(key=lambda p: p.omega)
    good = [p for p in points if p.error is None]
    violations = []
    for p, q in zip(good, good[1:]):
        if q.mu < p.mu - 1e-4 * (1.0 + abs(p.mu)):
            violations.append((p.omega, q.omega))
    zero = omega_zero_limit(spec_template, D)
    zero_gap = abs(good[0].mu - zero) if good else math.nan
    for p in points:
        if p.error:
            log.warning("sweep point omega=%g failed: %s", p.omega, p.error)
    return SweepResult(points, not violations, violations, zero, zero_gap)
