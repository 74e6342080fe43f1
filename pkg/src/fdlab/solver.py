"""Theta-scheme finite differences on the fixed interval ``[0, L0]``.

Both derivatives are centred; each step solves one tridiagonal system by the
Thomas algorithm. Coefficients of step ``n`` are frozen at ``t_n + theta dt``
(the midpoint for Crank-Nicolson), which keeps second order in time when the
coefficients move.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Union

import numpy as np
from numba import njit

from .domain import DomainSpec, ReactionSpec, operator_table
from .errors import RangeViolation, SingularSystem

_NO_EXTRA = np.zeros((0, 0))

OK, SINGULAR, OUT_OF_RANGE = 0, 1, 2


@dataclass(frozen=True)
class Grid1D:
    L0: float
    M: int

    def __post_init__(self):
        if self.M < 8:
            raise ValueError(f"grid needs M >= 8 interior points, got {self.M}")

    @property
    def spacing(self) -> float:
        return self.L0 / (self.M + 1)

    @property
    def nodes(self) -> np.ndarray:
        return self.spacing * np.arange(1, self.M + 1)


@dataclass
class Field:
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field has non-finite entries")

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def csv_row(self) -> list[float]:
        return [self.time, *self.values.tolist()]


@dataclass(frozen=True)
class StepConfig:
    """Numerical resolution: ``M`` interior nodes, ``steps_per_period`` (Nt)
    time steps per period and the time weighting ``theta``."""

    steps_per_period: int = 800
    theta: float = 0.5
    M: int = 200

    def __post_init__(self):
        if self.steps_per_period < 32:
            raise ValueError("steps_per_period must be >= 32")
        if not 0.5 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [1/2, 1]")
        if self.M < 8:
            raise ValueError("M must be >= 8")

    def refined(self, times: int = 1) -> "StepConfig":
        return replace(self, steps_per_period=self.steps_per_period * 2**times, M=self.M * 2**times)


@njit(cache=True)
def _advance(u, h, dt, theta, table, extra, source, logistic, rate, K, lo_lim, hi_lim, renorm):
    M, ncol = u.shape
    lower = np.empty(M)
    diag = np.empty(M)
    upper = np.empty(M)
    cprime = np.empty(M)
    rhs = np.empty((M, ncol))
    inv_h2 = 1.0 / (h * h)
    inv_2h = 0.5 / h
    ex = theta * dt
    im = (1.0 - theta) * dt
    logscale = 0.0
    for n in range(table.shape[0]):
        d = table[n, 0] * inv_h2
        for i in range(M):
            x = (i + 1) * h
            adv = (table[n, 1] + table[n, 2] * x) * inv_2h
            pot = table[n, 3] + (table[n, 4] + table[n, 5] * x) * x
            if extra.shape[0] > 0:
                pot += extra[n, i]
            lower[i] = d - adv
            diag[i] = -2.0 * d + pot
            upper[i] = d + adv
        for j in range(ncol):
            for i in range(M):
                au = diag[i] * u[i, j]
                if i > 0:
                    au += lower[i] * u[i - 1, j]
                if i < M - 1:
                    au += upper[i] * u[i + 1, j]
                r = u[i, j] + im * au
                if logistic:
                    r += dt * rate * u[i, j] * (1.0 - u[i, j] / K)
                if source.shape[0] > 0:
                    r += source[i, j]
                rhs[i, j] = r
        # Thomas algorithm on (I - theta dt A)
        b = 1.0 - ex * diag[0]
        if abs(b) < 1e-14:
            return SINGULAR, logscale
        cprime[0] = -ex * upper[0] / b
        for j in range(ncol):
            rhs[0, j] /= b
        for i in range(1, M):
            a = -ex * lower[i]
            denom = 1.0 - ex * diag[i] - a * cprime[i - 1]
            if abs(denom) < 1e-14 * (1.0 + abs(ex * diag[i])):
                return SINGULAR, logscale
            cprime[i] = -ex * upper[i] / denom
            for j in range(ncol):
                rhs[i, j] = (rhs[i, j] - a * rhs[i - 1, j]) / denom
        for j in range(ncol):
            u[M - 1, j] = rhs[M - 1, j]
            for i in range(M - 2, -1, -1):
                u[i, j] = rhs[i, j] - cprime[i] * u[i + 1, j]
        if lo_lim > -np.inf or hi_lim < np.inf:
            for j in range(ncol):
                for i in range(M):
                    if u[i, j] < lo_lim or u[i, j] > hi_lim:
                        return OUT_OF_RANGE, logscale
        if renorm:
            m = 0.0
            for j in range(ncol):
                for i in range(M):
                    if abs(u[i, j]) > m:
                        m = abs(u[i, j])
            if m > 0.0 and (m < 1e-100 or m > 1e100):
                for j in range(ncol):
                    for i in range(M):
                        u[i, j] /= m
                logscale += math.log(m)
    return OK, logscale


def _run(u2d, h, dt, theta, table, *, extra=_NO_EXTRA, source=_NO_EXTRA, reaction=None,
         renorm=False, range_tol=1e-6):
    if reaction is not None and reaction.logistic:
        logistic, rate, K = True, reaction.fprime0, reaction.K
    else:
        logistic, rate, K = False, 0.0, 1.0
    if reaction is not None and reaction.kind != "linear":
        lo, hi = -range_tol, reaction.K + range_tol
    else:
        lo, hi = -np.inf, np.inf
    status, logscale = _advance(u2d, h, dt, theta, np.ascontiguousarray(table), extra, source,
                                logistic, rate, K, lo, hi, renorm)
    if status == SINGULAR:
        raise SingularSystem(f"zero pivot in tridiagonal solve (dt={dt:.3g}); reduce the time step")
    if status == OUT_OF_RANGE:
        raise RangeViolation(
            f"state left [-{range_tol:g}, K+{range_tol:g}] (min={u2d.min():.3e}, max={u2d.max():.6g}); "
            "reduce the time step"
        )
    return logscale


def _as2d(values) -> np.ndarray:
    v = np.array(values, dtype=float)
    return v.reshape(-1, 1) if v.ndim == 1 else v


def step_linear(state: Field, spec: DomainSpec, D: float, dt: float,
                potential: Optional[Callable] = None, *, theta: float = 0.5,
                form: str = "u", rate: float = 0.0) -> Field:
    """One theta step of ``u_t = diff u_xixi + adv u_xi + potential u``.

    ``potential(xi, t)`` is an optional extra zeroth-order coefficient on top
    of the form's own potential (``form='w'``) and the constant ``rate``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    grid = Grid1D(spec.L0, state.values.size)
    tc = state.time + theta * dt
    table = operator_table(spec, D, [tc], form=form, rate=rate)
    extra = _NO_EXTRA
    if potential is not None:
        extra = np.asarray(potential(grid.nodes, tc), dtype=float).reshape(1, -1) * np.ones((1, grid.M))
    u = _as2d(state.values)
    _run(u, grid.spacing, dt, theta, table, extra=extra)
    return Field(u[:, 0], state.time + dt)


def step_nonlinear(state: Field, spec: DomainSpec, reaction: ReactionSpec, dt: float,
                   *, theta: float = 0.5) -> Field:
    """IMEX step: transport implicit (theta scheme), reaction explicit."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    grid = Grid1D(spec.L0, state.values.size)
    table = operator_table(spec, reaction.D, [state.time + theta * dt], form="u",
                           rate=reaction.fprime0 if reaction.kind == "linear" else 0.0)
    u = _as2d(state.values)
    source = _NO_EXTRA
    if reaction.kind == "custom-monostable":
        source = dt * reaction.f(u)
    _run(u, grid.spacing, dt, theta, table, source=source, reaction=reaction)
    return Field(u[:, 0], state.time + dt)


def _decay_budget(spec: DomainSpec, D: float, rate: float) -> float:
    """Generous upper estimate of ``mu T`` for the principal mode (log units)."""
    t = np.linspace(0.0, spec.period, 257)[:-1]
    L = spec.L(t)
    per_time = (D * np.pi**2 / L**2 + spec.Adot(t) ** 2 / (4 * D)
                + np.abs(spec.Addot(t)) * L / (2 * D) + np.abs(spec.Lddot(t)) * L / (4 * D))
    return spec.period * (float(np.max(per_time)) + abs(rate))


def stiffness_guard(spec: DomainSpec, D: float, config: StepConfig, rate: float = 0.0,
                    margin: float = 30.0, accuracy: float = 1e-3) -> StepConfig:
    """Raise ``steps_per_period`` (by doubling) until the highest grid mode is
    damped over one period by at least ``e^{-margin}`` relative to the
    principal mode.

    Crank-Nicolson maps a stiff mode with ``z = dt lambda`` to ``(1-z/2)/(1+z/2)``,
    close to -1 for large ``z``; over long periods that sign-flipping mode can
    outlive the principal one and capture power iteration. Doubling stops
    early once the top mode is resolved (damped at least half as much as by
    the exact flow). Theta = 1 damps it strongly and is returned unchanged.

    The step is also kept below ``accuracy / max(D pi^2/L^2)``, which bounds
    the relative time error of the principal decay (about ``z^2/12``) by
    ~1e-7 independently of the period length.
    """
    if config.theta > 0.5 + 1e-12:
        return config
    h = spec.L0 / (config.M + 1)
    t = np.linspace(0.0, spec.period, 513)[:-1]
    diff = D * spec.L0**2 / spec.L(t) ** 2
    need = _decay_budget(spec, D, rate) + margin
    principal = float(np.max(D * np.pi**2 / spec.L(t) ** 2))
    Nt = config.steps_per_period
    while True:
        dt = spec.period / Nt
        z = dt * 4.0 * diff / h**2
        damping = Nt * float(np.mean(-np.log(np.abs((1 - z / 2) / (1 + z / 2)))))
        # on short periods even the exact flow damps the top mode by less than
        # the margin; it is enough that the scheme resolves it (z of order 1)
        resolved = damping >= 0.5 * Nt * float(np.mean(z))
        accurate = dt * principal <= accuracy
        if ((damping >= need or resolved) and accurate) or Nt >= 2**22:
            break
        Nt *= 2
    return config if Nt == config.steps_per_period else replace(config, steps_per_period=Nt)


def reaction_slope_floor(reaction: ReactionSpec) -> float:
    """Lower bound of ``f'(u)`` on ``[0, K]`` (sampled for custom reactions)."""
    if reaction.kind == "linear":
        return reaction.fprime0
    if reaction.kind == "logistic":
        return -reaction.fprime0
    u = np.linspace(0.0, reaction.K, 2049)
    return float(np.min(np.diff(reaction.f(u)) / np.diff(u)))


def monotone_guard(spec: DomainSpec, reaction: ReactionSpec, config: StepConfig) -> StepConfig:
    """Smallest multiple of ``steps_per_period`` for which every IMEX step is
    order preserving: the explicit half ``I + (1-theta) dt A + dt f'(u)`` is
    entrywise non-negative. Together with the M-matrix implicit half this
    gives positivity, ``u <= K`` and monotone, sublinear Poincare maps.
    """
    h = spec.L0 / (config.M + 1)
    t = np.linspace(0.0, spec.period, 1025)[:-1]
    diff = reaction.D * spec.L0**2 / spec.L(t) ** 2
    adv = (np.abs(spec.Adot(t)) * spec.L0 + spec.L0 * np.abs(spec.Ldot(t))) / spec.L(t)
    if np.any(adv * h > 2.0 * diff):
        raise ValueError("cell Peclet number exceeds 2; increase M for an order-preserving scheme")
    slope = reaction_slope_floor(reaction)
    # diagonal of the explicit half: 1 - (1-theta) dt 2 diff/h^2 + dt f'(u)
    rate = float(np.max((1.0 - config.theta) * 2.0 * diff / h**2 + max(0.0, -slope)))
    if rate <= 0:
        return config
    need = spec.period * rate * (1.0 + 1e-9)
    base = config.steps_per_period
    Nt = base * max(1, math.ceil(need / base))
    return config if Nt == base else replace(config, steps_per_period=Nt)


class PeriodMap:
    """Precomputed stepping over one period of a fixed problem.

    The coefficient table for the ``Nt`` steps of a period is built once; the
    map can then be applied to any number of columns at once and started at
    any step index (time ``k T / Nt``). With ``guard=True`` the step count is
    first raised by :func:`stiffness_guard` (linear maps) or
    :func:`monotone_guard` (nonlinear reactions).
    """

    def __init__(self, spec: DomainSpec, D: float, config: StepConfig, *, form: str = "u",
                 rate: float = 0.0, reaction: Optional[ReactionSpec] = None, guard: bool = True):
        if reaction is not None:
            D = reaction.D
            rate = reaction.fprime0 if reaction.kind == "linear" else 0.0
        if guard and reaction is not None and reaction.kind != "linear":
            config = monotone_guard(spec, reaction, config)
        elif guard:
            config = stiffness_guard(spec, D, config, rate=rate)
        self.spec, self.D, self.config = spec, D, config
        self.form, self.reaction = form, reaction
        self.grid = Grid1D(spec.L0, config.M)
        self.Nt = config.steps_per_period
        self.dt = spec.period / self.Nt
        times = (np.arange(self.Nt) + config.theta) * self.dt
        self.table = operator_table(spec, D, times, form=form, rate=rate)

    def advance(self, u2d: np.ndarray, start: int = 0, nsteps: Optional[int] = None,
                renorm: bool = False) -> float:
        """Advance ``u2d`` (M x ncol, modified in place) from step ``start``;
        returns the accumulated log of renormalisation factors."""
        nsteps = self.Nt if nsteps is None else nsteps
        th, dt, h = self.config.theta, self.dt, self.grid.spacing
        custom = self.reaction is not None and self.reaction.kind == "custom-monostable"
        logscale = 0.0
        k = start % self.Nt
        remaining = nsteps
        while remaining > 0:
            if custom:
                src = dt * self.reaction.f(u2d)
                _run(u2d, h, dt, th, self.table[k:k + 1], source=src, reaction=self.reaction)
                k, remaining = (k + 1) % self.Nt, remaining - 1
                continue
            chunk = min(remaining, self.Nt - k)
            logscale += _run(u2d, h, dt, th, self.table[k:k + chunk], reaction=self.reaction,
                             renorm=renorm)
            k, remaining = (k + chunk) % self.Nt, remaining - chunk
        return logscale

    def __call__(self, values: np.ndarray) -> np.ndarray:
        u = _as2d(values)
        self.advance(u)
        return u[:, 0] if np.ndim(values) == 1 else u


Model = Union[float, ReactionSpec]


def evolve(state: Field, spec: DomainSpec, model: Model, t0: float, t1: float,
           config: StepConfig, *, form: str = "u", rate: float = 0.0,
           potential: Optional[Callable] = None) -> Field:
    """Step from ``t0`` to ``t1`` with ``dt = T/Nt``.

    ``model`` is a diffusivity (linear problem) or a ReactionSpec. The span
    must be a whole number of time steps.
    """
    dt = spec.period / config.steps_per_period
    span = (t1 - t0) / dt
    n = int(round(span))
    if t1 < t0 or abs(span - n) > 1e-8 * max(1.0, span):
        raise ValueError(f"[{t0}, {t1}] is not a whole number of steps of {dt}")
    u = _as2d(state.values)
    if n == 0:
        return Field(u[:, 0].copy(), t1)
    grid = Grid1D(spec.L0, u.shape[0])
    times = t0 + (np.arange(n) + config.theta) * dt
    if isinstance(model, ReactionSpec):
        reaction = model
        table = operator_table(spec, reaction.D, times, rate=reaction.fprime0 if reaction.kind == "linear" else 0.0)
        if reaction.kind == "custom-monostable":
            for row in table:
                _run(u, grid.spacing, dt, config.theta, row[None, :], source=dt * reaction.f(u), reaction=reaction)
        else:
            _run(u, grid.spacing, dt, config.theta, table, reaction=reaction)
    else:
        table = operator_table(spec, float(model), times, form=form, rate=rate)
        extra = _NO_EXTRA
        if potential is not None:
            extra = np.stack([np.asarray(potential(grid.nodes, tc), dtype=float) * np.ones(grid.M) for tc in times])
        _run(u, grid.spacing, dt, config.theta, table, extra=extra)
    return Field(u[:, 0].copy(), t1)
