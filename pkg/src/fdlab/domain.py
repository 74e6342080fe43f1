"""Moving intervals ``(A(t), A(t) + L(t))`` and the coefficients of the
equations they induce on the fixed reference interval ``[0, L0]``.

With ``xi = (x - A(t)) L0 / L(t)`` the heat equation on the moving interval
becomes::

    u_t = D L0^2/L^2 u_xixi + (Adot L0 + xi Ldot)/L u_xi + f(u)

and the further substitution ``w = u H exp(-f'(0) t)`` trades the advection
for a potential ``xi^2 Lddot L/(4 D L0^2) + xi Addot L/(2 D L0)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .periodic import TWO_PI, PeriodicFn1, derivative1, derivative2, periodic_extremum, value

# column order of an operator table row
DIFF, ADV0, ADV1, POT0, POT1, POT2 = range(6)


@dataclass(frozen=True)
class DomainSpec:
    L0: float
    A0: float = 0.0
    l: PeriodicFn1 = field(default_factory=lambda: PeriodicFn1.constant(1.0))
    a: PeriodicFn1 = field(default_factory=lambda: PeriodicFn1.constant(0.0))
    omega: float = 1.0

    def __post_init__(self):
        if not self.L0 > 0:
            raise ValueError(f"L0 must be positive, got {self.L0}")
        if not self.A0 >= 0:
            raise ValueError(f"A0 must be non-negative, got {self.A0}")
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        s = np.arange(4096) / 4096
        if np.min(value(self.l, s)) <= 0:
            raise ValueError("l(s) must stay positive over the period")

    @classmethod
    def from_dict(cls, data: dict) -> "DomainSpec":
        return cls(
            L0=float(data["L0"]),
            A0=float(data.get("A0", 0.0)),
            l=PeriodicFn1.from_dict(data.get("l", {"mean": 1.0})),
            a=PeriodicFn1.from_dict(data.get("a", {"mean": 0.0})),
            omega=float(data.get("omega", 1.0)),
        )

    def to_dict(self) -> dict:
        return {
            "L0": self.L0,
            "A0": self.A0,
            "omega": self.omega,
            "l": self.l.to_dict(),
            "a": self.a.to_dict(),
        }

    def with_omega(self, omega: float) -> "DomainSpec":
        return DomainSpec(self.L0, self.A0, self.l, self.a, float(omega))

    @property
    def period(self) -> float:
        return TWO_PI / self.omega

    @property
    def is_fixed(self) -> bool:
        return self.l.is_constant and (self.a.is_constant or self.A0 == 0.0)

    def phase(self, t):
        return np.asarray(t, dtype=float) * self.omega / TWO_PI

    def L(self, t):
        return self.L0 * value(self.l, self.phase(t))

    def A(self, t):
        return self.A0 * value(self.a, self.phase(t))

    def Ldot(self, t):
        return self.L0 * derivative1(self.l, self.phase(t)) * (self.omega / TWO_PI)

    def Adot(self, t):
        return self.A0 * derivative1(self.a, self.phase(t)) * (self.omega / TWO_PI)

    def Lddot(self, t):
        return self.L0 * derivative2(self.l, self.phase(t)) * (self.omega / TWO_PI) ** 2

    def Addot(self, t):
        return self.A0 * derivative2(self.a, self.phase(t)) * (self.omega / TWO_PI) ** 2

    def min_length(self) -> float:
        return self.L0 * periodic_extremum(lambda s: value(self.l, s), "min")


@dataclass(frozen=True)
class ReactionSpec:
    """Reaction term ``f`` with ``f(0) = f(K) = 0`` and ``f(k)/k`` non-increasing.

    ``kind`` is ``linear`` (``f = fprime0 u``), ``logistic``
    (``f = fprime0 u (1 - u/K)``) or ``custom-monostable`` with a vectorised
    ``func``; custom functions are checked against the monostable
    conditions on construction.
    """

    kind: str = "logistic"
    fprime0: float = 1.0
    K: float = 1.0
    D: float = 1.0
    func: Optional[Callable] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in ("linear", "logistic", "custom-monostable"):
            raise ValueError(f"unknown reaction kind {self.kind!r}")
        if not (self.fprime0 > 0 or (self.kind == "linear" and self.fprime0 == 0)):
            raise ValueError("fprime0 must be positive (zero allowed for the linear kind)")
        if not self.K > 0:
            raise ValueError("K must be positive")
        if not self.D > 0:
            raise ValueError("D must be positive")
        if self.kind == "custom-monostable" and self.func is None:
            raise ValueError("custom-monostable reaction needs func")
        if self.kind != "linear":
            self._check_monostable()

    def _check_monostable(self):
        f0, fK = float(self.f(np.array([0.0]))[0]), float(self.f(np.array([self.K]))[0])
        if abs(f0) > 1e-14 or abs(fK) > 1e-14 * max(1.0, self.fprime0 * self.K):
            raise ValueError(f"reaction must vanish at 0 and K (got f(0)={f0}, f(K)={fK})")
        k = self.K * 2.0 ** -np.arange(20, -1, -1)
        ratio = self.f(k) / k
        if np.any(np.diff(ratio) > 1e-12 * max(1.0, self.fprime0)):
            raise ValueError("f(k)/k must be non-increasing on (0, K]")
        if self.kind == "custom-monostable":
            slope = float(self.f(np.array([1e-8 * self.K]))[0]) / (1e-8 * self.K)
            if abs(slope - self.fprime0) > 1e-5 * self.fprime0:
                raise ValueError(f"fprime0={self.fprime0} disagrees with f'(0)~{slope}")

    @property
    def logistic(self) -> bool:
        return self.kind == "logistic"

    def f(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "linear":
            return self.fprime0 * u
        if self.kind == "logistic":
            return self.fprime0 * u * (1.0 - u / self.K)
        return np.asarray(self.func(u), dtype=float)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "fprime0": self.fprime0, "K": self.K, "D": self.D}


def u_coefficients(spec: DomainSpec, D: float, xi, t):
    """(diffusion, advection) of the transformed equation for ``u``."""
    L = spec.L(t)
    diffusion = D * spec.L0**2 / L**2
    advection = (spec.Adot(t) * spec.L0 + np.asarray(xi) * spec.Ldot(t)) / L
    return diffusion * np.ones_like(advection), advection


def w_potential(spec: DomainSpec, D: float, xi, t):
    L = spec.L(t)
    xi = np.asarray(xi, dtype=float)
    return xi**2 * spec.Lddot(t) * L / (4.0 * D * spec.L0**2) + xi * spec.Addot(t) * L / (2.0 * D * spec.L0)


def adot_squared_integral(spec: DomainSpec, D: float, t: float) -> float:
    """``int_0^t Adot^2/(4D)``: whole periods from the mean, remainder by Gauss-Legendre."""
    T = spec.period
    full, rem = divmod(float(t), T)
    per_period = T * (spec.A0 * spec.omega / TWO_PI) ** 2 / (4.0 * D) * _mean_adash_sq(spec)
    total = full * per_period
    if rem > 0:
        x, w = np.polynomial.legendre.leggauss(64)
        pieces = 16
        edges = np.linspace(0.0, rem, pieces + 1)
        for lo, hi in zip(edges[:-1], edges[1:]):
            tt = lo + 0.5 * (hi - lo) * (x + 1.0)
            total += 0.5 * (hi - lo) * float(np.sum(w * spec.Adot(tt) ** 2)) / (4.0 * D)
    return total


def _mean_adash_sq(spec: DomainSpec) -> float:
    # exact for a finite Fourier series: mean of a'(s)^2 = sum (2 pi k)^2 (c^2 + s^2)/2
    return sum((TWO_PI * h.k) ** 2 * (h.cos**2 + h.sin**2) / 2.0 for h in spec.a.harmonics)


def mean_adot_sq_over_4d(spec: DomainSpec, D: float) -> float:
    """Time average of ``Adot^2/(4D)`` over one period."""
    return (spec.A0 * spec.omega / TWO_PI) ** 2 * _mean_adash_sq(spec) / (4.0 * D)


def h_factor(spec: DomainSpec, D: float, fprime0: float, xi, t: float):
    """Multiplier taking ``u`` to ``w``: ``H(xi, t) exp(-fprime0 t)``.

    With ``fprime0=0`` this is ``H`` itself.
    """
    L, L_start = spec.L(t), spec.L(0.0)
    xi = np.asarray(xi, dtype=float)
    exponent = (
        adot_squared_integral(spec, D, t)
        + xi**2 * spec.Ldot(t) * L / (4.0 * D * spec.L0**2)
        + xi * spec.Adot(t) * L / (2.0 * D * spec.L0)
        - fprime0 * t
    )
    return np.sqrt(L / L_start) * np.exp(exponent)


def time_reverse(spec: DomainSpec) -> DomainSpec:
    """Spec of the domain traversed backwards in time, ``Omega(-t)``."""
    return DomainSpec(spec.L0, spec.A0, spec.l.reversed(), spec.a.reversed(), spec.omega)


def operator_table(spec: DomainSpec, D: float, t, form: str = "u", rate: float = 0.0) -> np.ndarray:
    """Per-time coefficient rows for the kernel, one row per entry of ``t``.

    Row layout: diffusion, advection = ADV0 + ADV1 xi, potential =
    POT0 + POT1 xi + POT2 xi^2. ``rate`` is a constant added to the potential
    (the linear reaction ``f'(0)``).
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    L = spec.L(t)
    table = np.zeros((t.size, 6))
    table[:, DIFF] = D * spec.L0**2 / L**2
    table[:, POT0] = rate
    if form == "u":
        table[:, ADV0] = spec.Adot(t) * spec.L0 / L
        table[:, ADV1] = spec.Ldot(t) / L
    elif form == "w":
        table[:, POT1] = spec.Addot(t) * L / (2.0 * D * spec.L0)
        table[:, POT2] = spec.Lddot(t) * L / (4.0 * D * spec.L0**2)
    else:
        raise ValueError(f"form must be 'u' or 'w', got {form!r}")
    return table
