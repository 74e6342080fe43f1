"""Smooth 1-periodic profiles as finite Fourier series, plus periodic quadrature.

The profiles ``l(s)`` and ``a(s)`` that shape a moving interval live here.
Derivatives are exact (termwise), which keeps every downstream coefficient
free of finite-difference noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Harmonic:
    k: int
    cos: float = 0.0
    sin: float = 0.0

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"harmonic index must be a positive integer, got {self.k!r}")


@dataclass(frozen=True)
class PeriodicFn1:
    """``mean + sum_k cos_k cos(2 pi k s) + sin_k sin(2 pi k s)``."""

    mean: float = 0.0
    harmonics: tuple[Harmonic, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "harmonics", tuple(self.harmonics))

    @classmethod
    def constant(cls, c: float) -> "PeriodicFn1":
        return cls(float(c), ())

    @classmethod
    def sine(cls, amplitude: float = 1.0, k: int = 1, mean: float = 0.0) -> "PeriodicFn1":
        return cls(float(mean), (Harmonic(k, 0.0, float(amplitude)),))

    @classmethod
    def cosine(cls, amplitude: float = 1.0, k: int = 1, mean: float = 0.0) -> "PeriodicFn1":
        return cls(float(mean), (Harmonic(k, float(amplitude), 0.0),))

    @classmethod
    def from_dict(cls, data: dict) -> "PeriodicFn1":
        harmonics = tuple(
            Harmonic(int(h["k"]), float(h.get("cos", 0.0)), float(h.get("sin", 0.0)))
            for h in data.get("harmonics", [])
        )
        return cls(float(data.get("mean", 0.0)), harmonics)

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "harmonics": [{"k": h.k, "cos": h.cos, "sin": h.sin} for h in self.harmonics],
        }

    @property
    def is_constant(self) -> bool:
        return all(h.cos == 0.0 and h.sin == 0.0 for h in self.harmonics)

    @property
    def max_harmonic(self) -> int:
        return max((h.k for h in self.harmonics), default=0)

    def reversed(self) -> "PeriodicFn1":
        """The profile ``s -> f(-s)``."""
        return PeriodicFn1(self.mean, tuple(Harmonic(h.k, h.cos, -h.sin) for h in self.harmonics))

    def _series(self, s, order: int):
        s = np.asarray(s, dtype=float)
        s = s - np.floor(s)
        out = np.full_like(s, self.mean if order == 0 else 0.0)
        for h in self.harmonics:
            w = TWO_PI * h.k
            c, sn = np.cos(w * s), np.sin(w * s)
            if order == 0:
                out = out + h.cos * c + h.sin * sn
            elif order == 1:
                out = out + w * (-h.cos * sn + h.sin * c)
            else:
                out = out - w * w * (h.cos * c + h.sin * sn)
        return out if out.ndim else float(out)

    def __call__(self, s):
        return self._series(s, 0)


def value(f: PeriodicFn1, s):
    return f._series(s, 0)


def derivative1(f: PeriodicFn1, s):
    return f._series(s, 1)


def derivative2(f: PeriodicFn1, s):
    return f._series(s, 2)


def periodic_quadrature(g: Callable, n: int = 512) -> float:
    """Composite midpoint rule for ``int_0^1 g(s) ds`` with ``g`` 1-periodic.

    ``g`` is called once with the full array of nodes, so it should be
    vectorised. Spectrally accurate for smooth periodic integrands.
    """
    if n < 4:
        raise ValueError("periodic_quadrature needs n >= 4")
    s = (np.arange(n) + 0.5) / n
    return float(np.mean(np.asarray(g(s), dtype=float) * np.ones_like(s)))


def _sign_changes(fns: Iterable[Callable], samples: int = 4096) -> list[float]:
    s = np.linspace(0.0, 1.0, samples + 1)
    roots: list[float] = []
    for fn in fns:
        v = np.asarray(fn(s), dtype=float) * np.ones_like(s)
        scale = max(float(np.max(np.abs(v))), 1e-300)
        v = np.where(np.abs(v) <= 1e-13 * scale, 0.0, v)
        for i in range(samples):
            a, b = v[i], v[i + 1]
            if a == 0.0 and 0.0 < s[i] < 1.0:
                roots.append(float(s[i]))
            elif a * b < 0.0:
                roots.append(brentq(lambda x: float(fn(x)), s[i], s[i + 1], xtol=1e-15, rtol=1e-15))
    return roots


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


def _gauss(g, a: float, b: float, pieces: int) -> float:
    edges = np.linspace(a, b, pieces + 1)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        x = lo + half * (_GL_NODES + 1.0)
        total += half * float(np.sum(_GL_WEIGHTS * np.asarray(g(x), dtype=float)))
    return total


def kink_quadrature(g: Callable, kink_sources: Sequence[Callable] = (), rtol: float = 1e-12) -> float:
    """``int_0^1 g`` for a periodic integrand that is smooth except where one of
    ``kink_sources`` changes sign (e.g. ``[a'']^+`` has kinks at zeros of ``a''``).

    The period is split at the located roots, each piece is integrated with
    composite Gauss-Legendre, and the piece count is doubled until two
    successive levels agree to ``rtol`` (cap: 8192 nodes per piece).
    """
    breaks = sorted({0.0, 1.0, *_sign_changes(kink_sources)})
    total = 0.0
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b - a <= 0.0:
            continue
        pieces = 2
        coarse = _gauss(g, a, b, pieces)
        while True:
            pieces *= 2
            fine = _gauss(g, a, b, pieces)
            if abs(fine - coarse) <= rtol * max(1.0, abs(fine)) or pieces * 24 >= 8192:
                break
            coarse = fine
        total += fine
    return total


def periodic_extremum(g: Callable, kind: str = "max", samples: int = 4096) -> float:
    """Global max/min of a smooth 1-periodic function: dense sampling then a
    bounded scalar search around the best sample."""
    s = np.arange(samples) / samples
    v = np.asarray(g(s), dtype=float) * np.ones_like(s)
    sign = 1.0 if kind == "max" else -1.0
    i = int(np.argmax(sign * v))
    h = 1.0 / samples
    res = minimize_scalar(
        lambda x: -sign * float(g(x)),
        bounds=(s[i] - h, s[i] + h),
        method="bounded",
        options={"xatol": 1e-13},
    )
    return float(max(sign * v[i], -res.fun) * sign)
