import math

import numpy as np
import pytest

from fdlab import bounds as b
from fdlab.domain import DomainSpec, time_reverse
from fdlab.periodic import PeriodicFn1, periodic_quadrature, value
from fdlab.solver import StepConfig

from conftest import breathing, fixed_domain, shifting

PI = math.pi
LOW = 0.75**-1.5


def ex1_window(omega, eps=0.5, L0=PI, D=1.0):
    half = L0**2 * eps * omega**2 / (4 * PI * D)
    return LOW - half * (1 - eps * PI / 4), LOW + half * (1 + eps * PI / 4)


def test_lower_bound_average():
    assert b.lower_bound_average(fixed_domain()) == pytest.approx(1.0, rel=1e-14)
    assert b.lower_bound_average(breathing()) == pytest.approx(1.539601, abs=1e-6)
    assert b.lower_bound_average(shifting(3.0, 0.9)) == pytest.approx(1.0, rel=1e-14)
    assert b.lower_bound_average(DomainSpec(2.0), 0.3) == pytest.approx(0.3 * PI**2 / 4, rel=1e-14)


def test_upper_bound_inclusion():
    assert b.upper_bound_inclusion(fixed_domain()) == pytest.approx(1.0, rel=1e-12)
    assert b.upper_bound_inclusion(breathing()) == pytest.approx(4.0, rel=1e-10)
    assert b.upper_bound_inclusion(shifting(1.0, PI)) is None
    assert b.upper_bound_inclusion(shifting(1.0, 0.5)) == pytest.approx(PI**2 / (PI - 1.0) ** 2, rel=1e-10)


def test_q_envelopes_examples():
    for omega in (0.5, 1.0, 2.0):
        spec = shifting(omega, 0.5)
        A0L0w2 = 0.5 * PI * omega**2
        qbar, qund = b.q_envelopes(spec, 3 * PI / (2 * omega))
        assert qbar == pytest.approx(A0L0w2, rel=1e-13) and qund == pytest.approx(0.0, abs=1e-14)
        qbar, qund = b.q_envelopes(spec, PI / (2 * omega))
        assert qbar == pytest.approx(0.0, abs=1e-14) and qund == pytest.approx(A0L0w2, rel=1e-13)
    assert b.q_envelopes(fixed_domain(), 0.7) == (0.0, 0.0)


def test_q_envelopes_against_dense_eta_grid(rng):
    spec = DomainSpec(PI, A0=0.4, l=PeriodicFn1.cosine(0.3, 1, 1.0), a=PeriodicFn1.sine(1.0, 2), omega=1.7)
    eta = np.linspace(0, 1, 200_001)
    for t in rng.uniform(0, spec.period, 10):
        L = spec.L(t)
        q = eta**2 * spec.Lddot(t) * L / 2 + eta * spec.Addot(t) * L
        qbar, qund = b.q_envelopes(spec, t)
        assert qbar == pytest.approx(max(q.max(), 0.0), abs=1e-9)
        assert qund == pytest.approx(-min(q.min(), 0.0), abs=1e-9)


@pytest.mark.parametrize("omega", [PI, 2 * PI, 4 * PI])
def test_q_bounds_breathing_closed_form(omega):
    lo, hi = b.q_bounds(breathing(omega))
    elo, ehi = ex1_window(omega)
    # the closed form is written with the 7-digit lower-bound constant
    assert lo == pytest.approx(elo, abs=1e-9)
    assert hi == pytest.approx(ehi, abs=1e-9)


def test_q_bounds_shifting_and_fixed():
    lo, hi = b.q_bounds(shifting(1.0, 0.5))
    assert lo == pytest.approx(0.78125, abs=1e-12) and hi == pytest.approx(1.28125, abs=1e-12)
    assert b.q_bounds(fixed_domain()) == pytest.approx((1.0, 1.0), rel=1e-14)


def test_q_bounds_brute_force_oracle():
    spec = DomainSpec(2.0, A0=0.3, l=PeriodicFn1.from_dict(
        {"mean": 1.0, "harmonics": [{"k": 1, "cos": 0.2, "sin": 0.1}, {"k": 2, "sin": 0.05}]}),
        a=PeriodicFn1.cosine(1.0, 1), omega=2.3)
    n = 400_000
    t = (np.arange(n) + 0.5) / n * spec.period
    qbar, qund = b.q_envelopes(spec, t)
    base = np.mean(PI**2 / spec.L(t) ** 2 + spec.Adot(t) ** 2 / 4)
    lo, hi = b.q_bounds(spec)
    assert lo == pytest.approx(base - np.mean(qbar) / 2, abs=1e-8)
    assert hi == pytest.approx(base + np.mean(qund) / 2, abs=1e-8)


def test_mu_w_relation():
    _, _, gap = b.mu_w_relation(shifting(1.0, 0.5), 1.0, StepConfig(800, 0.5, 200))
    assert gap <= 1e-4
    # a == 0: the two forms differ only by O(h^2) discretization error
    gaps = [b.mu_w_relation(breathing(0.5), 1.0, StepConfig(800, 0.5, 200).refined(r))[2] for r in (0, 1)]
    assert gaps[1] <= 1e-6 and 3.0 <= gaps[0] / gaps[1] <= 5.0
    assert b.mu_w_relation(fixed_domain(), 1.0, StepConfig(800, 0.5, 200))[2] <= 1e-10


def test_asymptotic_constants():
    c = b.asymptotic_constants(shifting(1.0, 1.0))
    assert (c.c1, c.c4, c.c6) == pytest.approx((1.0, 0.0, 0.0), abs=1e-14)
    assert c.c2 == pytest.approx(2 * PI**2, rel=1e-13)
    assert c.c3 == pytest.approx(4 * PI, rel=1e-12) and c.c5 == pytest.approx(4 * PI, rel=1e-12)
    c = b.asymptotic_constants(fixed_domain())
    assert (c.c1, c.c2, c.c3, c.c4, c.c5, c.c6) == (1.0, 0.0, 0.0, 0.0, 0.0, 0.0)


def test_asymptotic_constants_breathing_brute_force():
    spec = breathing()
    c = b.asymptotic_constants(spec)
    n = 2**20
    s = (np.arange(n) + 0.5) / n
    l = 1 + 0.5 * np.sin(2 * PI * s)
    l2 = -0.5 * 4 * PI**2 * np.sin(2 * PI * s)
    assert c.c1 == pytest.approx(LOW, rel=1e-12)
    assert (c.c2, c.c3, c.c5) == (0.0, 0.0, 0.0)
    assert c.c4 == pytest.approx(np.mean(l * np.maximum(l2, 0)), rel=1e-9)
    assert c.c6 == pytest.approx(np.mean(l * np.maximum(-l2, 0)), rel=1e-9)
    # closed form for l = 1 + 0.5 sin(2 pi s): 2 pi -+ pi^2/4
    assert c.c4 == pytest.approx(2 * PI - PI**2 / 4, rel=1e-9)
    assert c.c6 == pytest.approx(2 * PI + PI**2 / 4, rel=1e-9)


def test_c1_lower_bound_invariant():
    spec = DomainSpec(PI, l=PeriodicFn1.cosine(0.3, 2, 1.0))
    assert b.asymptotic_constants(spec).c1 >= 1 / 1.3**2


def test_omega_scaling_window():
    for w in (0.5, 5.0, 50.0):
        assert b.omega_scaling_window(fixed_domain(), 1.0, w) == pytest.approx((1.0, 1.0), rel=1e-14)
    spec = shifting(1.0, 2 * PI)
    lo8, _ = b.omega_scaling_window(spec, 1.0, 8.0)
    lo16, _ = b.omega_scaling_window(spec, 1.0, 16.0)
    assert lo16 - 1 == pytest.approx(4 * (lo8 - 1), rel=1e-12) and lo8 > 1
    with pytest.raises(ValueError):
        b.omega_scaling_window(spec, 1.0, 0.0)


def test_scaling_window_encloses_q_window():
    for spec in (breathing(3.0), shifting(2.0), DomainSpec(PI, 0.4, PeriodicFn1.sine(0.2, 1, 1.0), PeriodicFn1.cosine(1.0, 1), 2.0)):
        lo, hi = b.omega_scaling_window(spec)
        qlo, qhi = b.q_bounds(spec)
        assert lo <= qlo + 1e-12 and qhi <= hi + 1e-12


def test_scaling_regime_thresholds():
    r = b.scaling_regime(shifting(1.0, 0.25 * PI))
    assert r["bounded_threshold"] == pytest.approx(0.5, rel=1e-10) and r["bounded"] and not r["quadratic"]
    r = b.scaling_regime(shifting(1.0, 2 * PI))
    assert not r["bounded"] and r["quadratic"]
    # the quadratic coefficient changes sign at A0/L0 = 4/pi
    assert b.scaling_regime(shifting(1.0, PI * 4 / PI * 0.999))["quadratic"] is False
    assert b.scaling_regime(shifting(1.0, PI * 4 / PI * 1.001))["quadratic"] is True


def test_omega_zero_limit():
    assert b.omega_zero_limit(fixed_domain()) == pytest.approx(1.0, rel=1e-14)
    assert b.omega_zero_limit(breathing()) == pytest.approx(1.539601, abs=1e-6)
    spec = DomainSpec(PI, l=PeriodicFn1.cosine(0.3, 1, 1.0))
    oracle = periodic_quadrature(lambda s: value(spec.l, s) ** -2, 4096)
    assert b.omega_zero_limit(spec) == pytest.approx(oracle, rel=1e-13)
    assert b.omega_zero_limit(spec) == pytest.approx(b.lower_bound_average(spec), abs=1e-12)


def test_time_reverse_preserves_bounds():
    spec = DomainSpec(PI, 0.4, PeriodicFn1.sine(0.2, 1, 1.0), PeriodicFn1(0.0, PeriodicFn1.sine(1.0).harmonics + PeriodicFn1.cosine(0.3, 2).harmonics), 1.5)
    r = time_reverse(spec)
    assert b.lower_bound_average(r) == pytest.approx(b.lower_bound_average(spec), rel=1e-13)
    assert b.upper_bound_inclusion(r) == pytest.approx(b.upper_bound_inclusion(spec), rel=1e-9)


def test_audit_and_report():
    rep = b.bounds_report(breathing(), 1.0, StepConfig(800, 0.5, 200))
    assert rep.passed and set(rep.flags) == {"lower_avg", "upper_inclusion", "q_lower", "q_upper", "scaling_lower", "scaling_upper"}
    assert rep.to_dict()["passed"] is True
    bad = b.audit(breathing(), 1.0, 0.5)
    assert not bad.passed and not bad.flags["lower_avg"].passed and bad.flags["lower_avg"].margin < 0
    assert "upper_inclusion" not in b.audit(shifting(1.0, PI), 1.0, 1.5).flags


def test_sweep_fixed_domain_constant():
    res = b.sweep(fixed_domain(), 1.0, [0.25, 0.5, 1.0, 2.0, 4.0, 8.0], StepConfig(800, 0.5, 100), jobs=1)
    mus = res.mus
    assert res.monotone and np.ptp(mus) <= 1e-6
    with pytest.raises(ValueError):
        b.sweep(fixed_domain(), 1.0, [1.0, 0.5])


def test_sweep_records_failures_and_continues():
    res = b.sweep(breathing(), 1.0, [1.0, 2.0], StepConfig(800, 0.5, 64), jobs=1, max_periods=16, tol=1e-17)
    assert len(res.points) == 2
    assert all(p.error is None or "NoConvergence" in p.error for p in res.points)


def test_sweep_parallel_matches_serial():
    omegas = [1.0, 2.0, 4.0]
    cfg = StepConfig(800, 0.5, 64)
    serial = b.sweep(breathing(), 1.0, omegas, cfg, jobs=1)
    parallel = b.sweep(breathing(), 1.0, omegas, cfg, jobs=2)
    assert [p.row() for p in serial.points] == [p.row() for p in parallel.points]
