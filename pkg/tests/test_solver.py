import math

import numpy as np
import pytest

from fdlab.domain import DomainSpec, ReactionSpec, operator_table
from fdlab.errors import RangeViolation, SingularSystem
from fdlab.solver import (Field, Grid1D, PeriodMap, StepConfig, _run, evolve, monotone_guard,
                          stiffness_guard, step_linear, step_nonlinear)

from conftest import breathing, fixed_domain, shifting

PI = math.pi


def heat_error(M, Nt):
    # T = 0.5, so one period is exactly the target time
    spec = fixed_domain(omega=4 * PI)
    grid = Grid1D(PI, M)
    u = evolve(Field(np.sin(grid.nodes)), spec, 1.0, 0.0, 0.5, StepConfig(Nt, 0.5, M))
    return float(np.max(np.abs(u.values - math.exp(-0.5) * np.sin(grid.nodes)))), u


def smooth_nonneg(grid, rng, modes=4):
    x = grid.nodes / grid.L0
    c = rng.uniform(0, 1, modes)
    return sum(ci * np.sin((k + 1) * PI * x) ** 2 for k, ci in enumerate(c))


class TestTypes:
    def test_grid(self):
        g = Grid1D(PI, 200)
        assert g.spacing * 201 == pytest.approx(PI, abs=1e-12)
        assert g.nodes[0] == pytest.approx(g.spacing) and g.nodes.size == 200
        with pytest.raises(ValueError):
            Grid1D(PI, 7)

    def test_field_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            Field(np.array([1.0, np.nan]))
        assert Field(np.array([1.0, -3.0]), 2.0).csv_row() == [2.0, 1.0, -3.0]

    def test_step_config(self):
        with pytest.raises(ValueError):
            StepConfig(16)
        with pytest.raises(ValueError):
            StepConfig(800, 0.4)
        assert StepConfig(800, 0.5, 200).refined(2) == StepConfig(3200, 0.5, 800)


def test_separable_heat_solution_and_second_order():
    e1, _ = heat_error(200, 800)
    assert e1 <= 1e-4
    e2, _ = heat_error(400, 1600)
    assert 3.0 <= e1 / e2 <= 5.0


def test_richardson_order_estimate():
    _, a = heat_error(50, 100)
    _, b = heat_error(101, 200)
    _, c = heat_error(203, 400)
    # (M+1) doubles, so coarse node i coincides with fine node 2i
    d1 = np.max(np.abs(a.values - b.values[1::2]))
    d2 = np.max(np.abs(b.values - c.values[1::2]))
    order = math.log2(d1 / d2)
    assert 1.7 <= order <= 2.3


def test_zero_stays_zero():
    spec = breathing()
    z = Field(np.zeros(64))
    assert np.all(step_linear(z, spec, 1.0, 1e-3).values == 0.0)
    assert np.all(step_nonlinear(z, spec, ReactionSpec("logistic", 2.0), 1e-3).values == 0.0)
    assert np.all(evolve(z, spec, 1.0, 0.0, spec.period, StepConfig(64, 0.5, 64)).values == 0.0)


def test_evolve_zero_steps_is_identity():
    f = Field(np.linspace(1, 2, 16), 0.3)
    out = evolve(f, breathing(), 1.0, 0.3, 0.3, StepConfig(64, 0.5, 16))
    assert np.array_equal(out.values, f.values)


def test_evolve_requires_whole_steps():
    with pytest.raises(ValueError):
        evolve(Field(np.ones(16)), breathing(), 1.0, 0.0, 0.123, StepConfig(64, 0.5, 16))


def test_one_period_on_fixed_domain_damps_sine_mode():
    spec = fixed_domain(omega=1.0)
    cfg = StepConfig(800, 0.5, 200)
    grid = Grid1D(PI, 200)
    u0 = np.sin(grid.nodes)
    u = evolve(Field(u0), spec, 1.0, 0.0, spec.period, cfg)
    # exact discrete factor of the scheme on the grid eigenvector
    lam = 4 / grid.spacing**2 * math.sin(grid.spacing / 2) ** 2
    z = spec.period / 800 * lam
    discrete = ((1 - z / 2) / (1 + z / 2)) ** 800
    np.testing.assert_allclose(u.values, discrete * u0, atol=1e-14)
    assert discrete == pytest.approx(math.exp(-spec.period), rel=1e-4)


def test_evolve_is_linear(rng):
    spec = shifting(2.0)
    cfg = StepConfig(128, 0.5, 64)
    u, v = rng.normal(size=64), rng.normal(size=64)
    a, b = 0.7, -1.9
    lhs = evolve(Field(a * u + b * v), spec, 1.0, 0.0, spec.period, cfg).values
    rhs = a * evolve(Field(u), spec, 1.0, 0.0, spec.period, cfg).values + b * evolve(Field(v), spec, 1.0, 0.0, spec.period, cfg).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * (1 + np.max(np.abs(rhs)))


def test_step_linear_matches_evolve():
    spec = breathing(1.0)
    cfg = StepConfig(64, 0.5, 32)
    dt = spec.period / 64
    f = Field(np.sin(Grid1D(PI, 32).nodes))
    g = f
    for _ in range(64):
        g = step_linear(g, spec, 1.0, dt)
    h = evolve(f, spec, 1.0, 0.0, spec.period, cfg)
    np.testing.assert_allclose(g.values, h.values, rtol=1e-13, atol=1e-15)
    assert g.time == pytest.approx(spec.period)


def test_extra_potential_equals_rate():
    spec = breathing(1.0)
    f = Field(np.sin(Grid1D(PI, 32).nodes))
    a = step_linear(f, spec, 1.0, 0.01, potential=lambda xi, t: 0.3 + 0 * xi)
    b = step_linear(f, spec, 1.0, 0.01, rate=0.3)
    np.testing.assert_allclose(a.values, b.values, rtol=1e-14)


@pytest.mark.parametrize("spec", [breathing(), shifting()], ids=["breathing", "shifting"])
def test_comparison_principle_smooth_data(spec, rng):
    cfg = StepConfig(800, 0.5, 200)
    grid = Grid1D(PI, 200)
    for _ in range(5):
        u0 = smooth_nonneg(grid, rng)
        v0 = u0 + smooth_nonneg(grid, rng)
        u = evolve(Field(u0), spec, 1.0, 0.0, spec.period, cfg).values
        v = evolve(Field(v0), spec, 1.0, 0.0, spec.period, cfg).values
        assert np.all(u <= v + 1e-12)
        assert np.all(u >= -1e-12)


@pytest.mark.parametrize("spec", [breathing(), shifting()], ids=["breathing", "shifting"])
def test_comparison_principle_rough_data_backward_euler(spec, rng):
    cfg = StepConfig(800, 1.0, 200)
    for _ in range(5):
        u0 = rng.uniform(0, 1, 200)
        v0 = u0 + rng.uniform(0, 1, 200)
        u = evolve(Field(u0), spec, 1.0, 0.0, spec.period, cfg).values
        v = evolve(Field(v0), spec, 1.0, 0.0, spec.period, cfg).values
        assert np.all(u <= v + 1e-12) and np.all(u >= -1e-12)


class TestNonlinearStep:
    def test_supersolution_K(self):
        rx = ReactionSpec("logistic", 2.0, 1.0)
        spec = fixed_domain()
        cfg = monotone_guard(spec, rx, StepConfig(800, 0.5, 400))
        dt = spec.period / cfg.steps_per_period
        out = step_nonlinear(Field(np.ones(400)), spec, rx, dt).values
        assert np.all(out <= 1.0 + 1e-15)
        assert out[199] == pytest.approx(1.0, abs=1e-8)

    def test_logistic_initial_growth(self):
        rx = ReactionSpec("logistic", 2.0, 1.0)
        spec = fixed_domain(omega=4 * PI)  # T = 0.5
        grid = Grid1D(PI, 200)
        u0 = 1e-3 * np.sin(grid.nodes)
        out = evolve(Field(u0), spec, rx, 0.0, 0.5, StepConfig(800, 0.5, 200))
        assert out.sup() / 1e-3 == pytest.approx(math.exp(0.5), rel=0.05)

    def test_range_violation_on_large_step(self):
        rx = ReactionSpec("logistic", 2.0, 1.0)
        with pytest.raises(RangeViolation):
            step_nonlinear(Field(np.ones(200)), fixed_domain(), rx, 0.5)

    def test_custom_matches_builtin_logistic(self):
        spec = breathing()
        cfg = StepConfig(400, 0.5, 64)
        built = ReactionSpec("logistic", 2.5, 1.0)
        custom = ReactionSpec("custom-monostable", 2.5, 1.0, func=lambda u: 2.5 * u * (1 - u))
        cfg = monotone_guard(spec, built, cfg)
        u0 = Field(0.5 * np.sin(Grid1D(PI, 64).nodes))
        a = evolve(u0, spec, built, 0.0, spec.period, cfg).values
        b = evolve(u0, spec, custom, 0.0, spec.period, cfg).values
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)


def test_singular_pivot_detected():
    h, dt, theta = 0.1, 0.01, 0.5
    table = np.zeros((1, 6))
    table[0, 0] = 1.0
    # diagonal 1 + theta dt (2 diff/h^2 - pot) vanishes
    table[0, 3] = 1.0 / (theta * dt) + 2.0 / h**2
    with pytest.raises(SingularSystem):
        _run(np.ones((16, 1)), h, dt, theta, table)


class TestPeriodMap:
    def test_matches_evolve_without_guard(self):
        spec = shifting(1.0)
        cfg = StepConfig(256, 0.5, 48)
        pm = PeriodMap(spec, 1.0, cfg, guard=False)
        u0 = np.sin(pm.grid.nodes)
        a = pm(u0)
        b = evolve(Field(u0), spec, 1.0, 0.0, spec.period, cfg).values
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-15)

    def test_columns_independent_and_offsets(self, rng):
        spec = breathing(1.0)
        pm = PeriodMap(spec, 1.0, StepConfig(128, 0.5, 32), guard=False)
        U = rng.uniform(0, 1, (32, 3))
        batch = U.copy()
        pm.advance(batch)
        for j in range(3):
            np.testing.assert_allclose(batch[:, j], pm(U[:, j]), rtol=1e-14)
        split = U[:, :1].copy()
        pm.advance(split, 0, 50)
        pm.advance(split, 50, 78)
        np.testing.assert_allclose(split[:, 0], batch[:, 0], rtol=1e-14)

    def test_renormalisation_preserves_direction(self):
        spec = fixed_domain(omega=0.05)
        pm = PeriodMap(spec, 1.0, StepConfig(800, 0.5, 32))
        u = np.sin(pm.grid.nodes).reshape(-1, 1)
        start = math.log(np.max(u))
        logscale = pm.advance(u, renorm=True)
        total = logscale + math.log(np.max(u)) - start
        lam = 4 / pm.grid.spacing**2 * math.sin(pm.grid.spacing / 2) ** 2
        z = pm.dt * lam
        assert total == pytest.approx(pm.Nt * math.log((1 - z / 2) / (1 + z / 2)), rel=1e-10)

    def test_stiffness_guard(self):
        spec = fixed_domain(omega=0.25)
        cfg = StepConfig(800, 0.5, 200)
        g = stiffness_guard(spec, 1.0, cfg)
        assert g.steps_per_period > 800 and g.steps_per_period % 800 == 0
        assert stiffness_guard(spec, 1.0, StepConfig(800, 1.0, 200)).steps_per_period == 800

    def test_monotone_guard(self):
        rx = ReactionSpec("logistic", 2.5, 1.0)
        spec = breathing()
        cfg = monotone_guard(spec, rx, StepConfig(800, 0.5, 200))
        h = PI / 201
        t = np.linspace(0, spec.period, 1025)
        diff = np.max(PI**2 / spec.L(t) ** 2)
        dt = spec.period / cfg.steps_per_period
        assert 0.5 * dt * 2 * diff / h**2 + dt * 2.5 <= 1.0 + 1e-9
        assert cfg.steps_per_period % 800 == 0
        with pytest.raises(ValueError):
            monotone_guard(DomainSpec(PI, A0=50.0, a=shifting().a, omega=50.0), rx, StepConfig(800, 0.5, 16))


def test_operator_table_rows_used_at_theta_time():
    spec = breathing(1.0)
    pm = PeriodMap(spec, 1.0, StepConfig(64, 0.5, 16), guard=False)
    expected = operator_table(spec, 1.0, (np.arange(64) + 0.5) * pm.dt)
    np.testing.assert_array_equal(pm.table, expected)
