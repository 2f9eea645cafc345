import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wzlab.cadlag import STEP, CadlagPath, ConfigError, JumpRecord, quadratic_variation_split
from wzlab.drivers import DriverSpec, RandomSeed, simulate
from wzlab.smoothing import smooth
from wzlab.solvers import (
    CoefficientSet,
    SolverConfig,
    SolverDivergenceError,
    coefficient_family,
    marcus_flow,
    solve_marcus,
    solve_random_ode,
    y_eps_and_residual,
)
from wzlab.timechange import build, z_eps


def cset(bname, bargs, fname, fargs):
    return CoefficientSet(b=coefficient_family(bname, *bargs), f=coefficient_family(fname, *fargs))


@pytest.fixture(scope="module")
def pure_jump_driver():
    grid = np.unique(np.concatenate((np.linspace(0.0, 2.0, 201), [0.5, 1.0, 1.5])))
    jumps = ((0.5, 0.5), (1.0, -0.3), (1.5, 0.8))
    vals = np.zeros_like(grid)
    for t0, s in jumps:
        vals = vals + np.where(grid >= t0, s, 0.0)
    return CadlagPath(grid, vals, tuple(JumpRecord(t, s) for t, s in jumps), STEP)


# ------------------------------------------------------------ coefficient sets


def test_theorem_compliance_flags():
    assert cset("constant", (0.0,), "sin_scaled", (1.0, 1.0)).theorem_compliant
    assert cset("tanh_scaled", (0.5, 1.0), "tanh_scaled", (1.0, 2.0)).theorem_compliant
    assert not cset("linear", (1.0,), "constant", (1.0,)).theorem_compliant
    assert not cset("constant", (0.0,), "quadratic", (1.0,)).theorem_compliant


def test_derivatives_match_finite_differences():
    rng = np.random.default_rng(1)
    xs = rng.uniform(-10.0, 10.0, 100)
    h = 1e-6
    for fam in (
        coefficient_family("constant", 2.0),
        coefficient_family("linear", -1.3),
        coefficient_family("quadratic", 0.7),
        coefficient_family("sin_scaled", 1.1, 2.3),
        coefficient_family("tanh_scaled", 0.8, 1.7),
    ):
        for x in xs:
            fd = (fam(x + h) - fam(x - h)) / (2 * h)
            scale = max(1.0, abs(fam.deriv(x)))
            assert abs(fam.deriv(x) - fd) <= 1e-6 * scale


def test_batch_matches_scalar():
    fam = coefficient_family("sin_scaled", 1.5, 0.7)
    xs = np.linspace(-3, 3, 17)
    assert np.allclose(fam.batch(xs), [fam(float(x)) for x in xs], atol=1e-15)
    assert np.allclose(fam.deriv_batch(xs), [fam.deriv(float(x)) for x in xs], atol=1e-15)


def test_unknown_family_rejected():
    with pytest.raises(ConfigError):
        coefficient_family("cubic", 1.0)


# ------------------------------------------------------------- random ODE


def test_exponential_decay():
    c = simulate(DriverSpec.constant(0.0, T=1.0, dt=0.01), RandomSeed(0))
    coeffs = cset("linear", (-1.0,), "constant", (0.0,))
    xe = solve_random_ode(coeffs, smooth(c, 0.2), SolverConfig(x0=1.0, h=1e-3))
    assert abs(xe.evaluate(1.0) - np.exp(-1.0)) <= 1e-8


def test_pure_forcing_integration(unit_jump):
    sp = smooth(unit_jump, 0.2)
    coeffs = cset("constant", (0.0,), "constant", (1.0,))
    xe = solve_random_ode(coeffs, sp, SolverConfig(x0=0.3, h=1e-3))
    assert abs(xe.evaluate(2.0) - (0.3 + sp.evaluate(2.0) - sp.evaluate(0.0))) <= 1e-10


def test_linear_forcing_exponential(unit_jump):
    sp = smooth(unit_jump, 0.2)
    coeffs = cset("constant", (0.0,), "linear", (1.0,))
    xe = solve_random_ode(coeffs, sp, SolverConfig(x0=1.0, h=1e-3))
    assert abs(xe.evaluate(2.0) - np.exp(sp.evaluate(2.0) - sp.evaluate(0.0))) <= 1e-6


def test_rk4_order_on_smooth_problem():
    # single-cell driver so the solver step is set by h alone
    c = simulate(DriverSpec.constant(0.0, T=1.0, dt=1.0), RandomSeed(0))
    sp = smooth(c, 10.0)
    coeffs = cset("sin_scaled", (1.0, 1.0), "constant", (0.0,))
    ref = solve_random_ode(coeffs, sp, SolverConfig(x0=0.5, h=1e-3 / 8)).evaluate(1.0)
    e1 = abs(solve_random_ode(coeffs, sp, SolverConfig(x0=0.5, h=1e-1)).evaluate(1.0) - ref)
    e2 = abs(solve_random_ode(coeffs, sp, SolverConfig(x0=0.5, h=5e-2)).evaluate(1.0) - ref)
    assert e1 / e2 >= 12.0


def test_divergence_error_names_time():
    c = simulate(DriverSpec.constant(0.0, T=2.0, dt=0.01), RandomSeed(0))
    coeffs = cset("quadratic", (1.0,), "constant", (0.0,))  # x' = x^2 blows up at t = 1
    with pytest.raises(SolverDivergenceError) as err:
        solve_random_ode(coeffs, smooth(c, 0.01), SolverConfig(x0=1.0, h=1e-3))
    assert err.value.time is not None
    assert 0.9 <= err.value.time <= 1.1


# ------------------------------------------------------------- marcus flow


def test_flow_constant_field_exact():
    fam = coefficient_family("constant", 1.7)
    assert marcus_flow(fam, 2.5, 0.4, 1) == pytest.approx(0.4 + 1.7 * 2.5, abs=1e-15)


def test_flow_zero_jump_identity():
    fam = coefficient_family("sin_scaled", 1.0, 1.0)
    assert marcus_flow(fam, 0.0, 0.37, 8) == 0.37


def test_flow_linear_exponential():
    fam = coefficient_family("linear", 1.0)
    # RK4 leading error c^5 y / (120 K^4) is 1.6e-10 at K = 64
    assert abs(marcus_flow(fam, np.log(2.0), 1.0, 64) - 2.0) <= 2e-10
    assert abs(marcus_flow(fam, np.log(2.0), 1.0, 96) - 2.0) <= 1e-10


def test_flow_quadratic_separable():
    fam = coefficient_family("quadratic", 1.0)
    # y' = 0.5 y^2, y(0) = 1 -> y(1) = 1 / (1 - 0.5) = 2
    assert abs(marcus_flow(fam, 0.5, 1.0, 128) - 2.0) <= 1e-8


def test_flow_divergence():
    fam = coefficient_family("quadratic", 1.0)
    with pytest.raises(SolverDivergenceError):
        marcus_flow(fam, 4.0, 1.0, 4)


@settings(max_examples=50, deadline=None)
@given(
    u1=st.floats(-2.0, 2.0),
    u2=st.floats(-2.0, 2.0),
    c=st.floats(-1.5, 1.5),
)
def test_flow_monotone_in_start_for_monotone_field(u1, u2, c):
    fam = coefficient_family("tanh_scaled", 1.0, 1.0)
    lo, hi = min(u1, u2), max(u1, u2)
    assert marcus_flow(fam, c, lo, 16) <= marcus_flow(fam, c, hi, 16) + 1e-12


# ----------------------------------------------------------- marcus solution


def test_marcus_constant_f_exact(pure_jump_driver):
    coeffs = cset("constant", (0.0,), "constant", (2.0,))
    X = solve_marcus(coeffs, pure_jump_driver, SolverConfig(x0=0.5, h=1e-2))
    expect = 0.5 + 2.0 * (pure_jump_driver.values - pure_jump_driver.values[0])
    assert np.max(np.abs(X.values - expect)) <= 1e-12


def test_marcus_pure_jump_linear(pure_jump_driver):
    coeffs = cset("constant", (0.0,), "linear", (1.0,))
    X = solve_marcus(coeffs, pure_jump_driver, SolverConfig(x0=1.0, h=1e-2, flow_substeps=64))
    assert abs(X.evaluate(2.0) - np.exp(1.0)) <= 1e-8


def test_marcus_brownian_linear_pathwise_order():
    L = simulate(DriverSpec.brownian(1.0, 0.0, T=1.0, dt=1e-3), RandomSeed(7))
    coeffs = cset("constant", (0.0,), "linear", (1.0,))
    oracle = np.exp(L.evaluate(1.0) - L.evaluate(0.0))
    errs = [
        abs(solve_marcus(coeffs, L, SolverConfig(x0=1.0, h=h)).evaluate(1.0) - oracle)
        for h in (1e-3, 5e-4, 2.5e-4)
    ]
    assert errs[0] <= 10 * 1e-3
    assert errs[0] / errs[1] >= 3.0
    assert errs[1] / errs[2] >= 3.0


def test_marcus_shares_grid_and_jump_times(pure_jump_driver):
    coeffs = cset("constant", (0.0,), "sin_scaled", (1.0, 1.0))
    X = solve_marcus(coeffs, pure_jump_driver, SolverConfig(x0=0.1, h=1e-2))
    assert np.array_equal(X.grid, pure_jump_driver.grid)
    assert [j.time for j in X.jumps] == [j.time for j in pure_jump_driver.jumps]


def test_constant_f_degeneracy(unit_jump):
    # with f constant the two solvers differ by at most |f| sup|L - smoothed L|
    cval = 1.5
    coeffs = cset("constant", (0.0,), "constant", (cval,))
    sp = smooth(unit_jump, 0.2)
    xe = solve_random_ode(coeffs, sp, SolverConfig(x0=0.0, h=1e-3))
    X = solve_marcus(coeffs, unit_jump, SolverConfig(x0=0.0, h=1e-3))
    ts = unit_jump.grid
    sup_gap = np.max(np.abs(np.asarray(sp.evaluate(ts)) - unit_jump.values))
    assert abs(X.evaluate(2.0) - xe.evaluate(2.0)) <= cval * sup_gap + 1e-10


# --------------------------------------------------- time-changed solution


@pytest.fixture(scope="module")
def jd_bundle():
    spec = DriverSpec.jump_diffusion(1.0, 0.0, 2.0, __import__("wzlab").JumpLaw.normal(0, 1), 1.0, 1e-3)
    L = simulate(spec, RandomSeed(42, 0))
    qv = quadratic_variation_split(L)
    coeffs = cset("tanh_scaled", (0.5, 1.0), "sin_scaled", (1.0, 1.0))
    eps = 0.1
    sp = smooth(L, eps)
    xe = solve_random_ode(coeffs, sp, SolverConfig(x0=0.1, h=1e-3))
    syse = build(qv, L.jumps, eps)
    ze = z_eps(sp, syse)
    return L, coeffs, sp, xe, syse, ze


def test_residual_telescopes_for_unit_forcing(unit_jump, unit_jump_qv):
    coeffs = cset("constant", (0.0,), "constant", (1.0,))
    sp = smooth(unit_jump, 0.2)
    xe = solve_random_ode(coeffs, sp, SolverConfig(x0=0.3, h=1e-3))
    syse = build(unit_jump_qv, unit_jump.jumps, 0.2)
    ze = z_eps(sp, syse)
    y, resid = y_eps_and_residual(xe, syse, ze, coeffs)
    assert resid <= 1e-8
    assert abs(y.values[0] - 0.3) <= 1e-12


def test_residual_constant_driver():
    c = simulate(DriverSpec.constant(1.0, T=1.0, dt=0.01), RandomSeed(0))
    qv = quadratic_variation_split(c)
    coeffs = cset("constant", (0.7,), "constant", (0.0,))
    sp = smooth(c, 0.1)
    xe = solve_random_ode(coeffs, sp, SolverConfig(x0=0.0, h=1e-3))
    syse = build(qv, c.jumps, 0.1)
    ze = z_eps(sp, syse)
    _, resid = y_eps_and_residual(xe, syse, ze, coeffs)
    assert resid <= 1e-8


def test_residual_halves_under_refinement(jd_bundle):
    _, coeffs, _, xe, syse, ze = jd_bundle
    _, r1 = y_eps_and_residual(xe, syse, ze, coeffs, refine_factor=1)
    _, r2 = y_eps_and_residual(xe, syse, ze, coeffs, refine_factor=2)
    assert r2 <= 0.6 * r1


def test_time_change_chain(jd_bundle):
    L, coeffs, sp, xe, syse, ze = jd_bundle
    y, _ = y_eps_and_residual(xe, syse, ze, coeffs)
    ts = L.grid[:: 50]
    ge = np.asarray(syse.gamma_eps.evaluate(ts))
    lhs = np.asarray(y.evaluate(np.clip(ge, 0.0, y.T)))
    rhs = np.asarray(xe.evaluate(ts))
    assert np.all(np.abs(lhs - rhs) <= 1e-6 * (1.0 + np.abs(rhs)))


def test_residual_rejects_mismatched_inputs(jd_bundle, unit_jump, unit_jump_qv):
    L, coeffs, sp, xe, syse, ze = jd_bundle
    other_sys = build(unit_jump_qv, unit_jump.jumps, 0.1)
    with pytest.raises(ConfigError):
        y_eps_and_residual(xe, other_sys, ze, coeffs)
