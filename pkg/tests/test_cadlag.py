import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wzlab.cadlag import (
    LINEAR,
    STEP,
    CadlagPath,
    JumpRecord,
    csv_dumps,
    quadratic_variation_split,
    read_csv,
    write_csv,
)
from wzlab.drivers import DriverSpec, RandomSeed, simulate

import oracles


# ---------------------------------------------------------------- evaluate


def test_evaluate_right_continuous_at_jump(unit_jump):
    assert unit_jump.evaluate(1.0) == 1.0


def test_evaluate_constant():
    c = simulate(DriverSpec.constant(3.0, T=2.0, dt=0.5), RandomSeed(0))
    for t in (0.0, 0.7, 1.3, 2.0):
        assert c.evaluate(t) == 3.0


def test_evaluate_linear_midpoint():
    p = CadlagPath(np.array([0.0, 2.0]), np.array([0.0, 1.0]))
    assert p.evaluate(1.0) == 0.5


def test_evaluate_domain_error(unit_jump):
    with pytest.raises(ValueError):
        unit_jump.evaluate(2.5)
    with pytest.raises(ValueError):
        unit_jump.evaluate(-0.5)


# ---------------------------------------------------------------- left_limit


def test_left_limit_at_jump(unit_jump):
    assert unit_jump.left_limit(1.0) == 0.0


def test_left_limit_constant():
    c = simulate(DriverSpec.constant(2.5, T=1.0, dt=0.25), RandomSeed(0))
    assert c.left_limit(0.5) == 2.5


def test_left_limit_step_convention():
    # unregistered value change on a step path still has the previous value
    # as its left limit
    p = CadlagPath(np.array([0.0, 0.5, 1.0]), np.array([0.0, 2.0, 2.0]), (), STEP)
    assert p.left_limit(0.5) == 0.0


def test_left_limit_requires_positive_time(unit_jump):
    with pytest.raises(ValueError):
        unit_jump.left_limit(0.0)


def test_linear_left_limit_at_jump_is_value_minus_size():
    grid = np.array([0.0, 1.0, 2.0])
    p = CadlagPath(grid, np.array([0.0, 1.5, 1.5]), (JumpRecord(1.0, 1.0),), LINEAR)
    assert p.left_limit(1.0) == 0.5
    assert p.evaluate(1.0) - p.left_limit(1.0) == pytest.approx(1.0, abs=1e-12)


# ------------------------------------------------- quadratic variation split


def test_qv_single_unit_jump(unit_jump):
    qv = quadratic_variation_split(unit_jump)
    d = qv.discontinuous
    assert d.evaluate(0.5) == 0.0
    assert d.evaluate(1.0) == 1.0
    assert d.evaluate(2.0) == 1.0
    assert np.all(qv.continuous.values == 0.0)


def test_qv_squared_jump_size():
    L = simulate(DriverSpec.single_jump(1.0, 2.0, T=2.0, dt=0.1), RandomSeed(0))
    qv = quadratic_variation_split(L)
    assert qv.discontinuous.evaluate(1.0) == 4.0
    assert qv.total.evaluate(1.5) == 4.0


def test_qv_brownian_metadata_and_realized():
    spec = DriverSpec.brownian(0.5, 0.0, T=2.0, dt=1e-3)
    L = simulate(spec, RandomSeed(11))
    qv = quadratic_variation_split(L)
    assert qv.continuous.evaluate(2.0) == pytest.approx(0.5, abs=1e-12)
    realized = quadratic_variation_split(L, realized=True).continuous.evaluate(2.0)
    # realized QV of Brownian increments: sd = sigma^2 * sqrt(2 dt T)
    se = 0.25 * np.sqrt(2 * 1e-3 * 2.0)
    assert abs(realized - 0.5) <= 3 * se


def test_qv_exact_step_heights():
    rng = np.random.default_rng(4)
    p = oracles.random_step_path(rng)
    qv = quadratic_variation_split(p)
    for j, dj in zip(p.jumps, qv.discontinuous.jumps):
        assert dj.size == j.size * j.size


# ---------------------------------------------------------------- running sup


def test_running_sup_identity_path(identity_path):
    assert identity_path.running_sup(1.5) == 1.5


def test_running_sup_peak_before_down_jump():
    grid = np.array([0.0, 1.0, 2.0])
    p = CadlagPath(grid, np.array([0.0, 0.0, 0.0]), (JumpRecord(1.0, -1.0),), LINEAR)
    assert p.left_limit(1.0) == 1.0
    assert p.running_sup(2.0) == 1.0


def test_running_sup_constant_zero():
    c = simulate(DriverSpec.constant(0.0, T=1.0, dt=0.5), RandomSeed(0))
    assert c.running_sup(1.0) == 0.0


# --------------------------------------------------------------- first passage


def test_first_passage_jump_crosses(unit_jump):
    assert unit_jump.first_passage(0.5) == 1.0


def test_first_passage_never():
    c = simulate(DriverSpec.constant(0.0, T=1.0, dt=0.5), RandomSeed(0))
    assert c.first_passage(1.0) is None


def test_first_passage_interpolated_crossing():
    grid = np.arange(0.0, 2.0 + 1e-12, 0.5)
    p = CadlagPath(grid, grid.copy())
    assert p.first_passage(0.75) == 0.75
    oracle = oracles.dense_first_passage(p, 0.75)
    assert abs(oracle - 0.75) <= 2e-6


def test_first_passage_level_validation(unit_jump):
    with pytest.raises(ValueError):
        unit_jump.first_passage(0.0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), a=st.floats(0.05, 2.5))
def test_passage_supremum_duality(seed, a):
    rng = np.random.default_rng(seed)
    p = oracles.random_step_path(rng)
    fp = p.first_passage(a)
    for t in p.grid:
        exceeded = p.running_sup(t) > a
        assert exceeded == (fp is not None and fp <= t)


# ----------------------------------------------------------- right continuity


def test_right_continuity_on_refined_grids(unit_jump):
    for t in (0.25, 0.5, 1.5):
        gaps = [abs(unit_jump.evaluate(t + h) - unit_jump.evaluate(t)) for h in (0.01, 0.005)]
        assert gaps[-1] <= gaps[0] + 1e-15
        assert gaps[-1] == 0.0  # step path, no change until the next knot


def test_jump_consistency_invariant(unit_jump):
    for j in unit_jump.jumps:
        gap = unit_jump.evaluate(j.time) - unit_jump.left_limit(j.time)
        assert abs(gap - j.size) <= 1e-12


# ----------------------------------------------------------------- validation


def test_grid_must_start_at_zero():
    with pytest.raises(ValueError):
        CadlagPath(np.array([0.5, 1.0]), np.array([0.0, 1.0]))


def test_grid_strictly_increasing():
    with pytest.raises(ValueError):
        CadlagPath(np.array([0.0, 1.0, 1.0]), np.array([0.0, 1.0, 2.0]))


def test_jump_time_must_be_grid_point():
    with pytest.raises(ValueError):
        CadlagPath(np.array([0.0, 1.0]), np.array([0.0, 1.0]), (JumpRecord(0.5, 1.0),))


def test_zero_jump_size_rejected():
    with pytest.raises(ValueError):
        CadlagPath(np.array([0.0, 1.0]), np.array([0.0, 0.0]), (JumpRecord(1.0, 0.0),), STEP)


def test_step_jump_size_consistency_checked():
    with pytest.raises(ValueError):
        CadlagPath(np.array([0.0, 1.0]), np.array([0.0, 1.0]), (JumpRecord(1.0, 0.5),), STEP)


# ----------------------------------------------------------------------- CSV


def test_csv_round_trip(unit_jump):
    buf = io.StringIO()
    write_csv(unit_jump, buf)
    buf.seek(0)
    back = read_csv(buf, interpolation=STEP)
    assert np.array_equal(back.grid, unit_jump.grid)
    assert np.array_equal(back.values, unit_jump.values)
    assert back.jumps == unit_jump.jumps


def test_csv_header_and_order(unit_jump):
    text = csv_dumps(unit_jump)
    lines = text.strip().splitlines()
    assert lines[0] == "time,value,is_jump,jump_size"
    times = [float(l.split(",")[0]) for l in lines[1:]]
    assert times == sorted(times)


def test_csv_bad_header_rejected():
    with pytest.raises(ValueError):
        read_csv(io.StringIO("a,b,c,d\n0.0,0.0,0,0.0\n"))
