import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from sitstand.preprocessing import (
    LowVerticalForce,
    NonMonotoneTime,
    Preprocessor,
    RunningMaxFilter,
    SensorFrame,
    compute_cop,
    cop_bounds,
    filter_nu1,
)

DT = 0.01
TAU = 1.0 / (2 * math.pi * 10.0)


def frame(i, **kw):
    base = dict(t=i * DT, Fhx=0.0, Fhy=0.0, Fgx=0.0, Fgy=700.0, Mgz=-70.0)
    base.update(kw)
    return SensorFrame(**base)


# -- compute_cop ----------------------------------------------------------------

def test_cop_zero_moment():
    assert compute_cop(frame(0, Mgz=0.0)) == 0.0


def test_cop_from_moment():
    assert compute_cop(frame(0, Mgz=-70.0, Fgy=700.0)) == pytest.approx(0.1, abs=1e-15)


def test_cop_low_vertical_force():
    with pytest.raises(LowVerticalForce):
        compute_cop(frame(0, Fgy=5.0))


@given(m=st.floats(-500, 500), fy=st.floats(21, 2000))
def test_cop_odd_in_moment(m, fy):
    assert compute_cop(frame(0, Mgz=-m, Fgy=fy)) == -compute_cop(frame(0, Mgz=m, Fgy=fy))


def test_cop_bounds_extend_support_by_half():
    lo, hi = cop_bounds((0.0, 0.25))
    assert hi - lo == pytest.approx(0.375)
    assert (lo, hi) == pytest.approx((-0.0625, 0.3125))


def test_sensor_frame_rejects_nan():
    with pytest.raises(ValueError):
        frame(0, Fhx=math.nan)


# -- derive -----------------------------------------------------------------------

def test_constant_stream_has_zero_derivatives():
    pre = Preprocessor()
    for i in range(int(10 * TAU / DT) + 2):
        f = pre.derive(frame(i, Fhy=40.0))
    assert abs(f.dFhy) < 1e-9 and abs(f.dFgy) < 1e-9 and abs(f.cop_v) < 1e-9


def test_ramp_derivative_settles_to_slope():
    pre = Preprocessor()
    for i in range(100):
        f = pre.derive(frame(i, Fhy=50.0 * i * DT))
    assert f.dFhy == pytest.approx(50.0, rel=0.01)


def test_step_follows_first_order_response():
    pre = Preprocessor()
    pre.derive(frame(0, Fgy=100.0, Mgz=0.0))
    ys = [(pre.derive(frame(i, Fgy=200.0, Mgz=0.0)).Fgy - 100.0) / 100.0 for i in range(1, 6)]
    # sampled values sit exactly on 1 - exp(-t / tau)
    for n, y in enumerate(ys, start=1):
        assert y == pytest.approx(1.0 - math.exp(-n * DT / TAU), abs=1e-12)
    assert ys[0] < 1 - 1 / math.e < ys[1]
    assert TAU == pytest.approx(0.016, abs=1e-3)


def test_unloaded_feet_hold_last_cop():
    pre = Preprocessor()
    a = pre.derive(frame(0, Fgy=700.0, Mgz=-70.0))
    b = pre.derive(frame(1, Fgy=0.0, Mgz=0.0))
    for i in range(2, 20):
        b = pre.derive(frame(i, Fgy=0.0, Mgz=0.0))
    assert a.cop_valid and not b.cop_valid
    assert b.cop_x == a.cop_x
    assert b.cop_v == 0.0


def test_cop_clamped_and_flagged():
    pre = Preprocessor()
    f = pre.derive(frame(0, Fgy=700.0, Mgz=-700.0))
    assert f.cop_x == pytest.approx(0.3125)
    assert f.cop_clamped


@pytest.mark.parametrize("t1", [0.0, -0.01, 0.025])
def test_bad_timestamps_rejected(t1):
    pre = Preprocessor()
    pre.derive(frame(0))
    with pytest.raises(NonMonotoneTime):
        pre.derive(frame(0, t=t1))


def test_derive_is_causal():
    stream = [frame(i, Fhy=30.0 * math.sin(i / 7), Fgy=600 + 5 * i) for i in range(60)]
    full = Preprocessor()
    out_full = [full.derive(f) for f in stream]
    prefix = Preprocessor()
    out_prefix = [prefix.derive(f) for f in stream[:25]]
    assert out_prefix == out_full[:25]


# -- running max ------------------------------------------------------------------

def test_running_max_nondecreasing_is_fixed_point():
    f = RunningMaxFilter(10)
    assert [filter_nu1(f, v) for v in (1, 2, 3, 4)] == [1, 2, 3, 4]


def test_running_max_hand_simulation():
    f = RunningMaxFilter(10)
    out = [filter_nu1(f, v) for v in [5] + [1] * 11]
    assert out[:10] == [5] * 10
    assert out[10] == 1


def test_running_max_reset():
    f = RunningMaxFilter(3)
    f.push(9.0)
    f.reset()
    assert len(f) == 0
    assert f.push(1.0) == 1.0


@given(st.lists(st.floats(0, 50), min_size=1, max_size=40), st.integers(1, 12))
def test_running_max_matches_definition(xs, w):
    f = RunningMaxFilter(w)
    for i, x in enumerate(xs):
        assert f.push(x) == max(xs[max(0, i - w + 1): i + 1])
