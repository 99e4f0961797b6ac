import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from inspect_fdi.dynamics import (OrbitEnvironment, ProParameters, PropagationDiverged,
                                  RelativeState, cw_derivative, default_dt, propagate,
                                  propagate_many, pro_state)

ENV1 = OrbitEnvironment(1.0)
LEO = OrbitEnvironment(2 * math.pi / 6000.0)

finite = st.floats(-1e3, 1e3, allow_nan=False)
vec3 = st.tuples(finite, finite, finite)


def test_environment_period():
    assert LEO.orbit_period * LEO.mean_motion_n == pytest.approx(2 * math.pi, rel=1e-12)
    with pytest.raises(ValueError):
        OrbitEnvironment(-1.0)


def test_cw_derivative_examples():
    d = cw_derivative(RelativeState(np.zeros(3), np.zeros(3)), np.zeros(3), ENV1)
    assert np.all(d.position == 0) and np.all(d.velocity == 0)

    d = cw_derivative(RelativeState([0, 0, 1], [0, 0, 0]), np.zeros(3), ENV1)
    np.testing.assert_array_equal(d.velocity, [0, 0, -1])

    # x'' = 3*1 + 2*(-2) = -1, y'' = -2*0
    d = cw_derivative(RelativeState([1, 0, 0], [0, -2, 0]), np.zeros(3), ENV1)
    np.testing.assert_allclose(d.velocity, [-1, 0, 0])
    np.testing.assert_array_equal(d.position, [0, -2, 0])


@given(vec3, vec3, vec3, vec3, vec3, vec3,
       st.floats(-5, 5, allow_nan=False), st.floats(-5, 5, allow_nan=False))
def test_cw_derivative_is_linear(p1, v1, u1, p2, v2, u2, a, b):
    s1, s2 = RelativeState(p1, v1), RelativeState(p2, v2)
    u1, u2 = np.array(u1), np.array(u2)
    mix = RelativeState(a * s1.position + b * s2.position, a * s1.velocity + b * s2.velocity)
    lhs = cw_derivative(mix, a * u1 + b * u2, ENV1).as_vector()
    rhs = a * cw_derivative(s1, u1, ENV1).as_vector() + b * cw_derivative(s2, u2, ENV1).as_vector()
    scale = max(1.0, np.max(np.abs(lhs)), np.max(np.abs(rhs)))
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * scale


def test_equilibrium_is_fixed():
    s = RelativeState(np.zeros(3), np.zeros(3))
    out = propagate(s, None, LEO, 17.0)
    np.testing.assert_array_equal(out.as_vector(), np.zeros(6))


def test_cross_track_oscillator_returns_after_one_period():
    s0 = RelativeState([0, 0, 10.0], [0, 0, 0.004])
    dt = LEO.orbit_period / 2000
    s1 = propagate_many(s0, LEO, dt, 2000)
    np.testing.assert_allclose(s1.as_vector(), s0.as_vector(), rtol=1e-6, atol=1e-9)


def test_rk4_local_error_is_fifth_order():
    s0 = pro_state(ProParameters(30, 5, 20, 0.3, 1.1), LEO, 0.0)
    errs = []
    for dt in (400.0, 200.0):
        full = propagate(s0, None, LEO, dt)
        halves = propagate(propagate(s0, None, LEO, dt / 2), None, LEO, dt / 2)
        errs.append(np.linalg.norm(full.position - halves.position))
    # local error ~ dt^5: halving dt shrinks it ~32x
    assert errs[0] / errs[1] > 20


def test_propagate_rejects_bad_dt_and_divergence():
    s = RelativeState([1, 0, 0], [0, 0, 0])
    with pytest.raises(ValueError):
        propagate(s, None, LEO, 0.0)
    with pytest.raises(PropagationDiverged):
        propagate(RelativeState([1e308, 0, 0], [1e308, 0, 0]), None, OrbitEnvironment(10.0), 1.0)


def test_pro_static_station():
    p = ProParameters(along_track_offset=42.0)
    for t in (0.0, 100.0, 5000.0):
        s = pro_state(p, LEO, t)
        np.testing.assert_array_equal(s.position, [0, 42.0, 0])
        np.testing.assert_array_equal(s.velocity, [0, 0, 0])


def test_pro_periodic_exactly():
    # k * period is only an exact float multiple for power-of-two k
    p = ProParameters(25, -3, 40, 0.7, 2.1)
    for k in (1, 2, 4):
        a = pro_state(p, LEO, 0.0)
        b = pro_state(p, LEO, k * LEO.orbit_period)
        np.testing.assert_array_equal(a.as_vector(), b.as_vector())


@settings(max_examples=50)
@given(st.floats(0, 1e5, allow_nan=False))
def test_pro_periodic_general_time(t):
    p = ProParameters(25, -3, 40, 0.7, 2.1)
    a = pro_state(p, LEO, t).as_vector()
    b = pro_state(p, LEO, t + LEO.orbit_period).as_vector()
    np.testing.assert_allclose(a, b, atol=1e-9 * (1 + t))


@settings(max_examples=30)
@given(st.floats(0, 50), st.floats(-50, 50), st.floats(0, 50),
       st.floats(-math.pi, math.pi), st.floats(-math.pi, math.pi), st.floats(1, 5900))
def test_pro_satisfies_cw(ar, yo, ac, phr, phc, t):
    p = ProParameters(ar, yo, ac, phr, phc)
    s = pro_state(p, LEO, t)
    # central difference of the closed-form velocity against the CW acceleration
    h = 0.5
    acc_fd = (pro_state(p, LEO, t + h).velocity - pro_state(p, LEO, t - h).velocity) / (2 * h)
    acc = cw_derivative(s, np.zeros(3), LEO).velocity
    np.testing.assert_allclose(acc_fd, acc, atol=1e-9 * (1 + ar + ac))
    pos_fd = (pro_state(p, LEO, t + h).position - pro_state(p, LEO, t - h).position) / (2 * h)
    np.testing.assert_allclose(pos_fd, s.velocity, atol=1e-7 * (1 + ar + ac))


def test_integrator_tracks_closed_form_over_one_period():
    p = ProParameters(30, 10, 45, 0.4, 1.3)
    dt = default_dt(LEO)
    s = pro_state(p, LEO, 0.0)
    worst = 0.0
    for k in range(1, 2001):
        s = propagate(s, None, LEO, dt)
        if k % 50 == 0:
            ref = pro_state(p, LEO, k * dt)
            worst = max(worst, np.linalg.norm(s.position - ref.position))
    assert worst < 1e-5
    start = pro_state(p, LEO, 0.0)
    assert np.linalg.norm(s.position - start.position) < 1e-5
    assert np.linalg.norm(s.velocity - start.velocity) < 1e-7


def test_global_error_ratio_on_halving():
    p = ProParameters(30, 10, 45, 0.4, 1.3)
    T = LEO.orbit_period
    errs = []
    for steps in (100, 200):
        s = propagate_many(pro_state(p, LEO, 0.0), LEO, T / steps, steps)
        errs.append(np.linalg.norm(s.position - pro_state(p, LEO, T).position))
    assert errs[0] / errs[1] >= 8.0
