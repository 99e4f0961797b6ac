import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from inspect_fdi.dynamics import RelativeState
from inspect_fdi.faults import (ACTUATOR_POINTING, ACTUATOR_STATE, INSPECTION_SENSOR,
                                SPURIOUS_COMM, ActiveFault, FaultSpec, WrongFaultKind,
                                apply_comm_fault, apply_pointing_fault, apply_sensor_variance_fault,
                                apply_state_fault, derive_seed, rotate_about)
from inspect_fdi.sensing import Pose

STATE = RelativeState([1.0, 2.0, 3.0], [0.1, 0.2, 0.3])
POSE = Pose([10.0, 0, 0], [-1.0, 0, 0])


def test_identity_before_onset_and_at_zero_magnitude():
    rng = np.random.default_rng(0)
    for mag, t in ((0.0, 100.0), (1.0, 5.0)):
        s = FaultSpec(0, ACTUATOR_STATE, 10.0, mag)
        assert apply_state_fault(s, t, STATE, rng, 3.0) is STATE
        p = FaultSpec(0, ACTUATOR_POINTING, 10.0, mag)
        assert apply_pointing_fault(p, t, POSE, rng) is POSE
        c = FaultSpec(0, SPURIOUS_COMM, 10.0, mag)
        assert apply_comm_fault(c, t, 4.2, rng) == 4.2
        v = FaultSpec(0, INSPECTION_SENSOR, 10.0, mag)
        assert apply_sensor_variance_fault(v, t, 7.0) == 7.0
    # the rng was never touched
    assert rng.uniform() == np.random.default_rng(0).uniform()


def test_onset_is_inclusive():
    s = FaultSpec(0, ACTUATOR_STATE, 10.0, 1.0)
    out = apply_state_fault(s, 10.0, STATE, np.random.default_rng(0), 1.0)
    assert not np.array_equal(out.velocity, STATE.velocity)
    np.testing.assert_array_equal(out.position, STATE.position)


def test_state_kick_statistics():
    spec = FaultSpec(0, ACTUATOR_STATE, 0.0, 2e-3)
    rng = np.random.default_rng(1)
    kicks = np.array([apply_state_fault(spec, 1.0, STATE, rng, 5.0).velocity - STATE.velocity
                      for _ in range(4000)])
    assert np.std(kicks) == pytest.approx(2e-3 * 5.0, rel=0.05)
    assert abs(np.mean(kicks)) < 5e-4


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1e-4, 1.0))
def test_pointing_fault_keeps_unit_boresight(seed, mag):
    rng = np.random.default_rng(seed)
    b = rng.normal(size=3)
    pose = Pose([0, 0, 0], b / np.linalg.norm(b))
    out = apply_pointing_fault(FaultSpec(0, ACTUATOR_POINTING, 0.0, mag), 0.0, pose, rng)
    assert abs(np.linalg.norm(out.boresight) - 1) < 1e-12
    assert np.array_equal(out.position, pose.position)


def test_rotate_about_quarter_turn():
    np.testing.assert_allclose(rotate_about(np.array([1.0, 0, 0]), np.array([0, 0, 1.0]),
                                            math.pi / 2), [0, 1, 0], atol=1e-15)


def test_sensor_fault_scalar_and_array():
    spec = FaultSpec(0, INSPECTION_SENSOR, 0.0, 4.0)
    assert apply_sensor_variance_fault(spec, 1.0, 2.5) == 10.0
    assert apply_sensor_variance_fault(spec, 1.0, math.inf) == math.inf
    out = apply_sensor_variance_fault(spec, 1.0, np.array([1.0, np.inf, 3.0]))
    np.testing.assert_array_equal(out, [4.0, np.inf, 12.0])
    unit = FaultSpec(0, INSPECTION_SENSOR, 0.0, 1.0)
    assert apply_sensor_variance_fault(unit, 1.0, 2.5) == 2.5


def test_wrong_kind_rejected():
    with pytest.raises(WrongFaultKind):
        apply_state_fault(FaultSpec(0, SPURIOUS_COMM, 0.0, 1.0), 1.0, STATE,
                          np.random.default_rng(0), 1.0)
    with pytest.raises(ValueError):
        FaultSpec(0, "gremlins")
    with pytest.raises(ValueError):
        FaultSpec(0, ACTUATOR_STATE, -1.0)
    with pytest.raises(ValueError):
        FaultSpec(0, ACTUATOR_STATE, 0.0, -1.0)


def test_seeding_is_reproducible_and_independent():
    a = FaultSpec(1, ACTUATOR_STATE, 100.0, 1.0)
    b = FaultSpec(2, ACTUATOR_STATE, 100.0, 1.0)
    assert a.seed(7) == a.seed(7) == derive_seed(7, 1, ACTUATOR_STATE, 100.0)
    assert a.seed(7) != b.seed(7) and a.seed(7) != a.seed(8)
    assert FaultSpec(1, ACTUATOR_STATE, rng_seed=42).seed(7) == 42
    r1, r2 = ActiveFault.create(a, 7).rng, ActiveFault.create(a, 7).rng
    assert r1.uniform() == r2.uniform()
