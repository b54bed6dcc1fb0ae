import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from payload_stl.linearization import ideal_force_policy
from payload_stl.rigid_body import (
    AttachmentGeometry,
    BodyParams,
    ControlInput,
    GimbalLockWarning,
    SystemParams,
    SystemState,
    dynamics_deriv,
    euler_zyx,
    hat,
    integrate_step,
    orthonormalize,
    rotation_from_euler,
    default_params,
    uav_position,
    vee,
)

G = 9.81
angles = st.floats(-3.0, 3.0, allow_nan=False)


@pytest.fixture(scope="module")
def params():
    return default_params()


def test_default_model_values(params):
    assert params.n_uavs == 4
    assert params.payload.mass == 1.0
    np.testing.assert_array_equal(np.diag(params.payload.inertia), [0.556] * 3)
    np.testing.assert_array_equal(params.uav_masses, [0.68] * 4)
    for J in params.uav_inertias:
        np.testing.assert_array_equal(np.diag(J), [0.029, 0.029, 0.055])
    np.testing.assert_array_equal(
        params.rho,
        [[0.25, 0.25, 0.125], [0.25, -0.25, 0.125], [-0.25, -0.25, 0.125], [-0.25, 0.25, 0.125]],
    )
    np.testing.assert_array_equal(params.link_lengths, [3.2] * 4)
    assert params.total_mass == pytest.approx(1.0 + 4 * 0.68)


def test_hat_examples():
    np.testing.assert_array_equal(hat([0, 0, 0]), np.zeros((3, 3)))
    np.testing.assert_array_equal(hat([1, 2, 3]), [[0, -3, 2], [3, 0, -1], [-2, 1, 0]])


@given(st.lists(angles, min_size=6, max_size=6))
def test_hat_is_cross_product(xs):
    a, b = np.array(xs[:3]), np.array(xs[3:])
    np.testing.assert_allclose(hat(a) @ b, np.cross(a, b), atol=1e-12)
    np.testing.assert_allclose(vee(hat(a)), a)


def test_uav_position(params):
    s = SystemState.at_rest(4)
    np.testing.assert_allclose(uav_position(s, params, 0), [0.25, 0.25, -3.075])
    with pytest.raises(IndexError):
        uav_position(s, params, 4)


def test_hover_is_equilibrium(params):
    s = SystemState.at_rest(4)
    thrust = np.full(4, params.total_mass * G / 4)
    d = dynamics_deriv(s, ControlInput(thrust, np.zeros((4, 3))), params)
    np.testing.assert_allclose(d.v0, 0.0, atol=1e-12)
    np.testing.assert_allclose(d.w0, 0.0, atol=1e-12)


def test_free_fall_acceleration(params):
    d = dynamics_deriv(SystemState.at_rest(4), ControlInput.zero(4), params)
    np.testing.assert_allclose(d.v0, [0, 0, G], atol=1e-12)


def _fall(params, dt, T=1.0):
    s = SystemState.at_rest(4)
    for _ in range(int(round(T / dt))):
        s = integrate_step(s, ControlInput.zero(4), params, dt)
    return s


def test_free_fall_matches_ballistic(params):
    s = _fall(params, 0.002)
    assert s.r0[2] == pytest.approx(G / 2, abs=1e-6)
    assert s.time == pytest.approx(1.0)
    finer = _fall(params, 0.001)
    assert abs(finer.r0[2] - s.r0[2]) < 1e-9


def test_fixed_point_only_advances_time(params):
    s = SystemState.at_rest(4, r0=[1.0, 2.0, 3.0])
    thrust = np.full(4, params.total_mass * G / 4)
    nxt = integrate_step(s, ControlInput(thrust, np.zeros((4, 3))), params, 0.002)
    np.testing.assert_allclose(nxt.pack(), s.pack(), atol=1e-12)
    assert nxt.time == pytest.approx(0.002)


def test_pack_roundtrip():
    rng = np.random.default_rng(3)
    s = SystemState.at_rest(4)
    x = rng.standard_normal(len(s.pack()))
    back = SystemState.unpack(x, 4, 1.5)
    np.testing.assert_array_equal(back.pack(), x)
    assert back.time == 1.5


@given(st.lists(st.floats(-2, 2), min_size=9, max_size=9))
def test_orthonormalize_gives_rotation(xs):
    M = np.eye(3) + 0.3 * np.array(xs).reshape(3, 3)
    if abs(np.linalg.det(M)) < 1e-3:
        return
    R = orthonormalize(M)
    np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-10)
    assert np.linalg.det(R) == pytest.approx(1.0)


@given(angles, st.floats(-1.4, 1.4), angles)
def test_euler_roundtrip(roll, pitch, yaw):
    th = np.array([roll, pitch, yaw])
    R = rotation_from_euler(th)
    np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-12)
    back = euler_zyx(R)
    np.testing.assert_allclose(rotation_from_euler(back), R, atol=1e-10)
    np.testing.assert_allclose(back[1], pitch, atol=1e-10)


def test_euler_identity_and_gimbal_lock():
    np.testing.assert_allclose(rotation_from_euler([0, 0, 0]), np.eye(3))
    with pytest.warns(GimbalLockWarning):
        euler_zyx(rotation_from_euler([0, math.pi / 2, 0]))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        euler_zyx(rotation_from_euler([0.1, 0.2, 0.3]))


def test_fast_payload_path_matches_general(params):
    rng = np.random.default_rng(0)
    fast = slow = SystemState.at_rest(4)
    for _ in range(20):
        policy = ideal_force_policy(rng.uniform(-2, 2, 3), params)
        for _ in range(10):
            fast = integrate_step(fast, policy, params, 0.002)
            slow = integrate_step(slow, lambda s, p=policy: p(s), params, 0.002)
    assert np.abs(fast.pack() - slow.pack()).max() < 1e-9


def test_bad_inputs(params):
    with pytest.raises(ValueError):
        integrate_step(SystemState.at_rest(4), ControlInput.zero(4), params, 0.0)
    with pytest.raises(ValueError):
        BodyParams(-1.0, np.eye(3))
    with pytest.raises(ValueError):
        AttachmentGeometry([0, 0, 0], 0.0)
    with pytest.raises(ValueError):
        ControlInput([-1.0], [[0, 0, 0]])
    with pytest.raises(ValueError):
        SystemParams(BodyParams(0.0, np.eye(3)), ())
