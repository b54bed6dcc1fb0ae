"""Coupled payload / multi-UAV rigid-link model.

N UAVs hang off a rigid payload through vertical massless rods joined at
spherical joints. The payload carries the full translational and rotational
dynamics; each UAV only contributes its mass at the attachment point and its
own (decoupled) attitude dynamics.

Frames: world is NED (+z down). Payload velocity ``v0`` is expressed in the
payload frame, so ``r0_dot = R0 @ v0``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

E3 = np.array([0.0, 0.0, 1.0])


class SingularParametersError(ValueError):
    """The mass/inertia block matrix of the payload system is not invertible."""


class SimulationDiverged(RuntimeError):
    """A non-finite value appeared in the integrated state."""


class GimbalLockWarning(RuntimeWarning):
    pass


def hat(v) -> np.ndarray:
    """Skew-symmetric cross-product matrix: ``hat(v) @ w == cross(v, w)``."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def vee(M: np.ndarray) -> np.ndarray:
    return np.array([M[2, 1], M[0, 2], M[1, 0]])


def _cross(a, b) -> np.ndarray:
    return np.array(
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    )


def _cross_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise cross product of two (N, 3) arrays."""
    out = np.empty_like(b)
    out[:, 0] = a[:, 1] * b[:, 2] - a[:, 2] * b[:, 1]
    out[:, 1] = a[:, 2] * b[:, 0] - a[:, 0] * b[:, 2]
    out[:, 2] = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    return out


def _hat_batch(w: np.ndarray) -> np.ndarray:
    out = np.zeros(w.shape[:-1] + (3, 3))
    out[..., 0, 1] = -w[..., 2]
    out[..., 0, 2] = w[..., 1]
    out[..., 1, 0] = w[..., 2]
    out[..., 1, 2] = -w[..., 0]
    out[..., 2, 0] = -w[..., 1]
    out[..., 2, 1] = w[..., 0]
    return out


# ---------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class BodyParams:
    mass: float
    inertia: np.ndarray

    def __post_init__(self):
        J = np.asarray(self.inertia, dtype=float)
        if J.shape == (3,):
            J = np.diag(J)
        object.__setattr__(self, "inertia", J)
        # zero is allowed so a UAV can be reduced to a massless attachment
        if not self.mass >= 0:
            raise ValueError(f"mass must be non-negative, got {self.mass}")
        if J.shape != (3, 3) or not np.allclose(J, J.T):
            raise ValueError("inertia must be a symmetric 3x3 matrix")
        if np.linalg.eigvalsh(J).min() <= 0:
            raise ValueError("inertia must be positive definite")


@dataclass(frozen=True)
class AttachmentGeometry:
    rho: np.ndarray
    link_length: float

    def __post_init__(self):
        object.__setattr__(self, "rho", np.asarray(self.rho, dtype=float).reshape(3))
        if not self.link_length > 0:
            raise ValueError(f"link_length must be positive, got {self.link_length}")


@dataclass(frozen=True)
class SystemParams:
    """Physical parameters of the payload and its N UAVs.

    ``uav_masses`` may contain zeros to emulate a bare payload; everything
    else follows the usual positivity rules. Degenerate configurations are
    rejected here so the simulator never meets a singular block matrix.
    """

    payload: BodyParams
    uavs: tuple  # of (BodyParams, AttachmentGeometry)
    gravity: float = 9.81

    def __post_init__(self):
        object.__setattr__(self, "uavs", tuple(self.uavs))
        if len(self.uavs) < 1:
            raise ValueError("need at least one UAV")
        if not self.payload.mass > 0:
            raise ValueError("payload mass must be positive")
        if np.linalg.eigvalsh(self.apparent_inertia).min() <= 0:
            raise SingularParametersError("apparent inertia is not positive definite")
        self.zeta_blocks  # noqa: B018 - validates invertibility at load time

    @property
    def n_uavs(self) -> int:
        return len(self.uavs)

    @cached_property
    def uav_masses(self) -> np.ndarray:
        return np.array([b.mass for b, _ in self.uavs])

    @cached_property
    def uav_inertias(self) -> np.ndarray:
        return np.stack([b.inertia for b, _ in self.uavs])

    @cached_property
    def uav_inertias_inv(self) -> np.ndarray:
        return np.linalg.inv(self.uav_inertias)

    @cached_property
    def rho(self) -> np.ndarray:
        return np.stack([g.rho for _, g in self.uavs])

    @cached_property
    def link_lengths(self) -> np.ndarray:
        return np.array([g.link_length for _, g in self.uavs])

    @cached_property
    def total_mass(self) -> float:
        return self.payload.mass + float(self.uav_masses.sum())

    @cached_property
    def mass_moment(self) -> np.ndarray:
        """First mass moment of the attachment points, sum(m_i * rho_i)."""
        return self.uav_masses @ self.rho

    @cached_property
    def apparent_inertia(self) -> np.ndarray:
        J = self.payload.inertia.copy()
        for m, r in zip(self.uav_masses, self.rho):
            H = hat(r)
            J -= m * H @ H
        return J

    @cached_property
    def mass_moment_tuple(self) -> tuple:
        return tuple(self.mass_moment.tolist())

    @cached_property
    def apparent_inertia_tuple(self) -> tuple:
        return tuple(tuple(row) for row in self.apparent_inertia.tolist())

    @cached_property
    def rho_hat_stack(self) -> np.ndarray:
        """``[hat(rho_1) ... hat(rho_N)]``, shape (3, 3N)."""
        return np.hstack([hat(r) for r in self.rho])

    @cached_property
    def wrench_map(self) -> np.ndarray:
        """``[S1; S2]``: stacked payload-frame UAV forces to force/moment on the payload."""
        return np.vstack([np.tile(np.eye(3), (1, self.n_uavs)), self.rho_hat_stack])

    @cached_property
    def input_map_body(self) -> np.ndarray:
        """``P11 S1 + P12 S2``: payload-frame map from stacked UAV forces to v0_dot."""
        Z = self.zeta_blocks
        S1 = np.tile(np.eye(3), (1, self.n_uavs))
        return Z[:3, :3] @ S1 + Z[:3, 3:] @ self.rho_hat_stack

    @cached_property
    def input_map_body_pinv(self) -> np.ndarray:
        return np.linalg.pinv(self.input_map_body)

    @cached_property
    def block_matrix(self) -> np.ndarray:
        S = hat(self.mass_moment)
        M = np.zeros((6, 6))
        M[:3, :3] = self.total_mass * np.eye(3)
        M[:3, 3:] = -S
        M[3:, :3] = S
        M[3:, 3:] = self.apparent_inertia
        return M

    @cached_property
    def zeta_blocks(self) -> np.ndarray:
        M = self.block_matrix
        s = np.linalg.svd(M, compute_uv=False)
        if s[-1] <= 1e-12 * s[0]:
            raise SingularParametersError(
                f"block matrix is singular (condition {s[0] / max(s[-1], 1e-300):.3g})"
            )
        return np.linalg.inv(M)


def assemble_zeta(params: SystemParams):
    """Return ``(P11, P12, P21, P22)``, the 3x3 blocks of the inverse block matrix."""
    Z = params.zeta_blocks
    return Z[:3, :3], Z[:3, 3:], Z[3:, :3], Z[3:, 3:]


def default_params(gravity: float = 9.81) -> SystemParams:
    """Four 0.68 kg UAVs hanging a 1 kg payload on 3.2 m links."""
    payload = BodyParams(1.0, np.diag([0.556, 0.556, 0.556]))
    uav = BodyParams(0.68, np.diag([0.029, 0.029, 0.055]))
    rhos = [
        [0.25, 0.25, 0.125],
        [0.25, -0.25, 0.125],
        [-0.25, -0.25, 0.125],
        [-0.25, 0.25, 0.125],
    ]
    return SystemParams(
        payload, tuple((uav, AttachmentGeometry(r, 3.2)) for r in rhos), gravity
    )


# ---------------------------------------------------------------------------
# state


@dataclass
class SystemState:
    r0: np.ndarray
    v0: np.ndarray
    R0: np.ndarray
    w0: np.ndarray
    R: np.ndarray  # (N, 3, 3) UAV attitudes
    w: np.ndarray  # (N, 3) UAV body rates
    time: float = 0.0

    @classmethod
    def at_rest(cls, n_uavs: int, r0=(0.0, 0.0, 0.0), time: float = 0.0) -> "SystemState":
        return cls(
            r0=np.asarray(r0, dtype=float).copy(),
            v0=np.zeros(3),
            R0=np.eye(3),
            w0=np.zeros(3),
            R=np.tile(np.eye(3), (n_uavs, 1, 1)),
            w=np.zeros((n_uavs, 3)),
            time=time,
        )

    @property
    def n_uavs(self) -> int:
        return self.R.shape[0]

    @property
    def r0_dot(self) -> np.ndarray:
        """Payload velocity in the world frame."""
        return self.R0 @ self.v0

    def pack(self) -> np.ndarray:
        return np.concatenate(
            [self.r0, self.v0, self.R0.ravel(), self.w0, self.R.ravel(), self.w.ravel()]
        )

    @classmethod
    def unpack(cls, x: np.ndarray, n_uavs: int, time: float, copy: bool = True) -> "SystemState":
        n = n_uavs
        c = (lambda a: a.copy()) if copy else (lambda a: a)
        return cls(
            r0=c(x[0:3]),
            v0=c(x[3:6]),
            R0=c(x[6:15].reshape(3, 3)),
            w0=c(x[15:18]),
            R=c(x[18 : 18 + 9 * n].reshape(n, 3, 3)),
            w=c(x[18 + 9 * n : 18 + 12 * n].reshape(n, 3)),
            time=time,
        )

    def copy(self) -> "SystemState":
        return replace(
            self,
            r0=self.r0.copy(),
            v0=self.v0.copy(),
            R0=self.R0.copy(),
            w0=self.w0.copy(),
            R=self.R.copy(),
            w=self.w.copy(),
        )


@dataclass
class StateDeriv:
    r0: np.ndarray
    v0: np.ndarray
    R0: np.ndarray
    w0: np.ndarray
    R: np.ndarray
    w: np.ndarray

    def pack(self) -> np.ndarray:
        return np.concatenate(
            [self.r0, self.v0, self.R0.ravel(), self.w0, self.R.ravel(), self.w.ravel()]
        )


@dataclass
class ControlInput:
    """Per-UAV thrust magnitude and body torque.

    With ``force`` set (world-frame, shape (N, 3)) the thrust/attitude path is
    bypassed and the forces are applied as given; this is the ideal-force
    actuation mode. Otherwise the lift of UAV i is ``-thrust[i] * R_i @ e3``
    (positive thrust points up in NED).
    """

    thrust: np.ndarray
    torque: np.ndarray
    force: np.ndarray | None = None

    def __post_init__(self):
        self.thrust = np.asarray(self.thrust, dtype=float).reshape(-1)
        self.torque = np.asarray(self.torque, dtype=float).reshape(-1, 3)
        if np.any(self.thrust < 0):
            raise ValueError("thrust must be non-negative")
        if self.force is not None:
            self.force = np.asarray(self.force, dtype=float).reshape(-1, 3)

    @classmethod
    def zero(cls, n_uavs: int) -> "ControlInput":
        return cls(np.zeros(n_uavs), np.zeros((n_uavs, 3)))

    @classmethod
    def from_forces(cls, force) -> "ControlInput":
        force = np.asarray(force, dtype=float).reshape(-1, 3)
        n = force.shape[0]
        return cls(np.linalg.norm(force, axis=1), np.zeros((n, 3)), force)

    def world_forces(self, R: np.ndarray) -> np.ndarray:
        if self.force is not None:
            return self.force
        return -self.thrust[:, None] * R[:, :, 2]


# ---------------------------------------------------------------------------
# kinematics / dynamics


def uav_position(state: SystemState, params: SystemParams, i: int) -> np.ndarray:
    if not 0 <= i < params.n_uavs:
        raise IndexError(f"UAV index {i} out of range for N={params.n_uavs}")
    rho = params.rho[i]
    offset = rho - params.link_lengths[i] * E3
    return state.r0 + state.R0 @ offset


def generalized_force(state: SystemState, forces: np.ndarray, params: SystemParams) -> np.ndarray:
    """Right-hand side ``xi`` such that ``[v0_dot; w0_dot] = zeta @ xi``."""
    return _xi(state.R0, state.v0, state.w0, forces, params)


def state_wrench(R0, v0, w0, params: SystemParams) -> np.ndarray:
    """Input-free part of ``xi``: Coriolis, centripetal and gravity terms."""
    # R0.T @ (g e3) is g times the last row of R0
    return np.array(_wrench_terms(v0.tolist(), w0.tolist(), (params.gravity * R0[2]).tolist(), params))


def _wrench_terms(v, w, gk, params: SystemParams) -> tuple:
    """Scalar core of :func:`state_wrench`; ``gk`` is gravity in the payload frame.

    For 3-vectors plain float arithmetic is several times faster than chained
    small numpy calls, and this sits on the integrator hot path.
    """
    vx, vy, vz = v
    wx, wy, wz = w
    gx, gy, gz = gk
    mx, my, mz = params.mass_moment_tuple
    (j00, j01, j02), (j10, j11, j12), (j20, j21, j22) = params.apparent_inertia_tuple
    mT = params.total_mass

    # a = w x v
    a0 = wy * vz - wz * vy
    a1 = wz * vx - wx * vz
    a2 = wx * vy - wy * vx
    # c = w x (w x m)
    b0 = wy * mz - wz * my
    b1 = wz * mx - wx * mz
    b2 = wx * my - wy * mx
    c0 = wy * b2 - wz * b1
    c1 = wz * b0 - wx * b2
    c2 = wx * b1 - wy * b0
    # d = w x (Jbar w)
    q0 = j00 * wx + j01 * wy + j02 * wz
    q1 = j10 * wx + j11 * wy + j12 * wz
    q2 = j20 * wx + j21 * wy + j22 * wz
    d0 = wy * q2 - wz * q1
    d1 = wz * q0 - wx * q2
    d2 = wx * q1 - wy * q0
    # e = m x a, f = m x gk
    e0 = my * a2 - mz * a1
    e1 = mz * a0 - mx * a2
    e2 = mx * a1 - my * a0
    f0 = my * gz - mz * gy
    f1 = mz * gx - mx * gz
    f2 = mx * gy - my * gx
    return (
        -mT * a0 - c0 + mT * gx,
        -mT * a1 - c1 + mT * gy,
        -mT * a2 - c2 + mT * gz,
        -d0 - e0 + f0,
        -d1 - e1 + f1,
        -d2 - e2 + f2,
    )


def _xi(R0, v0, w0, forces, params: SystemParams) -> np.ndarray:
    u_body = (forces @ R0).ravel()  # block i: R0.T @ F_i
    return state_wrench(R0, v0, w0, params) + params.wrench_map @ u_body


def _flat_rates(x: np.ndarray, n: int, forces: np.ndarray, torque: np.ndarray, params: SystemParams) -> np.ndarray:
    R0 = x[6:15].reshape(3, 3)
    v0 = x[3:6]
    w0 = x[15:18]
    R = x[18 : 18 + 9 * n].reshape(n, 3, 3)
    w = x[18 + 9 * n :].reshape(n, 3)

    acc = params.zeta_blocks @ _xi(R0, v0, w0, forces, params)
    out = np.empty_like(x)
    out[0:3] = R0 @ v0
    out[3:6] = acc[:3]
    out[6:15] = (R0 @ hat(w0)).ravel()
    out[15:18] = acc[3:]
    if w.any() or torque.any():
        Jw = np.einsum("nij,nj->ni", params.uav_inertias, w)
        dw = np.einsum("nij,nj->ni", params.uav_inertias_inv, torque - _cross_rows(w, Jw))
        out[18 : 18 + 9 * n] = (R @ _hat_batch(w)).ravel()
        out[18 + 9 * n :] = dw.ravel()
    else:
        out[18:] = 0.0
    return out


def dynamics_deriv(state: SystemState, inp: ControlInput, params: SystemParams) -> StateDeriv:
    n = state.n_uavs
    x = state.pack()
    dx = _flat_rates(x, n, inp.world_forces(state.R), inp.torque, params)
    return StateDeriv(
        r0=dx[0:3],
        v0=dx[3:6],
        R0=dx[6:15].reshape(3, 3),
        w0=dx[15:18],
        R=dx[18 : 18 + 9 * n].reshape(n, 3, 3),
        w=dx[18 + 9 * n :].reshape(n, 3),
    )


def payload_acceleration(state: SystemState, inp: ControlInput, params: SystemParams) -> np.ndarray:
    """World-frame ``r0_ddot = R0 (w0 x v0 + v0_dot)``."""
    d = dynamics_deriv(state, inp, params)
    return state.R0 @ (_cross(state.w0, state.v0) + d.v0)


def orthonormalize(R: np.ndarray, tol: float = 1e-6) -> np.ndarray:
    """Nearest rotation (polar factor) of a single matrix or a stack.

    Matrices already within ``tol`` of orthonormal, which is always the case
    after an integrator step, take Newton-Schulz polar iterations; anything
    further off goes through an SVD.
    """
    R = np.asarray(R, dtype=float)
    E = np.swapaxes(R, -1, -2) @ R - np.eye(3)
    if np.abs(E).max() < tol:
        for _ in range(2):
            R = R @ (1.5 * np.eye(3) - 0.5 * (np.swapaxes(R, -1, -2) @ R))
        return R
    U, _, Vt = np.linalg.svd(R)
    out = U @ Vt
    det = np.linalg.det(out)
    if np.any(det < 0):
        U = U.copy()
        U[..., :, -1] *= np.sign(det)[..., None]
        out = U @ Vt
    return out


def integrate_step(state: SystemState, inp, params: SystemParams, dt: float, steps: int = 1) -> SystemState:
    """Advance ``steps`` RK4 steps of length ``dt``.

    ``inp`` is either a ``ControlInput`` held constant over the steps or a
    callable ``state -> ControlInput`` re-evaluated at every RK4 stage.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if steps < 1:
        raise ValueError("steps must be at least 1")
    fast = getattr(inp, "payload_rates", None)
    if fast is not None and not state.w.any():
        return _payload_steps(state, fast, dt, steps)
    for _ in range(steps):
        state = _rk4_step(state, inp, params, dt)
    return state


def _rk4_step(state: SystemState, inp, params: SystemParams, dt: float) -> SystemState:
    n = state.n_uavs
    t0 = state.time
    policy = inp if callable(inp) else (lambda _s: inp)

    def f(x, t):
        s = SystemState.unpack(x, n, t, copy=False)
        u = policy(s)
        return _flat_rates(x, n, u.world_forces(s.R), u.torque, params)

    x = state.pack()
    k1 = f(x, t0)
    k2 = f(x + 0.5 * dt * k1, t0 + 0.5 * dt)
    k3 = f(x + 0.5 * dt * k2, t0 + 0.5 * dt)
    k4 = f(x + dt * k3, t0 + dt)
    x_new = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(x_new)):
        raise SimulationDiverged(f"non-finite state after step at t={t0 + dt:.4f}")

    new = SystemState.unpack(x_new, n, t0 + dt)
    rots = orthonormalize(np.concatenate([new.R0[None], new.R]))
    new.R0 = rots[0]
    new.R = rots[1:]
    return new


def _payload_steps(state: SystemState, rates, dt: float, steps: int) -> SystemState:
    """RK4 on the 18 payload states only; UAVs keep their attitude (zero rates).

    ``rates`` maps a list ``(r0, v0, vec(R0), w0)`` to its time derivative.
    Plain float lists avoid per-stage array allocation.
    """
    x = state.r0.tolist() + state.v0.tolist() + state.R0.ravel().tolist() + state.w0.tolist()
    h2, h6 = 0.5 * dt, dt / 6.0
    t = state.time
    for _ in range(steps):
        k1 = rates(x)
        k2 = rates([a + h2 * b for a, b in zip(x, k1)])
        k3 = rates([a + h2 * b for a, b in zip(x, k2)])
        k4 = rates([a + dt * b for a, b in zip(x, k3)])
        x = [a + h6 * (p + 2.0 * q + 2.0 * r + s) for a, p, q, r, s in zip(x, k1, k2, k3, k4)]
        t += dt
        if not math.isfinite(sum(x)):
            raise SimulationDiverged(f"non-finite state after step at t={t:.4f}")
        # one Newton-Schulz polar step, R <- R (1.5 I - 0.5 R'R); drift per step is far below 1e-6
        r00, r01, r02, r10, r11, r12, r20, r21, r22 = x[6:15]
        s00 = 1.5 - 0.5 * (r00 * r00 + r10 * r10 + r20 * r20)
        s11 = 1.5 - 0.5 * (r01 * r01 + r11 * r11 + r21 * r21)
        s22 = 1.5 - 0.5 * (r02 * r02 + r12 * r12 + r22 * r22)
        s01 = -0.5 * (r00 * r01 + r10 * r11 + r20 * r21)
        s02 = -0.5 * (r00 * r02 + r10 * r12 + r20 * r22)
        s12 = -0.5 * (r01 * r02 + r11 * r12 + r21 * r22)
        x[6:15] = [
            r00 * s00 + r01 * s01 + r02 * s02, r00 * s01 + r01 * s11 + r02 * s12, r00 * s02 + r01 * s12 + r02 * s22,
            r10 * s00 + r11 * s01 + r12 * s02, r10 * s01 + r11 * s11 + r12 * s12, r10 * s02 + r11 * s12 + r12 * s22,
            r20 * s00 + r21 * s01 + r22 * s02, r20 * s01 + r21 * s11 + r22 * s12, r20 * s02 + r21 * s12 + r22 * s22,
        ]
    xa = np.array(x)
    return SystemState(
        r0=xa[0:3], v0=xa[3:6], R0=xa[6:15].reshape(3, 3), w0=xa[15:18],
        R=state.R.copy(), w=state.w.copy(), time=t,
    )


# ---------------------------------------------------------------------------
# Euler angles (logging view only)


def rotation_from_euler(theta) -> np.ndarray:
    """ZYX convention, ``theta = [roll, pitch, yaw]``: R = Rz(yaw) Ry(pitch) Rx(roll)."""
    phi, th, psi = theta
    cf, sf = np.cos(phi), np.sin(phi)
    ct, st = np.cos(th), np.sin(th)
    cp, sp = np.cos(psi), np.sin(psi)
    return np.array(
        [
            [cp * ct, cp * st * sf - sp * cf, cp * st * cf + sp * sf],
            [sp * ct, sp * st * sf + cp * cf, sp * st * cf - cp * sf],
            [-st, ct * sf, ct * cf],
        ]
    )


def euler_zyx(R: np.ndarray, gimbal_tol: float = 1e-6) -> np.ndarray:
    """Inverse of :func:`rotation_from_euler`.

    Warns with :class:`GimbalLockWarning` when pitch is within ``gimbal_tol``
    of +-pi/2; roll is then reported as zero and yaw absorbs the rotation.
    """
    s = -R[2, 0]
    if abs(abs(s) - 1.0) < gimbal_tol:
        warnings.warn("pitch at +-pi/2: roll and yaw are not separable", GimbalLockWarning, stacklevel=2)
        pitch = np.copysign(np.pi / 2, s)
        yaw = np.arctan2(-R[0, 1], R[1, 1])
        return np.array([0.0, pitch, yaw])
    pitch = np.arcsin(np.clip(s, -1.0, 1.0))
    roll = np.arctan2(R[2, 1], R[2, 2])
    yaw = np.arctan2(R[1, 0], R[0, 0])
    return np.array([roll, pitch, yaw])
