"""Input-output feedback linearization of the payload position.

With ``r0`` as output the system has relative degree two:

    r0_ddot = d(x) + Delta(x) @ ubar

where ``ubar`` stacks the payload-frame UAV forces ``R0.T @ F_i``. Choosing
``ubar = pinv(Delta) @ (v - d)`` turns the payload into a double integrator
``r0_ddot = v``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rigid_body import (
    ControlInput,
    SystemParams,
    SystemState,
    _cross,
    _wrench_terms,
    state_wrench,
    vee,
)


class AllocationInfeasible(RuntimeError):
    """Input map lost full row rank; the virtual input cannot be realized."""


@dataclass(frozen=True)
class LinearizingTerms:
    d: np.ndarray  # (3,) drift of r0_ddot, world frame
    Delta: np.ndarray  # (3, 3N) input map, world frame
    fbar: np.ndarray  # (3,) state-only part of v0_dot, payload frame
    R0: np.ndarray


@dataclass(frozen=True)
class AllocationResult:
    ubar: np.ndarray  # (3N,)
    forces: np.ndarray  # (N, 3) world frame
    thrust: np.ndarray  # (N,)
    R_des: np.ndarray  # (N, 3, 3)


@dataclass(frozen=True)
class AttitudeGains:
    k_R: float = 4.0
    k_omega: float = 0.6

    def __post_init__(self):
        if self.k_R <= 0 or self.k_omega <= 0:
            raise ValueError("attitude gains must be positive")


def structure_matrices(params: SystemParams) -> tuple[np.ndarray, np.ndarray]:
    """``S1 = [I ... I]`` and ``S2 = [hat(rho_1) ... hat(rho_N)]``, both 3 x 3N."""
    S1 = np.tile(np.eye(3), (1, params.n_uavs))
    return S1, params.rho_hat_stack


def compute_terms(state: SystemState, params: SystemParams, check_rank: bool = True) -> LinearizingTerms:
    R0, v0, w0 = state.R0, state.v0, state.w0
    # P11 @ (translational terms) + P12 @ (rotational terms)
    fbar = params.zeta_blocks[:3] @ state_wrench(R0, v0, w0, params)
    wxv = _cross(w0, v0)

    Delta = R0 @ params.input_map_body
    d = R0 @ (wxv + fbar)
    if check_rank:
        smin = np.sqrt(max(np.linalg.eigvalsh(Delta @ Delta.T)[0], 0.0))
        if smin <= 1e-8:
            raise AllocationInfeasible(f"input map is rank deficient (sigma_min={smin:.3g})")
    return LinearizingTerms(d=d, Delta=Delta, fbar=fbar, R0=R0)


def desired_attitude(force: np.ndarray, previous: np.ndarray | None = None, tol: float = 1e-9) -> np.ndarray:
    """Attitude whose lift axis ``-R @ e3`` points along ``force``, yaw held at 0."""
    mag = np.linalg.norm(force)
    if mag < tol:
        return np.eye(3) if previous is None else previous
    b3 = -force / mag
    b1c = np.array([1.0, 0.0, 0.0])
    b2 = np.cross(b3, b1c)
    n2 = np.linalg.norm(b2)
    if n2 < 1e-9:
        # lift axis horizontal along x; fall back to world y as heading reference
        b2 = np.cross(b3, np.array([0.0, 1.0, 0.0]))
        n2 = np.linalg.norm(b2)
    b2 /= n2
    b1 = np.cross(b2, b3)
    return np.column_stack([b1, b2, b3])


def allocate(v, terms: LinearizingTerms, previous_R_des: np.ndarray | None = None) -> AllocationResult:
    """Minimum-norm force allocation realizing ``r0_ddot = v``."""
    v = np.asarray(v, dtype=float)
    D = terms.Delta
    # full row rank: pinv(D) = D.T (D D.T)^-1
    ubar = D.T @ np.linalg.solve(D @ D.T, v - terms.d)
    u = ubar.reshape(-1, 3)
    forces = u @ terms.R0.T
    thrust = np.linalg.norm(forces, axis=1)
    R_des = np.stack(
        [
            desired_attitude(F, None if previous_R_des is None else previous_R_des[i])
            for i, F in enumerate(forces)
        ]
    )
    return AllocationResult(ubar=ubar, forces=forces, thrust=thrust, R_des=R_des)


def ideal_force_mode(v, terms: LinearizingTerms) -> ControlInput:
    """World forces applied directly to the plant, bypassing attitude dynamics."""
    D = terms.Delta
    ubar = D.T @ np.linalg.solve(D @ D.T, np.asarray(v, dtype=float) - terms.d)
    return ControlInput.from_forces(ubar.reshape(-1, 3) @ terms.R0.T)


class IdealForcePolicy:
    """Callable ``state -> ControlInput`` that re-linearizes at every call.

    Handed to the integrator so the linearization is exact at each RK4 stage
    while ``v`` is held constant. Uses ``pinv(R0 M) = pinv(M) R0^T`` so no
    per-stage factorization is needed.

    Torques are zero, so UAV attitudes at rest stay put and the integrator may
    use :meth:`payload_rates` to advance the 18 payload states alone.
    """

    def __init__(self, v, params: SystemParams):
        self.v = np.asarray(v, dtype=float)
        self.params = params
        self._pinv = params.input_map_body_pinv
        self._zeta_top = params.zeta_blocks[:3]
        self._zero_torque = np.zeros((params.n_uavs, 3))
        zeta = params.zeta_blocks
        wp = params.wrench_map @ self._pinv  # 6 x 3
        # [v0_dot; w0_dot] = A sw + B (R0^T v - w0 x v0), sw the state wrench
        self._A = (zeta - zeta @ wp @ self._zeta_top).tolist()
        self._B = (zeta @ wp).tolist()
        self._vt = tuple(self.v.tolist())

    def _body_input(self, R0, v0, w0, sw):
        d_body = _cross(w0, v0) + self._zeta_top @ sw
        return R0.T @ self.v - d_body

    def __call__(self, state: SystemState) -> ControlInput:
        R0, v0, w0 = state.R0, state.v0, state.w0
        sw = state_wrench(R0, v0, w0, self.params)
        forces = (self._pinv @ self._body_input(R0, v0, w0, sw)).reshape(-1, 3) @ R0.T
        ci = ControlInput.__new__(ControlInput)
        ci.thrust, ci.torque, ci.force = np.sqrt((forces * forces).sum(axis=1)), self._zero_torque, forces
        return ci

    def payload_rates(self, x: list) -> list:
        """Time derivative of the list ``(r0, v0, vec(R0), w0)`` under this policy."""
        vx, vy, vz = x[3:6]
        r00, r01, r02, r10, r11, r12, r20, r21, r22 = x[6:15]
        wx, wy, wz = x[15:18]
        g = self.params.gravity
        sw = _wrench_terms((vx, vy, vz), (wx, wy, wz), (g * r20, g * r21, g * r22), self.params)
        Vx, Vy, Vz = self._vt
        y0 = r00 * Vx + r10 * Vy + r20 * Vz - (wy * vz - wz * vy)
        y1 = r01 * Vx + r11 * Vy + r21 * Vz - (wz * vx - wx * vz)
        y2 = r02 * Vx + r12 * Vy + r22 * Vz - (wx * vy - wy * vx)
        acc = [
            a[0] * sw[0] + a[1] * sw[1] + a[2] * sw[2] + a[3] * sw[3] + a[4] * sw[4] + a[5] * sw[5]
            + b[0] * y0 + b[1] * y1 + b[2] * y2
            for a, b in zip(self._A, self._B)
        ]
        # row i of R0 hat(w0) is (row i of R0) x w0
        return [
            r00 * vx + r01 * vy + r02 * vz,
            r10 * vx + r11 * vy + r12 * vz,
            r20 * vx + r21 * vy + r22 * vz,
            acc[0], acc[1], acc[2],
            r01 * wz - r02 * wy, r02 * wx - r00 * wz, r00 * wy - r01 * wx,
            r11 * wz - r12 * wy, r12 * wx - r10 * wz, r10 * wy - r11 * wx,
            r21 * wz - r22 * wy, r22 * wx - r20 * wz, r20 * wy - r21 * wx,
            acc[3], acc[4], acc[5],
        ]


def ideal_force_policy(v, params: SystemParams) -> IdealForcePolicy:
    return IdealForcePolicy(v, params)


def attitude_error(R: np.ndarray, R_des: np.ndarray) -> np.ndarray:
    E = R_des.T @ R - R.T @ R_des
    return 0.5 * vee(E)


def attitude_inner_loop(
    state: SystemState,
    R_des: np.ndarray,
    params: SystemParams,
    gains: AttitudeGains = AttitudeGains(),
) -> np.ndarray:
    """Geometric SO(3) tracking torque for every UAV, desired rate zero."""
    J = params.uav_inertias
    tau = np.empty((state.n_uavs, 3))
    for i in range(state.n_uavs):
        R, w = state.R[i], state.w[i]
        e_R = attitude_error(R, R_des[i])
        tau[i] = -gains.k_R * e_R - gains.k_omega * w + np.cross(w, J[i] @ w)
    return tau
