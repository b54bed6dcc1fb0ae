"""Second-order barrier constraint for the linearized payload ``r'' = u``.

With ``alpha(s) = s^2`` the recursion is

    gamma_0 = b
    gamma_1 = b' + b^2
    gamma_1' + gamma_1^2 >= 0

and since ``b'' = r'.Hess.r' + 2 r'.d_t(grad) + b_tt + grad.u`` the last line
is linear in ``u``: ``P u <= H`` with ``P = -grad``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .barriers import BarrierEval, CompositeBarrier, eval_barrier
from .qp import HocbfConstraint
from .stl.monitor import Trajectory


@dataclass(frozen=True)
class DoubleIntegratorState:
    r: np.ndarray
    rdot: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float).reshape(3)
        v = np.asarray(self.rdot, dtype=float).reshape(3)
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(v))):
            raise ValueError("double-integrator state must be finite")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "rdot", v)


CLASS_K = ("square", "signed_square")


def _alpha(x: float, class_k: str) -> float:
    return x * x if class_k == "square" else x * abs(x)


def gamma1(be: BarrierEval, s: DoubleIntegratorState, class_k: str = "square") -> float:
    return float(be.grad_r @ s.rdot) + be.db_dt + _alpha(be.b, class_k)


def assemble_constraint(be: BarrierEval, s: DoubleIntegratorState, eq22_verbatim: bool = False,
                        class_k: str = "square") -> HocbfConstraint:
    """Linear constraint on ``u`` enforcing the second-order barrier condition.

    ``eq22_verbatim`` drops the mixed term ``2 r'.d_t(grad)``, which is the
    textbook expansion for barriers of the form ``Gamma(t) + phi(r)``; for
    softmin composites that term is generally nonzero.

    ``class_k="square"`` uses ``alpha(s) = s^2`` everywhere. Since ``s^2`` is
    only class-K on ``s >= 0``, ``"signed_square"`` offers the odd extension
    ``s|s|``, identical on the nonnegative half but restoring ``b`` and
    ``gamma_1`` when they dip below zero.
    """
    if class_k not in CLASS_K:
        raise ValueError(f"class_k must be one of {CLASS_K}")
    v = s.rdot
    b = be.b
    b_dot = float(be.grad_r @ v) + be.db_dt
    drift = float(v @ be.hess_r @ v) + be.d2b_dt2
    if not eq22_verbatim:
        drift += 2.0 * float(v @ be.d_grad_dt)
    g1 = b_dot + _alpha(b, class_k)
    # d/dt alpha(b) = 2|b| b' for the odd extension, 2 b b' for the square
    db_alpha = (2.0 * b if class_k == "square" else 2.0 * abs(b)) * b_dot
    return HocbfConstraint(-be.grad_r, drift + db_alpha + _alpha(g1, class_k))


@dataclass(frozen=True)
class ConditionReport:
    times: np.ndarray
    b: np.ndarray
    gamma1: np.ndarray
    residuals: np.ndarray | None
    tol: float

    @property
    def min_b(self) -> float:
        return float(np.min(self.b))

    @property
    def min_gamma1(self) -> float:
        return float(np.min(self.gamma1))

    @property
    def max_residual(self) -> float:
        if self.residuals is None or not len(self.residuals):
            return 0.0
        return float(np.max(self.residuals))

    @property
    def first_violation(self) -> int | None:
        """Index of the first sample with ``b < -tol``."""
        bad = np.flatnonzero(self.b < -self.tol)
        return int(bad[0]) if len(bad) else None

    @property
    def ok(self) -> bool:
        return self.first_violation is None


def condition_check(traj: Trajectory, barrier: CompositeBarrier, controls=None, tol: float = 1e-6,
                    eq22_verbatim: bool = False, class_k: str = "square") -> ConditionReport:
    """Evaluate ``b`` and ``gamma_1`` along a logged trajectory.

    Samples with no active atom count as ``+inf``. If ``controls`` (one
    acceleration per sample) is given, the per-step constraint residual
    ``P u - H`` is reported too (positive means violated).
    """
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    vel = traj.velocities if traj.velocities is not None else np.zeros_like(traj.positions)
    n = len(traj)
    b = np.full(n, math.inf)
    g1 = np.full(n, math.inf)
    res = None if controls is None else np.full(n, -math.inf)
    if controls is not None:
        controls = np.asarray(controls, dtype=float).reshape(-1, 3)
        if len(controls) != n:
            raise ValueError("need one control per trajectory sample")
    for k in range(n):
        t = float(traj.times[k])
        if not barrier.active(t):
            continue
        be = eval_barrier(barrier, traj.positions[k], t)
        s = DoubleIntegratorState(traj.positions[k], vel[k])
        b[k] = be.b
        g1[k] = gamma1(be, s, class_k)
        if res is not None:
            res[k] = assemble_constraint(be, s, eq22_verbatim, class_k).residual(controls[k])
    return ConditionReport(np.asarray(traj.times), b, g1, res, tol)
