"""Offline discrete-time monitor for sampled payload trajectories.

Quantifiers range over sample instants. An interval ``[t+a, t+b]`` covers the
samples whose times fall inside it (with a 1e-9 relative slack for float
round-off), so on a uniform grid it becomes the index offsets
``ceil(a/T) .. floor(b/T)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .formula import Always, And, Eventually, Formula, Not, Pred, TrueF, Until, horizon


class InsufficientHorizon(ValueError):
    """Trajectory ends before the formula's horizon."""


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled payload positions (and optionally velocities)."""

    times: np.ndarray
    positions: np.ndarray  # (M, 3)
    velocities: np.ndarray | None = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        pos = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "positions", pos)
        if self.velocities is not None:
            vel = np.asarray(self.velocities, dtype=float).reshape(-1, 3)
            object.__setattr__(self, "velocities", vel)
            if len(vel) != len(times):
                raise ValueError("velocities and times differ in length")
        if len(pos) != len(times):
            raise ValueError("positions and times differ in length")
        if len(times) >= 2:
            dt = np.diff(times)
            if np.any(dt <= 0):
                raise ValueError("sample times must be strictly increasing")
            if np.abs(dt - dt.mean()).max() > 1e-6 * dt.mean():
                raise ValueError("samples must be uniformly spaced")

    @classmethod
    def from_states(cls, states, frame=None) -> "Trajectory":
        """Build from ``SystemState`` objects; ``frame`` maps NED to mission coordinates."""
        S = np.eye(3) if frame is None else np.asarray(frame)
        return cls(
            np.array([s.time for s in states]),
            np.array([S @ s.r0 for s in states]),
            np.array([S @ s.r0_dot for s in states]),
        )

    @classmethod
    def from_signal(cls, values, period: float, t0: float = 0.0) -> "Trajectory":
        """Scalar signal carried in the x coordinate (useful with ``affine`` predicates)."""
        values = np.asarray(values, dtype=float)
        pos = np.zeros((len(values), 3))
        pos[:, 0] = values
        return cls(t0 + period * np.arange(len(values)), pos)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def period(self) -> float:
        if len(self.times) < 2:
            return 1.0
        return float((self.times[-1] - self.times[0]) / (len(self.times) - 1))

    def index_of(self, t: float) -> int:
        k = int(round((t - self.times[0]) / self.period))
        if k < 0 or k >= len(self.times):
            raise InsufficientHorizon(f"time {t} outside trajectory")
        return k


def window_offsets(a: float, b: float, period: float) -> tuple[int, int]:
    lo = math.ceil(a / period - 1e-9)
    hi = math.floor(b / period + 1e-9)
    return lo, hi


# Each evaluator returns an array over the samples where the subformula is
# fully determined by the trajectory (a prefix of the sample indices).


def _sat(node: Formula, traj: Trajectory) -> np.ndarray:
    T = traj.period
    if isinstance(node, TrueF):
        return np.ones(len(traj), dtype=bool)
    if isinstance(node, Pred):
        return node.predicate.h(traj.positions) >= 0
    if isinstance(node, Not):
        return ~_sat(node.child, traj)
    if isinstance(node, And):
        l, r = _sat(node.left, traj), _sat(node.right, traj)
        n = min(len(l), len(r))
        return l[:n] & r[:n]
    if isinstance(node, (Eventually, Always)):
        child = _sat(node.child, traj)
        lo, hi = window_offsets(node.a, node.b, T)
        n = len(child) - hi
        if n <= 0:
            return np.zeros(0, dtype=bool)
        if hi < lo:
            # no sample falls in the window
            return np.full(n, isinstance(node, Always))
        win = sliding_window_view(child, hi - lo + 1)[lo : lo + n]
        return win.any(axis=1) if isinstance(node, Eventually) else win.all(axis=1)
    if isinstance(node, Until):
        left, right = _sat(node.left, traj), _sat(node.right, traj)
        lo, hi = window_offsets(node.a, node.b, T)
        n = min(len(left), len(right)) - hi
        out = np.zeros(max(n, 0), dtype=bool)
        for k in range(max(n, 0)):
            hold = np.logical_and.accumulate(left[k : k + hi + 1])
            out[k] = hi >= lo and np.any(right[k + lo : k + hi + 1] & hold[lo:])
        return out
    raise TypeError(f"not a formula node: {node!r}")


def _rob(node: Formula, traj: Trajectory) -> np.ndarray:
    T = traj.period
    if isinstance(node, TrueF):
        return np.full(len(traj), np.inf)
    if isinstance(node, Pred):
        return node.predicate.h(traj.positions)
    if isinstance(node, Not):
        return -_rob(node.child, traj)
    if isinstance(node, And):
        l, r = _rob(node.left, traj), _rob(node.right, traj)
        n = min(len(l), len(r))
        return np.minimum(l[:n], r[:n])
    if isinstance(node, (Eventually, Always)):
        child = _rob(node.child, traj)
        lo, hi = window_offsets(node.a, node.b, T)
        n = len(child) - hi
        if n <= 0:
            return np.zeros(0)
        if hi < lo:
            return np.full(n, np.inf if isinstance(node, Always) else -np.inf)
        win = sliding_window_view(child, hi - lo + 1)[lo : lo + n]
        return win.max(axis=1) if isinstance(node, Eventually) else win.min(axis=1)
    if isinstance(node, Until):
        left, right = _rob(node.left, traj), _rob(node.right, traj)
        lo, hi = window_offsets(node.a, node.b, T)
        n = min(len(left), len(right)) - hi
        out = np.zeros(max(n, 0))
        for k in range(max(n, 0)):
            hold = np.minimum.accumulate(left[k : k + hi + 1])
            out[k] = np.max(np.minimum(right[k + lo : k + hi + 1], hold[lo:])) if hi >= lo else -np.inf
        return out
    raise TypeError(f"not a formula node: {node!r}")


def _lookup(values: np.ndarray, formula: Formula, traj: Trajectory, t: float):
    k = traj.index_of(t)
    if k >= len(values):
        raise InsufficientHorizon(
            f"formula horizon {horizon(formula)} s from t={t} exceeds trajectory end {traj.times[-1]}"
        )
    return values[k]


def evaluate(formula: Formula, traj: Trajectory, t: float = 0.0) -> bool:
    """Boolean satisfaction of ``formula`` by ``traj`` at time ``t``."""
    if len(traj) == 0:
        raise InsufficientHorizon("empty trajectory")
    return bool(_lookup(_sat(formula, traj), formula, traj, t))


def robustness(formula: Formula, traj: Trajectory, t: float = 0.0) -> float:
    """Quantitative (min/max) semantics; positive implies satisfaction."""
    if len(traj) == 0:
        raise InsufficientHorizon("empty trajectory")
    return float(_lookup(_rob(formula, traj), formula, traj, t))


def satisfaction_signal(formula: Formula, traj: Trajectory) -> np.ndarray:
    """Satisfaction at every sample where it is determined."""
    return _sat(formula, traj)
