"""Small dense convex QPs: ``min (u-c)'Q(u-c)  s.t.  P_i u <= H_i`` (plus an optional box).

The center ``c`` defaults to zero, giving the minimum-norm problem.

The multi-constraint solver is the Goldfarb-Idnani dual active-set method.
It starts from the unconstrained minimum and adds violated constraints one
at a time, dropping ones whose multiplier would turn negative. The problems
here have three variables and at most a dozen rows, so the reduced quantities
are formed directly instead of via updated QR factors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np


@dataclass(frozen=True)
class HocbfConstraint:
    """``P u <= H``."""

    P: np.ndarray
    H: float

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float).reshape(3)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "H", float(self.H))
        if not (np.all(np.isfinite(P)) and math.isfinite(self.H)):
            raise ValueError("constraint has non-finite entries")

    @property
    def is_flat(self) -> bool:
        return float(np.abs(self.P).max()) < 1e-12

    def residual(self, u) -> float:
        """Positive when violated."""
        return float(self.P @ np.asarray(u, dtype=float) - self.H)


@dataclass(frozen=True)
class QpSpec:
    Q: np.ndarray = field(default_factory=lambda: np.eye(3))
    constraints: tuple = ()
    box: float | None = 10.0
    slack_penalty: float = 1e6
    tol: float = 1e-10
    center: np.ndarray | None = None

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        if Q.shape != (3, 3) or not np.abs(Q - Q.T).max() <= 1e-12 * max(1.0, np.abs(Q).max()):
            raise ValueError("Q must be a symmetric 3x3 matrix")
        try:
            np.linalg.cholesky(Q)
        except np.linalg.LinAlgError:
            raise ValueError("Q must be positive definite") from None
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if self.box is not None and not self.box > 0:
            raise ValueError("box bound must be positive")
        c = np.zeros(3) if self.center is None else np.asarray(self.center, dtype=float).reshape(3)
        if not np.all(np.isfinite(c)):
            raise ValueError("QP center must be finite")
        object.__setattr__(self, "center", c)

    def rows(self) -> tuple[np.ndarray, np.ndarray]:
        """All inequality rows (barrier constraints first, then the box)."""
        P = [c.P for c in self.constraints]
        H = [c.H for c in self.constraints]
        if self.box is not None:
            for k in range(3):
                e = np.zeros(3)
                e[k] = 1.0
                P += [e, -e]
                H += [self.box, self.box]
        if not P:
            return np.zeros((0, 3)), np.zeros(0)
        return np.array(P), np.array(H, dtype=float)


@dataclass(frozen=True)
class QpSolution:
    u: np.ndarray
    status: str  # optimal | relaxed | infeasible
    slack: float = 0.0
    active: tuple = ()
    multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def objective(self, Q) -> float:
        return float(self.u @ np.asarray(Q) @ self.u)


def goldfarb_idnani(G: np.ndarray, a: np.ndarray, N: np.ndarray, b: np.ndarray, tol: float = 1e-12,
                    max_iter: int = 200):
    """Minimize ``0.5 x'Gx + a'x`` subject to ``N x >= b``.

    Returns ``(x, active_indices, multipliers)`` or ``None`` when the
    constraints are inconsistent. ``multipliers`` covers every row.
    """
    m = N.shape[0]
    Ginv = np.linalg.inv(G)
    x = -Ginv @ a
    active: list[int] = []
    lam = np.zeros(0)
    scale = 1.0 + np.abs(b).max() if m else 1.0

    for _ in range(max_iter):
        s = N @ x - b
        if active:
            s[active] = np.inf
        p = int(np.argmin(s)) if m else 0
        if m == 0 or s[p] >= -tol * scale:
            mult = np.zeros(m)
            mult[active] = lam
            return x, tuple(active), mult
        npos = N[p]
        lam_p = 0.0
        while True:
            if active:
                A = N[active].T  # n x q
                GA = Ginv @ A
                M = A.T @ GA
                Nstar = np.linalg.solve(M, GA.T)  # q x n
                z = Ginv @ npos - GA @ (Nstar @ npos)
                r = Nstar @ npos
            else:
                z = Ginv @ npos
                r = np.zeros(0)
            # partial step limited by a multiplier reaching zero
            t1, k = math.inf, -1
            for j, rj in enumerate(r):
                if rj > tol:
                    tj = lam[j] / rj
                    if tj < t1:
                        t1, k = tj, j
            zn = float(z @ npos)
            t2 = math.inf if zn <= tol * max(1.0, float(npos @ Ginv @ npos)) else -(float(npos @ x) - b[p]) / zn
            t = min(t1, t2)
            if math.isinf(t):
                return None
            if math.isinf(t2):
                lam = lam - t * r
                lam_p += t
                del active[k]
                lam = np.delete(lam, k)
                continue
            x = x + t * z
            lam = lam - t * r
            lam_p += t
            if t == t2:
                active.append(p)
                lam = np.append(lam, lam_p)
                break
            del active[k]
            lam = np.delete(lam, k)
    raise RuntimeError("active-set iteration limit reached")


def _closed_form(Q: np.ndarray, c: HocbfConstraint) -> tuple[np.ndarray, float]:
    """Single constraint: projection of the origin in the Q metric."""
    if c.H >= 0:
        return np.zeros(3), 0.0
    qp = np.linalg.solve(Q, c.P)
    denom = float(c.P @ qp)
    u = (c.H / denom) * qp
    return u, -2.0 * c.H / denom


def solve_cqp(spec: QpSpec) -> QpSolution:
    """Solve ``min (u-c)'Q(u-c)`` under the problem's constraints.

    Flat constraints (``P = 0``) are dropped when ``H >= 0``. If the hard
    problem is infeasible, the barrier rows are softened with one shared
    slack ``s`` (``P u - s <= H``, cost ``penalty * s^2``) and the status
    becomes ``relaxed``.
    """
    c = spec.center
    if np.any(c):
        # shift to w = u - c, which is a minimum-norm problem again
        shifted = QpSpec(spec.Q, [HocbfConstraint(k.P, k.H - float(k.P @ c)) for k in spec.constraints],
                         None, spec.slack_penalty, spec.tol)
        if spec.box is not None:
            extra = []
            for k in range(3):
                e = np.zeros(3)
                e[k] = 1.0
                extra += [HocbfConstraint(e, spec.box - c[k]), HocbfConstraint(-e, spec.box + c[k])]
            shifted = replace(shifted, constraints=shifted.constraints + tuple(extra))
        sol = _solve_centered(shifted, n_hard=len(spec.constraints))
        return replace(sol, u=sol.u + c)
    return _solve_centered(spec, len(spec.constraints))


def _solve_centered(spec: QpSpec, n_hard: int) -> QpSolution:
    """Minimum-norm solve. Constraints past ``n_hard`` are bounds: they
    never take the slack and do not count as barrier rows."""
    Q = spec.Q
    P_all, H_all = spec.rows()
    n_rows = len(H_all)
    keep = [i for i in range(n_rows) if not (i < n_hard and np.abs(P_all[i]).max() < 1e-12 and H_all[i] >= 0)]
    barrier = [i for i in keep if i < n_hard]
    bounds = [i for i in keep if i >= n_hard]

    def fits(u):
        return all(P_all[i] @ u <= H_all[i] + spec.tol * max(1.0, abs(H_all[i])) for i in bounds)

    if len(barrier) == 1 and np.abs(P_all[barrier[0]]).max() >= 1e-12:
        u, lam = _closed_form(Q, HocbfConstraint(P_all[barrier[0]], H_all[barrier[0]]))
        if fits(u):
            mult = np.zeros(n_rows)
            mult[barrier[0]] = lam
            return QpSolution(u, "optimal", 0.0, (barrier[0],) if lam > 0 else (), mult)
    if not barrier and fits(np.zeros(3)):
        return QpSolution(np.zeros(3), "optimal", 0.0, (), np.zeros(n_rows))

    P, H = P_all[keep], H_all[keep]
    res = goldfarb_idnani(2.0 * Q, np.zeros(3), -P, -H, tol=spec.tol)
    if res is not None:
        x, act, lam = res
        mult = np.zeros(n_rows)
        mult[keep] = lam
        return QpSolution(x, "optimal", 0.0, tuple(keep[i] for i in act), mult)

    # slack relaxation on the barrier rows
    G = np.zeros((4, 4))
    G[:3, :3] = 2.0 * Q
    G[3, 3] = 2.0 * spec.slack_penalty
    Pr = np.zeros((len(keep), 4))
    Pr[:, :3] = P
    Pr[: len(barrier), 3] = -1.0  # keep lists barrier rows first
    res = goldfarb_idnani(G, np.zeros(4), -Pr, -H, tol=spec.tol)
    if res is None:
        return QpSolution(np.zeros(3), "infeasible", math.inf, (), np.zeros(n_rows))
    x, act, lam = res
    mult = np.zeros(n_rows)
    mult[keep] = lam
    return QpSolution(x[:3], "relaxed", max(float(x[3]), 0.0), tuple(keep[i] for i in act), mult)


def kkt_residuals(spec: QpSpec, sol: QpSolution) -> dict:
    """Stationarity, primal feasibility, dual feasibility and complementarity."""
    P, H = spec.rows()
    lam = sol.multipliers if len(sol.multipliers) == len(H) else np.zeros(len(H))
    stat = 2.0 * spec.Q @ (sol.u - spec.center) + (P.T @ lam if len(H) else 0.0)
    slack = P @ sol.u - H if len(H) else np.zeros(0)
    return {
        "stationarity": float(np.abs(stat).max()),
        "primal": float(max(slack.max(), 0.0)) if len(H) else 0.0,
        "dual": float(max(-lam.min(), 0.0)) if len(H) else 0.0,
        "complementarity": float(np.abs(lam * slack).max()) if len(H) else 0.0,
    }
