"""Time-varying barrier functions synthesized from fragment formulas.

Every predicate inside a temporal operator becomes an atomic barrier

    b_j(r, t) = Gamma_j(t) + s_j(r)

where ``s_j`` is the spatial part of the predicate (``-|r - center|`` for a
ball, ``a . r`` for a half-space) and ``Gamma_j`` is a temporal profile that
shrinks towards the predicate level ``l_j`` (ball radius, half-space offset).
Whenever ``Gamma_j(t) <= l_j`` we have ``b_j <= h_j`` so ``b_j >= 0`` implies
the predicate. Atoms are combined with a softmin, which under-approximates
the minimum by at most ``ln(M)``.

Distances are smoothed as ``sqrt(|r - c|^2 + eps^2)``, which only makes the
barrier more conservative and removes the gradient singularity at the center.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .stl.formula import (
    Affine,
    Always,
    Ball,
    Eventually,
    Formula,
    Not,
    TrueF,
    Until,
    check_fragment,
    conjuncts,
    is_state_formula,
)


class SynthesisError(ValueError):
    """No barrier with the required properties could be built."""


# ---------------------------------------------------------------------------
# temporal profiles


@dataclass(frozen=True)
class ConstantProfile:
    c: float
    kind = "constant"

    def __call__(self, t: float) -> tuple[float, float, float]:
        return self.c, 0.0, 0.0

    def to_dict(self) -> dict:
        return {"kind": "constant", "c": self.c}


@dataclass(frozen=True)
class LinearProfile:
    """``c0 + rate * (t - t_ref)``, held constant once ``t >= t_freeze``."""

    c0: float
    rate: float
    t_freeze: float = math.inf
    t_ref: float = 0.0
    kind = "linear"

    def __call__(self, t: float) -> tuple[float, float, float]:
        if t >= self.t_freeze:
            return self.c0 + self.rate * (self.t_freeze - self.t_ref), 0.0, 0.0
        return self.c0 + self.rate * (t - self.t_ref), self.rate, 0.0

    def to_dict(self) -> dict:
        return {
            "kind": "linear",
            "c0": self.c0,
            "rate": self.rate,
            "t_freeze": self.t_freeze,
            "t_ref": self.t_ref,
        }


@dataclass(frozen=True)
class ExponentialProfile:
    """``amplitude * exp(-decay * (t - t_ref)) + offset``."""

    amplitude: float
    decay: float
    offset: float
    t_ref: float = 0.0
    kind = "exponential"

    def __post_init__(self):
        if not self.decay > 0:
            raise ValueError("exponential decay must be positive")

    def __call__(self, t: float) -> tuple[float, float, float]:
        e = self.amplitude * math.exp(min(-self.decay * (t - self.t_ref), 700.0))
        return e + self.offset, -self.decay * e, self.decay * self.decay * e

    def to_dict(self) -> dict:
        return {
            "kind": "exponential",
            "amplitude": self.amplitude,
            "decay": self.decay,
            "offset": self.offset,
            "t_ref": self.t_ref,
        }


TemporalProfile = ConstantProfile | LinearProfile | ExponentialProfile


def profile_from_dict(d: dict) -> TemporalProfile:
    d = dict(d)
    kind = d.pop("kind")
    if kind == "constant":
        return ConstantProfile(float(d["c"]))
    if kind == "linear":
        return LinearProfile(
            float(d["c0"]),
            float(d["rate"]),
            float(d.get("t_freeze", math.inf)),
            float(d.get("t_ref", 0.0)),
        )
    if kind == "exponential":
        return ExponentialProfile(
            float(d["amplitude"]), float(d["decay"]), float(d["offset"]), float(d.get("t_ref", 0.0))
        )
    raise ValueError(f"unknown profile kind {kind!r}")


# ---------------------------------------------------------------------------
# atoms


@dataclass(frozen=True)
class AtomicBarrier:
    """One predicate of one temporal task.

    ``shape`` is ``"ball_in"`` (stay inside a ball), ``"ball_out"`` (stay
    outside) or ``"linear"`` (half-space ``a . r + level >= 0``).
    """

    shape: str
    task: str  # "F" or "G"
    window: tuple[float, float]  # absolute times
    level: float
    center: np.ndarray | None = None
    direction: np.ndarray | None = None
    epsilon: float = 1e-3
    profile: TemporalProfile | None = None
    t_on: float = 0.0
    t_off: float = math.inf
    retired_at: float = math.inf
    partner: int = -1  # index of the paired F/G atom on the same ball, if any
    source: str = ""
    group: int = 0

    def spatial(self, r: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
        """Value, gradient and Hessian of the spatial term."""
        if self.shape == "linear":
            return float(self.direction @ r), self.direction, np.zeros((3, 3))
        diff = r - self.center
        phi = math.sqrt(float(diff @ diff) + self.epsilon**2)
        grad = diff / phi
        hess = (np.eye(3) - np.outer(grad, grad)) / phi
        if self.shape == "ball_in":
            return -phi, -grad, -hess
        return phi, grad, hess

    def value(self, r, t: float) -> float:
        return self.profile(t)[0] + self.spatial(np.asarray(r, dtype=float))[0]

    def is_active(self, t: float) -> bool:
        return self.profile is not None and self.t_on <= t <= self.t_off and t < self.retired_at

    def predicate_holds(self, r: np.ndarray) -> bool:
        """Exact (unsmoothed) predicate at ``r``."""
        if self.shape == "linear":
            return float(self.direction @ r) + self.level >= 0
        dist = float(np.linalg.norm(r - self.center))
        return dist <= self.level if self.shape == "ball_in" else dist >= -self.level


@dataclass(frozen=True)
class BarrierEval:
    b: float
    db_dt: float
    d2b_dt2: float
    grad_r: np.ndarray
    hess_r: np.ndarray
    d_grad_dt: np.ndarray
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))


def softmin(values) -> float:
    """``-ln(sum(exp(-v)))``, shifted by the minimum for overflow safety."""
    v = np.asarray(values, dtype=float).reshape(-1)
    if v.size == 0:
        raise ValueError("softmin of an empty sequence")
    m = v.min()
    return float(m - math.log(np.exp(-(v - m)).sum()))


@dataclass(frozen=True)
class CompositeBarrier:
    atoms: tuple[AtomicBarrier, ...]
    margin: float = 2.0
    g_offset_fraction: float = 0.5
    g_decay: float | None = None
    grid_step: float = 0.02
    soundness_tol: float = 1e-5
    retire_reached: bool = True
    handoff_lead: float = 0.0

    def __post_init__(self):
        if not self.atoms:
            raise SynthesisError("composite barrier needs at least one atom")

    def active(self, t: float) -> list[AtomicBarrier]:
        return [a for a in self.atoms if a.is_active(t)]

    def pending(self, t: float) -> list[int]:
        return [i for i, a in enumerate(self.atoms) if a.profile is None and a.t_on <= t]

    def anchor(self, r, t: float, strict: bool = False) -> "CompositeBarrier":
        """Advance the schedule to ``(r, t)``.

        Atoms whose activation time has come get a profile. With
        ``retire_reached``, an active F atom whose predicate holds at ``r``
        inside its window is retired from ``t`` on: its task is done, and a
        dormant G partner switches on right away so the payload is held
        where it arrived. Returns ``self`` when nothing changes, so the call
        is cheap to make at every control step.

        ``strict`` raises when a G atom starts inside its window with the
        predicate already violated; otherwise the atom starts at its level
        and the violation shows up as ``b < 0``.
        """
        r = np.asarray(r, dtype=float)
        todo = self.pending(t)
        done = []
        if self.retire_reached:
            done = [
                i for i, a in enumerate(self.atoms)
                if a.task == "F" and a.is_active(t) and a.window[0] <= t <= a.window[1] and a.predicate_holds(r)
            ]
        if not todo and not done:
            return self
        atoms = list(self.atoms)
        for i in done:
            atoms[i] = replace(atoms[i], retired_at=t)
            p = atoms[i].partner
            if p >= 0 and atoms[p].profile is None and atoms[p].t_on > t:
                atoms[p] = replace(atoms[p], t_on=t)
                todo.append(p)
        for i in todo:
            atom = atoms[i]
            partner = atoms[atom.partner] if atom.partner >= 0 else None
            atoms[i] = replace(atom, profile=_auto_profile(atom, r, t, self, partner, strict))
            check_atom_soundness(atoms[i], self.grid_step, self.soundness_tol)
        return replace(self, atoms=tuple(atoms))

    def value(self, r, t: float) -> float:
        r = np.asarray(r, dtype=float)
        return softmin([a.value(r, t) for a in self.active(t)])

    def eval(self, r, t: float) -> BarrierEval:
        return eval_barrier(self, r, t)


def eval_barrier(barrier: CompositeBarrier, r, t: float) -> BarrierEval:
    """Softmin value and all first/second partials in ``(r, t)``."""
    r = np.asarray(r, dtype=float)
    atoms = barrier.active(t)
    if not atoms:
        raise SynthesisError(f"no active barrier atom at t={t}")
    m = len(atoms)
    vals = np.empty(m)
    grads = np.empty((m, 4))
    hess = np.zeros((m, 4, 4))
    for j, atom in enumerate(atoms):
        g, gd, gdd = atom.profile(t)
        s, ds, d2s = atom.spatial(r)
        vals[j] = g + s
        grads[j, :3] = ds
        grads[j, 3] = gd
        hess[j, :3, :3] = d2s
        hess[j, 3, 3] = gdd

    vmin = vals.min()
    e = np.exp(-(vals - vmin))
    total = e.sum()
    w = e / total
    b = vmin - math.log(total)
    G = w @ grads
    H = np.einsum("j,jab->ab", w, hess) - np.einsum("j,ja,jb->ab", w, grads, grads) + np.outer(G, G)
    return BarrierEval(
        b=float(b),
        db_dt=float(G[3]),
        d2b_dt2=float(H[3, 3]),
        grad_r=G[:3].copy(),
        hess_r=H[:3, :3].copy(),
        d_grad_dt=H[:3, 3].copy(),
        weights=w,
    )


# ---------------------------------------------------------------------------
# synthesis


@dataclass(frozen=True)
class BarrierConfig:
    """Knobs for turning a formula into barriers.

    ``schedule="all"`` activates every atom at ``t0``. ``"sequential"``
    activates each atom ``lead_time`` before its window and drops it after
    the window.

    F and G ball atoms on the same center are paired (the G window starting
    no earlier than the F one). A paired F ramp aims to finish
    ``handoff_lead`` seconds before the G window opens, and with
    ``retire_reached`` the F atom is dropped as soon as its predicate holds;
    the G atom then switches on immediately, anchored at the current
    position.

    G profiles decay towards ``level - (1 - g_offset_fraction) * level``,
    passing the level at the window start; ``g_decay`` puts a floor under the
    decay rate. ``overrides`` maps atom index (in formula order, after box
    expansion) to a fixed profile.
    """

    epsilon: float = 1e-3
    margin: float = 2.0
    schedule: str = "all"
    lead_time: float = 0.0
    g_offset_fraction: float = 0.5
    g_decay: float | None = None
    grid_step: float = 0.02
    soundness_tol: float = 1e-5
    retire_reached: bool = True
    handoff_lead: float = 0.0
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.margin <= 0:
            raise ValueError("margin must be positive")
        if self.schedule not in ("all", "sequential"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if not 0 <= self.g_offset_fraction < 1:
            raise ValueError("g_offset_fraction must lie in [0, 1)")
        if self.grid_step <= 0:
            raise ValueError("grid_step must be positive")
        if self.handoff_lead < 0:
            raise ValueError("handoff_lead must be nonnegative")


def _atoms_for_predicate(node: Formula, eps: float) -> list[dict]:
    """Spatial shapes for a (possibly negated) predicate node."""
    negated = isinstance(node, Not)
    pred = node.child.predicate if negated else node.predicate
    if isinstance(pred, Ball):
        c = np.array(pred.center)
        if pred.norm == "euclidean":
            shape = "ball_out" if negated else "ball_in"
            level = -pred.radius if negated else pred.radius
            return [dict(shape=shape, level=level, center=c, epsilon=eps)]
        if negated:
            raise SynthesisError(f"outside-of-box constraints are disjunctive: {node}")
        out = []
        for k in range(3):
            for sgn in (1.0, -1.0):
                a = np.zeros(3)
                a[k] = -sgn
                # R - sgn (r_k - c_k) >= 0  ->  a . r + (R + sgn c_k) >= 0
                out.append(dict(shape="linear", level=float(pred.radius + sgn * c[k]), direction=a))
        return out
    if isinstance(pred, Affine):
        a = np.array(pred.a)
        if negated:
            return [dict(shape="linear", level=-pred.c, direction=-a)]
        return [dict(shape="linear", level=pred.c, direction=a)]
    raise SynthesisError(f"unsupported predicate {pred!r}")


def _state_atoms(psi: Formula, eps: float) -> list[tuple[str, dict]]:
    out = []
    for part in conjuncts(psi):
        if isinstance(part, TrueF):
            continue
        for spec in _atoms_for_predicate(part, eps):
            out.append((str(part), spec))
    return out


def _auto_profile(atom: AtomicBarrier, r: np.ndarray, t: float, cfg, partner: AtomicBarrier | None = None,
                  strict: bool = True) -> TemporalProfile:
    s = atom.spatial(r)[0]
    level = atom.level
    start = cfg.margin - s  # Gamma giving b = margin right now
    a, b = atom.window
    if atom.task == "F":
        if b <= t:
            raise SynthesisError(f"deadline {b} of {atom.source} is not after activation time {t}")
        if start <= level:
            return ConstantProfile(level)
        # a paired G task wants the payload inside before its own window opens
        deadline = b
        if partner is not None and partner.task == "G" and t < partner.window[0] < b:
            early = partner.window[0] - cfg.handoff_lead
            deadline = early if early > t else partner.window[0]
        return LinearProfile(start, (level - start) / (deadline - t), t_freeze=deadline, t_ref=t)

    # G task
    if t >= a or start <= level:
        if strict and level + s <= 0:
            raise SynthesisError(
                f"{atom.source} must hold from t={max(t, a)} but is violated at activation"
            )
        return ConstantProfile(level)
    scale = abs(level) if abs(level) > 1e-9 else cfg.margin
    offset = level - (1.0 - cfg.g_offset_fraction) * scale
    target = level - 1e-9 * max(1.0, abs(level))
    lam = math.log((start - offset) / (target - offset)) / (a - t)
    if cfg.g_decay is not None:
        lam = max(lam, cfg.g_decay)
    return ExponentialProfile(target - offset, lam, offset, t_ref=a)


def check_atom_soundness(atom: AtomicBarrier, grid_step: float = 0.02, tol: float = 1e-5) -> None:
    """F atoms reach their level somewhere in the window, G atoms stay below it.

    ``tol`` (metres) absorbs rounding in hand-written coefficients, such as
    the two-waypoint G profile that sits 1.3e-6 above its radius at the
    window start.
    """
    a, b = atom.window
    hi = min(b, atom.t_off)
    if hi < a:
        return
    n = max(int(math.floor((hi - a) / grid_step + 1e-9)), 0)
    grid = a + grid_step * np.arange(n + 1)
    if grid[-1] < hi - 1e-12:
        grid = np.append(grid, hi)
    vals = np.array([atom.profile(float(t))[0] for t in grid])
    if atom.task == "F" and not np.any(vals <= atom.level + tol):
        raise SynthesisError(f"profile of {atom.source} never reaches {atom.level} in [{a}, {b}]")
    if atom.task == "G" and not np.all(vals <= atom.level + tol):
        raise SynthesisError(f"profile of {atom.source} exceeds {atom.level} inside [{a}, {b}]")


def synthesize(formula: Formula, r0, t0: float = 0.0, config: BarrierConfig | None = None) -> CompositeBarrier:
    """Build the composite barrier for ``formula`` evaluated at ``t0``.

    ``r0`` is the payload position in the mission frame at ``t0``. Atoms that
    activate later are left without a profile; :meth:`CompositeBarrier.anchor`
    fills them in during the run.
    """
    cfg = config or BarrierConfig()
    check_fragment(formula)
    r0 = np.asarray(r0, dtype=float)

    atoms: list[AtomicBarrier] = []
    group = 0
    for part in conjuncts(formula):
        if is_state_formula(part):
            # evaluated only at t0; nothing to enforce over time
            continue
        if isinstance(part, Until):
            raise SynthesisError("barrier synthesis for Until is not supported")
        assert isinstance(part, (Eventually, Always))
        task = "F" if isinstance(part, Eventually) else "G"
        window = (t0 + part.a, t0 + part.b)
        for source, spec in _state_atoms(part.child, cfg.epsilon):
            atoms.append(
                AtomicBarrier(task=task, window=window, source=f"{task}[{part.a}, {part.b}]({source})",
                              group=group, **spec)
            )
        group += 1
    if not atoms:
        raise SynthesisError("formula has no temporal predicates to enforce")

    atoms = _schedule(atoms, t0, cfg)
    barrier = CompositeBarrier(
        tuple(atoms), cfg.margin, cfg.g_offset_fraction, cfg.g_decay, cfg.grid_step, cfg.soundness_tol,
        cfg.retire_reached, cfg.handoff_lead,
    )

    if cfg.overrides:
        fixed = list(barrier.atoms)
        for key, prof in cfg.overrides.items():
            i = int(key)
            if not 0 <= i < len(fixed):
                raise SynthesisError(f"profile override for atom {i}, but only {len(fixed)} atoms")
            if isinstance(prof, dict):
                prof = profile_from_dict(prof)
            fixed[i] = replace(fixed[i], profile=prof)
        barrier = replace(barrier, atoms=tuple(fixed))

    barrier = barrier.anchor(r0, t0, strict=True)
    for atom in barrier.atoms:
        if atom.profile is not None:
            check_atom_soundness(atom, cfg.grid_step, cfg.soundness_tol)
    if barrier.active(t0):
        b0 = barrier.value(r0, t0)
        if not b0 > 0:
            raise SynthesisError(f"initial state violates the barrier: b(x0, t0) = {b0:.6g}")
    return barrier


def _pair(atoms: list[AtomicBarrier]) -> list[AtomicBarrier]:
    """Link each G ball atom to the latest F atom on the same center starting no later."""
    out = list(atoms)
    for j, g in enumerate(atoms):
        if g.task != "G" or g.shape != "ball_in":
            continue
        cands = [
            i for i, f in enumerate(atoms)
            if f.task == "F" and f.shape == "ball_in" and np.array_equal(f.center, g.center)
            and f.window[0] <= g.window[0]
        ]
        if not cands:
            continue
        i = max(cands, key=lambda i: atoms[i].window[0])
        out[j] = replace(out[j], partner=i)
        # an F atom hands over to the earliest G that pairs with it
        if out[i].partner < 0 or atoms[out[i].partner].window[0] > g.window[0]:
            out[i] = replace(out[i], partner=j)
    return out


def _schedule(atoms: list[AtomicBarrier], t0: float, cfg: BarrierConfig) -> list[AtomicBarrier]:
    atoms = _pair(atoms)
    if cfg.schedule == "all":
        return [replace(a, t_on=t0, t_off=math.inf) for a in atoms]
    return [replace(a, t_on=max(t0, a.window[0] - cfg.lead_time), t_off=a.window[1]) for a in atoms]
