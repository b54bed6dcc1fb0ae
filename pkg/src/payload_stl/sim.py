"""Scenario files, the 50 Hz closed loop, reports and output files."""
from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .barriers import (
    BarrierConfig,
    CompositeBarrier,
    eval_barrier,
    profile_from_dict,
    synthesize,
)
from .hocbf import CLASS_K, DoubleIntegratorState, assemble_constraint, gamma1
from .linearization import (
    AttitudeGains,
    allocate,
    attitude_inner_loop,
    compute_terms,
    ideal_force_policy,
)
from .qp import QpSpec, solve_cqp
from .rigid_body import (
    AttachmentGeometry,
    BodyParams,
    ControlInput,
    SystemParams,
    SystemState,
    integrate_step,
    payload_acceleration,
    default_params,
)
from .stl import Formula, Trajectory, conjuncts, evaluate, horizon, parse_spec, robustness
from .stl.formula import Always, Ball, Pred

Z_UP = np.diag([1.0, 1.0, -1.0])


class ScenarioError(ValueError):
    """Scenario file does not match the schema."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class QpConfig:
    Q: np.ndarray = field(default_factory=lambda: np.eye(3))
    box: float | None = 10.0
    slack_penalty: float = 1e6
    tol: float = 1e-10
    eq22_verbatim: bool = False
    class_k: str = "square"
    # the QP tracks u_nom = -damping * velocity instead of zero; 0 is plain minimum norm
    damping: float = 0.0


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    params: SystemParams
    spec_text: str
    formula: Formula
    duration: float
    control_period: float = 0.02
    dt: float = 0.002
    mode: str = "ideal"
    z_up: bool = True
    initial_position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    initial_noise: float = 0.0
    barrier: BarrierConfig = field(default_factory=BarrierConfig)
    qp: QpConfig = field(default_factory=QpConfig)
    attitude_gains: AttitudeGains = field(default_factory=AttitudeGains)
    out_dir: str = "out"
    seed: int = 0

    @property
    def frame(self) -> np.ndarray:
        """Maps NED plant coordinates to mission coordinates (and back)."""
        return Z_UP if self.z_up else np.eye(3)

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.control_period))

    @property
    def substeps(self) -> int:
        return int(round(self.control_period / self.dt))


PRESETS = {
    "package_delivery": {
        "name": "package_delivery",
        "mission": {
            "waypoints": [
                {"center": [10, 10, 5], "radius": 1.0, "reach": [0, 18], "hold": [17, 30]},
                {"center": [25, 10, 5], "radius": 1.0, "reach": [30, 48], "hold": [47, 60]},
                {"center": [40, 20, 1], "radius": 1.0, "reach": [60, 78], "hold": [77, 90]},
            ],
            "bounds": 50.0,
        },
        "duration": 90.0,
        "barrier": {"schedule": "sequential", "margin": 2.0, "handoff_lead": 2.0, "g_offset_fraction": 0.9},
        "qp": {"damping": 1.0},
    },
    "two_waypoint": {
        "name": "two_waypoint",
        "spec": "F[0,14](ball(r0, [2,2,2]) <= 0.1) and G[14,25](ball(r0, [2,2,2]) <= 3)",
        "duration": 25.0,
        "barrier": {
            "overrides": {
                "0": {"kind": "linear", "c0": 50.1, "rate": -50 / 14, "t_freeze": 14.0},
                "1": {"kind": "exponential", "amplitude": 347.93, "decay": 0.418, "offset": 2.0},
            }
        },
    },
}

_TOP_KEYS = {
    "name", "params", "spec", "mission", "duration", "control_period", "dt", "mode", "z_up",
    "initial_position", "initial_noise", "barrier", "qp", "attitude_gains", "output", "seed",
}


def _num(d: dict, key: str, path: str, default=None, positive=False, nonneg=False):
    if key not in d:
        if default is None:
            raise ScenarioError(f"{path}.{key}" if path else key, "required field missing")
        return default
    v = d[key]
    p = f"{path}.{key}" if path else key
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(p, f"expected a number, got {v!r}")
    v = float(v)
    if not math.isfinite(v):
        raise ScenarioError(p, "must be finite")
    if positive and v <= 0:
        raise ScenarioError(p, "must be positive")
    if nonneg and v < 0:
        raise ScenarioError(p, "must be non-negative")
    return v


def _vec3(v, path: str) -> np.ndarray:
    if not isinstance(v, (list, tuple)) or len(v) != 3:
        raise ScenarioError(path, f"expected a list of 3 numbers, got {v!r}")
    try:
        out = np.array([float(x) for x in v])
    except (TypeError, ValueError):
        raise ScenarioError(path, f"expected numbers, got {v!r}") from None
    return out


def _interval(v, path: str) -> tuple[float, float]:
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise ScenarioError(path, f"expected [a, b], got {v!r}")
    a, b = float(v[0]), float(v[1])
    if not 0 <= a <= b:
        raise ScenarioError(path, f"interval must satisfy 0 <= a <= b, got {v!r}")
    return a, b


def _dict(d, path: str) -> dict:
    if not isinstance(d, dict):
        raise ScenarioError(path, f"expected an object, got {type(d).__name__}")
    return d


def _parse_params(d: dict, path: str = "params") -> SystemParams:
    d = _dict(d, path)

    def body(bd, p):
        bd = _dict(bd, p)
        inertia = bd.get("inertia")
        if inertia is None:
            raise ScenarioError(f"{p}.inertia", "required field missing")
        try:
            return BodyParams(_num(bd, "mass", p, nonneg=True), np.asarray(inertia, dtype=float))
        except ValueError as e:
            raise ScenarioError(p, str(e)) from None

    payload = body(d.get("payload"), f"{path}.payload")
    uavs_raw = d.get("uavs")
    if not isinstance(uavs_raw, list) or not uavs_raw:
        raise ScenarioError(f"{path}.uavs", "expected a non-empty list")
    uavs = []
    for i, u in enumerate(uavs_raw):
        p = f"{path}.uavs[{i}]"
        b = body(u, p)
        rho = _vec3(u.get("rho"), f"{p}.rho")
        uavs.append((b, AttachmentGeometry(rho, _num(u, "link_length", p, positive=True))))
    return SystemParams(payload, tuple(uavs), _num(d, "gravity", path, default=9.81, positive=True))


def mission_to_spec(mission: dict, duration: float, path: str = "mission") -> str:
    """Expand a waypoint table into spec text."""
    mission = _dict(mission, path)
    parts = []
    for i, wp in enumerate(mission.get("waypoints", [])):
        p = f"{path}.waypoints[{i}]"
        wp = _dict(wp, p)
        c = _vec3(wp.get("center"), f"{p}.center")
        radius = _num(wp, "radius", p, positive=True)
        ball = f"ball(r0, [{float(c[0])!r}, {float(c[1])!r}, {float(c[2])!r}]) <= {radius!r}"
        if "reach" not in wp and "hold" not in wp:
            raise ScenarioError(p, "waypoint needs a 'reach' and/or 'hold' window")
        if "reach" in wp:
            a, b = _interval(wp["reach"], f"{p}.reach")
            parts.append(f"F[{a!r}, {b!r}]({ball})")
        if "hold" in wp:
            a, b = _interval(wp["hold"], f"{p}.hold")
            parts.append(f"G[{a!r}, {b!r}]({ball})")
    if "bounds" in mission:
        s = _num(mission, "bounds", path, positive=True)
        parts.append(f"G[0.0, {duration!r}](box(r0, {s!r}))")
    if not parts:
        raise ScenarioError(path, "mission table is empty")
    return " and ".join(parts)


def scenario_from_dict(raw: dict, source: str = "") -> ScenarioConfig:
    raw = _dict(raw, "")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ScenarioError(sorted(unknown)[0], "unknown field")

    params = _parse_params(raw["params"]) if "params" in raw else default_params()

    duration = _num(raw, "duration", "", default=-1.0)
    spec_parts = []
    if "spec" in raw:
        if not isinstance(raw["spec"], str) or not raw["spec"].strip():
            raise ScenarioError("spec", "expected non-empty spec text")
        spec_parts.append(raw["spec"])
    if "mission" in raw:
        spec_parts.append(mission_to_spec(raw["mission"], duration if duration > 0 else 0.0))
    if not spec_parts:
        raise ScenarioError("spec", "scenario needs 'spec' text or a 'mission' table")
    spec_text = " and ".join(f"({s})" if len(spec_parts) > 1 else s for s in spec_parts)
    try:
        formula = parse_spec(spec_text)
    except ValueError as e:
        raise ScenarioError("spec", str(e)) from None

    hz = horizon(formula)
    if duration < 0:
        duration = hz
    if duration <= 0:
        raise ScenarioError("duration", "must be positive")
    if duration < hz - 1e-9:
        raise ScenarioError("duration", f"{duration} is shorter than the formula horizon {hz}")

    period = _num(raw, "control_period", "", default=0.02, positive=True)
    dt = _num(raw, "dt", "", default=0.002, positive=True)
    ratio = period / dt
    if abs(ratio - round(ratio)) > 1e-9 * ratio or round(ratio) < 1:
        raise ScenarioError("dt", f"control period {period} is not an integer multiple of dt {dt}")
    steps = duration / period
    if abs(steps - round(steps)) > 1e-6:
        raise ScenarioError("duration", f"{duration} is not a multiple of the control period {period}")

    mode = raw.get("mode", "ideal")
    if mode not in ("ideal", "full"):
        raise ScenarioError("mode", f"expected 'ideal' or 'full', got {mode!r}")
    z_up = raw.get("z_up", True)
    if not isinstance(z_up, bool):
        raise ScenarioError("z_up", "expected true or false")

    bd = dict(_dict(raw.get("barrier", {}), "barrier"))
    overrides = {}
    for k, v in _dict(bd.pop("overrides", {}), "barrier.overrides").items():
        try:
            overrides[int(k)] = profile_from_dict(v)
        except (KeyError, ValueError, TypeError) as e:
            raise ScenarioError(f"barrier.overrides.{k}", f"bad profile: {e}") from None
    try:
        barrier = BarrierConfig(overrides=overrides, **bd)
    except TypeError as e:
        raise ScenarioError("barrier", str(e)) from None
    except ValueError as e:
        raise ScenarioError("barrier", str(e)) from None

    qd = dict(_dict(raw.get("qp", {}), "qp"))
    if "Q" in qd:
        Q = np.asarray(qd["Q"], dtype=float)
        qd["Q"] = np.diag(Q) if Q.shape == (3,) else Q
    try:
        qp = QpConfig(**qd)
        QpSpec(Q=qp.Q, box=qp.box)
        if qp.class_k not in CLASS_K:
            raise ValueError(f"class_k must be one of {CLASS_K}")
        if not (math.isfinite(qp.damping) and qp.damping >= 0):
            raise ValueError("damping must be a nonnegative number")
    except (TypeError, ValueError) as e:
        raise ScenarioError("qp", str(e)) from None

    try:
        gains = AttitudeGains(**_dict(raw.get("attitude_gains", {}), "attitude_gains"))
    except (TypeError, ValueError) as e:
        raise ScenarioError("attitude_gains", str(e)) from None

    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ScenarioError("seed", "expected an integer")

    return ScenarioConfig(
        name=str(raw.get("name", Path(source).stem if source else "scenario")),
        params=params,
        spec_text=spec_text,
        formula=formula,
        duration=duration,
        control_period=period,
        dt=dt,
        mode=mode,
        z_up=z_up,
        initial_position=_vec3(raw.get("initial_position", [0, 0, 0]), "initial_position"),
        initial_noise=_num(raw, "initial_noise", "", default=0.0, nonneg=True),
        barrier=barrier,
        qp=qp,
        attitude_gains=gains,
        out_dir=str(_dict(raw.get("output", {}), "output").get("dir", "out")),
        seed=seed,
    )


def load_scenario(path) -> ScenarioConfig:
    """Read and validate a JSON scenario file (or a preset name)."""
    if str(path) in PRESETS:
        return scenario_from_dict(PRESETS[str(path)])
    text = Path(path).read_text()
    if not text.strip():
        raise ScenarioError("", f"{path} is empty")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError("", f"invalid JSON in {path}: {e}") from None
    return scenario_from_dict(raw, str(path))


def preset(name: str, **changes) -> ScenarioConfig:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    raw = json.loads(json.dumps(PRESETS[name]))
    raw.update(changes)
    return scenario_from_dict(raw)


# ---------------------------------------------------------------------------
# closed loop


@dataclass
class RunLog:
    """One record per control instant ``k * period`` (the last one is not actuated)."""

    times: np.ndarray
    states: np.ndarray  # packed SystemState vectors
    n_uavs: int
    frame: np.ndarray
    position: np.ndarray  # mission frame
    velocity: np.ndarray
    u: np.ndarray  # commanded acceleration, mission frame
    ubar: np.ndarray  # (K, 3N) payload-frame forces
    thrust: np.ndarray  # (K, N)
    torque: np.ndarray  # (K, N, 3)
    b: np.ndarray
    gamma1: np.ndarray
    P: np.ndarray
    H: np.ndarray
    status: list
    slack: np.ndarray
    solve_time: np.ndarray
    barrier: CompositeBarrier

    def __len__(self) -> int:
        return len(self.times)

    def state(self, k: int) -> SystemState:
        return SystemState.unpack(self.states[k], self.n_uavs, float(self.times[k]))

    def trajectory(self) -> Trajectory:
        return Trajectory(self.times, self.position, self.velocity)


def _full_mode_policy(v_ned, state, params, gains, prev_R_des):
    terms = compute_terms(state, params)
    alloc = allocate(v_ned, terms, prev_R_des)
    F_des, R_des = alloc.forces, alloc.R_des

    def policy(s: SystemState) -> ControlInput:
        # thrust is the desired force projected on the current lift axis
        thrust = np.maximum(-np.einsum("ij,ij->i", F_des, s.R[:, :, 2]), 0.0)
        return ControlInput(thrust, attitude_inner_loop(s, R_des, params, gains))

    return policy, alloc


def run_closed_loop(cfg: ScenarioConfig, progress=None) -> RunLog:
    """Simulate the scenario: barrier, constraint, QP, allocation, plant."""
    params = cfg.params
    n = params.n_uavs
    S = cfg.frame
    rng = np.random.default_rng(cfg.seed)
    r_init = cfg.initial_position + cfg.initial_noise * rng.standard_normal(3)
    state = SystemState.at_rest(n, S @ r_init, 0.0)
    barrier = synthesize(cfg.formula, r_init, 0.0, cfg.barrier)

    K = cfg.n_steps + 1
    dim = len(state.pack())
    log = {
        "states": np.empty((K, dim)),
        "position": np.empty((K, 3)),
        "velocity": np.empty((K, 3)),
        "u": np.zeros((K, 3)),
        "ubar": np.zeros((K, 3 * n)),
        "thrust": np.zeros((K, n)),
        "torque": np.zeros((K, n, 3)),
        "b": np.full(K, np.inf),
        "gamma1": np.full(K, np.inf),
        "P": np.zeros((K, 3)),
        "H": np.full(K, np.inf),
        "slack": np.zeros(K),
        "solve_time": np.zeros(K),
    }
    status = []
    times = cfg.control_period * np.arange(K)
    qcfg = cfg.qp
    u_prev = np.zeros(3)
    R_des = None

    for k in range(K):
        t = float(times[k])
        state.time = t
        r = S @ state.r0
        rdot = S @ state.r0_dot
        log["states"][k] = state.pack()
        log["position"][k] = r
        log["velocity"][k] = rdot

        t_start = time.perf_counter()
        barrier = barrier.anchor(r, t)
        constraints = ()
        if barrier.active(t):
            be = eval_barrier(barrier, r, t)
            dis = DoubleIntegratorState(r, rdot)
            con = assemble_constraint(be, dis, qcfg.eq22_verbatim, qcfg.class_k)
            constraints = (con,)
            log["b"][k] = be.b
            log["gamma1"][k] = gamma1(be, dis, qcfg.class_k)
            log["P"][k] = con.P
            log["H"][k] = con.H
        center = -qcfg.damping * rdot if qcfg.damping else None
        sol = solve_cqp(QpSpec(qcfg.Q, constraints, qcfg.box, qcfg.slack_penalty, qcfg.tol, center))
        log["solve_time"][k] = time.perf_counter() - t_start

        u = u_prev if sol.status == "infeasible" else sol.u
        status.append(sol.status)
        log["slack"][k] = sol.slack
        log["u"][k] = u
        v_ned = S @ u
        u_prev = u

        if cfg.mode == "ideal":
            policy = ideal_force_policy(v_ned, params)
            inp = policy(state)
            log["ubar"][k] = (inp.force @ state.R0).ravel()
            log["thrust"][k] = inp.thrust
        else:
            policy, alloc = _full_mode_policy(v_ned, state, params, cfg.attitude_gains, R_des)
            R_des = alloc.R_des
            inp = policy(state)
            log["ubar"][k] = alloc.ubar
            log["thrust"][k] = inp.thrust
            log["torque"][k] = inp.torque

        if k == K - 1:
            break
        state = integrate_step(state, policy, params, cfg.dt, steps=cfg.substeps)
        if progress is not None:
            progress(k, K)

    return RunLog(
        times=times,
        n_uavs=n,
        frame=S,
        status=status,
        barrier=barrier,
        **log,
    )


def random_input_run(params: SystemParams, duration: float = 10.0, period: float = 0.02, dt: float = 0.002,
                     scale: float = 2.0, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Ideal-force run under random piecewise-constant ``v`` (NED).

    Returns ``(instantaneous, averaged)`` residuals per control step: the
    exact ``|r0_ddot - v|`` at the step start and the finite-difference
    ``|(r0_dot(t+T) - r0_dot(t))/T - v|`` over the step.
    """
    rng = np.random.default_rng(seed)
    state = SystemState.at_rest(params.n_uavs)
    steps = int(round(duration / period))
    sub = int(round(period / dt))
    inst = np.empty(steps)
    avg = np.empty(steps)
    for k in range(steps):
        v = rng.uniform(-scale, scale, 3)
        policy = ideal_force_policy(v, params)
        inst[k] = np.linalg.norm(payload_acceleration(state, policy(state), params) - v)
        rd0 = state.r0_dot
        state = integrate_step(state, policy, params, dt, steps=sub)
        avg[k] = np.linalg.norm((state.r0_dot - rd0) / period - v)
    return inst, avg


# ---------------------------------------------------------------------------
# report


@dataclass
class Report:
    scenario: str
    subformulas: list
    satisfied: bool
    robustness: float
    min_b: float
    g_window_errors: list
    latency_mean_ms: float
    latency_max_ms: float
    qp_status_counts: dict
    pass_: bool

    def to_dict(self) -> dict:
        d = asdict(self)
        d["min_b"] = _finite_or_none(self.min_b)
        d["pass"] = d.pop("pass_")
        return d


def _finite_or_none(x: float):
    return float(x) if math.isfinite(x) else None


def build_report(log: RunLog, cfg: ScenarioConfig, b_tol: float = 1e-6) -> Report:
    traj = log.trajectory()
    subs = []
    for part in conjuncts(cfg.formula):
        subs.append(
            {
                "formula": str(part),
                "satisfied": evaluate(part, traj),
                "robustness": _finite_or_none(robustness(part, traj)),
            }
        )
    sat = evaluate(cfg.formula, traj)
    rob = robustness(cfg.formula, traj)

    errors = []
    for part in conjuncts(cfg.formula):
        if isinstance(part, Always):
            for q in conjuncts(part.child):
                if isinstance(q, Pred) and isinstance(q.predicate, Ball) and q.predicate.norm == "euclidean":
                    mask = (traj.times >= part.a - 1e-9) & (traj.times <= part.b + 1e-9)
                    dist = np.linalg.norm(traj.positions[mask] - np.array(q.predicate.center), axis=1)
                    errors.append(
                        {
                            "formula": str(part),
                            "window": [part.a, part.b],
                            "radius": q.predicate.radius,
                            "max_error": float(dist.max()) if len(dist) else None,
                        }
                    )

    finite_b = log.b[np.isfinite(log.b)]
    min_b = float(finite_b.min()) if len(finite_b) else math.inf
    counts = {s: log.status.count(s) for s in ("optimal", "relaxed", "infeasible")}
    return Report(
        scenario=cfg.name,
        subformulas=subs,
        satisfied=bool(sat),
        robustness=_finite_or_none(rob),
        min_b=min_b,
        g_window_errors=errors,
        latency_mean_ms=float(log.solve_time.mean() * 1e3),
        latency_max_ms=float(log.solve_time.max() * 1e3),
        qp_status_counts=counts,
        pass_=bool(sat and all(s["satisfied"] for s in subs) and min_b >= -b_tol),
    )


# ---------------------------------------------------------------------------
# outputs


def _write_csv(path: Path, header: list[str], data: np.ndarray, extra: list[list[str]] | None = None):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for i, row in enumerate(data):
            cells = [format(float(x), ".17g") for x in row]
            if extra is not None:
                cells += extra[i]
            fh.write(",".join(cells) + "\n")


def emit_outputs(log: RunLog, report: Report, cfg: ScenarioConfig, out_dir=None) -> list[Path]:
    """Write CSV traces, report.json and two SVG plots; returns the paths."""
    if len(log) == 0:
        raise ValueError("empty run log")
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n = log.n_uavs

    traj_path = out / "trajectory.csv"
    header = ["time_s", "x_m", "y_m", "z_m", "vx_mps", "vy_mps", "vz_mps", "ux_mps2", "uy_mps2", "uz_mps2"]
    header += [f"thrust{i + 1}_N" for i in range(n)]
    data = np.column_stack([log.times, log.position, log.velocity, log.u, log.thrust])
    _write_csv(traj_path, header, data)

    bar_path = out / "barrier.csv"
    header = ["time_s", "b", "gamma1", "Px", "Py", "Pz", "H", "slack", "qp_status"]
    data = np.column_stack([log.times, log.b, log.gamma1, log.P, log.H, log.slack])
    _write_csv(bar_path, header, data, [[s] for s in log.status])

    rep_path = out / "report.json"
    rep_path.write_text(json.dumps(report.to_dict(), indent=2) + "\n")

    paths = [traj_path, bar_path, rep_path]
    paths += _plots(log, out)
    return paths


def _plots(log: RunLog, out: Path) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "payload-stl"
    meta = {"Date": None}
    t = log.times

    fig, axes = plt.subplots(3, 1, sharex=True, figsize=(7, 7))
    for k, (ax, name) in enumerate(zip(axes, "xyz")):
        ax.plot(t, log.position[:, k], color="C0", lw=1.2, label="payload")
        for j, atom in enumerate(log.barrier.atoms):
            if atom.shape != "ball_in" or atom.profile is None:
                continue
            hi = min(atom.t_off, t[-1])
            ts = t[(t >= atom.t_on) & (t <= hi)]
            if not len(ts):
                continue
            g = np.array([atom.profile(float(s))[0] for s in ts])
            g = np.minimum(g, 10.0)
            c = atom.center[k]
            color = f"C{1 + j % 8}"
            ax.plot(ts, c + g, ls="--", lw=0.8, color=color)
            ax.plot(ts, c - g, ls="--", lw=0.8, color=color)
        ax.set_ylabel(f"{name} [m]")
        ax.grid(alpha=0.3)
    axes[-1].set_xlabel("t [s]")
    axes[0].set_title("payload position with barrier envelopes (clipped at 10 m)")
    fig.tight_layout()
    p1 = out / "trajectory.svg"
    fig.savefig(p1, format="svg", metadata=meta)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(7, 3.5))
    finite = np.isfinite(log.b)
    ax.plot(t[finite], log.b[finite], lw=1.2)
    ax.axhline(0.0, color="k", lw=0.8)
    top = float(log.b[finite].max()) if finite.any() else 1.0
    ax.axhspan(0.0, max(top, 1.0), color="C2", alpha=0.08)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("b(x, t)")
    ax.set_yscale("symlog", linthresh=1.0)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    p2 = out / "barrier.svg"
    fig.savefig(p2, format="svg", metadata=meta)
    plt.close(fig)
    return [p1, p2]


def read_trajectory_csv(path) -> Trajectory:
    """Load the position columns written by :func:`emit_outputs`."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    try:
        cols = [header.index(c) for c in ("time_s", "x_m", "y_m", "z_m")]
    except ValueError:
        raise ValueError(f"{path}: expected columns time_s, x_m, y_m, z_m") from None
    data = np.loadtxt(path, delimiter=",", skiprows=1, usecols=cols, ndmin=2)
    return Trajectory(data[:, 0], data[:, 1:4])
