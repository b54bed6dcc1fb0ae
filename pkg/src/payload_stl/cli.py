"""Command line entry point: ``run``, ``check`` and ``monitor``.

Exit status is 0 when the run (or offline verdict) passes, 1 when it fails
and 2 for bad input.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .barriers import SynthesisError, synthesize
from .rigid_body import SimulationDiverged
from .sim import PRESETS, ScenarioError, build_report, emit_outputs, load_scenario, read_trajectory_csv, run_closed_loop
from .stl import InsufficientHorizon, ParseError, evaluate, parse_spec, robustness

log = logging.getLogger("payload_stl")


def _scenario(args):
    source = args.preset if getattr(args, "preset", None) else args.scenario
    if source is None:
        raise ScenarioError("", "give a scenario file or --preset")
    cfg = load_scenario(source)
    changes = {}
    if getattr(args, "mode", None):
        changes["mode"] = args.mode
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "out", None):
        changes["out_dir"] = args.out
    return dataclasses.replace(cfg, **changes) if changes else cfg


def cmd_run(args) -> int:
    cfg = _scenario(args)
    step = max(cfg.n_steps // 10, 1)

    def progress(k, total):
        if k % step == 0:
            log.info("t = %.1f s", k * cfg.control_period)

    run_log = run_closed_loop(cfg, progress=progress)
    report = build_report(run_log, cfg)
    files = emit_outputs(run_log, report, cfg, cfg.out_dir)
    for sub in report.subformulas:
        mark = "ok  " if sub["satisfied"] else "FAIL"
        print(f"{mark} {sub['formula']}  robustness {sub['robustness']:+.4f}")
    print(f"min b = {report.min_b:.6g}")
    print(f"latency mean {report.latency_mean_ms:.3f} ms, max {report.latency_max_ms:.3f} ms")
    print(f"{'PASS' if report.pass_ else 'FAIL'}  ({len(files)} files in {cfg.out_dir})")
    return 0 if report.pass_ else 1


def cmd_check(args) -> int:
    cfg = _scenario(args)
    barrier = synthesize(cfg.formula, cfg.initial_position, 0.0, cfg.barrier)
    print(f"scenario {cfg.name}: {cfg.spec_text}")
    print(f"duration {cfg.duration} s, {cfg.n_steps} control steps, mode {cfg.mode}")
    for i, atom in enumerate(barrier.atoms):
        prof = "anchored during the run" if atom.profile is None else atom.profile.to_dict()
        print(f"  atom {i}: {atom.source} [{atom.shape}] {prof}")
    print(f"b(x0, 0) = {barrier.value(cfg.initial_position, 0.0):.6g}" if barrier.active(0.0) else "no atom active at t0")
    return 0


def cmd_monitor(args) -> int:
    text = args.spec
    if Path(text).is_file():
        text = Path(text).read_text()
    formula = parse_spec(text)
    traj = read_trajectory_csv(args.trajectory)
    ok = evaluate(formula, traj)
    rho = robustness(formula, traj)
    print(json.dumps({"spec": str(formula), "satisfied": bool(ok), "robustness": float(rho)}))
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="payload-stl", description="STL-constrained cooperative payload transport")
    p.add_argument("-v", "--verbose", action="store_true", help="progress logging")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate a scenario and write CSV/JSON/SVG outputs")
    r.add_argument("scenario", nargs="?", help="scenario JSON file or preset name")
    r.add_argument("--out", help="output directory")
    r.add_argument("--preset", choices=sorted(PRESETS))
    r.add_argument("--mode", choices=["ideal", "full"])
    r.add_argument("--seed", type=int)
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("check", help="validate a scenario and synthesize its barriers")
    c.add_argument("scenario", nargs="?")
    c.add_argument("--preset", choices=sorted(PRESETS))
    c.set_defaults(func=cmd_check)

    m = sub.add_parser("monitor", help="evaluate a spec on a logged trajectory")
    m.add_argument("trajectory", help="trajectory CSV written by `run`")
    m.add_argument("spec", help="spec text, or a file containing it")
    m.set_defaults(func=cmd_monitor)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    np.seterr(over="ignore")
    try:
        return args.func(args)
    except (ScenarioError, ParseError, SynthesisError, InsufficientHorizon, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except SimulationDiverged as e:
        print(f"simulation diverged: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
