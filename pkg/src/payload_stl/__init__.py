"""Cooperative payload transport under signal temporal logic specifications.

Layers, bottom up: rigid-body plant (:mod:`.rigid_body`), exact feedback
linearization to ``r0'' = v`` (:mod:`.linearization`), STL parsing and
monitoring (:mod:`.stl`), barrier synthesis (:mod:`.barriers`), the
second-order barrier constraint and its QP (:mod:`.hocbf`, :mod:`.qp`), and
the closed loop with its outputs (:mod:`.sim`).
"""
from .barriers import BarrierConfig, CompositeBarrier, SynthesisError, eval_barrier, synthesize
from .hocbf import DoubleIntegratorState, assemble_constraint, condition_check
from .linearization import allocate, compute_terms, ideal_force_policy
from .qp import HocbfConstraint, QpSpec, kkt_residuals, solve_cqp
from .rigid_body import ControlInput, SystemParams, SystemState, integrate_step, default_params
from .sim import build_report, emit_outputs, load_scenario, preset, run_closed_loop
from .stl import Trajectory, evaluate, parse_spec, robustness

__all__ = [
    "BarrierConfig",
    "CompositeBarrier",
    "ControlInput",
    "DoubleIntegratorState",
    "HocbfConstraint",
    "QpSpec",
    "SynthesisError",
    "SystemParams",
    "SystemState",
    "Trajectory",
    "allocate",
    "assemble_constraint",
    "build_report",
    "compute_terms",
    "condition_check",
    "emit_outputs",
    "eval_barrier",
    "evaluate",
    "ideal_force_policy",
    "integrate_step",
    "kkt_residuals",
    "load_scenario",
    "parse_spec",
    "preset",
    "robustness",
    "run_closed_loop",
    "solve_cqp",
    "synthesize",
    "default_params",
]
