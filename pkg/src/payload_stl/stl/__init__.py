from .formula import (
    Affine,
    Always,
    And,
    Ball,
    Eventually,
    Formula,
    FragmentError,
    Not,
    Pred,
    TrueF,
    Until,
    check_fragment,
    conjoin,
    conjuncts,
    horizon,
    is_state_formula,
)
from .monitor import InsufficientHorizon, Trajectory, evaluate, robustness
from .parser import ParseError, parse_spec

__all__ = [
    "Affine",
    "Always",
    "And",
    "Ball",
    "Eventually",
    "Formula",
    "FragmentError",
    "InsufficientHorizon",
    "Not",
    "ParseError",
    "Pred",
    "Trajectory",
    "TrueF",
    "Until",
    "check_fragment",
    "conjoin",
    "conjuncts",
    "evaluate",
    "horizon",
    "is_state_formula",
    "parse_spec",
    "robustness",
]
