"""AST for the STL fragment used for waypoint missions.

Two formula classes are distinguished:

* state formulas (``psi``): ``true``, predicates, negated predicates and
  conjunctions of those;
* task formulas (``phi``): ``F[a,b] psi``, ``G[a,b] psi``, ``psi U[a,b] psi``
  and conjunctions of tasks.

Negation is only allowed directly on a predicate. The monitor in
:mod:`payload_stl.stl.monitor` works on any tree built from these nodes; the
fragment rules are enforced by :func:`check_fragment` and the parser.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Union

import numpy as np


class FragmentError(ValueError):
    """Formula is well formed STL but outside the supported fragment."""


def _fmt(x: float) -> str:
    return repr(float(x))


def _vec(v) -> tuple[float, float, float]:
    t = tuple(float(c) for c in v)
    if len(t) != 3:
        raise ValueError(f"expected a 3-vector, got {v!r}")
    return t


# ---------------------------------------------------------------------------
# predicates


@dataclass(frozen=True)
class Ball:
    """``norm(r0 - center) <= radius``; ``h = radius - norm(r0 - center)``."""

    center: tuple[float, float, float]
    radius: float
    norm: str = "euclidean"

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0:
            raise ValueError(f"ball radius must be positive, got {self.radius}")
        if self.norm not in ("euclidean", "infinity"):
            raise ValueError(f"unknown norm {self.norm!r}")

    def h(self, r: np.ndarray) -> np.ndarray:
        diff = np.asarray(r, dtype=float) - np.array(self.center)
        if self.norm == "euclidean":
            dist = np.linalg.norm(diff, axis=-1)
        else:
            dist = np.abs(diff).max(axis=-1)
        return self.radius - dist

    def __str__(self) -> str:
        c = np.array(self.center)
        if self.norm == "infinity":
            if not c.any():
                return f"box(r0, {_fmt(self.radius)})"
            return f"ball(r0, [{', '.join(map(_fmt, c))}], inf) <= {_fmt(self.radius)}"
        return f"ball(r0, [{', '.join(map(_fmt, c))}]) <= {_fmt(self.radius)}"


@dataclass(frozen=True)
class Affine:
    """``a . r0 + c >= 0``."""

    a: tuple[float, float, float]
    c: float

    def __post_init__(self):
        object.__setattr__(self, "a", _vec(self.a))
        object.__setattr__(self, "c", float(self.c))

    def h(self, r: np.ndarray) -> np.ndarray:
        return np.asarray(r, dtype=float) @ np.array(self.a) + self.c

    def __str__(self) -> str:
        return f"affine(r0, [{', '.join(map(_fmt, self.a))}], {_fmt(self.c)})"


Predicate = Union[Ball, Affine]


# ---------------------------------------------------------------------------
# formula nodes


@dataclass(frozen=True)
class TrueF:
    def __str__(self) -> str:
        return "true"


@dataclass(frozen=True)
class Pred:
    predicate: Predicate

    def __str__(self) -> str:
        return str(self.predicate)


@dataclass(frozen=True)
class Not:
    child: "Formula"

    def __str__(self) -> str:
        return f"not {self.child}"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"

    def __str__(self) -> str:
        return f"({self.left}) and ({self.right})"


def _check_interval(a: float, b: float) -> None:
    if not 0 <= a <= b:
        raise ValueError(f"interval must satisfy 0 <= a <= b, got [{a}, {b}]")


@dataclass(frozen=True)
class Eventually:
    a: float
    b: float
    child: "Formula"

    def __post_init__(self):
        _check_interval(self.a, self.b)

    def __str__(self) -> str:
        return f"F[{_fmt(self.a)}, {_fmt(self.b)}]({self.child})"


@dataclass(frozen=True)
class Always:
    a: float
    b: float
    child: "Formula"

    def __post_init__(self):
        _check_interval(self.a, self.b)

    def __str__(self) -> str:
        return f"G[{_fmt(self.a)}, {_fmt(self.b)}]({self.child})"


@dataclass(frozen=True)
class Until:
    a: float
    b: float
    left: "Formula"
    right: "Formula"

    def __post_init__(self):
        _check_interval(self.a, self.b)

    def __str__(self) -> str:
        return f"U[{_fmt(self.a)}, {_fmt(self.b)}]({self.left}, {self.right})"


Formula = Union[TrueF, Pred, Not, And, Eventually, Always, Until]
Temporal = (Eventually, Always, Until)


def conjoin(*formulas: Formula) -> Formula:
    if not formulas:
        return TrueF()
    out = formulas[0]
    for f in formulas[1:]:
        out = And(out, f)
    return out


def conjuncts(formula: Formula) -> list[Formula]:
    """Flatten nested ``And`` nodes, left to right."""
    if isinstance(formula, And):
        return conjuncts(formula.left) + conjuncts(formula.right)
    return [formula]


def horizon(formula: Formula) -> float:
    if isinstance(formula, (TrueF, Pred)):
        return 0.0
    if isinstance(formula, Not):
        return horizon(formula.child)
    if isinstance(formula, And):
        return max(horizon(formula.left), horizon(formula.right))
    if isinstance(formula, (Eventually, Always)):
        return formula.b + horizon(formula.child)
    if isinstance(formula, Until):
        return formula.b + max(horizon(formula.left), horizon(formula.right))
    raise TypeError(f"not a formula node: {formula!r}")


def walk(formula: Formula) -> Iterator[Formula]:
    yield formula
    if isinstance(formula, Not):
        yield from walk(formula.child)
    elif isinstance(formula, (And, Until)):
        yield from walk(formula.left)
        yield from walk(formula.right)
    elif isinstance(formula, (Eventually, Always)):
        yield from walk(formula.child)


def is_state_formula(formula: Formula) -> bool:
    if isinstance(formula, (TrueF, Pred)):
        return True
    if isinstance(formula, Not):
        return isinstance(formula.child, Pred)
    if isinstance(formula, And):
        return is_state_formula(formula.left) and is_state_formula(formula.right)
    return False


def check_fragment(formula: Formula) -> Formula:
    """Raise :class:`FragmentError` unless ``formula`` is in the fragment.

    Accepted: a conjunction whose conjuncts are either state formulas or
    temporal operators applied to state formulas.
    """
    for node in walk(formula):
        if isinstance(node, Not) and not isinstance(node.child, Pred):
            raise FragmentError(f"negation is only allowed on predicates: {node}")
    for part in conjuncts(formula):
        if is_state_formula(part):
            continue
        if isinstance(part, (Eventually, Always)):
            if not is_state_formula(part.child):
                raise FragmentError(f"temporal operand must be a state formula: {part}")
        elif isinstance(part, Until):
            if not (is_state_formula(part.left) and is_state_formula(part.right)):
                raise FragmentError(f"until operands must be state formulas: {part}")
        else:
            raise FragmentError(f"unsupported formula shape: {part}")
    return formula


def negate_state_formula(formula: Formula) -> Formula:
    """Push negation into a predicate-level formula (used for F/G duality)."""
    if isinstance(formula, Pred):
        return Not(formula)
    if isinstance(formula, Not) and isinstance(formula.child, Pred):
        return formula.child
    raise FragmentError(f"cannot negate {formula} inside the fragment")
