import math

import numpy as np
import pytest
from _oracles import random_formula, random_signal, stl_oracle
from hypothesis import given
from hypothesis import strategies as st

from payload_stl.stl import (
    Affine,
    Always,
    And,
    Ball,
    Eventually,
    FragmentError,
    InsufficientHorizon,
    Not,
    ParseError,
    Pred,
    Trajectory,
    TrueF,
    Until,
    check_fragment,
    conjuncts,
    evaluate,
    horizon,
    parse_spec,
    robustness,
)

X_POS = Pred(Affine((1.0, 0.0, 0.0), 0.0))  # x >= 0


def test_parse_examples():
    assert parse_spec("F[0,14](ball(r0, [2,2,2]) <= 0.1)") == Eventually(
        0.0, 14.0, Pred(Ball((2, 2, 2), 0.1))
    )
    assert parse_spec("true") == TrueF()
    assert parse_spec("G[0,90](box(r0, 50))") == Always(0.0, 90.0, Pred(Ball((0, 0, 0), 50.0, "infinity")))


def test_parse_operators_and_spellings():
    f = parse_spec("G[0,1](!ball(r0,[0,0,0]) <= 1 && affine(r0, [0,0,1], 2)) & F[1,2](true)")
    parts = conjuncts(f)
    assert len(parts) == 2
    assert isinstance(parts[0].child.left, Not)
    u = parse_spec("U[0, 5](ball(r0,[0,0,0]) <= 3, ball(r0,[1,1,1]) <= 0.5)")
    assert isinstance(u, Until) and u.b == 5.0
    assert horizon(parse_spec("F[1,3](true) and G[0,7](true)")) == 7.0


@pytest.mark.parametrize(
    "text, line, col",
    [
        ("F[2,1](true)", 1, 2),
        ("ball(r0,[1,2]) <= 1", 1, 13),
        ("F[0,1](ball(r0,[0,0,0]) <= 1", 1, 29),
        ("true\n and $", 2, 6),
        ("ball(r0,[0,0,0]) <= -1", 1, 21),
        ("true true", 1, 6),
    ],
)
def test_parse_errors_carry_position(text, line, col):
    with pytest.raises(ParseError) as exc:
        parse_spec(text)
    assert (exc.value.line, exc.value.column) == (line, col)


def test_fragment_rules():
    with pytest.raises(FragmentError):
        parse_spec("F[0,1](G[0,1](true))")
    with pytest.raises(FragmentError):
        parse_spec("not F[0,1](true)")
    nested = parse_spec("F[0,1](G[0,1](true))", strict=False)
    assert horizon(nested) == 2.0
    check_fragment(parse_spec("G[0,1](ball(r0,[0,0,0]) <= 1) and not ball(r0,[5,5,5]) <= 1"))


vec = st.tuples(*[st.floats(-100, 100, allow_nan=False)] * 3)


@given(vec, st.floats(0.01, 50), st.floats(0, 10), st.floats(0, 10), st.booleans())
def test_print_parse_roundtrip(c, radius, a, w, neg):
    p = Pred(Ball(c, radius))
    f = And(Eventually(a, a + w, Not(p) if neg else p), Always(a, a + w, Pred(Affine(c, radius))))
    assert parse_spec(str(f)) == f


def test_monitor_examples():
    traj = Trajectory.from_signal(np.linspace(-1.0, 1.0, 21), 0.1)  # x(t) = t - 1
    assert evaluate(Eventually(0, 2, X_POS), traj)
    assert not evaluate(Always(0, 2, X_POS), traj)
    const = Trajectory.from_signal(np.full(11, 3.0), 0.1)
    assert robustness(Always(0, 1, X_POS), const) == 3.0
    two = Trajectory.from_signal([-1.0, 2.0], 1.0)
    assert robustness(Eventually(0, 1, X_POS), two) == 2.0


def test_until_is_closed_on_the_left_operand():
    # left must hold up to and including the instant the right one becomes true
    x = np.array([1.0, 1.0, -1.0, -1.0])
    traj = Trajectory.from_signal(x, 1.0)
    right = Pred(Affine((-1.0, 0, 0), 0.0))  # x <= 0
    assert not evaluate(Until(0, 3, X_POS, right), traj)
    assert evaluate(Until(0, 3, TrueF(), right), traj)


def test_horizon_and_empty_errors():
    traj = Trajectory.from_signal(np.zeros(11), 0.1)
    with pytest.raises(InsufficientHorizon):
        evaluate(Eventually(0, 2, X_POS), traj)
    with pytest.raises(InsufficientHorizon):
        robustness(X_POS, Trajectory.from_signal([], 0.1))
    with pytest.raises(ValueError):
        Trajectory([0.0, 0.1, 0.3], np.zeros((3, 3)))


def test_windows_without_samples():
    traj = Trajectory.from_signal(np.ones(20), 0.1)
    assert not evaluate(Eventually(0.05, 0.05, X_POS), traj)
    assert evaluate(Always(0.05, 0.05, X_POS), traj)
    assert robustness(Always(0.05, 0.05, X_POS), traj) == math.inf


@given(st.integers(0, 2**32 - 1))
def test_monitor_matches_recursive_oracle(seed):
    rng = np.random.default_rng(seed)
    f = random_formula(rng)
    traj = Trajectory.from_signal(random_signal(rng), 0.1)
    sat, rob = stl_oracle(f, traj.times, traj.positions)
    assert evaluate(f, traj) == sat(f, 0)
    r = robustness(f, traj)
    assert r == rob(f, 0)
    # sign soundness of the quantitative semantics
    if r > 0:
        assert evaluate(f, traj)
    elif r < 0:
        assert not evaluate(f, traj)
