import numpy as np
import pytest
from _oracles import ball_atom_partials, ten_term_constraint
from hypothesis import given
from hypothesis import strategies as st

from payload_stl.barriers import (
    AtomicBarrier,
    CompositeBarrier,
    ConstantProfile,
    ExponentialProfile,
    LinearProfile,
    eval_barrier,
    synthesize,
)
from payload_stl.hocbf import DoubleIntegratorState, assemble_constraint, condition_check, gamma1
from payload_stl.stl import Trajectory, parse_spec


def random_ball_state(rng):
    kind = rng.integers(3)
    if kind == 0:
        prof = LinearProfile(float(rng.uniform(1, 50)), float(rng.uniform(-5, 0)))
    elif kind == 1:
        prof = ExponentialProfile(float(rng.uniform(1, 300)), float(rng.uniform(0.1, 1)), float(rng.uniform(0.5, 3)))
    else:
        prof = ConstantProfile(float(rng.uniform(0.5, 5)))
    c = rng.uniform(-5, 5, 3)
    atom = AtomicBarrier("ball_in", "G", (0.0, 30.0), 1.0, center=c, epsilon=1e-3, profile=prof)
    return atom, rng.uniform(-6, 6, 3), rng.uniform(-3, 3, 3), float(rng.uniform(0, 10))


@given(st.integers(0, 2**32 - 1), st.booleans())
def test_matches_ten_term_expansion(seed, verbatim):
    atom, r, v, t = random_ball_state(np.random.default_rng(seed))
    b, bt, btt, grad, hess = ball_atom_partials(atom.center, atom.epsilon, atom.profile, r, t)
    P_ref, H_ref = ten_term_constraint(grad, hess, b, bt, btt, v)
    con = assemble_constraint(eval_barrier(CompositeBarrier((atom,)), r, t), DoubleIntegratorState(r, v), verbatim)
    np.testing.assert_allclose(con.P, P_ref, atol=1e-8)
    assert con.H == pytest.approx(H_ref, abs=1e-8 * max(1.0, abs(H_ref)))


def test_mixed_term_for_composites():
    rng = np.random.default_rng(2)
    atoms = (
        AtomicBarrier("ball_in", "G", (0, 9), 1.0, center=np.array([1.0, 0, 0]), profile=LinearProfile(4.0, -0.3)),
        AtomicBarrier("ball_in", "G", (0, 9), 1.0, center=np.array([0, 1.0, 0]),
                      profile=ExponentialProfile(3.0, 0.5, 1.0)),
        AtomicBarrier("ball_in", "G", (0, 9), 1.0, center=np.array([0, 0, 1.0]), profile=ConstantProfile(3.0)),
    )
    bar = CompositeBarrier(atoms)
    r, v = rng.uniform(-0.5, 0.5, 3), rng.uniform(-2, 2, 3)
    be = eval_barrier(bar, r, 1.0)
    s = DoubleIntegratorState(r, v)
    exact = assemble_constraint(be, s)
    verbatim = assemble_constraint(be, s, eq22_verbatim=True)
    assert np.linalg.norm(be.d_grad_dt) > 1e-6
    assert exact.H - verbatim.H == pytest.approx(2 * v @ be.d_grad_dt)


def test_signed_square_matches_square_when_positive():
    atom, r, v, t = random_ball_state(np.random.default_rng(0))
    be = eval_barrier(CompositeBarrier((atom,)), r, t)
    s = DoubleIntegratorState(r, v)
    if be.b > 0 and gamma1(be, s) > 0:
        assert assemble_constraint(be, s).H == pytest.approx(assemble_constraint(be, s, class_k="signed_square").H)
    with pytest.raises(ValueError):
        assemble_constraint(be, s, class_k="cube")


def test_condition_check_locates_teleport():
    f = parse_spec("G[0,10](ball(r0, [0,0,0]) <= 5)")
    bar = synthesize(f, np.zeros(3))
    times = 0.1 * np.arange(101)
    pos = np.zeros((101, 3))
    rep = condition_check(Trajectory(times, pos), bar)
    assert rep.ok and rep.min_b > 0
    pos[37] = [9.0, 0.0, 0.0]
    rep = condition_check(Trajectory(times, pos), bar)
    assert rep.first_violation == 37
    with pytest.raises(ValueError):
        condition_check(Trajectory(np.zeros(0), np.zeros((0, 3))), bar)


def test_state_validation():
    with pytest.raises(ValueError):
        DoubleIntegratorState([np.inf, 0, 0], [0, 0, 0])
