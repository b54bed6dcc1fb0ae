import math

import numpy as np
import pytest
from _oracles import ball_atom_partials, central_diff
from hypothesis import given
from hypothesis import strategies as st

from payload_stl.barriers import (
    AtomicBarrier,
    BarrierConfig,
    CompositeBarrier,
    ConstantProfile,
    ExponentialProfile,
    LinearProfile,
    SynthesisError,
    check_atom_soundness,
    eval_barrier,
    profile_from_dict,
    softmin,
    synthesize,
)
from payload_stl.sim import preset
from payload_stl.stl import parse_spec

floats = st.floats(-50, 50, allow_nan=False)
TWO_WP = parse_spec("F[0,14](ball(r0, [2,2,2]) <= 0.1) and G[14,25](ball(r0, [2,2,2]) <= 3)")
HANDSET_PROFILES = {0: LinearProfile(50.1, -50 / 14, t_freeze=14.0), 1: ExponentialProfile(347.93, 0.418, 2.0)}


def test_softmin_examples():
    assert softmin([1.7]) == 1.7
    assert softmin([0.0, 0.0]) == pytest.approx(-math.log(2))
    assert softmin([1e4, 0.0]) == pytest.approx(0.0)
    with pytest.raises(ValueError):
        softmin([])


@given(st.lists(floats, min_size=1, max_size=12))
def test_softmin_bounds(vals):
    s = softmin(vals)
    assert min(vals) - math.log(len(vals)) - 1e-9 <= s <= min(vals) + 1e-9


def test_handset_linear_profile_value():
    atom = AtomicBarrier("ball_in", "F", (0.0, 14.0), 0.1, center=np.array([2.0, 2, 2]), epsilon=1e-12,
                         profile=HANDSET_PROFILES[0], t_on=0.0)
    assert atom.value(np.zeros(3), 0.0) == pytest.approx(50.1 - math.sqrt(12), abs=1e-9)
    assert atom.value(np.zeros(3), 0.0) == pytest.approx(46.6359, abs=1e-4)


@pytest.mark.parametrize("eps", [1e-2, 1e-4, 1e-6])
def test_smoothing_is_conservative_and_consistent(eps):
    rng = np.random.default_rng(0)
    c = np.array([1.0, -2.0, 0.5])
    for _ in range(50):
        r = c + rng.normal(0, 2, 3)
        exact = 1.0 - np.linalg.norm(r - c)
        atom = AtomicBarrier("ball_in", "G", (0, 1), 1.0, center=c, epsilon=eps, profile=ConstantProfile(1.0))
        b = atom.value(r, 0.5)
        assert exact - eps <= b <= exact


@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3), st.floats(0.0, 0.95))
def test_nonnegative_atom_implies_predicate(r, frac):
    c = np.zeros(3)
    atom = AtomicBarrier("ball_in", "G", (0, 1), 2.0, center=c, profile=ConstantProfile(2.0 * (1 - frac)))
    if atom.value(np.array(r), 0.5) >= 0:
        assert atom.predicate_holds(np.array(r))


def _composite(rng, m):
    atoms = []
    for j in range(m):
        kind = j % 3
        prof = [
            LinearProfile(float(rng.uniform(3, 8)), float(rng.uniform(-1, 0))),
            ExponentialProfile(float(rng.uniform(1, 20)), float(rng.uniform(0.1, 1)), float(rng.uniform(0.5, 2))),
            ConstantProfile(float(rng.uniform(1, 4))),
        ][kind]
        shape = ["ball_in", "ball_out", "linear"][int(rng.integers(3))]
        d = rng.normal(size=3)
        atoms.append(
            AtomicBarrier(shape, "G", (0.0, 10.0), 1.0, center=rng.uniform(-3, 3, 3), direction=d / np.linalg.norm(d),
                          epsilon=1e-3, profile=prof, t_off=math.inf)
        )
    return CompositeBarrier(tuple(atoms))


def check_partials(bar, r, t, h=1e-5):
    """Max relative error of every partial against central differences.

    Relative to the FD value, with an absolute floor of 1e-8 at the 1e-5
    tolerance (so values below 1e-3 are compared absolutely).
    """
    be = eval_barrier(bar, r, t)

    def f_r(x):
        return eval_barrier(bar, x, t).b

    def f_t(s):
        return eval_barrier(bar, r, float(s[0])).b

    pairs = [
        (be.grad_r, central_diff(f_r, r, h)),
        (be.db_dt, central_diff(f_t, [t], h)[0]),
        (be.hess_r, central_diff(lambda x: eval_barrier(bar, x, t).grad_r, r, h)),
        (be.d_grad_dt, central_diff(lambda s: eval_barrier(bar, r, float(s[0])).grad_r, [t], h)[0]),
        (be.d2b_dt2, central_diff(lambda s: eval_barrier(bar, r, float(s[0])).db_dt, [t], h)[0]),
    ]
    worst = 0.0
    for an, fd in pairs:
        an, fd = np.asarray(an), np.asarray(fd)
        scale = np.maximum(np.abs(fd), 1e-3)
        worst = max(worst, float((np.abs(an - fd) / scale).max()))
    return worst


@given(st.integers(0, 2**32 - 1), st.integers(3, 6))
def test_partials_match_finite_differences(seed, m):
    rng = np.random.default_rng(seed)
    bar = _composite(rng, m)
    r = rng.uniform(-4, 4, 3)
    if min(np.linalg.norm(r - a.center) for a in bar.atoms) < 0.1:
        return
    assert check_partials(bar, r, float(rng.uniform(0.5, 9.5))) < 1e-5


def test_hessian_symmetric_and_weights():
    bar = _composite(np.random.default_rng(5), 4)
    be = eval_barrier(bar, np.array([0.3, 2.0, -1.0]), 2.0)
    np.testing.assert_allclose(be.hess_r, be.hess_r.T, atol=1e-14)
    assert be.weights.sum() == pytest.approx(1.0)


def test_single_atom_partials_by_hand():
    prof = ExponentialProfile(5.0, 0.4, 1.0)
    atom = AtomicBarrier("ball_in", "G", (0, 9), 1.0, center=np.array([1.0, 2, 3]), epsilon=1e-3, profile=prof)
    r, t = np.array([0.2, 0.1, 0.0]), 1.3
    b, bt, btt, grad, hess = ball_atom_partials(atom.center, 1e-3, prof, r, t)
    be = eval_barrier(CompositeBarrier((atom,)), r, t)
    assert be.b == pytest.approx(b, abs=1e-12)
    assert (be.db_dt, be.d2b_dt2) == pytest.approx((bt, btt), abs=1e-12)
    np.testing.assert_allclose(be.grad_r, grad, atol=1e-12)
    np.testing.assert_allclose(be.hess_r, hess, atol=1e-12)
    np.testing.assert_allclose(be.d_grad_dt, 0.0)


def test_handset_profiles_pass_soundness_only_with_tolerance():
    # the hand-set exponential sits slightly above the radius at the window start
    cfg = BarrierConfig(overrides=HANDSET_PROFILES)
    bar = synthesize(TWO_WP, np.zeros(3), 0.0, cfg)
    assert bar.value(np.zeros(3), 0.0) > 0
    assert HANDSET_PROFILES[1](14.0)[0] == pytest.approx(3.0000013, abs=1e-7)
    with pytest.raises(SynthesisError):
        synthesize(TWO_WP, np.zeros(3), 0.0, BarrierConfig(overrides=HANDSET_PROFILES, soundness_tol=1e-7))


def test_start_at_waypoint_synthesizes():
    f = parse_spec("F[0,5](ball(r0, [1,1,1]) <= 0.5) and G[0,5](ball(r0, [1,1,1]) <= 2)")
    bar = synthesize(f, np.ones(3), 0.0)
    assert bar.value(np.ones(3), 0.0) > 0


def test_synthesis_errors():
    with pytest.raises(SynthesisError):
        synthesize(parse_spec("G[0,5](ball(r0, [9,9,9]) <= 1)"), np.zeros(3))
    with pytest.raises(SynthesisError):
        synthesize(parse_spec("U[0,5](true, ball(r0, [1,1,1]) <= 1)"), np.zeros(3))
    with pytest.raises(SynthesisError):
        synthesize(parse_spec("G[0,5](not box(r0, 1))"), np.ones(3) * 3)
    with pytest.raises(SynthesisError):
        synthesize(parse_spec("ball(r0, [0,0,0]) <= 1"), np.zeros(3))
    with pytest.raises(SynthesisError):
        synthesize(TWO_WP, np.zeros(3), 0.0, BarrierConfig(overrides={7: ConstantProfile(1.0)}))
    with pytest.raises(ValueError):
        BarrierConfig(epsilon=0.0)


def test_soundness_check():
    f_bad = AtomicBarrier("ball_in", "F", (0.0, 5.0), 1.0, center=np.zeros(3), profile=LinearProfile(10.0, -1.0))
    with pytest.raises(SynthesisError):
        check_atom_soundness(f_bad)
    check_atom_soundness(AtomicBarrier("ball_in", "F", (0.0, 5.0), 1.0, center=np.zeros(3),
                                       profile=LinearProfile(6.0, -1.0)))
    g_bad = AtomicBarrier("ball_in", "G", (2.0, 5.0), 1.0, center=np.zeros(3), profile=ExponentialProfile(1.0, 1.0, 0.5, t_ref=2.0))
    with pytest.raises(SynthesisError):
        check_atom_soundness(g_bad)


def test_auto_profiles_start_at_margin():
    bar = synthesize(TWO_WP, np.zeros(3), 0.0, BarrierConfig(margin=2.0))
    for atom in bar.atoms:
        assert atom.value(np.zeros(3), 0.0) == pytest.approx(2.0)
    f_atom = bar.atoms[0]
    assert f_atom.profile(14.0)[0] == pytest.approx(0.1)


def test_handoff_and_dormant_g_activation():
    cfg = preset("package_delivery")
    bar = synthesize(cfg.formula, np.zeros(3), 0.0, cfg.barrier)
    f1, g1 = bar.atoms[0], bar.atoms[1]
    assert f1.partner == 1 and g1.partner == 0
    assert f1.profile.t_freeze == pytest.approx(17.0 - cfg.barrier.handoff_lead)
    assert g1.profile is None and not g1.is_active(10.0)

    inside = np.array([10.0, 10.0, 4.5])
    later = bar.anchor(inside, 10.0)
    assert later.atoms[0].retired_at == 10.0
    g1 = later.atoms[1]
    assert g1.is_active(10.0) and g1.t_on == 10.0
    # continuous hand-over: the new atom starts at the margin
    assert g1.value(inside, 10.0) == pytest.approx(cfg.barrier.margin)
    assert g1.profile(17.0)[0] <= 1.0 + 1e-6
    assert later.anchor(inside, 10.0) is later


def test_profile_dict_roundtrip():
    for prof in [ConstantProfile(2.0), LinearProfile(3.0, -0.5, 4.0, 1.0), ExponentialProfile(3.0, 0.2, 1.0, 2.0)]:
        assert profile_from_dict(prof.to_dict()) == prof
    with pytest.raises(ValueError):
        profile_from_dict({"kind": "cubic"})
