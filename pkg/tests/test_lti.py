import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from collision_norm import matlib
from collision_norm.errors import (
    DirectFeedthrough,
    ImproperTF,
    PoleEvaluation,
    Unstable,
    UnknownChannel,
    ZeroNumerator,
)
from collision_norm.lti import (
    RationalTF,
    StateSpace,
    close_state_feedback,
    evaluate,
    relative_degree,
    simulate_impulse,
    tf_add,
    tf_div,
    tf_mul,
    tf_to_ss,
)
from collision_norm.models import REFERENCE_ROBOT, LQR, NoControl, NoMotor, PDTorque, build_grounded

coef = st.floats(-5, 5, allow_nan=False).filter(lambda x: abs(x) > 1e-3)
poly = st.lists(coef, min_size=1, max_size=4)
points = st.complex_numbers(max_magnitude=3.0).filter(lambda z: abs(z) > 0.1)


# ---------------------------------------------------------------- RationalTF


def test_trailing_zeros_trimmed():
    g = RationalTF((1.0, 2.0, 0.0, 0.0), (3.0, 0.0))
    assert g.num == (1.0, 2.0) and g.den == (3.0,)
    assert g.num_degree == 1 and g.den_degree == 0
    assert not g.is_proper


def test_zero_denominator_rejected():
    with pytest.raises(ValueError):
        RationalTF((1.0,), (0.0, 0.0))


@given(poly, poly, poly, poly, points)
def test_arithmetic_commutes_with_evaluation(n1, d1, n2, d2, s):
    a, b = RationalTF(n1, d1), RationalTF(n2, d2)
    try:
        va, vb = evaluate(a, s), evaluate(b, s)
        vsum, vprod = evaluate(tf_add(a, b), s), evaluate(tf_mul(a, b), s)
    except PoleEvaluation:
        return
    if max(abs(va), abs(vb)) > 1e6:
        return
    assert vsum == pytest.approx(va + vb, rel=1e-9, abs=1e-9)
    assert vprod == pytest.approx(va * vb, rel=1e-9, abs=1e-9)
    if abs(vb) > 1e-3:
        assert evaluate(tf_div(a, b), s) == pytest.approx(va / vb, rel=1e-8, abs=1e-9)


def test_operators_match_functions():
    a = RationalTF((1.0,), (1.0, 1.0))
    b = RationalTF((2.0, 1.0), (3.0, 0.0, 1.0))
    assert (a + b) == tf_add(a, b)
    assert (a * b) == tf_mul(a, b)
    assert (a / b) == tf_div(a, b)
    assert (a * 2.0)(1j) == pytest.approx(2 * a(1j))


def test_add_same_denominator_keeps_degree():
    d = (2.0, 3.0, 1.0)
    g = tf_add(RationalTF((1.0,), d), RationalTF((0.0, 1.0), d))
    assert g.den == d and g.num == (1.0, 1.0)


def test_evaluate_at_pole():
    with pytest.raises(PoleEvaluation):
        evaluate(RationalTF((1.0,), (0.0, 1.0)), 0.0)


def test_relative_degree():
    assert relative_degree(RationalTF((1.0,), (1.0, 2.0, 1.0))) == 2
    assert relative_degree(RationalTF((370.0, 85.0))) == -1
    with pytest.raises(ZeroNumerator):
        relative_degree(RationalTF((0.0,), (1.0, 1.0)))


# ---------------------------------------------------------------- realization


@given(st.lists(coef, min_size=1, max_size=3), st.lists(coef, min_size=4, max_size=5), points)
def test_tf_to_ss_frequency_response(num, den, s):
    g = RationalTF(num, den)
    ss = tf_to_ss(g)
    try:
        expected = evaluate(g, s)
    except PoleEvaluation:
        return
    if abs(expected) > 1e6:
        return
    got = ss.frequency_response(s)[0, 0]
    assert got == pytest.approx(expected, rel=1e-7, abs=1e-9)


def test_tf_to_ss_structure():
    ss = tf_to_ss(RationalTF((6.0,), (6.0, 5.0, 1.0)), "delta", "f")
    np.testing.assert_allclose(ss.A, [[0.0, 1.0], [-6.0, -5.0]])
    np.testing.assert_allclose(ss.B, [[0.0], [1.0]])
    np.testing.assert_allclose(ss.C, [[6.0, 0.0]])
    assert ss.input_labels == ("delta",) and ss.output_labels == ("f",)


def test_tf_to_ss_biproper_has_feedthrough():
    ss = tf_to_ss(RationalTF((1.0, 2.0), (3.0, 1.0)))
    np.testing.assert_allclose(ss.D, [[2.0]])


def test_improper_realization_rejected():
    with pytest.raises(ImproperTF):
        tf_to_ss(RationalTF((1.0, 1.0, 1.0), (1.0, 1.0)))


def test_state_space_validation_and_labels():
    ss = StateSpace([[-1.0]], [[1.0, 0.0]], [[1.0]], [[0.0, 0.0]], ("a", "b"), ("y",))
    assert ss.input_index("b") == 1
    with pytest.raises(UnknownChannel):
        ss.input_index("c")
    with pytest.raises(ValueError):
        StateSpace([[-1.0]], [[1.0]], [[1.0]], [[0.0]], ("a", "a"), ("y",))
    with pytest.raises(ValueError):
        StateSpace([[-1.0, 0.0]], [[1.0]], [[1.0]], [[0.0]], ("a",), ("y",))


def test_close_state_feedback():
    ss = StateSpace([[0.0, 1.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 1.0]], np.eye(2), np.zeros((2, 2)), ("d", "u"), ("p", "v"))
    cl = close_state_feedback(ss, [[-4.0, -2.0]], "u")
    np.testing.assert_allclose(cl.A, [[0.0, 1.0], [-4.0, -2.0]])
    assert cl.input_labels == ("d",)
    assert matlib.is_hurwitz(cl.A)


# ---------------------------------------------------------------- simulation


def _second_order(wn: float, zeta: float) -> StateSpace:
    return tf_to_ss(RationalTF((wn * wn,), (wn * wn, 2 * zeta * wn, 1.0)), "delta", "f")


@pytest.mark.parametrize("wn, zeta", [(2.0, 0.3), (10.0, 0.7), (5.0, 1.5)])
def test_impulse_matches_closed_form(wn, zeta):
    r = simulate_impulse(_second_order(wn, zeta), "delta", dt=1e-3, horizon=20.0)
    t = r.times
    if zeta < 1:
        wd = wn * math.sqrt(1 - zeta**2)
        exact = wn**2 / wd * np.exp(-zeta * wn * t) * np.sin(wd * t)
    else:
        s1 = -wn * (zeta - math.sqrt(zeta**2 - 1))
        s2 = -wn * (zeta + math.sqrt(zeta**2 - 1))
        exact = wn**2 / (s1 - s2) * (np.exp(s1 * t) - np.exp(s2 * t))
    np.testing.assert_allclose(r.samples_f, exact, atol=1e-9 * np.abs(exact).max())
    np.testing.assert_allclose(r.samples_fdot, np.gradient(exact, t), atol=2e-2 * np.abs(r.samples_fdot).max())


def test_horizon_extends_until_decay():
    r = simulate_impulse(_second_order(1.0, 0.05), "delta", dt=1e-2, horizon=5.0)
    assert r.horizon > 5.0
    assert len(r.samples_f) == round(r.horizon / r.dt) + 1


def test_impulse_equals_narrow_pulse():
    ss = build_grounded(REFERENCE_ROBOT, NoControl())
    r = simulate_impulse(ss, "delta", dt=1e-5, horizon=0.1)
    # pulse of height 1/eps for eps seconds, then free response
    eps = 1e-6
    a, b = ss.A, ss.B[:, 0]
    x_eps = np.linalg.solve(a, (matlib.expm(a * eps) - np.eye(4)) @ b) / eps
    phi = matlib.expm(a * 1e-5)
    x, peak = x_eps, 0.0
    c_f = ss.C[ss.output_index("f")]
    for _ in range(len(r.samples_f)):
        peak = max(peak, abs(c_f @ x))
        x = phi @ x
    assert peak == pytest.approx(r.peak, rel=1e-3)


def test_feedthrough_and_instability_rejected():
    with pytest.raises(DirectFeedthrough):
        simulate_impulse(tf_to_ss(RationalTF((1.0, 1.0), (2.0, 1.0)), "delta"), "delta")
    with pytest.raises(Unstable):
        simulate_impulse(tf_to_ss(RationalTF((1.0,), (-1.0, 1.0)), "delta"), "delta", dt=1e-2, horizon=1.0)
    with pytest.raises(ValueError):
        simulate_impulse(_second_order(1.0, 1.0), "delta", dt=0.1, horizon=0.5)


@pytest.mark.parametrize("ctrl", [NoControl(), NoMotor(), PDTorque(), LQR()], ids=lambda c: c.name)
def test_halving_dt_changes_peak_little(ctrl):
    ss = build_grounded(REFERENCE_ROBOT, ctrl)
    coarse = simulate_impulse(ss, "delta", dt=1e-4, horizon=1.0)
    fine = simulate_impulse(ss, "delta", dt=5e-5, horizon=1.0)
    assert abs(coarse.peak - fine.peak) <= 1e-3 * fine.peak
