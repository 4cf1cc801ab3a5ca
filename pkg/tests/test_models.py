import numpy as np
import pytest

from collision_norm import matlib
from collision_norm.errors import InvalidParams, UnstableClosedLoop
from collision_norm.lti import RationalTF, evaluate, relative_degree, tf_to_ss
from collision_norm.models import (
    LQR,
    MANUTEC_PLANT,
    MANUTEC_POSITION_CONTROLLER,
    REFERENCE_ROBOT,
    AdmittanceParams,
    DampedInertia,
    Grounded,
    NoControl,
    NoMotor,
    PDTorque,
    RobotParams,
    StateFeedback,
    assemble_manutec,
    build_estimation,
    build_grounded,
    build_inertial,
    build_manutec,
    human_environment,
)
from collision_norm.norms import sobolev_norm

P = REFERENCE_ROBOT


def test_reference_robot_values():
    assert (P.J, P.B, P.K_jt, P.I, P.V, P.K_e) == (3.19, 24.3, 10e3, 4.5, 20.3, 30e3)


@pytest.mark.parametrize("field, value", [("J", 0.0), ("K_jt", -1.0), ("I", 0.0), ("K_e", 0.0), ("B", -1.0), ("V", np.inf)])
def test_params_validated(field, value):
    vals = dict(J=1.0, B=1.0, K_jt=1.0, I=1.0, V=1.0, K_e=1.0)
    vals[field] = value
    with pytest.raises(InvalidParams):
        RobotParams(**vals)


def test_zero_damping_allowed():
    assert RobotParams(1.0, 0.0, 1.0, 1.0, 0.0, 1.0).B == 0.0


def test_grounded_open_loop_block():
    ss = build_grounded(P)
    K, J, I = P.K_jt, P.J, P.I
    np.testing.assert_allclose(ss.A[1], [-K / J, -P.B / J, K / J, 0])
    np.testing.assert_allclose(ss.A[3], [K / I, 0, -(K + P.K_e) / I, -P.V / I])
    np.testing.assert_allclose(ss.B[:, ss.input_index("delta")], [0, 1, 0, 1])
    np.testing.assert_allclose(ss.B[:, ss.input_index("tau")], [0, 1 / J, 0, 0])
    np.testing.assert_allclose(ss.C, [[0, 0, P.K_e, 0], [0, 0, 0, P.K_e]])
    assert not ss.D.any()
    assert matlib.is_hurwitz(ss.A)


def test_no_motor_is_link_only():
    ss = build_grounded(P, NoMotor())
    assert ss.n_states == 2
    # |f|^2 + |fdot|^2 of a mass-spring-damper hit at unit velocity
    k, v, i = P.K_e, P.V, P.I
    wn2, two_zw = k / i, v / i
    # x = q: ||q||^2 = 1/(2 two_zw wn2), ||qdot||^2 = 1/(2 two_zw)
    expected = k**2 * (1 / (2 * two_zw * wn2) + 1 / (2 * two_zw))
    assert sobolev_norm(ss, "delta").W == pytest.approx(expected, rel=1e-10)


def test_pd_gain_values():
    np.testing.assert_allclose(PDTorque().gain(1e4), [[1.5e4, 2e3, -1.5e4, -2e3, 0.0]])


@pytest.mark.parametrize("k_jt", [20.0, 1e3, 1e4, 1e5])
def test_feedback_variants_stable(k_jt):
    p = RobotParams(P.J, P.B, k_jt, P.I, P.V, P.K_e)
    for c in (PDTorque(), LQR()):
        ss = build_grounded(p, c)
        assert ss.input_labels == ("delta",)
        assert matlib.is_hurwitz(ss.A), c


def test_state_feedback_closes_negative_gain():
    g = (10.0, 1.0, -20.0, 0.5)
    ss = build_grounded(P, StateFeedback(g))
    open_loop = build_grounded(P)
    b = open_loop.B[:, [1]]
    np.testing.assert_allclose(ss.A, open_loop.A - b @ np.array([g]))


def test_series_environment_stiffness():
    k_env = 1e4
    series = P.K_e * k_env / (P.K_e + k_env)
    a = build_grounded(P, NoControl(), Grounded(k_env))
    b = build_grounded(RobotParams(P.J, P.B, P.K_jt, P.I, P.V, series))
    np.testing.assert_allclose(a.A, b.A)


def _absolute_inertial(p: RobotParams, env: DampedInertia):
    """Six-state model in absolute coordinates [theta, theta_dot, q, q_dot, x, x_dot]."""
    J, B, K, I, V, Ke, Bh, Ih = p.J, p.B, p.K_jt, p.I, p.V, p.K_e, env.B_h, env.I_h
    a = np.array(
        [
            [0, 1, 0, 0, 0, 0],
            [-K / J, -B / J, K / J, 0, 0, 0],
            [0, 0, 0, 1, 0, 0],
            [K / I, 0, -(K + Ke) / I, -V / I, Ke / I, 0],
            [0, 0, 0, 0, 0, 1],
            [0, 0, Ke / Ih, 0, -Ke / Ih, -Bh / Ih],
        ]
    )
    b = np.array([0, 1, 0, 1, 0, 0.0])
    c = np.array([0, 0, Ke, 0, -Ke, 0.0])
    return a, b, c


@pytest.mark.parametrize("r, kf, ih", [(0.2, 10, 0.6), (0.75, 150, 175)])
def test_inertial_matches_absolute_coordinates(r, kf, ih):
    k_e, env = human_environment(r, kf, ih)
    p = RobotParams(P.J, P.B, P.K_jt, P.I, P.V, k_e)
    ss = build_inertial(p, env)
    assert matlib.is_hurwitz(ss.A)
    a, b, c = _absolute_inertial(p, env)
    for w in (0.3, 2.0, 15.0, 80.0):
        s = 1j * w
        ref = c @ np.linalg.solve(s * np.eye(6) - a, b)
        got = ss.frequency_response(s)[ss.output_index("f"), ss.input_index("delta")]
        assert got == pytest.approx(ref, rel=1e-9)
        fdot = ss.frequency_response(s)[ss.output_index("fdot"), ss.input_index("delta")]
        assert fdot == pytest.approx(s * ref, rel=1e-9)


def test_inertial_no_motor_and_feedback():
    k_e, env = human_environment(0.2, 10, 0.6)
    p = RobotParams(P.J, P.B, P.K_jt, P.I, P.V, k_e)
    assert build_inertial(p, env, NoMotor()).n_states == 3
    for c in (PDTorque(), LQR()):
        assert matlib.is_hurwitz(build_inertial(p, env, c).A)
    with pytest.raises(InvalidParams):
        build_inertial(p, Grounded())


def test_human_environment_scaling():
    k_e, env = human_environment(0.5, 10, 0.6)
    assert k_e == pytest.approx(2500.0)
    assert env.B_h == pytest.approx(18.75) and env.I_h == pytest.approx(0.15)


def test_estimation_model():
    ke = 5e3
    imp = build_estimation(P, "impedance", ke)
    adm = build_estimation(P, "admittance", ke)
    np.testing.assert_allclose(adm.C[1], [0, 0, ke, 0, -ke])
    np.testing.assert_allclose(imp.C[1], [P.K_jt, 0, -P.K_jt, 0, 0])
    col = imp.A[:, imp.state_index("x")]
    assert col[3] == pytest.approx(ke / P.I) and np.count_nonzero(col) == 1
    assert not imp.A[imp.state_index("x")].any()
    with pytest.raises(InvalidParams):
        build_estimation(P, "both", ke)


# ---------------------------------------------------------------- Manutec


def _direct_manutec(a: AdmittanceParams, s: complex) -> complex:
    g = evaluate(MANUTEC_PLANT, s)
    c = evaluate(MANUTEC_POSITION_CONTROLLER, s)
    adm = 1.0 / (a.M_t * (s * s + 2 * a.xi * a.omega_t * s + a.omega_t**2))
    return g * a.M * a.v0 / (1 + c * adm * g * a.K_e + g * c + g * a.K_e)


@pytest.mark.parametrize("m_t, w_t, xi", [(100.0, 1.0, 1.0), (25.0, 8.0, 0.7), (400.0, 0.5, 0.7)])
def test_manutec_assembly(m_t, w_t, xi):
    a = AdmittanceParams(M_t=m_t, omega_t=w_t, xi=xi)
    f = assemble_manutec(a)
    assert f.num_degree == 2 and f.den_degree == 4
    assert relative_degree(f) == 2
    for s in (0.5j, 3.0 + 1j, 20j, -0.7 + 4j):
        assert evaluate(f, s) == pytest.approx(_direct_manutec(a, s), rel=1e-10)


def test_manutec_finite_dc_gain():
    f = assemble_manutec(AdmittanceParams(M_t=100.0, omega_t=1.0, xi=1.0))
    dc = evaluate(f, 0.0)
    assert np.isfinite(abs(dc)) and abs(dc) > 0


def test_manutec_stability_check():
    stable = AdmittanceParams(M_t=400.0, omega_t=8.0, xi=0.7)
    assert matlib.is_hurwitz(tf_to_ss(build_manutec(stable)).A)
    with pytest.raises(UnstableClosedLoop):
        build_manutec(AdmittanceParams(M_t=25.0, omega_t=0.5, xi=0.7))


def test_manutec_params_validated():
    with pytest.raises(InvalidParams):
        AdmittanceParams(M_t=0.0, omega_t=1.0, xi=1.0)
    assert MANUTEC_POSITION_CONTROLLER == RationalTF((370.0, 85.0))
