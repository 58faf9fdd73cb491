import math

import numpy as np
import pytest

from pidstep.quadrotor import (
    AttitudeSingularity,
    Payload,
    QuadrotorParams,
    QuadState,
    WindGust,
    composite_inertia,
    dynamics,
    euler_rate_matrix,
    gust_force,
    mixing_matrix,
    motor_lag,
    regressor_phi2,
    rotation_matrix,
    rotor_speeds_sq_from_wrench,
    solve_euler_rate,
    thrust_and_attitude_from_u,
    world_force,
    wrench_from_rotor_speeds_sq,
)


HOVER_THRUST = 1.76 * 9.81  # N, unladen


class TestDynamics:
    def test_hover_equilibrium(self):
        p = QuadrotorParams()
        deriv = dynamics(QuadState.at_rest(), p, [0.0, 0.0, HOVER_THRUST],
                         np.zeros(3))
        assert np.max(np.abs(deriv)) < 1e-12

    def test_free_fall(self):
        p = QuadrotorParams()
        deriv = dynamics(QuadState.at_rest(), p, np.zeros(3), np.zeros(3))
        assert np.allclose(deriv[6:9], [0.0, 0.0, -9.81], atol=1e-15)
        assert np.allclose(deriv[9:12], 0.0, atol=1e-15)

    def test_com_offset_torque(self):
        # r x F with r = [0.05, 0.05, -0.1], F = [0, 0, 17.2656]
        # gives [0.8633, -0.8633, 0] N m and nonzero angular acceleration
        p = QuadrotorParams(r=np.array([0.05, 0.05, -0.1]))
        deriv = dynamics(QuadState.at_rest(), p, [0.0, 0.0, 17.2656],
                         np.zeros(3))
        expected_moment = np.array([0.86328, -0.86328, 0.0])
        expected_eta_ddot = expected_moment / np.array([0.03, 0.03, 0.04])
        assert np.allclose(deriv[9:12], expected_eta_ddot, atol=1e-9)

    def test_disturbance_channels(self):
        p = QuadrotorParams()
        deriv = dynamics(QuadState.at_rest(), p, [0.0, 0.0, HOVER_THRUST],
                         np.zeros(3), delta=(np.array([1.76, 0, 0]),
                                             np.array([0.0, 0.0, 0.04])))
        assert deriv[6] == pytest.approx(1.0, abs=1e-12)
        assert deriv[11] == pytest.approx(1.0, abs=1e-12)

    def test_singularity_guard(self):
        p = QuadrotorParams()
        state = QuadState.at_rest()
        state.eta = np.array([1.55, 0.0, 0.0])
        with pytest.raises(AttitudeSingularity):
            dynamics(state, p, np.zeros(3), np.zeros(3))

    def test_ballistic_arc_closed_form(self):
        # zero thrust, zero rotation: polynomial free fall, which the
        # integrator reproduces to roundoff
        from pidstep.harness import rk4_step

        p = QuadrotorParams()
        y = np.zeros(12)
        y[2] = 10.0
        y[6] = 1.0  # vx
        dt, T = 0.01, 1.0
        f = lambda t, s: dynamics(
            QuadState(s[0:3], s[3:6], s[6:9], s[9:12], np.zeros(4)),
            p, np.zeros(3), np.zeros(3))
        t = 0.0
        e0 = 0.5 * (y[6:9] @ y[6:9]) + 9.81 * y[2]
        while t < T - 1e-12:
            y = rk4_step(f, t, y, dt)
            t += dt
            energy = 0.5 * (y[6:9] @ y[6:9]) + 9.81 * y[2]
            assert energy == pytest.approx(e0, abs=1e-9)
        assert y[2] == pytest.approx(10.0 - 0.5 * 9.81 * T * T, abs=1e-10)
        assert y[0] == pytest.approx(1.0 * T, abs=1e-10)


class TestRotations:
    def test_rotation_thrust_column_matches_world_force(self):
        rng = np.random.default_rng(31)
        for _ in range(100):
            eta = rng.uniform(-1.0, 1.0, 3)
            R = rotation_matrix(eta)
            assert np.allclose(R @ [0.0, 0.0, 2.5], world_force(eta, 2.5),
                               atol=1e-12)
            assert np.allclose(R.T @ R, np.eye(3), atol=1e-12)

    def test_euler_rate_solve(self):
        rng = np.random.default_rng(32)
        for _ in range(100):
            eta = rng.uniform(-1.0, 1.0, 3)
            rhs = rng.normal(size=3)
            x = solve_euler_rate(eta, rhs)
            assert np.allclose(euler_rate_matrix(eta) @ x, rhs, atol=1e-12)

    def test_rate_matrix_identity_when_level(self):
        assert np.allclose(euler_rate_matrix(np.zeros(3)), np.eye(3),
                           atol=1e-15)


class TestWorldForce:
    def test_upright(self):
        assert np.allclose(world_force(np.zeros(3), 5.0), [0.0, 0.0, 5.0],
                           atol=1e-15)

    def test_norm_preserved(self):
        rng = np.random.default_rng(33)
        for _ in range(100):
            eta = rng.uniform(-1.2, 1.2, 3)
            F = rng.uniform(0.1, 30.0)
            fw = world_force(eta, F)
            assert np.linalg.norm(fw) == pytest.approx(F, rel=1e-12)


class TestThrustAttitudeExtraction:
    def test_hover_command(self):
        F, e1, e2 = thrust_and_attitude_from_u([0.0, 0.0, 17.2656], 0.0)
        assert F == pytest.approx(17.2656, abs=1e-12)
        assert e1 == 0.0 and e2 == 0.0

    def test_lateral_command(self):
        F, e1, e2 = thrust_and_attitude_from_u([1.0, 0.0, 10.0], 0.0)
        assert F == pytest.approx(math.sqrt(101.0), abs=1e-12)
        assert e1 == pytest.approx(0.0, abs=1e-15)
        assert e2 == pytest.approx(math.asin(1.0 / math.sqrt(101.0)), abs=1e-12)

    def test_inversion_property(self):
        rng = np.random.default_rng(34)
        for _ in range(500):
            u = np.array([rng.uniform(-8, 8), rng.uniform(-8, 8),
                          rng.uniform(0.5, 30.0)])
            yaw = rng.uniform(-math.pi, math.pi)
            F, e1, e2 = thrust_and_attitude_from_u(u, yaw)
            assert np.max(np.abs(world_force([e1, e2, yaw], F) - u)) < 1e-9

    def test_inverted_flight_rejected(self):
        with pytest.raises(ValueError):
            thrust_and_attitude_from_u([1.0, 0.0, -2.0], 0.0)


class TestRegressor:
    def test_zero_thrust_zero_matrix(self):
        assert np.array_equal(regressor_phi2(0.0, np.zeros(3)),
                              np.zeros((3, 2)))

    def test_hover_values(self):
        phi = regressor_phi2(17.27, np.zeros(3), (0.03, 0.03))
        expected = np.array([[0.0, -575.67], [575.67, 0.0], [0.0, 0.0]])
        assert np.max(np.abs(phi - expected)) < 0.2

    def test_matches_moment_map_through_inertia(self):
        # phi2 theta reproduces the angular acceleration of the offset-CoM
        # moment r x F_B mapped through (J R_r)^-1, with theta = -[rx, ry]
        # (the regressor carries the opposite sign convention; estimates
        # converge to the negated offsets)
        rng = np.random.default_rng(35)
        p = QuadrotorParams()
        for _ in range(100):
            eta = rng.uniform(-0.5, 0.5, 3)
            F_t = rng.uniform(1.0, 30.0)
            r = np.array([rng.uniform(-0.01, 0.01), rng.uniform(-0.01, 0.01), 0.0])
            phi = regressor_phi2(F_t, eta, (0.03, 0.03))
            via_regressor = phi @ (-r[:2])
            moment = np.cross(r, [0.0, 0.0, F_t])
            via_dynamics = solve_euler_rate(eta, p.J_inv @ moment)
            scale = max(np.max(np.abs(via_dynamics)), 1e-12)
            assert np.max(np.abs(via_regressor - via_dynamics)) / scale < 0.02

    def test_roll_singularity_guarded(self):
        with pytest.raises(AttitudeSingularity):
            regressor_phi2(10.0, np.array([1.51, 0.0, 0.0]))


class TestSecondOrderCasting:
    def test_assembled_model_matches_dynamics_at_hover(self):
        # assemble X2_dot = f + phi theta + g U for the 6-axis casting and
        # compare with the plant derivative; theta = -[rx, ry]
        p_nom = QuadrotorParams()
        rng = np.random.default_rng(36)
        for _ in range(50):
            r = np.array([rng.uniform(-0.01, 0.01), rng.uniform(-0.01, 0.01), 0.0])
            p = QuadrotorParams(r=r)
            eta = np.zeros(3)
            F_t = rng.uniform(10.0, 25.0)
            tau = rng.uniform(-0.2, 0.2, 3)
            state = QuadState.at_rest()
            deriv = dynamics(state, p, [0.0, 0.0, F_t], tau)

            f_vec = np.array([0.0, 0.0, -9.81, 0.0, 0.0, 0.0])
            phi = np.vstack([np.zeros((3, 2)), regressor_phi2(F_t, eta)])
            theta = -r[:2]
            U = np.concatenate([world_force(eta, F_t), tau])
            g_top = np.eye(3) / p_nom.m
            g_bot = np.linalg.inv(p_nom.J @ euler_rate_matrix(eta))
            X2_dot = f_vec + phi @ theta
            X2_dot[0:3] += g_top @ U[0:3]
            X2_dot[3:6] += g_bot @ U[3:6]
            truth = deriv[6:12]
            scale = max(np.max(np.abs(truth)), 1.0)
            assert np.max(np.abs(X2_dot - truth)) / scale < 0.02


class TestRotorMixing:
    def test_equal_split_at_pure_thrust(self):
        p = QuadrotorParams()
        w, sat = rotor_speeds_sq_from_wrench(17.2656, np.zeros(3), p)
        assert not sat
        assert np.allclose(w, 17.2656 / (4.0 * 13.0), atol=1e-12)

    def test_pitch_torque_structure(self):
        p = QuadrotorParams()
        w, sat = rotor_speeds_sq_from_wrench(17.2656, [0.0, 0.5, 0.0], p)
        assert not sat
        # T2 = Kt L (w1^2 - w2^2); rotors 3, 4 unchanged from the even split
        assert (w[0] - w[1]) * 13.0 * 0.2 == pytest.approx(0.5, abs=1e-12)
        assert w[2] == pytest.approx(w[3], abs=1e-12)
        F, tau = wrench_from_rotor_speeds_sq(w, p)
        assert F == pytest.approx(17.2656, abs=1e-12)
        assert np.allclose(tau, [0.0, 0.5, 0.0], atol=1e-12)

    def test_round_trip(self):
        # draws sized to avoid the omega^2 >= 0 saturation region (the yaw
        # channel has the least authority: KQ = 0.4)
        p = QuadrotorParams()
        rng = np.random.default_rng(37)
        for _ in range(500):
            F = rng.uniform(10.0, 50.0)
            tau = np.array([rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3),
                            rng.uniform(-0.15, 0.15)])
            w, sat = rotor_speeds_sq_from_wrench(F, tau, p)
            assert not sat
            F2, tau2 = wrench_from_rotor_speeds_sq(w, p)
            assert abs(F2 - F) < 1e-10
            assert np.max(np.abs(tau2 - tau)) < 1e-10

    def test_saturation_flagged(self):
        p = QuadrotorParams()
        w, sat = rotor_speeds_sq_from_wrench(1.0, [0.0, 5.0, 0.0], p)
        assert sat
        assert np.all(w >= 0.0)

    def test_mixing_matrix_invertible(self):
        p = QuadrotorParams()
        assert abs(np.linalg.det(mixing_matrix(p))) > 1.0


class TestMotorLag:
    def test_zero_tau_passthrough(self):
        cmd = np.array([1.0, 2.0, 3.0, 4.0])
        assert np.array_equal(motor_lag(cmd, np.zeros(4), 0.0, 0.01), cmd)

    def test_step_reaches_63_percent_at_tau(self):
        tau, dt = 0.02, 0.001
        y = np.zeros(4)
        cmd = np.ones(4)
        for _ in range(int(tau / dt)):
            y = motor_lag(cmd, y, tau, dt)
        assert y[0] == pytest.approx(1.0 - math.exp(-1.0), rel=0.01)

    def test_fixed_point_at_command(self):
        cmd = np.array([0.3, 0.3, 0.3, 0.3])
        y = cmd.copy()
        y2 = motor_lag(cmd, y, 0.05, 0.001)
        assert np.allclose(y2, cmd, atol=1e-15)


class TestCompositeInertia:
    def test_zero_mass_no_change(self):
        p = QuadrotorParams()
        assert composite_inertia(p, Payload()) is p

    def test_reference_payload(self):
        p = QuadrotorParams()
        payload = Payload(mass=0.2, position=np.array([0.05, 0.05, -0.1]),
                          attached=True)
        c = composite_inertia(p, payload)
        assert c.m == pytest.approx(1.96, abs=1e-12)
        assert np.allclose(c.r, [0.00510204, 0.00510204, -0.01020408],
                           atol=1e-7)
        # parallel-axis growth, diagonal terms
        assert c.J[0, 0] > p.J[0, 0]
        assert np.allclose(c.J, c.J.T, atol=1e-15)

    def test_detach_schedule(self):
        payload = Payload(mass=0.2, position=np.array([0.0, 0.0, -0.1]),
                          attached=True, attach_time=0.0, detach_time=18.0)
        assert payload.is_attached(17.999)
        assert not payload.is_attached(18.0)
        assert not payload.is_attached(25.0)


class TestWindGust:
    def test_step_profile(self):
        g = WindGust(onset=11.0, force=np.array([2.0, 0.0, 0.0]))
        assert np.array_equal(gust_force(g, 10.999), np.zeros(3))
        assert np.array_equal(gust_force(g, 11.0), [2.0, 0.0, 0.0])

    def test_ramp_profile(self):
        g = WindGust(onset=1.0, force=np.array([0.0, 4.0, 0.0]),
                     profile="ramped", rise_time=2.0)
        assert gust_force(g, 2.0)[1] == pytest.approx(2.0, abs=1e-12)
        assert gust_force(g, 5.0)[1] == pytest.approx(4.0, abs=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            WindGust(onset=-1.0, force=np.zeros(3))
        with pytest.raises(ValueError):
            WindGust(onset=0.0, force=np.zeros(3), profile="gauss")
