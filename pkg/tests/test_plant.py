import math

import numpy as np
import pytest

from difftrack.core import BodyTwist, DivergenceError, Pose2D, RobotParams, ValidationError
from difftrack.plant import (
    DisturbanceModel,
    PlantState,
    SlipEvent,
    constraint_residual,
    coriolis_matrix,
    disturbance_torque,
    forward_kinematics,
    input_matrix,
    input_matrix_inverse,
    mass_matrix,
    step,
)

SIM_PARAMS = RobotParams(mass=0.10054, wheel_radius=0.034, wheel_separation=0.17, inertia_z=0.003)


def rest_state():
    return PlantState(pose=Pose2D(0.0, 0.0, 0.0), twist=BodyTwist(0.0, 0.0), time=0.0)


class TestMatrices:
    def test_mass_matrix_sim_params(self):
        assert np.allclose(mass_matrix(SIM_PARAMS), [[0.10054, 0.0], [0.0, 0.003]])

    def test_mass_matrix_identity(self):
        p = RobotParams(mass=1.0, wheel_radius=1.0, wheel_separation=1.0, inertia_z=1.0)
        assert np.allclose(mass_matrix(p), np.eye(2))

    def test_mass_matrix_com_offset(self):
        p = RobotParams(mass=2.0, wheel_radius=1.0, wheel_separation=1.0, inertia_z=1.0, com_offset=1.0)
        assert np.allclose(mass_matrix(p), [[2.0, 0.0], [0.0, 3.0]])

    def test_coriolis_zero_rate(self):
        assert np.allclose(coriolis_matrix(SIM_PARAMS, 0.0), np.zeros((2, 2)))

    def test_coriolis_zero_offset(self):
        assert np.allclose(coriolis_matrix(SIM_PARAMS, 5.0), np.zeros((2, 2)))

    def test_coriolis_hand_value(self):
        p = RobotParams(mass=2.0, wheel_radius=1.0, wheel_separation=1.0, inertia_z=1.0, com_offset=0.1)
        assert np.allclose(coriolis_matrix(p, 1.0), [[0.0, -0.4], [0.4, 0.0]])

    def test_coriolis_skew_symmetric(self):
        p = RobotParams(mass=1.7, wheel_radius=0.05, wheel_separation=0.3, inertia_z=0.2, com_offset=0.07)
        for rate in np.linspace(-8.0, 8.0, 17):
            c = coriolis_matrix(p, rate)
            assert np.allclose(c + c.T, np.zeros((2, 2)), atol=1e-15)

    def test_input_matrix_sim_params(self):
        b = input_matrix(SIM_PARAMS)
        assert np.allclose(b, [[29.41176470588235, 29.41176470588235], [5.0, -5.0]], atol=1e-10)

    def test_input_matrix_unit(self):
        p = RobotParams(mass=1.0, wheel_radius=1.0, wheel_separation=1.0, inertia_z=1.0)
        assert np.allclose(input_matrix(p), [[1.0, 1.0], [1.0, -1.0]])

    def test_input_matrix_inverse_closed_form(self):
        assert np.allclose(input_matrix_inverse(SIM_PARAMS), [[0.017, 0.1], [0.017, -0.1]])

    def test_input_matrix_inverse_roundtrip(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            p = RobotParams(
                mass=rng.uniform(0.05, 5.0),
                wheel_radius=rng.uniform(0.01, 0.2),
                wheel_separation=rng.uniform(0.05, 0.6),
                inertia_z=rng.uniform(0.001, 1.0),
            )
            prod = input_matrix(p) @ input_matrix_inverse(p)
            assert np.allclose(prod, np.eye(2), atol=1e-12)


class TestKinematics:
    def test_axis_aligned(self):
        rate = forward_kinematics(Pose2D(0, 0, 0.0), BodyTwist(1.0, 0.5), 0.0)
        assert np.allclose(rate, [1.0, 0.0, 0.5])

    def test_rotated_frame(self):
        rate = forward_kinematics(Pose2D(0, 0, math.pi / 2), BodyTwist(1.0, 0.0), 0.0)
        assert np.allclose(rate, [0.0, 1.0, 0.0], atol=1e-15)

    def test_com_offset_coupling(self):
        rate = forward_kinematics(Pose2D(0, 0, 0.0), BodyTwist(0.0, 1.0), 0.1)
        assert np.allclose(rate, [0.0, 0.1, 1.0])

    def test_residual_of_forward_kinematics_is_zero(self):
        rng = np.random.default_rng(11)
        for _ in range(1000):
            pose = Pose2D(rng.normal(), rng.normal(), rng.uniform(-math.pi, math.pi))
            twist = BodyTwist(rng.normal(scale=2.0), rng.normal(scale=3.0))
            d = rng.uniform(0.0, 0.3)
            rate = forward_kinematics(pose, twist, d)
            assert abs(constraint_residual(rate, pose.theta, d)) < 1e-12

    def test_lateral_slide_violates(self):
        assert constraint_residual([0.0, 1.0, 0.0], 0.0, 0.0) == pytest.approx(1.0)

    def test_hand_value(self):
        assert constraint_residual([1.0, 0.1, 1.0], 0.0, 0.1) == pytest.approx(0.0, abs=1e-15)


class TestDisturbanceTorque:
    def test_zero_model(self):
        assert np.allclose(disturbance_torque(DisturbanceModel(), BodyTwist(1.0, -2.0), 3.0), [0.0, 0.0])

    def test_viscous(self):
        model = DisturbanceModel(viscous=(0.1, 0.0))
        assert np.allclose(disturbance_torque(model, BodyTwist(1.0, 0.0), 0.0), [0.1, 0.0])

    def test_coulomb_sign(self):
        model = DisturbanceModel(coulomb=(0.2, 0.0))
        assert np.allclose(disturbance_torque(model, BodyTwist(-0.5, 0.0), 0.0), [-0.2, 0.0])

    def test_coulomb_sign_zero_at_rest(self):
        model = DisturbanceModel(coulomb=(0.2, 0.3))
        assert np.allclose(disturbance_torque(model, BodyTwist(0.0, 0.0), 0.0), [0.0, 0.0])

    def test_slip_window(self):
        model = DisturbanceModel(slip_events=(SlipEvent(1.0, 2.0, (0.5, -0.1)),))
        twist = BodyTwist(0.0, 0.0)
        assert np.allclose(disturbance_torque(model, twist, 0.5), [0.0, 0.0])
        assert np.allclose(disturbance_torque(model, twist, 1.0), [0.5, -0.1])
        assert np.allclose(disturbance_torque(model, twist, 2.999), [0.5, -0.1])
        assert np.allclose(disturbance_torque(model, twist, 3.0), [0.0, 0.0])

    def test_noise_deterministic_under_seed(self):
        model = DisturbanceModel(noise_std=(0.1, 0.2))
        a = disturbance_torque(model, BodyTwist(0.0, 0.0), 0.0, np.random.default_rng(3))
        b = disturbance_torque(model, BodyTwist(0.0, 0.0), 0.0, np.random.default_rng(3))
        assert np.array_equal(a, b)

    def test_negative_coefficients_rejected(self):
        with pytest.raises(ValidationError):
            DisturbanceModel(viscous=(-0.1, 0.0))


class TestStep:
    def test_equilibrium(self):
        out = step(rest_state(), (0.0, 0.0), DisturbanceModel(), SIM_PARAMS, 0.01)
        assert out.twist == BodyTwist(0.0, 0.0)
        assert out.pose == Pose2D(0.0, 0.0, 0.0)
        assert out.time == pytest.approx(0.01)

    def test_one_step_closed_form(self):
        # equal torques cancel the angular row; constant acceleration integrates exactly
        out = step(rest_state(), (0.01, 0.01), DisturbanceModel(), SIM_PARAMS, 0.01)
        expected_v = (0.01 + 0.01) / SIM_PARAMS.wheel_radius / SIM_PARAMS.mass * 0.01
        assert out.twist.v_x == pytest.approx(expected_v, rel=1e-12)
        assert out.twist.v_x == pytest.approx(0.0585, abs=1e-4)
        assert out.twist.omega == pytest.approx(0.0, abs=1e-15)

    def test_resulting_motion_satisfies_constraint(self):
        state = rest_state()
        for _ in range(20):
            state = step(state, (0.01, 0.005), DisturbanceModel(), SIM_PARAMS, 0.01)
        rate = forward_kinematics(state.pose, state.twist, SIM_PARAMS.com_offset)
        assert abs(constraint_residual(rate, state.pose.theta, SIM_PARAMS.com_offset)) < 1e-9

    def test_energy_consistency_coasting(self):
        # zero torque, zero disturbance, COM on axle: twist exactly constant
        state = PlantState(pose=Pose2D(0, 0, 0.3), twist=BodyTwist(0.7, 0.4), time=0.0)
        v0 = state.twist.as_array()
        for _ in range(1000):  # 10 s at dt = 0.01
            state = step(state, (0.0, 0.0), DisturbanceModel(), SIM_PARAMS, 0.01)
        assert np.linalg.norm(state.twist.as_array() - v0) <= 1e-9

    def test_com_offset_dynamics_run(self):
        params = RobotParams(mass=0.5, wheel_radius=0.05, wheel_separation=0.3,
                             inertia_z=0.02, com_offset=0.08)
        state = PlantState(pose=Pose2D(0, 0, 0), twist=BodyTwist(0.3, 1.2), time=0.0)
        for _ in range(200):
            state = step(state, (0.002, -0.001), DisturbanceModel(), params, 0.01)
        assert math.isfinite(state.twist.v_x) and math.isfinite(state.twist.omega)

    def test_dt_bounds(self):
        with pytest.raises(ValidationError):
            step(rest_state(), (0.0, 0.0), DisturbanceModel(), SIM_PARAMS, 0.0)
        with pytest.raises(ValidationError):
            step(rest_state(), (0.0, 0.0), DisturbanceModel(), SIM_PARAMS, 0.2)

    def test_divergence_reported_with_quantity(self):
        with pytest.raises(DivergenceError, match="v_x"):
            step(rest_state(), (1e308, 1e308), DisturbanceModel(), SIM_PARAMS, 0.01)

    def test_determinism_bit_identical(self):
        model = DisturbanceModel(viscous=(0.05, 0.01), noise_std=(0.02, 0.005))

        def rollout():
            rng = np.random.default_rng(12345)
            state = rest_state()
            trace = []
            for _ in range(200):
                state = step(state, (0.01, 0.008), model, SIM_PARAMS, 0.01, rng)
                trace.append((state.pose.x, state.pose.y, state.pose.theta,
                              state.twist.v_x, state.twist.omega))
            return trace

        assert rollout() == rollout()

    def test_time_monotone(self):
        state = rest_state()
        times = [state.time]
        for _ in range(10):
            state = step(state, (0.0, 0.0), DisturbanceModel(), SIM_PARAMS, 0.01)
            times.append(state.time)
        assert all(b > a for a, b in zip(times, times[1:]))
