import math

import numpy as np
import pytest

from difftrack.core import ConfigError, ValidationError, angle_diff
from difftrack.trajectory import CirclePath, LinePath, circle, sample_reference


class TestCircle:
    def test_start_of_standard_circle(self):
        s = circle(0.0, 0.0, 0.0, 1.0, 0.4)
        assert s.pose.x == pytest.approx(1.0)
        assert s.pose.y == pytest.approx(0.0, abs=1e-15)
        assert s.pose.theta == pytest.approx(math.pi / 2)
        assert s.v_d == pytest.approx(0.4)
        assert s.omega_d == pytest.approx(0.4)
        assert np.allclose(s.accel, [0.0, 0.0])

    def test_experiment_speeds_within_platform_limit(self):
        # the two shipped circle tasks: 1.0 m at 0.4 rad/s and 0.5 m at 0.5 rad/s
        assert circle(3.0, 0.0, 0.0, 1.0, 0.4).v_d == pytest.approx(0.4)
        assert circle(3.0, 0.0, 0.0, 0.5, 0.5).v_d == pytest.approx(0.25)
        assert circle(3.0, 0.0, 0.0, 0.5, 0.5).v_d <= 0.46

    def test_periodicity(self):
        period = 2 * math.pi / 0.4
        a = circle(1.3, 0.5, -0.2, 1.0, 0.4)
        b = circle(1.3 + period, 0.5, -0.2, 1.0, 0.4)
        assert a.pose.x == pytest.approx(b.pose.x, abs=1e-12)
        assert a.pose.y == pytest.approx(b.pose.y, abs=1e-12)
        assert angle_diff(a.pose.theta, b.pose.theta) == pytest.approx(0.0, abs=1e-12)

    def test_radius_invariant(self):
        for t in np.linspace(0.0, 30.0, 100):
            s = circle(t, 2.0, -1.0, 0.7, -0.5)
            dist = math.hypot(s.pose.x - 2.0, s.pose.y + 1.0)
            assert dist == pytest.approx(0.7, abs=1e-12)

    def test_finite_difference_recovers_feedforward(self):
        h = 1e-4
        for t in (0.5, 3.0, 11.7):
            fwd = circle(t + h, 0.0, 0.0, 1.0, 0.4)
            back = circle(t - h, 0.0, 0.0, 1.0, 0.4)
            xd = (fwd.pose.x - back.pose.x) / (2 * h)
            yd = (fwd.pose.y - back.pose.y) / (2 * h)
            td = angle_diff(fwd.pose.theta, back.pose.theta) / (2 * h)
            s = circle(t, 0.0, 0.0, 1.0, 0.4)
            assert math.hypot(xd, yd) == pytest.approx(s.v_d, abs=1e-6)
            assert td == pytest.approx(s.omega_d, abs=1e-6)

    def test_negative_rate(self):
        s = circle(0.0, 0.0, 0.0, 1.0, -0.4)
        assert s.v_d == pytest.approx(0.4)
        assert s.omega_d == pytest.approx(-0.4)
        assert s.pose.theta == pytest.approx(-math.pi / 2)

    def test_bad_inputs(self):
        with pytest.raises(ValidationError):
            circle(0.0, 0.0, 0.0, 0.0, 0.4)
        with pytest.raises(ValidationError):
            circle(0.0, 0.0, 0.0, 1.0, 0.0)
        with pytest.raises(ValidationError):
            CirclePath(center_x=0.0, center_y=0.0, radius=-1.0, angular_rate=0.4)


class TestSampleReference:
    def test_line_uniform_motion(self):
        path = LinePath(start_x=0.0, start_y=0.0, heading=0.0, speed=0.3)
        s = sample_reference(path, 10.0)
        assert s.pose.x == pytest.approx(3.0)
        assert s.pose.y == pytest.approx(0.0)
        assert s.v_d == pytest.approx(0.3)
        assert s.omega_d == 0.0

    def test_line_heading(self):
        path = LinePath(start_x=1.0, start_y=2.0, heading=math.pi / 2, speed=0.5)
        s = sample_reference(path, 4.0)
        assert s.pose.x == pytest.approx(1.0, abs=1e-12)
        assert s.pose.y == pytest.approx(4.0)

    def test_circle_dispatch_matches_direct_call(self):
        path = CirclePath(center_x=0.1, center_y=-0.2, radius=0.8, angular_rate=0.6)
        a = sample_reference(path, 2.5)
        b = circle(2.5, 0.1, -0.2, 0.8, 0.6)
        assert a == b

    def test_negative_time_rejected(self):
        path = CirclePath(center_x=0.0, center_y=0.0, radius=1.0, angular_rate=0.4)
        with pytest.raises(ValidationError):
            sample_reference(path, -0.1)

    def test_unknown_path_rejected(self):
        with pytest.raises(ConfigError):
            sample_reference(object(), 1.0)

    def test_period_property(self):
        assert CirclePath(0.0, 0.0, 1.0, 0.4).period == pytest.approx(2 * math.pi / 0.4)
