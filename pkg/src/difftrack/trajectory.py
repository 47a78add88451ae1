"""Reference trajectory generation: constant-rate circles plus a straight line.

Each sample carries the reference pose, the feedforward speed pair
(v_d, omega_d), and the feedforward body acceleration, which is zero for
both shipped path types (constant speed and constant turn rate).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ConfigError, Pose2D, ValidationError, require_finite

ZERO_ACCEL = np.zeros(2)
ZERO_ACCEL.flags.writeable = False


@dataclass(frozen=True)
class ReferenceSample:
    pose: Pose2D
    v_d: float
    omega_d: float
    accel: np.ndarray = ZERO_ACCEL

    def __post_init__(self):
        object.__setattr__(self, "v_d", require_finite(self.v_d, "ReferenceSample.v_d"))
        object.__setattr__(self, "omega_d", require_finite(self.omega_d, "ReferenceSample.omega_d"))


@dataclass(frozen=True)
class CirclePath:
    center_x: float
    center_y: float
    radius: float
    angular_rate: float

    def __post_init__(self):
        if require_finite(self.radius, "CirclePath.radius") <= 0.0:
            raise ValidationError(f"circle radius must be > 0, got {self.radius}")
        if require_finite(self.angular_rate, "CirclePath.angular_rate") == 0.0:
            raise ValidationError("circle angular rate must be nonzero")
        require_finite(self.center_x, "CirclePath.center_x")
        require_finite(self.center_y, "CirclePath.center_y")

    @property
    def period(self) -> float:
        return 2.0 * math.pi / abs(self.angular_rate)


@dataclass(frozen=True)
class LinePath:
    start_x: float
    start_y: float
    heading: float
    speed: float

    def __post_init__(self):
        require_finite(self.start_x, "LinePath.start_x")
        require_finite(self.start_y, "LinePath.start_y")
        require_finite(self.heading, "LinePath.heading")
        if require_finite(self.speed, "LinePath.speed") < 0.0:
            raise ValidationError(f"line speed must be >= 0, got {self.speed}")


def circle(t: float, cx: float, cy: float, r: float, omega: float) -> ReferenceSample:
    """Sample the circle (cx + r cos(w t), cy + r sin(w t)) at time t.

    The reference heading is the direction of travel, atan2(y_dot, x_dot),
    which resolves the quadrant ambiguity of a plain arctangent.
    """
    if r <= 0.0:
        raise ValidationError(f"circle radius must be > 0, got {r}")
    if omega == 0.0:
        raise ValidationError("circle angular rate must be nonzero")
    phase = omega * t
    x_dot = -r * omega * math.sin(phase)
    y_dot = r * omega * math.cos(phase)
    pose = Pose2D(cx + r * math.cos(phase), cy + r * math.sin(phase), math.atan2(y_dot, x_dot))
    return ReferenceSample(pose=pose, v_d=abs(r * omega), omega_d=omega)


def line(t: float, path: LinePath) -> ReferenceSample:
    ct, st = math.cos(path.heading), math.sin(path.heading)
    s = path.speed * t
    pose = Pose2D(path.start_x + s * ct, path.start_y + s * st, path.heading)
    return ReferenceSample(pose=pose, v_d=path.speed, omega_d=0.0)


def sample_reference(path, t: float) -> ReferenceSample:
    """Dispatch a path description to its generator; t must be >= 0."""
    t = require_finite(t, "reference time")
    if t < 0.0:
        raise ValidationError(f"reference time must be >= 0, got {t}")
    if isinstance(path, CirclePath):
        return circle(t, path.center_x, path.center_y, path.radius, path.angular_rate)
    if isinstance(path, LinePath):
        return line(t, path)
    raise ConfigError(f"unknown path type: {type(path).__name__}")
