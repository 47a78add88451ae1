"""Shared value types, angle helpers, and error classes used by every module."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

# Guard threshold for 2x2 inversion.  The drive input matrix is
# well-conditioned for any physical parameter set, so this only catches
# misconfiguration.
SINGULARITY_EPS = 1e-12


class DifftrackError(Exception):
    """Base class for all workbench errors."""


class ValidationError(DifftrackError, ValueError):
    """An input value violates an operation's preconditions or a type invariant."""


class ConfigError(DifftrackError, ValueError):
    """A scenario configuration is malformed or internally inconsistent."""


class DivergenceError(DifftrackError, ArithmeticError):
    """A numerical process produced non-finite or unusable values."""


class SingularMatrixError(DivergenceError):
    """2x2 inversion attempted on a numerically singular matrix."""


def normalize_angle(a: float) -> float:
    """Wrap an angle to the half-open interval (-pi, pi].

    The top of the interval is closed so every angle has a unique
    representative (no +/-pi double representation in error metrics).
    """
    a = float(a)
    if not math.isfinite(a):
        raise ValidationError(f"angle must be finite, got {a!r}")
    r = math.fmod(a, TWO_PI)
    if r > math.pi:
        r -= TWO_PI
    elif r <= -math.pi:
        r += TWO_PI
    return r


def angle_diff(a: float, b: float) -> float:
    """Signed difference a - b wrapped to (-pi, pi] (shortest arc)."""
    a = float(a)
    b = float(b)
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValidationError(f"angles must be finite, got {a!r}, {b!r}")
    return normalize_angle(a - b)


def require_finite(value: float, what: str) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError(f"{what} must be finite, got {value!r}")
    return value


def finite_vector(values, length: int, what: str) -> np.ndarray:
    """Copy `values` into a float vector of the given length, all entries finite."""
    arr = np.asarray(values, dtype=float).reshape(-1)
    if arr.size != length:
        raise ValidationError(f"{what} must have {length} entries, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{what} must be finite, got {arr!r}")
    arr.flags.writeable = False
    return arr


def inv2(m: np.ndarray) -> np.ndarray:
    """Invert a 2x2 matrix with an explicit singularity guard."""
    a, b = float(m[0, 0]), float(m[0, 1])
    c, d = float(m[1, 0]), float(m[1, 1])
    det = a * d - b * c
    if not math.isfinite(det) or abs(det) <= SINGULARITY_EPS:
        raise SingularMatrixError(f"2x2 matrix is numerically singular (det={det:g})")
    return np.array([[d, -b], [-c, a]]) / det


@dataclass(frozen=True)
class Pose2D:
    """Planar pose; theta is normalized to (-pi, pi] on construction."""

    x: float
    y: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "x", require_finite(self.x, "Pose2D.x"))
        object.__setattr__(self, "y", require_finite(self.y, "Pose2D.y"))
        object.__setattr__(self, "theta", normalize_angle(self.theta))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])


@dataclass(frozen=True)
class BodyTwist:
    """Body-frame velocity pair: forward speed and yaw rate."""

    v_x: float
    omega: float

    def __post_init__(self):
        object.__setattr__(self, "v_x", require_finite(self.v_x, "BodyTwist.v_x"))
        object.__setattr__(self, "omega", require_finite(self.omega, "BodyTwist.omega"))

    def as_array(self) -> np.ndarray:
        return np.array([self.v_x, self.omega])


@dataclass(frozen=True)
class RobotParams:
    """Physical constants of the differential-drive platform.

    com_offset is the distance from the wheel-axle midpoint to the center
    of mass along the body x axis; it defaults to zero (COM on the axle),
    which kills the velocity coupling in the reduced dynamics.
    """

    mass: float
    wheel_radius: float
    wheel_separation: float
    inertia_z: float
    com_offset: float = 0.0
    max_speed: float = 0.46

    def __post_init__(self):
        for name in ("mass", "wheel_radius", "wheel_separation", "inertia_z", "max_speed"):
            v = require_finite(getattr(self, name), f"RobotParams.{name}")
            if v <= 0.0:
                raise ValidationError(f"RobotParams.{name} must be > 0, got {v}")
        d = require_finite(self.com_offset, "RobotParams.com_offset")
        if d < 0.0:
            raise ValidationError(f"RobotParams.com_offset must be >= 0, got {d}")


@dataclass(frozen=True)
class GainSet:
    """Controller gains: velocity-error decay rates and pose-feedback gains.

    All entries must be strictly positive; the closed-loop stability
    argument needs positive decay rates and the pose-feedback law requires
    k1, k2, k3 > 0.
    """

    lam: tuple[float, float]
    k1: float
    k2: float
    k3: float

    def __post_init__(self):
        lam = tuple(float(v) for v in self.lam)
        if len(lam) != 2:
            raise ValidationError(f"GainSet.lam must have 2 entries, got {len(lam)}")
        object.__setattr__(self, "lam", lam)
        for name, v in (("lam[0]", lam[0]), ("lam[1]", lam[1]),
                        ("k1", self.k1), ("k2", self.k2), ("k3", self.k3)):
            require_finite(v, f"GainSet.{name}")
            if v <= 0.0:
                raise ValidationError(f"GainSet.{name} must be > 0, got {v}")

    def lam_matrix(self) -> np.ndarray:
        return np.diag(self.lam)
