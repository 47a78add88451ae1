"""Synthetic sensor generators corrupting ground truth into measurement streams.

Four modalities: wheel odometry (body velocities, slip-scaled during slip
events), a yaw-rate gyro with a random-walk bias, and two pose-odometry
sources (lidar-like and visual-like) with Gaussian noise plus slowly
integrating drift.  The visual source additionally honors a dropout
schedule: inside an outage window it produces nothing, and on recovery its
reported frame jumps by a seeded re-initialization offset that persists.

Noise draws happen even while a measurement is suppressed so that a run
with outage windows and its no-outage twin consume identical random
streams; re-initialization offsets come from a separate stream for the
same reason.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Pose2D, ValidationError, finite_vector, normalize_angle, require_finite
from .plant import PlantState


@dataclass(frozen=True)
class SensorSpec:
    """Corruption and reporting parameters for one sensor.

    noise_std / bias / bias_walk_std are per channel.  For pose sensors,
    drift_rate is integrated over time into a slowly growing offset.  The
    covariance reported to the filter is built from reported_std and may
    deliberately differ from the injected noise (the filter is never told
    about slip or drift).
    """

    rate: float
    noise_std: np.ndarray
    reported_std: np.ndarray
    bias: np.ndarray = None
    bias_walk_std: np.ndarray = None
    drift_rate: np.ndarray = None

    def __post_init__(self):
        rate = require_finite(self.rate, "SensorSpec.rate")
        if rate <= 0.0:
            raise ValidationError(f"SensorSpec.rate must be > 0, got {rate}")
        object.__setattr__(self, "rate", rate)
        n = np.asarray(self.noise_std).size
        noise = finite_vector(self.noise_std, n, "SensorSpec.noise_std")
        if np.any(noise < 0.0):
            raise ValidationError(f"SensorSpec.noise_std must be >= 0, got {noise}")
        object.__setattr__(self, "noise_std", noise)
        reported = finite_vector(self.reported_std, n, "SensorSpec.reported_std")
        if np.any(reported <= 0.0):
            raise ValidationError(f"SensorSpec.reported_std must be > 0, got {reported}")
        object.__setattr__(self, "reported_std", reported)
        for name in ("bias", "bias_walk_std", "drift_rate"):
            value = getattr(self, name)
            vec = finite_vector(value, n, f"SensorSpec.{name}") if value is not None else np.zeros(n)
            if name == "bias_walk_std" and np.any(vec < 0.0):
                raise ValidationError(f"SensorSpec.{name} must be >= 0, got {vec}")
            vec.flags.writeable = False
            object.__setattr__(self, name, vec)

    @property
    def period(self) -> float:
        return 1.0 / self.rate

    @property
    def channels(self) -> int:
        return self.noise_std.size

    def reported_covariance(self) -> np.ndarray:
        return np.diag(self.reported_std ** 2)


@dataclass(frozen=True)
class DropoutSchedule:
    """Non-overlapping outage windows plus the re-initialization offset spread."""

    windows: tuple
    reinit_offset_std: np.ndarray = (0.0, 0.0, 0.0)

    def __post_init__(self):
        windows = []
        for w in self.windows:
            start, duration = float(w[0]), float(w[1])
            if duration <= 0.0:
                raise ValidationError(f"dropout window duration must be > 0, got {duration}")
            windows.append((start, duration))
        windows.sort()
        for (s0, d0), (s1, _) in zip(windows, windows[1:]):
            if s0 + d0 > s1:
                raise ValidationError(f"dropout windows overlap near t={s1}")
        object.__setattr__(self, "windows", tuple(windows))
        std = finite_vector(self.reinit_offset_std, 3, "DropoutSchedule.reinit_offset_std")
        if np.any(std < 0.0):
            raise ValidationError(f"reinit_offset_std must be >= 0, got {std}")
        object.__setattr__(self, "reinit_offset_std", std)

    def blacked_out(self, t: float) -> bool:
        return any(s <= t < s + d for s, d in self.windows)


class _BiasWalk:
    """Constant offset plus a seeded random walk, advanced once per sample."""

    def __init__(self, spec: SensorSpec, rng: np.random.Generator):
        self._value = spec.bias.copy()
        self._walk_std = spec.bias_walk_std * np.sqrt(spec.period)
        self._rng = rng
        self._walks = bool(np.any(spec.bias_walk_std > 0.0))

    def advance(self) -> np.ndarray:
        if self._walks:
            self._value = self._value + self._rng.standard_normal(self._value.size) * self._walk_std
        return self._value


class WheelOdometrySensor:
    """Body-velocity readings (v_x, v_y, omega); v_y is identically zero in truth.

    During a slip event the wheels spin faster than the body moves, so the
    reading is scaled by (1 + slip_scale); the reported covariance never
    reflects that, which is the model mismatch the fusion layer must absorb.
    """

    velocity_like = True

    def __init__(self, spec: SensorSpec, rng: np.random.Generator, slip_scale: float = 0.0):
        if spec.channels != 3:
            raise ValidationError("wheel odometry spec needs 3 channels (v_x, v_y, omega)")
        self.spec = spec
        self._rng = rng
        self._bias = _BiasWalk(spec, rng)
        self.slip_scale = float(slip_scale)

    def measure(self, truth: PlantState, slipping: bool = False) -> np.ndarray:
        scale = 1.0 + (self.slip_scale if slipping else 0.0)
        base = np.array([truth.twist.v_x * scale, 0.0, truth.twist.omega * scale])
        noise = self._rng.standard_normal(3) * self.spec.noise_std
        return base + self._bias.advance() + noise


class ImuSensor:
    """Yaw-rate gyro: truth omega plus a random-walk bias plus white noise."""

    velocity_like = True

    def __init__(self, spec: SensorSpec, rng: np.random.Generator):
        if spec.channels != 1:
            raise ValidationError("imu spec needs 1 channel (omega)")
        self.spec = spec
        self._rng = rng
        self._bias = _BiasWalk(spec, rng)

    def measure(self, truth: PlantState) -> np.ndarray:
        noise = self._rng.standard_normal(1) * self.spec.noise_std
        return truth.twist.omega + self._bias.advance() + noise


class PoseOdometrySensor:
    """Absolute pose readings with noise and integrated drift (lidar-like)."""

    velocity_like = False

    def __init__(self, spec: SensorSpec, rng: np.random.Generator):
        if spec.channels != 3:
            raise ValidationError("pose odometry spec needs 3 channels (x, y, theta)")
        self.spec = spec
        self._rng = rng
        self._bias = _BiasWalk(spec, rng)

    def _corrupt(self, truth: PlantState) -> np.ndarray:
        drift = self.spec.drift_rate * truth.time
        noise = self._rng.standard_normal(3) * self.spec.noise_std
        raw = truth.pose.as_array() + drift + self._bias.advance() + noise
        raw[2] = normalize_angle(raw[2])
        return raw

    def measure(self, truth: PlantState) -> np.ndarray | None:
        return self._corrupt(truth)

    def measure_pose(self, truth: PlantState) -> Pose2D | None:
        raw = self.measure(truth)
        if raw is None:
            return None
        return Pose2D(raw[0], raw[1], raw[2])


class VisualOdometrySensor(PoseOdometrySensor):
    """Pose odometry subject to outages and post-outage map re-initialization.

    Inside an outage window no measurement is produced (noise is still drawn
    to keep streams aligned with a no-outage twin).  The first sample after
    a window adds a persistent frame offset drawn from a dedicated stream.
    """

    def __init__(
        self,
        spec: SensorSpec,
        rng: np.random.Generator,
        schedule: DropoutSchedule,
        reinit_rng: np.random.Generator,
    ):
        super().__init__(spec, rng)
        self.schedule = schedule
        self._reinit_rng = reinit_rng
        self._frame_offset = np.zeros(3)
        self._was_out = False

    def measure(self, truth: PlantState) -> np.ndarray | None:
        raw = self._corrupt(truth)
        if self.schedule.blacked_out(truth.time):
            self._was_out = True
            return None
        if self._was_out:
            self._was_out = False
            self._frame_offset = self._frame_offset + (
                self._reinit_rng.standard_normal(3) * self.schedule.reinit_offset_std
            )
        out = raw + self._frame_offset
        out[2] = normalize_angle(out[2])
        return out
