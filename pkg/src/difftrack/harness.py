"""Closed-loop scenario runner and the steady-state error pipeline.

One run wires plant -> sensors -> filter -> controller -> plant on a fixed
grid: the plant advances at sim.plant_dt, the filter predicts every plant
step and corrects whenever a sensor sample is due, and the controller runs
every sim.control_dt with either ground-truth or fused feedback.  Runs are
bit-for-bit reproducible under a fixed seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import estimation, plant
from .config import ScenarioConfig
from .controller import BodyTwist, CommandOutput, ControllerState, command
from .core import Pose2D, ValidationError, angle_diff
from .estimation import EkfState, MeasurementConfig, pose_to_velocity
from .sensors import (
    DropoutSchedule,
    ImuSensor,
    PoseOdometrySensor,
    VisualOdometrySensor,
    WheelOdometrySensor,
)
from .trajectory import sample_reference

METRIC_NAMES = ("E_x", "E_y", "E_theta", "E_v", "E_omega")

_VEL_MASK = (False, False, False, True, True, True)
_OMEGA_MASK = (False, False, False, False, False, True)


class RunLog:
    """Column-oriented record of one run, one row per control tick."""

    def __init__(self, columns: list[str]):
        self.columns = list(columns)
        self._rows: list[list[float]] = []
        # per-update innovation record: (time, sensor name, innovation norm)
        self.innovations: list[tuple[float, str, float]] = []
        # optional raw measurement dump: (time, sensor name, values tuple)
        self.measurements: list[tuple[float, str, tuple]] = []

    def append(self, row: list[float]):
        if len(row) != len(self.columns):
            raise ValueError(f"row has {len(row)} values, expected {len(self.columns)}")
        self._rows.append(row)

    def __len__(self) -> int:
        return len(self._rows)

    def column(self, name: str) -> np.ndarray:
        idx = self.columns.index(name)
        return np.array([r[idx] for r in self._rows])

    def to_csv_text(self) -> str:
        lines = [",".join(self.columns)]
        for row in self._rows:
            lines.append(",".join(repr(v) for v in row))
        return "\n".join(lines) + "\n"

    def measurements_csv_text(self) -> str:
        lines = ["t,sensor,values"]
        for t, name, values in self.measurements:
            packed = ";".join(repr(v) for v in values)
            lines.append(f"{t!r},{name},{packed}")
        return "\n".join(lines) + "\n"


class _SensorChannel:
    """One sensor wired into the run loop: sampling stride plus EKF adapter."""

    def __init__(self, name, sensor, stride, cfg: MeasurementConfig, frame="body"):
        self.name = name
        self.sensor = sensor
        self.stride = stride
        self.cfg = cfg
        self.frame = frame
        self.prev_pose: Pose2D | None = None
        self.prev_time: float | None = None
        self.last_innovation = math.nan

    def due(self, step_index: int) -> bool:
        return step_index % self.stride == 0

    def to_measurement(self, truth: plant.PlantState, slipping: bool, ekf_state: EkfState):
        """Sample the sensor; return (z, cfg) for the filter or None."""
        if isinstance(self.sensor, WheelOdometrySensor):
            return self.sensor.measure(truth, slipping), self.cfg
        if isinstance(self.sensor, ImuSensor):
            return self.sensor.measure(truth), self.cfg
        raw = self.sensor.measure(truth)
        if raw is None:
            self.prev_pose = None  # next sample only re-anchors the differencer
            self.prev_time = None
            return None
        pose = Pose2D(raw[0], raw[1], raw[2])
        prev, prev_t = self.prev_pose, self.prev_time
        self.prev_pose, self.prev_time = pose, truth.time
        if prev is None:
            return None
        gap = truth.time - prev_t
        if gap > 1.5 * self.sensor.spec.period:
            return None
        if self.frame == "body":
            vel = pose_to_velocity(prev, pose, gap)
        else:
            wx = (pose.x - prev.x) / gap
            wy = (pose.y - prev.y) / gap
            om = angle_diff(pose.theta, prev.theta) / gap
            ct, st = math.cos(ekf_state.x[2]), math.sin(ekf_state.x[2])
            vel = np.array([ct * wx + st * wy, -st * wx + ct * wy, om])
        return vel, self.cfg


def _build_channels(config: ScenarioConfig, seed_children) -> list[_SensorChannel]:
    s = config.sensors
    rngs = {name: np.random.default_rng(seed_children[name]) for name in ("wheel", "imu", "lidar", "vo", "vo_reinit")}
    channels = []
    if s.wheel is not None:
        channels.append(
            _SensorChannel(
                "wheel",
                WheelOdometrySensor(s.wheel, rngs["wheel"], s.wheel_slip_scale),
                round(s.wheel.period / config.plant_dt),
                MeasurementConfig(mask=_VEL_MASK, R=s.wheel.reported_covariance(), label="wheel"),
            )
        )
    if s.imu is not None:
        channels.append(
            _SensorChannel(
                "imu",
                ImuSensor(s.imu, rngs["imu"]),
                round(s.imu.period / config.plant_dt),
                MeasurementConfig(mask=_OMEGA_MASK, R=s.imu.reported_covariance(), label="imu"),
            )
        )
    if s.lidar is not None:
        channels.append(
            _SensorChannel(
                "lidar",
                PoseOdometrySensor(s.lidar, rngs["lidar"]),
                round(s.lidar.period / config.plant_dt),
                MeasurementConfig(mask=_VEL_MASK, R=s.lidar.reported_covariance(), label="lidar"),
                frame=s.lidar_frame,
            )
        )
    if s.vo is not None:
        schedule = s.vo_dropout if s.vo_dropout is not None else DropoutSchedule(windows=())
        channels.append(
            _SensorChannel(
                "vo",
                VisualOdometrySensor(s.vo, rngs["vo"], schedule, rngs["vo_reinit"]),
                round(s.vo.period / config.plant_dt),
                MeasurementConfig(mask=_VEL_MASK, R=s.vo.reported_covariance(), label="vo"),
                frame=s.vo_frame,
            )
        )
    return channels


def _log_columns(config: ScenarioConfig, channels) -> list[str]:
    cols = [
        "t",
        "truth.x", "truth.y", "truth.theta", "truth.v_x", "truth.omega",
        "ref.x", "ref.y", "ref.theta", "ref.v_d", "ref.omega_d",
        "ekf.x", "ekf.y", "ekf.theta", "ekf.v_x", "ekf.v_y", "ekf.omega",
    ]
    cols += [f"ekf.innov.{ch.name}" for ch in channels]
    cols += [
        "ctl.v_c_x", "ctl.v_c_omega",
        "ctl.err_track_x", "ctl.err_track_omega",
        "ctl.err_pose_x", "ctl.err_pose_omega",
        "ctl.d_hat_x", "ctl.d_hat_omega",
        "ctl.phi_norm_1", "ctl.phi_norm_2",
    ]
    n = len(config.rbf_centers)
    cols += [f"ctl.w1_{j}" for j in range(n)]
    cols += [f"ctl.w2_{j}" for j in range(n)]
    cols += ["cmd.tau_1", "cmd.tau_2", "cmd.v_x", "cmd.omega"]
    return cols


def run(config: ScenarioConfig) -> RunLog:
    """Execute one deterministic closed-loop rollout and return the full log."""
    n_steps = round(config.duration / config.plant_dt)
    stride = config.control_stride

    # Independent, reproducible random streams per consumer.
    seed_seq = np.random.SeedSequence(config.seed)
    names = ("plant", "wheel", "imu", "lidar", "vo", "vo_reinit")
    seed_children = dict(zip(names, seed_seq.spawn(len(names))))
    plant_rng = np.random.default_rng(seed_children["plant"])

    channels = _build_channels(config, seed_children)
    log = RunLog(_log_columns(config, channels))

    state = plant.PlantState(pose=config.initial_pose, twist=config.initial_twist, time=0.0)
    ekf_state = EkfState(
        x=np.array([
            config.initial_pose.x, config.initial_pose.y, config.initial_pose.theta,
            config.initial_twist.v_x, 0.0, config.initial_twist.omega,
        ]),
        P=config.ekf_noise.P0,
        time=0.0,
    )
    ctl_state = ControllerState.initial(
        config.rbf_centers, config.rbf_widths, config.rbf_eta, config.gains
    )

    held: CommandOutput | None = None
    for k in range(n_steps):
        t = k * config.plant_dt
        if k % stride == 0:
            if config.feedback == "ekf":
                fb_pose = ekf_state.pose()
                fb_twist = BodyTwist(ekf_state.x[3], ekf_state.x[5])
            else:
                fb_pose, fb_twist = state.pose, state.twist
            ref = sample_reference(config.path, t)
            weights_before = [layer.weights for layer in ctl_state.layers]
            out = command(
                ctl_state, config.robot, config.controller_options,
                fb_pose, fb_twist, ref, config.control_dt,
            )
            ctl_state = out.state
            held = out
            row = [
                t,
                state.pose.x, state.pose.y, state.pose.theta,
                state.twist.v_x, state.twist.omega,
                ref.pose.x, ref.pose.y, ref.pose.theta, ref.v_d, ref.omega_d,
                *ekf_state.x,
                *[ch.last_innovation for ch in channels],
                out.velocity_cmd.v_x, out.velocity_cmd.omega,
                out.tracking_error[0], out.tracking_error[1],
                out.pose_correction[0], out.pose_correction[1],
                out.dist_estimate[0], out.dist_estimate[1],
                out.phi_norms[0], out.phi_norms[1],
                *weights_before[0], *weights_before[1],
                out.tau[0], out.tau[1], out.twist_cmd.v_x, out.twist_cmd.omega,
            ]
            log.append([float(v) for v in row])

        if config.plant_input == "twist":
            tau = plant.velocity_servo_torque(
                config.robot, state.twist, held.twist_cmd, config.twist_time_constant
            )
        else:
            tau = held.tau
        state = plant.step(state, tau, config.disturbance, config.robot, config.plant_dt, plant_rng)
        ekf_state = estimation.predict(ekf_state, config.ekf_noise, config.plant_dt)

        slipping = any(ev.active(state.time) for ev in config.disturbance.slip_events)
        step_index = k + 1
        for ch in channels:
            if not ch.due(step_index):
                continue
            result = ch.to_measurement(state, slipping, ekf_state)
            if result is None:
                continue
            z, cfg = result
            if config.dump_sensors:
                log.measurements.append((state.time, ch.name, tuple(float(v) for v in np.atleast_1d(z))))
            nu = estimation.innovation(ekf_state, z, cfg)
            ch.last_innovation = float(np.linalg.norm(nu))
            log.innovations.append((state.time, ch.name, ch.last_innovation))
            ekf_state = estimation.update(ekf_state, z, cfg)

    return log


@dataclass(frozen=True)
class ErrorReport:
    """Steady-state RMS tracking errors, one entry per Table-style metric."""

    E_x: float
    E_y: float
    E_theta: float
    E_v: float
    E_omega: float

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in METRIC_NAMES}

    def csv_text(self) -> str:
        lines = ["metric,value"]
        lines += [f"{name},{getattr(self, name)!r}" for name in METRIC_NAMES]
        return "\n".join(lines) + "\n"


def _rms(values: np.ndarray) -> float:
    return float(np.sqrt(np.mean(values * values)))


def steady_state_rmse(
    log: RunLog,
    transient: float,
    velocity_error_source: str = "commanded",
) -> ErrorReport:
    """RMS tracking errors over rows with t >= transient.

    Velocity errors default to the pose-feedback commanded velocity minus the
    actual twist; 'reference' switches to the trajectory feedforward instead.
    """
    if len(log) == 0:
        raise ValidationError("cannot compute steady-state errors of an empty log")
    t = log.column("t")
    keep = t >= transient
    if not np.any(keep):
        raise ValidationError(
            f"steady-state window is empty: transient {transient} >= last log time {t[-1]}"
        )
    if velocity_error_source == "commanded":
        v_ref = log.column("ctl.v_c_x")
        w_ref = log.column("ctl.v_c_omega")
    elif velocity_error_source == "reference":
        v_ref = log.column("ref.v_d")
        w_ref = log.column("ref.omega_d")
    else:
        raise ValidationError(f"unknown velocity error source {velocity_error_source!r}")
    theta_err = np.array([
        angle_diff(a, b)
        for a, b in zip(log.column("ref.theta")[keep], log.column("truth.theta")[keep])
    ])
    return ErrorReport(
        E_x=_rms((log.column("ref.x") - log.column("truth.x"))[keep]),
        E_y=_rms((log.column("ref.y") - log.column("truth.y"))[keep]),
        E_theta=_rms(theta_err),
        E_v=_rms((v_ref - log.column("truth.v_x"))[keep]),
        E_omega=_rms((w_ref - log.column("truth.omega"))[keep]),
    )


def compare(baseline: ErrorReport, candidate: ErrorReport) -> dict:
    """Per-metric percent change (baseline - candidate) / baseline * 100.

    Positive values mean the candidate improved on the baseline; negative
    values flag a regression.
    """
    changes = {}
    for name in METRIC_NAMES:
        a = getattr(baseline, name)
        b = getattr(candidate, name)
        changes[name] = math.nan if a == 0.0 else (a - b) / a * 100.0
    return changes


def tracking_error_norm(log: RunLog) -> np.ndarray:
    """Per-tick norm of the inner-loop velocity tracking error."""
    return np.hypot(log.column("ctl.err_track_x"), log.column("ctl.err_track_omega"))


def estimate_position_rmse(log: RunLog, t_min: float = 0.0) -> float:
    """RMS planar distance between the fused position estimate and truth."""
    t = log.column("t")
    keep = t >= t_min
    if not np.any(keep):
        raise ValidationError("estimate_position_rmse: empty window")
    dx = (log.column("ekf.x") - log.column("truth.x"))[keep]
    dy = (log.column("ekf.y") - log.column("truth.y"))[keep]
    return float(np.sqrt(np.mean(dx * dx + dy * dy)))


def comparison_table(
    baseline: ErrorReport,
    candidate: ErrorReport,
    labels=("baseline", "candidate"),
) -> str:
    """Aligned plain-text comparison with a Change (%) column.

    Percent changes are recomputed from the unrounded metric values, so they
    can differ in the last digit from figures computed off rounded tables.
    """
    changes = compare(baseline, candidate)
    header = f"{'metric':<8} {labels[0]:>12} {labels[1]:>12} {'Change (%)':>12}"
    lines = [header, "-" * len(header)]
    for name in METRIC_NAMES:
        lines.append(
            f"{name:<8} {getattr(baseline, name):>12.4f} {getattr(candidate, name):>12.4f} "
            f"{changes[name]:>12.2f}"
        )
    lines.append("note: Change (%) recomputed from unrounded metric values")
    return "\n".join(lines) + "\n"


def comparison_csv(baseline: ErrorReport, candidate: ErrorReport) -> str:
    changes = compare(baseline, candidate)
    lines = ["metric,baseline,candidate,change_pct"]
    for name in METRIC_NAMES:
        lines.append(
            f"{name},{getattr(baseline, name)!r},{getattr(candidate, name)!r},{changes[name]!r}"
        )
    return "\n".join(lines) + "\n"
