"""Ground-truth differential-drive simulator.

Reduced second-order dynamics in local coordinates,

    M v_dot + C(omega) v + tau_d = B tau,

with M = diag(m, I_z + m d^2), a skew-symmetric coupling matrix
C = [[0, -2 m d theta_dot], [2 m d theta_dot, 0]], and input map
B = (1/R) [[1, 1], [L, -L]].  Pose motion follows the center-of-mass
kinematics, which satisfies the no-lateral-slip constraint by construction.
The coupled 5-state (v_x, omega, x, y, theta) system is integrated with RK4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    BodyTwist,
    DivergenceError,
    Pose2D,
    RobotParams,
    ValidationError,
    finite_vector,
    inv2,
    normalize_angle,
    require_finite,
)

MAX_STEP = 0.1


@dataclass(frozen=True)
class PlantState:
    """Simulator state: COM pose, body twist, and simulation time."""

    pose: Pose2D
    twist: BodyTwist
    time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "time", require_finite(self.time, "PlantState.time"))


@dataclass(frozen=True)
class SlipEvent:
    """Additive wheel-torque offset active on [start, start + duration)."""

    start: float
    duration: float
    torque_offset: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "start", require_finite(self.start, "SlipEvent.start"))
        dur = require_finite(self.duration, "SlipEvent.duration")
        if dur < 0.0:
            raise ValidationError(f"SlipEvent.duration must be >= 0, got {dur}")
        object.__setattr__(self, "duration", dur)
        object.__setattr__(
            self, "torque_offset", finite_vector(self.torque_offset, 2, "SlipEvent.torque_offset")
        )

    def active(self, t: float) -> bool:
        return self.start <= t < self.start + self.duration


@dataclass(frozen=True)
class DisturbanceModel:
    """Disturbance torque acting on the (v_x, omega) channels.

    The total is viscous drag + Coulomb friction + active slip-event offsets
    + seeded Gaussian noise.  sign(0) = 0 for the Coulomb term to avoid
    chattering at rest.
    """

    viscous: np.ndarray = (0.0, 0.0)
    coulomb: np.ndarray = (0.0, 0.0)
    noise_std: np.ndarray = (0.0, 0.0)
    slip_events: tuple[SlipEvent, ...] = ()

    def __post_init__(self):
        for name in ("viscous", "coulomb", "noise_std"):
            vec = finite_vector(getattr(self, name), 2, f"DisturbanceModel.{name}")
            if np.any(vec < 0.0):
                raise ValidationError(f"DisturbanceModel.{name} must be >= 0, got {vec}")
            object.__setattr__(self, name, vec)
        object.__setattr__(self, "slip_events", tuple(self.slip_events))

    @property
    def has_noise(self) -> bool:
        return bool(np.any(self.noise_std > 0.0))


ZERO_DISTURBANCE = DisturbanceModel()


def mass_matrix(params: RobotParams) -> np.ndarray:
    """Reduced inertia matrix diag(m, I_z + m d^2); symmetric positive definite."""
    m = params.mass
    return np.array([[m, 0.0], [0.0, params.inertia_z + m * params.com_offset ** 2]])


def coriolis_matrix(params: RobotParams, theta_dot: float) -> np.ndarray:
    """Skew-symmetric velocity coupling; vanishes when the COM sits on the axle."""
    c = 2.0 * params.mass * params.com_offset * theta_dot
    return np.array([[0.0, -c], [c, 0.0]])


def input_matrix(params: RobotParams) -> np.ndarray:
    """Wheel-torque to generalized-force map (1/R) [[1, 1], [L, -L]]."""
    r = params.wheel_radius
    half = params.wheel_separation
    return np.array([[1.0 / r, 1.0 / r], [half / r, -half / r]])


def input_matrix_inverse(params: RobotParams) -> np.ndarray:
    """Closed-form inverse of the input map: (R/2) [[1, 1/L], [1, -1/L]]."""
    r = params.wheel_radius
    over_l = 1.0 / params.wheel_separation
    return 0.5 * r * np.array([[1.0, over_l], [1.0, -over_l]])


def forward_kinematics(pose: Pose2D, twist: BodyTwist, com_offset: float = 0.0) -> np.ndarray:
    """Pose rate (x_dot, y_dot, theta_dot) of the COM for a given body twist."""
    ct, st = math.cos(pose.theta), math.sin(pose.theta)
    return np.array(
        [
            twist.v_x * ct - com_offset * twist.omega * st,
            twist.v_x * st + com_offset * twist.omega * ct,
            twist.omega,
        ]
    )


def constraint_residual(pose_rate, theta: float, com_offset: float = 0.0) -> float:
    """No-lateral-slip residual y_dot cos(theta) - x_dot sin(theta) - d theta_dot.

    Zero for any pose rate produced by forward_kinematics.
    """
    xd, yd, td = (float(v) for v in pose_rate)
    return yd * math.cos(theta) - xd * math.sin(theta) - com_offset * td


def _sign(v: float) -> float:
    if v > 0.0:
        return 1.0
    if v < 0.0:
        return -1.0
    return 0.0


def _deterministic_torque(model: DisturbanceModel, v_x: float, omega: float, t: float):
    d0 = float(model.viscous[0]) * v_x + float(model.coulomb[0]) * _sign(v_x)
    d1 = float(model.viscous[1]) * omega + float(model.coulomb[1]) * _sign(omega)
    for ev in model.slip_events:
        if ev.active(t):
            d0 += float(ev.torque_offset[0])
            d1 += float(ev.torque_offset[1])
    return d0, d1


def _sample_noise(model: DisturbanceModel, rng: np.random.Generator | None):
    if rng is None or not model.has_noise:
        return 0.0, 0.0
    draw = rng.standard_normal(2)
    return draw[0] * model.noise_std[0], draw[1] * model.noise_std[1]


def disturbance_torque(
    model: DisturbanceModel,
    twist: BodyTwist,
    t: float,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Disturbance torque sample; deterministic given the rng state and call order."""
    d0, d1 = _deterministic_torque(model, twist.v_x, twist.omega, t)
    n0, n1 = _sample_noise(model, rng)
    return np.array([d0 + n0, d1 + n1])


def step(
    state: PlantState,
    tau,
    model: DisturbanceModel,
    params: RobotParams,
    dt: float,
    rng: np.random.Generator | None = None,
) -> PlantState:
    """Advance the plant one step under constant wheel torques.

    The noise component of the disturbance is sampled once per step and held
    over the RK4 stages; the deterministic components are re-evaluated at
    every stage.
    """
    if not (0.0 < dt <= MAX_STEP):
        raise ValidationError(f"plant step dt must be in (0, {MAX_STEP}], got {dt}")
    tau0, tau1 = float(tau[0]), float(tau[1])

    m = params.mass
    izz = params.inertia_z + m * params.com_offset ** 2
    d = params.com_offset
    r = params.wheel_radius
    half = params.wheel_separation
    force_v = (tau0 + tau1) / r
    force_w = half * (tau0 - tau1) / r
    noise0, noise1 = _sample_noise(model, rng)
    visc0, visc1 = float(model.viscous[0]), float(model.viscous[1])
    coul0, coul1 = float(model.coulomb[0]), float(model.coulomb[1])
    slip_events = model.slip_events

    def deriv(v_x, omega, theta, t):
        dist0 = visc0 * v_x + coul0 * _sign(v_x) + noise0
        dist1 = visc1 * omega + coul1 * _sign(omega) + noise1
        for ev in slip_events:
            if ev.active(t):
                dist0 += float(ev.torque_offset[0])
                dist1 += float(ev.torque_offset[1])
        coupling = 2.0 * m * d * omega
        a_v = (force_v + coupling * omega - dist0) / m
        a_w = (force_w - coupling * v_x - dist1) / izz
        ct, st = math.cos(theta), math.sin(theta)
        return (
            a_v,
            a_w,
            v_x * ct - d * omega * st,
            v_x * st + d * omega * ct,
            omega,
        )

    v0 = state.twist.v_x
    w0 = state.twist.omega
    x0 = state.pose.x
    y0 = state.pose.y
    th0 = state.pose.theta
    t0 = state.time
    h = dt

    k1 = deriv(v0, w0, th0, t0)
    k2 = deriv(v0 + 0.5 * h * k1[0], w0 + 0.5 * h * k1[1], th0 + 0.5 * h * k1[4], t0 + 0.5 * h)
    k3 = deriv(v0 + 0.5 * h * k2[0], w0 + 0.5 * h * k2[1], th0 + 0.5 * h * k2[4], t0 + 0.5 * h)
    k4 = deriv(v0 + h * k3[0], w0 + h * k3[1], th0 + h * k3[4], t0 + h)

    sixth = h / 6.0
    v_new = v0 + sixth * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
    w_new = w0 + sixth * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
    x_new = x0 + sixth * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
    y_new = y0 + sixth * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3])
    th_new = th0 + sixth * (k1[4] + 2.0 * k2[4] + 2.0 * k3[4] + k4[4])

    for name, value in (("v_x", v_new), ("omega", w_new), ("x", x_new), ("y", y_new), ("theta", th_new)):
        if not math.isfinite(value):
            raise DivergenceError(f"plant integration diverged: {name} became {value!r} at t={t0 + dt:.4f}")

    return PlantState(
        pose=Pose2D(x_new, y_new, normalize_angle(th_new)),
        twist=BodyTwist(v_new, w_new),
        time=t0 + dt,
    )


def velocity_servo_torque(
    params: RobotParams,
    twist: BodyTwist,
    twist_cmd: BodyTwist,
    time_constant: float,
) -> np.ndarray:
    """Computed-torque servo realizing a first-order twist-following plant.

    Mirrors a velocity-commanded base: the servo drives the twist toward the
    command with the given time constant but knows nothing about external
    disturbances, which keep acting on the plant.
    """
    if time_constant <= 0.0:
        raise ValidationError(f"servo time constant must be > 0, got {time_constant}")
    accel = np.array(
        [
            (twist_cmd.v_x - twist.v_x) / time_constant,
            (twist_cmd.omega - twist.omega) / time_constant,
        ]
    )
    coupling = coriolis_matrix(params, twist.omega) @ twist.as_array()
    return inv2(input_matrix(params)) @ (mass_matrix(params) @ accel + coupling)
