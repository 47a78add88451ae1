"""Adaptive control stack for velocity and pose tracking.

Three layers, innermost first:

* a Gaussian RBF estimator per velocity channel whose weights adapt online
  with the rule w_dot = eta * v_err * phi, derived from a quadratic
  stability function of the tracking error and weight error;
* a feedback-linearization torque law that cancels the known dynamics and
  imposes first-order velocity-error decay while subtracting the estimated
  disturbance;
* an optional pose-feedback layer that turns the body-frame pose error into
  a commanded velocity, which then serves as the inner loop's reference.

The commanded acceleration is also integrated into a saturated velocity
command for platforms that consume twist commands instead of torques.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import (
    BodyTwist,
    DivergenceError,
    GainSet,
    Pose2D,
    RobotParams,
    ValidationError,
    angle_diff,
    finite_vector,
    require_finite,
)
from .plant import coriolis_matrix, input_matrix_inverse, mass_matrix

# Error signal fed to the torque law / weight adaptation:
#   "tracking":        measured twist minus the inner-loop reference
#   "pose_correction": pose-feedback velocity minus the trajectory feedforward
ERROR_SOURCES = ("tracking", "pose_correction")


@dataclass(frozen=True)
class RbfLayer:
    """One scalar Gaussian-RBF estimator: d_hat = w . phi(v)."""

    centers: np.ndarray
    widths: np.ndarray
    weights: np.ndarray
    eta: float

    def __post_init__(self):
        n = np.asarray(self.centers).size
        if n < 1:
            raise ValidationError("RbfLayer needs at least one neuron")
        object.__setattr__(self, "centers", finite_vector(self.centers, n, "RbfLayer.centers"))
        widths = finite_vector(self.widths, n, "RbfLayer.widths")
        if np.any(widths <= 0.0):
            raise ValidationError(f"RbfLayer.widths must be > 0, got {widths}")
        object.__setattr__(self, "widths", widths)
        object.__setattr__(self, "weights", finite_vector(self.weights, n, "RbfLayer.weights"))
        eta = require_finite(self.eta, "RbfLayer.eta")
        if eta < 0.0:
            raise ValidationError(f"RbfLayer.eta must be >= 0, got {eta}")
        object.__setattr__(self, "eta", eta)

    @classmethod
    def zeros(cls, centers, widths, eta: float) -> "RbfLayer":
        """Fresh layer with zero weights, learning purely from interaction."""
        centers = np.asarray(centers, dtype=float)
        return cls(centers=centers, widths=widths, weights=np.zeros(centers.size), eta=eta)


def activations(layer: RbfLayer, v: float) -> np.ndarray:
    """Gaussian activations exp(-(v - c)^2 / (2 sigma^2)); every entry in (0, 1]."""
    v = require_finite(v, "rbf input")
    z = (v - layer.centers) / layer.widths
    return np.exp(-0.5 * z * z)


def estimate_disturbance(layer: RbfLayer, v: float) -> float:
    """Disturbance estimate for one channel: inner product of weights and activations."""
    return float(layer.weights @ activations(layer, v))


def adapt(layer: RbfLayer, v_err: float, phi: np.ndarray, dt: float) -> RbfLayer:
    """Forward-Euler step of the learning rule w <- w + eta * v_err * phi * dt."""
    if dt <= 0.0:
        raise ValidationError(f"adaptation dt must be > 0, got {dt}")
    weights = layer.weights + (layer.eta * v_err * dt) * phi
    if not np.all(np.isfinite(weights)):
        raise DivergenceError(
            f"rbf adaptation diverged: weights became {weights!r} (v_err={v_err!r})"
        )
    return replace(layer, weights=weights)


def fbl_torque(
    params: RobotParams,
    twist: BodyTwist,
    twist_ref: BodyTwist,
    accel_ref,
    gains: GainSet,
    dist_estimate,
) -> np.ndarray:
    """Feedback-linearization torque.

    tau = B^-1 C v + B^-1 M (v_ref_dot - Lam (v - v_ref) - d_hat), which with
    exact model knowledge reduces the closed loop to first-order decay of the
    velocity error perturbed only by the disturbance estimation error.
    """
    v_err = twist.as_array() - twist_ref.as_array()
    accel_cmd = np.asarray(accel_ref, dtype=float) - gains.lam_matrix() @ v_err - np.asarray(
        dist_estimate, dtype=float
    )
    return _torque_from_accel(params, twist, accel_cmd)


def _torque_from_accel(params: RobotParams, twist: BodyTwist, accel_cmd) -> np.ndarray:
    b_inv = input_matrix_inverse(params)
    coupling = coriolis_matrix(params, twist.omega) @ twist.as_array()
    tau = b_inv @ coupling + b_inv @ (mass_matrix(params) @ accel_cmd)
    if not np.all(np.isfinite(tau)):
        raise DivergenceError(f"torque law produced non-finite output: {tau!r}")
    return tau


def kanayama_error(ref_pose: Pose2D, pose: Pose2D) -> np.ndarray:
    """Pose error (e_x, e_y, e_theta) rotated into the robot body frame."""
    dx = ref_pose.x - pose.x
    dy = ref_pose.y - pose.y
    ct, st = math.cos(pose.theta), math.sin(pose.theta)
    return np.array(
        [ct * dx + st * dy, -st * dx + ct * dy, angle_diff(ref_pose.theta, pose.theta)]
    )


def kanayama_velocity(v_d: float, omega_d: float, error, gains: GainSet) -> BodyTwist:
    """Pose-feedback velocity law.

    v_c   = v_d cos(e_theta) + k1 e_x
    w_c   = omega_d + k2 v_d e_y + k3 v_d sin(e_theta)
    """
    e_x, e_y, e_th = (float(v) for v in error)
    return BodyTwist(
        v_d * math.cos(e_th) + gains.k1 * e_x,
        omega_d + gains.k2 * v_d * e_y + gains.k3 * v_d * math.sin(e_th),
    )


@dataclass(frozen=True)
class ControllerOptions:
    """Wiring and limit knobs for the control stack.

    The published description of the pose-feedback refinement states the
    adaptation error as the pose-correction velocity minus the trajectory
    feedforward; driving either the torque law or the learning rule with that
    signal closes a positive-feedback loop through the disturbance estimate
    (a lagging robot inflates d_hat, which cuts the commanded acceleration
    and increases the lag), so both default to the inner-loop tracking error.
    The literal wiring stays available for side-by-side study.
    """

    pose_feedback: bool = True
    torque_error: str = "tracking"
    adaptation_error: str = "tracking"
    omega_max: float = 1.9

    def __post_init__(self):
        for name in ("torque_error", "adaptation_error"):
            v = getattr(self, name)
            if v not in ERROR_SOURCES:
                raise ValidationError(f"ControllerOptions.{name} must be one of {ERROR_SOURCES}, got {v!r}")
        if require_finite(self.omega_max, "ControllerOptions.omega_max") <= 0.0:
            raise ValidationError(f"ControllerOptions.omega_max must be > 0, got {self.omega_max}")


@dataclass(frozen=True)
class ControllerState:
    """Adaptive weights plus the last integrated velocity command."""

    layers: tuple[RbfLayer, RbfLayer]
    last_command: BodyTwist
    gains: GainSet

    def __post_init__(self):
        layers = tuple(self.layers)
        if len(layers) != 2:
            raise ValidationError(f"ControllerState needs exactly 2 rbf layers, got {len(layers)}")
        object.__setattr__(self, "layers", layers)

    @classmethod
    def initial(cls, centers, widths, eta: float, gains: GainSet) -> "ControllerState":
        return cls(
            layers=(RbfLayer.zeros(centers, widths, eta), RbfLayer.zeros(centers, widths, eta)),
            last_command=BodyTwist(0.0, 0.0),
            gains=gains,
        )


@dataclass(frozen=True)
class CommandOutput:
    """One control tick: torques, saturated twist command, updated state, internals."""

    tau: np.ndarray
    twist_cmd: BodyTwist
    state: ControllerState
    velocity_cmd: BodyTwist        # pose-feedback velocity v_c (reference twist if disabled)
    tracking_error: np.ndarray     # measured twist minus v_c
    pose_correction: np.ndarray    # v_c minus trajectory feedforward
    dist_estimate: np.ndarray
    phi_norms: np.ndarray


def command(
    state: ControllerState,
    params: RobotParams,
    options: ControllerOptions,
    est_pose: Pose2D,
    est_twist: BodyTwist,
    ref,
    dt: float,
) -> CommandOutput:
    """Run one tick of the full stack against the fused state estimate.

    Order: pose-feedback velocity, error signals, disturbance estimates,
    weight adaptation, torque law, then the integrated and saturated twist
    command.
    """
    if dt <= 0.0:
        raise ValidationError(f"control dt must be > 0, got {dt}")

    ref_twist = BodyTwist(ref.v_d, ref.omega_d)
    if options.pose_feedback:
        err = kanayama_error(ref.pose, est_pose)
        v_c = kanayama_velocity(ref.v_d, ref.omega_d, err, state.gains)
    else:
        v_c = ref_twist

    tracking = est_twist.as_array() - v_c.as_array()
    pose_corr = v_c.as_array() - ref_twist.as_array()
    adapt_err = tracking if options.adaptation_error == "tracking" else pose_corr
    torque_err = tracking if options.torque_error == "tracking" else pose_corr

    inputs = (est_twist.v_x, est_twist.omega)
    phis = tuple(activations(layer, v) for layer, v in zip(state.layers, inputs))
    d_hat = np.array([float(layer.weights @ phi) for layer, phi in zip(state.layers, phis)])
    new_layers = tuple(
        adapt(layer, adapt_err[i], phis[i], dt) for i, layer in enumerate(state.layers)
    )

    accel_cmd = np.asarray(ref.accel, dtype=float) - state.gains.lam_matrix() @ torque_err - d_hat
    tau = _torque_from_accel(params, est_twist, accel_cmd)

    cmd_v = state.last_command.v_x + accel_cmd[0] * dt
    cmd_w = state.last_command.omega + accel_cmd[1] * dt
    twist_cmd = BodyTwist(
        min(max(cmd_v, -params.max_speed), params.max_speed),
        min(max(cmd_w, -options.omega_max), options.omega_max),
    )

    new_state = ControllerState(layers=new_layers, last_command=twist_cmd, gains=state.gains)
    return CommandOutput(
        tau=tau,
        twist_cmd=twist_cmd,
        state=new_state,
        velocity_cmd=v_c,
        tracking_error=tracking,
        pose_correction=pose_corr,
        dist_estimate=d_hat,
        phi_norms=np.array([float(np.linalg.norm(p)) for p in phis]),
    )
