"""Extended Kalman filter over the 6-state planar vector.

State ordering: [x, y, theta, v_x, v_y, omega] with body-frame velocities;
v_y is carried to absorb lateral slip even though the ideal plant never
produces it.  The process model is a constant-velocity unicycle.  Sensor
updates are partial: each measurement corrects only the masked subset of
components, and the covariance correction uses the Joseph form so the
covariance stays positive semi-definite up to roundoff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    DivergenceError,
    Pose2D,
    ValidationError,
    angle_diff,
    normalize_angle,
    require_finite,
)

STATE_DIM = 6
STATE_LABELS = ("x", "y", "theta", "v_x", "v_y", "omega")
THETA_INDEX = 2


def _square(matrix, dim: int, what: str) -> np.ndarray:
    arr = np.asarray(matrix, dtype=float)
    if arr.shape != (dim, dim):
        raise ValidationError(f"{what} must be {dim}x{dim}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{what} must be finite")
    if not np.allclose(arr, arr.T, atol=1e-9, rtol=0.0):
        raise ValidationError(f"{what} must be symmetric")
    return arr


@dataclass(frozen=True)
class EkfState:
    x: np.ndarray
    P: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).reshape(-1)
        if x.size != STATE_DIM:
            raise ValidationError(f"EkfState.x must have {STATE_DIM} entries, got {x.size}")
        if not np.all(np.isfinite(x)):
            raise ValidationError(f"EkfState.x must be finite, got {x!r}")
        x = x.copy()
        x[THETA_INDEX] = normalize_angle(x[THETA_INDEX])
        x.flags.writeable = False
        object.__setattr__(self, "x", x)
        P = np.asarray(self.P, dtype=float)
        if P.shape != (STATE_DIM, STATE_DIM):
            raise ValidationError(f"EkfState.P must be 6x6, got shape {P.shape}")
        if not np.all(np.isfinite(P)):
            raise DivergenceError("filter diverged: covariance has non-finite entries")
        P = 0.5 * (P + P.T)
        P.flags.writeable = False
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "time", require_finite(self.time, "EkfState.time"))

    def pose(self) -> Pose2D:
        return Pose2D(self.x[0], self.x[1], self.x[2])


@dataclass(frozen=True)
class MeasurementConfig:
    """Which state components a sensor corrects, with what covariance."""

    mask: tuple
    R: np.ndarray
    label: str = "sensor"
    gate_sigma: float | None = None  # optional Mahalanobis gate, off by default

    def __post_init__(self):
        mask = tuple(bool(b) for b in self.mask)
        if len(mask) != STATE_DIM:
            raise ValidationError(f"measurement mask must have {STATE_DIM} entries, got {len(mask)}")
        k = sum(mask)
        if k == 0:
            raise ValidationError("measurement mask must select at least one component")
        object.__setattr__(self, "mask", mask)
        R = np.asarray(self.R, dtype=float)
        if R.ndim == 1:
            R = np.diag(R)
        R = _square(R, k, f"measurement covariance for '{self.label}'")
        if np.any(np.linalg.eigvalsh(R) <= 0.0):
            raise ValidationError(f"measurement covariance for '{self.label}' must be positive definite")
        R.flags.writeable = False
        object.__setattr__(self, "R", R)

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask)


@dataclass(frozen=True)
class NoiseConfig:
    """Process noise and initial covariance; both must be symmetric PSD."""

    Q: np.ndarray
    P0: np.ndarray

    def __post_init__(self):
        for name in ("Q", "P0"):
            arr = _square(getattr(self, name), STATE_DIM, f"NoiseConfig.{name}")
            if np.min(np.linalg.eigvalsh(arr)) < -1e-10:
                raise ValidationError(f"NoiseConfig.{name} must be positive semi-definite")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @classmethod
    def diagonal(cls, q: float, p0: float) -> "NoiseConfig":
        return cls(Q=q * np.eye(STATE_DIM), P0=p0 * np.eye(STATE_DIM))


def process_model(x, dt: float) -> np.ndarray:
    """Constant-velocity unicycle transition over dt."""
    if dt <= 0.0:
        raise ValidationError(f"process dt must be > 0, got {dt}")
    x = np.asarray(x, dtype=float)
    px, py, th, vx, vy, om = x
    ct, st = math.cos(th), math.sin(th)
    return np.array(
        [
            px + (vx * ct - vy * st) * dt,
            py + (vx * st + vy * ct) * dt,
            normalize_angle(th + om * dt),
            vx,
            vy,
            om,
        ]
    )


def process_jacobian(x, dt: float) -> np.ndarray:
    """Analytic Jacobian of process_model; velocity rows are identity."""
    if dt <= 0.0:
        raise ValidationError(f"process dt must be > 0, got {dt}")
    x = np.asarray(x, dtype=float)
    th, vx, vy = x[2], x[3], x[4]
    ct, st = math.cos(th), math.sin(th)
    F = np.eye(STATE_DIM)
    F[0, 2] = (-vx * st - vy * ct) * dt
    F[0, 3] = ct * dt
    F[0, 4] = -st * dt
    F[1, 2] = (vx * ct - vy * st) * dt
    F[1, 3] = st * dt
    F[1, 4] = ct * dt
    F[2, 5] = dt
    return F


def predict(state: EkfState, noise: NoiseConfig, dt: float) -> EkfState:
    """Project state and covariance forward: P <- F P F^T + Q."""
    x_pred = process_model(state.x, dt)
    F = process_jacobian(state.x, dt)
    P_pred = F @ state.P @ F.T + noise.Q
    if not np.all(np.isfinite(P_pred)):
        raise DivergenceError(f"filter diverged during predict at t={state.time + dt:.4f}")
    return EkfState(x=x_pred, P=P_pred, time=state.time + dt)


def innovation(state: EkfState, z, cfg: MeasurementConfig) -> np.ndarray:
    """Measurement residual z - H x, with the heading component wrapped."""
    z = np.asarray(z, dtype=float).reshape(-1)
    idx = cfg.indices
    if z.size != idx.size:
        raise ValidationError(
            f"measurement for '{cfg.label}' must have {idx.size} entries, got {z.size}"
        )
    nu = z - state.x[idx]
    for row, state_index in enumerate(idx):
        if state_index == THETA_INDEX:
            nu[row] = angle_diff(z[row], state.x[THETA_INDEX])
    return nu


def update(state: EkfState, z, cfg: MeasurementConfig) -> EkfState:
    """Partial-state correction with Joseph-form covariance update.

    K = P H^T (H P H^T + R)^-1, then
    P <- (I - K H) P (I - K H)^T + K R K^T.
    Returns the state unchanged when an optional Mahalanobis gate rejects
    the innovation.
    """
    idx = cfg.indices
    nu = innovation(state, z, cfg)
    PHt = state.P[:, idx]
    S = PHt[idx, :] + cfg.R
    try:
        S_inv_nu = np.linalg.solve(S, nu)
        K = np.linalg.solve(S.T, PHt.T).T
    except np.linalg.LinAlgError as exc:
        raise DivergenceError(
            f"singular innovation covariance for sensor '{cfg.label}' at t={state.time:.4f}"
        ) from exc
    if cfg.gate_sigma is not None and float(nu @ S_inv_nu) > cfg.gate_sigma ** 2 * idx.size:
        return state

    x_new = state.x + K @ nu
    I_KH = np.eye(STATE_DIM)
    I_KH[:, idx] -= K
    P_new = I_KH @ state.P @ I_KH.T + K @ cfg.R @ K.T
    if not (np.all(np.isfinite(x_new)) and np.all(np.isfinite(P_new))):
        raise DivergenceError(
            f"filter diverged during '{cfg.label}' update at t={state.time:.4f}"
        )
    return EkfState(x=x_new, P=P_new, time=state.time)


def pose_to_velocity(prev: Pose2D, curr: Pose2D, dt: float) -> np.ndarray:
    """Finite-difference two poses into a body-frame velocity (v_x, v_y, omega).

    The world-frame displacement is rotated into the earlier pose's body
    frame; the heading rate uses the wrapped angle difference.
    """
    if dt <= 0.0:
        raise ValidationError(f"pose differencing dt must be > 0, got {dt}")
    dx = curr.x - prev.x
    dy = curr.y - prev.y
    ct, st = math.cos(prev.theta), math.sin(prev.theta)
    return np.array(
        [
            (ct * dx + st * dy) / dt,
            (-st * dx + ct * dy) / dt,
            angle_diff(curr.theta, prev.theta) / dt,
        ]
    )
