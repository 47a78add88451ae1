"""Scenario configuration: TOML schema, validation, and packaged presets.

A scenario file is sectioned key-value text: [robot], [sim], [path],
[initial], [disturbance], [controller], [ekf], [metrics], [logging], and
one [sensors.<name>] table per enabled sensor.  Unknown keys are rejected
so typos surface as diagnostics instead of silently falling back to
defaults.  The [disturbance] table may name a packaged floor preset
(smooth / rugged / soft); explicit keys override preset values.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .controller import ControllerOptions
from .core import BodyTwist, ConfigError, GainSet, Pose2D, RobotParams, ValidationError
from .estimation import NoiseConfig
from .plant import DisturbanceModel, SlipEvent
from .sensors import DropoutSchedule, SensorSpec
from .trajectory import CirclePath, LinePath

FEEDBACK_SOURCES = ("truth", "ekf")
PLANT_INPUTS = ("torque", "twist")
VELOCITY_ERROR_SOURCES = ("commanded", "reference")
VELOCITY_FRAMES = ("body", "world")
SENSOR_NAMES = ("wheel", "imu", "lidar", "vo")


class _Section:
    """Dict wrapper that tracks the key path for error diagnostics."""

    def __init__(self, data: dict, path: str):
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a table")
        self.data = dict(data)
        self.path = path

    def take(self, key, default=None, required=False):
        if key in self.data:
            return self.data.pop(key)
        if required:
            raise ConfigError(f"{self.path}.{key}: required key is missing")
        return default

    def take_number(self, key, default=None, required=False) -> float | None:
        value = self.take(key, default, required)
        if value is None:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{self.path}.{key}: expected a number, got {value!r}")
        return float(value)

    def take_int(self, key, default=None, required=False) -> int | None:
        value = self.take(key, default, required)
        if value is None:
            return None
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{self.path}.{key}: expected an integer, got {value!r}")
        return value

    def take_bool(self, key, default=False) -> bool:
        value = self.take(key, default)
        if not isinstance(value, bool):
            raise ConfigError(f"{self.path}.{key}: expected true/false, got {value!r}")
        return value

    def take_str(self, key, default=None, required=False, choices=None) -> str | None:
        value = self.take(key, default, required)
        if value is None:
            return None
        if not isinstance(value, str):
            raise ConfigError(f"{self.path}.{key}: expected a string, got {value!r}")
        if choices is not None and value not in choices:
            raise ConfigError(f"{self.path}.{key}: must be one of {choices}, got {value!r}")
        return value

    def take_list(self, key, length=None, default=None, required=False):
        value = self.take(key, default, required)
        if value is None:
            return None
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{self.path}.{key}: expected an array, got {value!r}")
        if length is not None and len(value) != length:
            raise ConfigError(f"{self.path}.{key}: expected {length} entries, got {len(value)}")
        return list(value)

    def subsection(self, key) -> "_Section | None":
        value = self.take(key)
        if value is None:
            return None
        return _Section(value, f"{self.path}.{key}")

    def finish(self):
        if self.data:
            stray = ", ".join(sorted(self.data))
            raise ConfigError(f"{self.path}: unknown key(s): {stray}")


def _build(section_path: str, factory, /, **kwargs):
    """Construct a domain object, rewriting validation errors as config diagnostics."""
    try:
        return factory(**kwargs)
    except ValidationError as exc:
        raise ConfigError(f"{section_path}: {exc}") from exc


@dataclass(frozen=True)
class SensorSetup:
    """Which sensors a scenario enables, and adapter settings per pose source."""

    wheel: SensorSpec | None = None
    wheel_slip_scale: float = 0.0
    imu: SensorSpec | None = None
    lidar: SensorSpec | None = None
    lidar_frame: str = "body"
    vo: SensorSpec | None = None
    vo_frame: str = "body"
    vo_dropout: DropoutSchedule | None = None

    def any_enabled(self) -> bool:
        return any(s is not None for s in (self.wheel, self.imu, self.lidar, self.vo))


@dataclass(frozen=True)
class ScenarioConfig:
    """Every knob of one closed-loop experiment."""

    robot: RobotParams
    plant_dt: float
    control_dt: float
    duration: float
    seed: int
    feedback: str
    plant_input: str
    twist_time_constant: float
    path: CirclePath | LinePath
    initial_pose: Pose2D
    initial_twist: BodyTwist
    disturbance: DisturbanceModel
    gains: GainSet
    rbf_centers: tuple
    rbf_widths: tuple
    rbf_eta: float
    controller_options: ControllerOptions
    ekf_noise: NoiseConfig
    sensors: SensorSetup = field(default_factory=SensorSetup)
    transient: float | None = None
    velocity_error_source: str = "commanded"
    dump_sensors: bool = False

    def __post_init__(self):
        if self.plant_dt <= 0.0 or self.plant_dt > 0.1:
            raise ConfigError(f"sim.plant_dt must be in (0, 0.1], got {self.plant_dt}")
        ratio = self.control_dt / self.plant_dt
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ConfigError(
                f"sim.control_dt ({self.control_dt}) must be an integer multiple of "
                f"sim.plant_dt ({self.plant_dt})"
            )
        if self.duration < 0.0:
            raise ConfigError(f"sim.duration must be >= 0, got {self.duration}")
        if self.feedback not in FEEDBACK_SOURCES:
            raise ConfigError(f"sim.feedback must be one of {FEEDBACK_SOURCES}, got {self.feedback!r}")
        if self.plant_input not in PLANT_INPUTS:
            raise ConfigError(f"sim.plant_input must be one of {PLANT_INPUTS}, got {self.plant_input!r}")
        if self.twist_time_constant <= 0.0:
            raise ConfigError(f"sim.twist_time_constant must be > 0, got {self.twist_time_constant}")
        if self.velocity_error_source not in VELOCITY_ERROR_SOURCES:
            raise ConfigError(
                f"metrics.velocity_error_source must be one of {VELOCITY_ERROR_SOURCES}, "
                f"got {self.velocity_error_source!r}"
            )
        if self.transient is not None and self.transient < 0.0:
            raise ConfigError(f"sim.transient must be >= 0, got {self.transient}")
        for name, spec in (("wheel", self.sensors.wheel), ("imu", self.sensors.imu),
                           ("lidar", self.sensors.lidar), ("vo", self.sensors.vo)):
            if spec is None:
                continue
            steps = spec.period / self.plant_dt
            if abs(steps - round(steps)) > 1e-6 or round(steps) < 1:
                raise ConfigError(
                    f"sensors.{name}.rate ({spec.rate} Hz): the sample period must be an "
                    f"integer multiple of sim.plant_dt ({self.plant_dt})"
                )
        if self.feedback == "ekf" and not self.sensors.any_enabled():
            raise ConfigError("sim.feedback = 'ekf' requires at least one sensor")

    @property
    def control_stride(self) -> int:
        return round(self.control_dt / self.plant_dt)

    @property
    def default_transient(self) -> float:
        if self.transient is not None:
            return self.transient
        if isinstance(self.path, CirclePath):
            return self.path.period
        return 0.25 * self.duration


def _parse_path(section: _Section):
    kind = section.take_str("type", required=True, choices=("circle", "line"))
    if kind == "circle":
        center = section.take_list("center", 2, default=[0.0, 0.0])
        radius = section.take_number("radius", required=True)
        rate = section.take_number("angular_rate", required=True)
        section.finish()
        return _build(section.path, CirclePath,
                      center_x=center[0], center_y=center[1], radius=radius, angular_rate=rate)
    start = section.take_list("start", 2, default=[0.0, 0.0])
    heading = section.take_number("heading", default=0.0)
    speed = section.take_number("speed", required=True)
    section.finish()
    return _build(section.path, LinePath,
                  start_x=start[0], start_y=start[1], heading=heading, speed=speed)


def _load_floor_preset(name: str) -> dict:
    try:
        text = (resources.files("difftrack") / "scenarios" / "floors" / f"{name}.toml").read_text()
    except FileNotFoundError:
        raise ConfigError(f"disturbance.floor: unknown floor preset {name!r}") from None
    return tomllib.loads(text).get("disturbance", {})


def _parse_disturbance(section: _Section | None) -> DisturbanceModel:
    if section is None:
        return DisturbanceModel()
    floor = section.take_str("floor")
    base = _load_floor_preset(floor) if floor else {}
    merged = dict(base)
    merged.update(section.data)
    section.data.clear()
    merged_section = _Section(merged, section.path)
    viscous = merged_section.take_list("viscous", 2, default=[0.0, 0.0])
    coulomb = merged_section.take_list("coulomb", 2, default=[0.0, 0.0])
    noise = merged_section.take_list("noise_std", 2, default=[0.0, 0.0])
    events = []
    for i, raw in enumerate(merged_section.take("slip_events", default=[]) or []):
        ev = _Section(raw, f"{section.path}.slip_events[{i}]")
        events.append(
            _build(
                ev.path, SlipEvent,
                start=ev.take_number("start", required=True),
                duration=ev.take_number("duration", required=True),
                torque_offset=ev.take_list("torque_offset", 2, required=True),
            )
        )
        ev.finish()
    merged_section.finish()
    return _build(section.path, DisturbanceModel,
                  viscous=viscous, coulomb=coulomb, noise_std=noise, slip_events=tuple(events))


def _parse_sensor_spec(section: _Section, channels: int) -> SensorSpec:
    kwargs = dict(
        rate=section.take_number("rate", required=True),
        noise_std=section.take_list("noise_std", channels, required=True),
        reported_std=section.take_list("reported_std", channels, required=True),
    )
    for opt in ("bias", "bias_walk_std", "drift_rate"):
        value = section.take_list(opt, channels)
        if value is not None:
            kwargs[opt] = value
    return _build(section.path, SensorSpec, **kwargs)


def _parse_sensors(section: _Section | None) -> SensorSetup:
    if section is None:
        return SensorSetup()
    kwargs = {}
    wheel = section.subsection("wheel")
    if wheel is not None:
        kwargs["wheel_slip_scale"] = wheel.take_number("slip_scale", default=0.0)
        kwargs["wheel"] = _parse_sensor_spec(wheel, 3)
        wheel.finish()
    imu = section.subsection("imu")
    if imu is not None:
        kwargs["imu"] = _parse_sensor_spec(imu, 1)
        imu.finish()
    lidar = section.subsection("lidar")
    if lidar is not None:
        kwargs["lidar_frame"] = lidar.take_str("velocity_frame", default="body", choices=VELOCITY_FRAMES)
        kwargs["lidar"] = _parse_sensor_spec(lidar, 3)
        lidar.finish()
    vo = section.subsection("vo")
    if vo is not None:
        kwargs["vo_frame"] = vo.take_str("velocity_frame", default="body", choices=VELOCITY_FRAMES)
        dropout = vo.subsection("dropout")
        if dropout is not None:
            windows = dropout.take_list("windows", default=[])
            reinit = dropout.take_list("reinit_offset_std", 3, default=[0.0, 0.0, 0.0])
            dropout.finish()
            kwargs["vo_dropout"] = _build(
                dropout.path, DropoutSchedule, windows=windows, reinit_offset_std=reinit
            )
        kwargs["vo"] = _parse_sensor_spec(vo, 3)
        vo.finish()
    section.finish()
    return SensorSetup(**kwargs)


def _parse_ekf(section: _Section | None) -> NoiseConfig:
    if section is None:
        return NoiseConfig.diagonal(q=0.05, p0=1e-9)
    q = section.take("q_diag", default=0.05)
    p0 = section.take("p0_diag", default=1e-9)
    section.finish()

    def expand(value, what):
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value) * np.eye(6)
        if isinstance(value, (list, tuple)) and len(value) == 6:
            return np.diag([float(v) for v in value])
        raise ConfigError(f"ekf.{what} must be a number or a 6-entry array, got {value!r}")

    return _build("ekf", NoiseConfig, Q=expand(q, "q_diag"), P0=expand(p0, "p0_diag"))


def scenario_from_dict(data: dict) -> ScenarioConfig:
    """Build and validate a ScenarioConfig from a parsed TOML document."""
    root = _Section(data, "config")

    robot_sec = root.subsection("robot")
    if robot_sec is None:
        raise ConfigError("config: missing required [robot] section")
    robot = _build(
        "robot", RobotParams,
        mass=robot_sec.take_number("mass", required=True),
        wheel_radius=robot_sec.take_number("wheel_radius", required=True),
        wheel_separation=robot_sec.take_number("wheel_separation", required=True),
        inertia_z=robot_sec.take_number("inertia_z", required=True),
        com_offset=robot_sec.take_number("com_offset", default=0.0),
        max_speed=robot_sec.take_number("max_speed", default=0.46),
    )
    robot_sec.finish()

    sim = root.subsection("sim")
    if sim is None:
        raise ConfigError("config: missing required [sim] section")
    sim_kwargs = dict(
        plant_dt=sim.take_number("plant_dt", default=0.01),
        control_dt=sim.take_number("control_dt", default=0.02),
        duration=sim.take_number("duration", required=True),
        seed=sim.take_int("seed", default=0),
        feedback=sim.take_str("feedback", default="truth", choices=FEEDBACK_SOURCES),
        plant_input=sim.take_str("plant_input", default="torque", choices=PLANT_INPUTS),
        twist_time_constant=sim.take_number("twist_time_constant", default=0.1),
        transient=sim.take_number("transient"),
    )
    sim.finish()

    path_sec = root.subsection("path")
    if path_sec is None:
        raise ConfigError("config: missing required [path] section")
    path = _parse_path(path_sec)

    initial = root.subsection("initial")
    if initial is not None:
        pose_v = initial.take_list("pose", 3, default=[0.0, 0.0, 0.0])
        twist_v = initial.take_list("twist", 2, default=[0.0, 0.0])
        initial.finish()
    else:
        pose_v, twist_v = [0.0, 0.0, 0.0], [0.0, 0.0]
    initial_pose = _build("initial.pose", Pose2D, x=pose_v[0], y=pose_v[1], theta=pose_v[2])
    initial_twist = _build("initial.twist", BodyTwist, v_x=twist_v[0], omega=twist_v[1])

    ctl = root.subsection("controller")
    if ctl is None:
        raise ConfigError("config: missing required [controller] section")
    gains = _build(
        "controller", GainSet,
        lam=ctl.take_list("lam", 2, required=True),
        k1=ctl.take_number("k1", required=True),
        k2=ctl.take_number("k2", required=True),
        k3=ctl.take_number("k3", required=True),
    )
    centers = ctl.take_list("centers", required=True)
    widths = ctl.take_list("widths", len(centers), required=True)
    eta = ctl.take_number("eta", required=True)
    if eta < 0.0:
        raise ConfigError(f"controller.eta must be >= 0, got {eta}")
    options = _build(
        "controller", ControllerOptions,
        pose_feedback=ctl.take_bool("pose_feedback", default=True),
        torque_error=ctl.take_str("torque_error", default="tracking"),
        adaptation_error=ctl.take_str("adaptation_error", default="tracking"),
        omega_max=ctl.take_number("omega_max", default=1.9),
    )
    ctl.finish()

    disturbance = _parse_disturbance(root.subsection("disturbance"))
    sensors = _parse_sensors(root.subsection("sensors"))
    ekf_noise = _parse_ekf(root.subsection("ekf"))

    metrics = root.subsection("metrics")
    if metrics is not None:
        vel_src = metrics.take_str("velocity_error_source", default="commanded",
                                   choices=VELOCITY_ERROR_SOURCES)
        metrics.finish()
    else:
        vel_src = "commanded"

    logging_sec = root.subsection("logging")
    if logging_sec is not None:
        dump_sensors = logging_sec.take_bool("dump_sensors", default=False)
        logging_sec.finish()
    else:
        dump_sensors = False

    root.finish()
    return ScenarioConfig(
        robot=robot,
        path=path,
        initial_pose=initial_pose,
        initial_twist=initial_twist,
        disturbance=disturbance,
        gains=gains,
        rbf_centers=tuple(float(c) for c in centers),
        rbf_widths=tuple(float(w) for w in widths),
        rbf_eta=float(eta),
        controller_options=options,
        ekf_noise=ekf_noise,
        sensors=sensors,
        velocity_error_source=vel_src,
        dump_sensors=dump_sensors,
        **sim_kwargs,
    )


def load_raw(path) -> dict:
    """Parse a scenario file into a plain dict, with line diagnostics on bad TOML."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def load_scenario(path) -> ScenarioConfig:
    return scenario_from_dict(load_raw(path))


def packaged_scenario_path(name: str) -> Path:
    """Resolve a shipped scenario by bare name (e.g. 'sim_circle')."""
    candidate = resources.files("difftrack") / "scenarios" / f"{name}.toml"
    with resources.as_file(candidate) as concrete:
        if not concrete.exists():
            raise ConfigError(f"no packaged scenario named {name!r}")
        return Path(concrete)


def resolve_config_path(spec: str) -> Path:
    """Interpret a --config value as a filesystem path or a packaged scenario name."""
    p = Path(spec)
    if p.suffix == ".toml" or p.exists() or "/" in spec:
        return p
    return packaged_scenario_path(spec)


def apply_override(data: dict, dotted_key: str, value):
    """Set data[a][b]... = value for a dotted key, creating tables as needed."""
    parts = dotted_key.split(".")
    node = data
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override {dotted_key!r}: {part!r} is not a table")
    node[parts[-1]] = value


def config_hash(data: dict) -> str:
    """Stable digest of a config dict, ignoring the seed (seed sweeps share a hash)."""
    scrubbed = json.loads(json.dumps(data))
    scrubbed.get("sim", {}).pop("seed", None)
    blob = json.dumps(scrubbed, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def paths_match(a: ScenarioConfig, b: ScenarioConfig) -> bool:
    """True when two scenarios share the same reference path definition."""
    return type(a.path) is type(b.path) and a.path == b.path
