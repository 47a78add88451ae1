"""Deterministic differential-drive trajectory-tracking workbench.

Library layout:

* core        -- shared value types, angle helpers, error classes
* plant       -- ground-truth reduced dynamics with RK4 integration
* trajectory  -- circle / line reference generation
* controller  -- RBF disturbance estimator, feedback linearization,
                 pose-feedback velocity law
* estimation  -- 6-state EKF with partial updates and Joseph-form correction
* sensors     -- synthetic wheel / gyro / lidar / visual odometry streams
* config      -- TOML scenario schema and packaged presets
* harness     -- closed-loop runner, run logs, steady-state error reports
* cli         -- run / compare / sweep / validate front end
"""

from .config import ScenarioConfig, load_scenario, packaged_scenario_path, scenario_from_dict
from .controller import (
    CommandOutput,
    ControllerOptions,
    ControllerState,
    RbfLayer,
    activations,
    adapt,
    command,
    estimate_disturbance,
    fbl_torque,
    kanayama_error,
    kanayama_velocity,
)
from .core import (
    BodyTwist,
    ConfigError,
    DifftrackError,
    DivergenceError,
    GainSet,
    Pose2D,
    RobotParams,
    SingularMatrixError,
    ValidationError,
    angle_diff,
    normalize_angle,
)
from .estimation import EkfState, MeasurementConfig, NoiseConfig, pose_to_velocity, predict, update
from .harness import (
    ErrorReport,
    RunLog,
    compare,
    comparison_table,
    estimate_position_rmse,
    run,
    steady_state_rmse,
    tracking_error_norm,
)
from .plant import DisturbanceModel, PlantState, SlipEvent, disturbance_torque, step
from .sensors import DropoutSchedule, SensorSpec
from .trajectory import CirclePath, LinePath, ReferenceSample, circle, sample_reference

__version__ = "0.1.0"
