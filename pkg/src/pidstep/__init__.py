"""Adaptive robust backstepping control with a PID-equivalent form, the
gain-conversion algebra linking the two, and a quadrotor simulation
harness exercising both.
"""

from .controller import (
    BacksteppingGains,
    ConfigurationError,
    ControllerState,
    PidGains,
    RobustTermConfig,
    control_arc,
    control_pid,
    filter_e1_dot,
    h_bound,
    robust_term,
)
from .core import (
    Bounds1D,
    ContractViolation,
    ErrorSignals,
    SingularInputMatrix,
    SystemModel,
    error_signals,
    proj,
    proj_vec,
)
from .estimator import CovarianceLostDefiniteness, RlsState, rls_update
from .gainmap import (
    FeasibilityPoint,
    GainConversionResult,
    InfeasibleGains,
    backstepping_from_pid,
    feasibility_sweep,
    kd_min,
    kp_max,
    pid_from_backstepping,
    write_feasibility_csv,
)
from .harness import (
    PlantFault,
    RunMetrics,
    Scenario,
    SensorNoise,
    SimConfig,
    Telemetry,
    TrajectoryRef,
    baseline_gains,
    build_from_config,
    default_config,
    figure_eight_scenario,
    figure_eight_trajectory,
    fine_tuned_gains,
    hover_scenario,
    hover_trajectory,
    metrics,
    parse_scenario_file,
    payload_drop_gains,
    payload_drop_trajectory,
    rk4_step,
    scenario_defaults,
    sideways_trajectory,
    simulate,
)
from .quadrotor import (
    AttitudeSingularity,
    Payload,
    QuadrotorParams,
    QuadState,
    WindGust,
    composite_inertia,
    dynamics,
    motor_lag,
    regressor_phi2,
    rotor_speeds_sq_from_wrench,
    thrust_and_attitude_from_u,
    world_force,
    wrench_from_rotor_speeds_sq,
)

__version__ = "0.1.0"
