"""Fractional-order containment control of leader/follower social networks."""
from .engine import (
    ScenarioConfig,
    TrajectoryRecord,
    equilibrium_residual,
    max_convex_step,
    run_fractional,
    run_integer_discrete,
)
from .errors import (
    ArgumentError,
    BarrierBreach,
    ConstraintViolation,
    DegenerateRowError,
    DivergenceError,
    FracContainError,
    NumericFailure,
    RoleError,
    SimulationAborted,
    StepSizeError,
    UndefinedPointError,
    UnsupportedDimensionError,
    ValidationError,
)
from .frac_calculus import (
    AbmIntegrator,
    FdeSolution,
    FracOrder,
    MemoryKernel,
    fractional_integral,
    gl_weights,
    mittag_leffler,
    solve_caputo_fde,
)
from .geometry import (
    ContainmentReport,
    ConvexHull,
    build_report,
    convex_hull,
    hull_volume,
    hull_volume_series,
    point_in_hull,
    spread,
)
from .potential import (
    ControllerParams,
    PotentialBreakdown,
    constraint_value,
    control_input,
    goal_value,
    m_coefficient,
    potential_breakdown,
    potential_gradient,
    potential_value,
)
from .scenario import config_hash, config_from_dict, config_to_dict, load_scenario, preset_karate, save_scenario
from .social_graph import (
    AgentRole,
    InteractionMatrix,
    NetworkTopology,
    assemble_pi_matrix,
    check_assumption_one,
    edge_margin,
    metzler_laplacian,
    social_difference,
)

__version__ = "0.1.0"
