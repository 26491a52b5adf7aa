"""Collision-free 2D trajectory planning for UAV swarms.

Plans joint swarm trajectories with a convex quadratic model solved by an
embedded operator-splitting QP solver, simulates the cluster-head
replanning loop under GPS uncertainty, and runs the collision /
extra-distance / planning-time experiment sweeps.
"""

from .core import (
    CoincidentPointsError,
    EndpointMismatchError,
    SafetyDisc,
    Scenario,
    SolverStats,
    SwarmPlan,
    Trajectory,
    UavSpec,
    Vec2,
    bearing_to_goal,
    deviation_objective,
    disc_overlap,
    extra_distance,
    heading_angle,
    recover_polar,
    sample_true_position,
    traveled_distance,
)
from .generate import GenerationExhaustedError, GenSpec, generate_scenario
from .metrics import (
    InsufficientPointsError,
    MismatchedLogError,
    RunMetrics,
    SweepResult,
    SweepSpec,
    SweptParam,
    TrendModel,
    fit_trend,
    measure,
    sweep,
)
from .planner import (
    DegenerateReferencePairError,
    DimensionMismatchError,
    MissingReferenceError,
    PlanRequest,
    PlanVerification,
    ScenarioInfeasibleError,
    ScpSettings,
    SeparationMode,
    SolverFailureError,
    VariableLayout,
    build_model,
    literal_feasibility_probe,
    plan,
    straight_line_reference,
    verify_plan,
)
from .qp import QpProblem, QpSettings, QpSolution, QpStatus, kkt_residuals, solve, validate
from .scenario_io import ScenarioFormatError, load_scenario, write_scenario
from .sim import (
    ChStrategy,
    EmptySwarmError,
    MissionLog,
    UavState,
    count_overlap_events,
    elect_cluster_head,
    run_baseline,
    run_mission,
)

__version__ = "0.1.0"
