"""Multi-objective Divide-and-Evolve planning on the MultiZeno benchmark family."""

from .core import (
    Atom,
    GroundAction,
    GroundTask,
    InapplicableActionError,
    InstanceTooLargeError,
    InvalidPlanError,
    Mode,
    MozenoError,
    MultiZenoConfig,
    ObjectivePoint,
    ParetoFront,
    ScheduledPlan,
    UnsupportedConfigError,
    dominates,
    earliest_start_times,
    exact_front_analytic,
    ground_multizeno,
    mutex,
    pareto_filter,
    step,
    validate_plan,
)
from .dae import (
    DaeParams,
    EvalResult,
    Individual,
    PartialState,
    StrategyWeights,
    crossover,
    evaluate,
    init_individual,
    mutate,
)
from .harness import ExperimentConfig, RunResult, load_config, run_experiment, run_single
from .moea import IndicatorKind, MoeaParams, Scheme, unary_hypervolume
from .oracle import exact_front_oracle
from .planner import Planner, StrategyObjective, compress, solve_subproblem

__version__ = "0.1.0"
