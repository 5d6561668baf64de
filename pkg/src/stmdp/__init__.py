"""Self-triggered Markov decision processes on finite state spaces."""
from ._accel import HAS_NUMBA
from .gridworld import GridSpec, StateIndexing, build_mdp, case_study_spec, display_index, parse_map
from .mdp import (
    ConvergenceError,
    MdpModel,
    SolverConfig,
    bellman_backup,
    classic_policy_evaluation,
    classic_value_iteration,
)
from .sim import RolloutStats, Trajectory, estimate_cost, rollout
from .trigger import (
    InfeasibleGuarantee,
    LookaheadTables,
    SelfTriggeredPolicy,
    TriggerConfig,
    build_lookahead_tables,
    consolidated_cost,
    evaluate_self_triggered,
    lookahead_backup,
    skip_transition,
    solve_problem1,
    solve_problem2,
    verify_guarantee,
)

__version__ = "0.1.0"
