"""Certified time-bounded reachability bounds for CTMDPs from a simulated subspace."""

from .greedy import GreedyResult, GreedyStep, greedy_min_subset, state_score
from .model import CtmdpModel, ModelError, reachable_states
from .modelio import (
    ParseError,
    gen_erlang,
    gen_polling,
    gen_two_chain,
    parse_model,
    serialize_model,
    two_chain_names,
)
from .sim import (
    RngStream,
    StepGuidedScheduler,
    TimedPath,
    UniformScheduler,
    relevant_subset,
    sample_path,
)
from .solver import (
    DEFAULT_STEP_CAP,
    Objective,
    SolveOutcome,
    SolverError,
    StepScheduler,
    evaluate_scheduler,
    fallback_scheduler,
    load_scheduler,
    save_scheduler,
    solve_tbr,
    step_count,
)
from .subspace import (
    GuidePolicy,
    IterationStats,
    SubModelPair,
    SubspaceConfig,
    SubspaceResult,
    build_submodel_pair,
    choose_scheduler,
    extend_scheduler,
    lower_sub,
    subspace_tbr,
    upper_sub,
)

__all__ = [
    "CtmdpModel",
    "DEFAULT_STEP_CAP",
    "GreedyResult",
    "GreedyStep",
    "GuidePolicy",
    "IterationStats",
    "ModelError",
    "Objective",
    "ParseError",
    "RngStream",
    "SolveOutcome",
    "SolverError",
    "StepGuidedScheduler",
    "StepScheduler",
    "SubModelPair",
    "SubspaceConfig",
    "SubspaceResult",
    "TimedPath",
    "UniformScheduler",
    "build_submodel_pair",
    "choose_scheduler",
    "evaluate_scheduler",
    "extend_scheduler",
    "fallback_scheduler",
    "gen_erlang",
    "gen_polling",
    "gen_two_chain",
    "greedy_min_subset",
    "load_scheduler",
    "lower_sub",
    "parse_model",
    "reachable_states",
    "relevant_subset",
    "sample_path",
    "save_scheduler",
    "serialize_model",
    "solve_tbr",
    "state_score",
    "step_count",
    "subspace_tbr",
    "two_chain_names",
    "upper_sub",
]

__version__ = "0.1.0"
