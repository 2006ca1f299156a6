"""Certified reachability bounds from a simulation-selected state subspace.

Instead of solving a model over its whole state space, the driver here
grows a relevant subset ``S'`` of states by repeated simulation and solves
two small stand-ins built over ``S'`` plus its one-step fringe:

* the *pessimistic* sub-model keeps the original dynamics inside ``S'``
  and turns every fringe state into an absorbing non-goal sink, so its
  value can only fall short of the true one;
* the *optimistic* sub-model shares the state space and rate matrix but
  additionally declares every fringe state a goal, so its value can only
  exceed the true one.

The two values sandwich the true value; the loop stops once they are
``epsilon``-close.  Each round also yields the optimizing decision table
of the sub-models: the pessimistic one, extended by a fallback to the
whole model, achieves at least the lower bound when played on the
original model (and is therefore epsilon-optimal on convergence), while
the optimistic one can guide the next round of simulations towards the
states that look most promising.

Because the simulations explore the original model directly, only the
visited states and their successors are ever materialised: the original
model may be huge as long as its relevant part is small.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable

from .model import CtmdpModel, ModelError, StateId, TransitionRecord
from .sim import RngStream, SimScheduler, StepGuidedScheduler, UniformScheduler, relevant_subset
from .solver import (
    DEFAULT_STEP_CAP,
    Objective,
    SolveOutcome,
    StepScheduler,
    fallback_scheduler,
    solve_tbr,
)


class GuidePolicy(Enum):
    """How the per-iteration simulation scheduler is picked."""

    UNIFORM = "uniform"
    OPTIMAL = "optimal"
    ALTERNATE = "alternate"

    @classmethod
    def parse(cls, token: str) -> "GuidePolicy":
        for member in cls:
            if member.value == token:
                return member
        raise ValueError(
            f"guide policy must be 'uniform', 'optimal' or 'alternate', got {token!r}"
        )


@dataclass(frozen=True)
class SubModelPair:
    """Pessimistic/optimistic sub-models over a shared restricted state space.

    ``state_map[i]`` is the original id of sub-state ``i``.  Both models
    share the state space and rate matrix and differ only in their goal
    sets.
    """

    lower: CtmdpModel
    upper: CtmdpModel
    state_map: tuple[StateId, ...]
    explored: frozenset[StateId]

    @property
    def fringe_sub_ids(self) -> tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.state_map) if s not in self.explored)


def build_submodel_pair(model: CtmdpModel, explored: Iterable[StateId]) -> SubModelPair:
    """Restrict ``model`` to ``explored`` plus its one-step fringe.

    Explored states keep their original transitions.  Every fringe state
    (a successor outside the explored set) keeps its enabled labels but
    each becomes a self-loop at the original model's maximal exit rate,
    making the state absorbing.  The pessimistic model keeps the original
    goals (restricted); the optimistic model additionally marks the whole
    fringe as goals.
    """
    explored_set = frozenset(int(s) for s in explored)
    for s in explored_set:
        if not 0 <= s < model.num_states:
            raise ModelError(f"explored state {s} out of range [0, {model.num_states})")
    if model.initial not in explored_set:
        raise ModelError("the explored set must contain the initial state")

    fringe: set[int] = set()
    for s in explored_set:
        for label in model.actions(s):
            for target, _ in model.transitions(s, label):
                if target not in explored_set:
                    fringe.add(target)

    sub_states = sorted(explored_set | fringe)
    to_sub = {orig: i for i, orig in enumerate(sub_states)}
    lam = model.max_exit_rate

    records: list[TransitionRecord] = []
    for orig in sub_states:
        sub = to_sub[orig]
        if orig in explored_set:
            for label in model.actions(orig):
                for target, rate in model.transitions(orig, label):
                    records.append((sub, label, to_sub[target], rate))
        else:
            for label in model.actions(orig):
                records.append((sub, label, sub, lam))

    lower_goals = [to_sub[g] for g in model.goals if g in to_sub]
    upper_goals = sorted(set(lower_goals) | {to_sub[s] for s in fringe})
    initial = to_sub[model.initial]
    n = len(sub_states)
    return SubModelPair(
        lower=CtmdpModel(n, initial, lower_goals, records),
        upper=CtmdpModel(n, initial, upper_goals, records),
        state_map=tuple(sub_states),
        explored=explored_set,
    )


def lower_sub(model: CtmdpModel, explored: Iterable[StateId]) -> CtmdpModel:
    """Pessimistic restriction: unexplored successors become absorbing non-goals."""
    return build_submodel_pair(model, explored).lower


def upper_sub(model: CtmdpModel, explored: Iterable[StateId]) -> CtmdpModel:
    """Optimistic restriction: unexplored successors become absorbing goals."""
    return build_submodel_pair(model, explored).upper


def extend_scheduler(
    scheduler: StepScheduler,
    model: CtmdpModel,
    explored: Iterable[StateId],
    state_map: tuple[StateId, ...],
) -> StepScheduler:
    """Lift a sub-model decision table onto the full model.

    Decisions of sub-states that map to explored states are copied under
    their original ids (labels are preserved by the sub-model
    construction); every other state resolves through the lex-min
    fallback.
    """
    explored_set = frozenset(explored)
    decisions = {}
    for sub_state, entries in scheduler.decisions.items():
        orig = state_map[sub_state]
        if orig in explored_set:
            decisions[orig] = entries
    return replace(scheduler, decisions=decisions)


def choose_scheduler(
    policy: GuidePolicy,
    iteration: int,
    guide: StepScheduler | None,
    horizon: float,
) -> SimScheduler:
    """Simulation scheduler for ``iteration`` (1-based) under ``policy``.

    ``uniform`` always explores uniformly; ``optimal`` follows the latest
    guide table once one exists (the first iteration has none); and
    ``alternate`` interleaves the two, uniform on odd iterations.
    """
    if policy is GuidePolicy.UNIFORM or guide is None:
        return UniformScheduler()
    if policy is GuidePolicy.ALTERNATE and iteration % 2 == 1:
        return UniformScheduler()
    return StepGuidedScheduler(guide, horizon)


@dataclass(frozen=True)
class SubspaceConfig:
    """Knobs of the subspace loop.

    ``solver_epsilon`` defaults to a tenth of ``epsilon`` and must not
    exceed a quarter of it, so that solver error can never mask
    convergence of the outer bounds.
    """

    epsilon: float
    solver_epsilon: float | None = None
    n_sim: int = 1000
    guide: GuidePolicy = GuidePolicy.UNIFORM
    objective: Objective = Objective.MAXIMIZE
    master_seed: int = 0
    max_iterations: int = 1000
    step_cap: int = DEFAULT_STEP_CAP

    def __post_init__(self) -> None:
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.solver_epsilon is None:
            object.__setattr__(self, "solver_epsilon", self.epsilon / 10.0)
        if not 0.0 < self.solver_epsilon <= self.epsilon / 4.0:
            raise ValueError(
                f"solver_epsilon must lie in (0, epsilon/4], got {self.solver_epsilon}"
            )
        if self.n_sim < 1:
            raise ValueError(f"n_sim must be at least 1, got {self.n_sim}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be at least 1, got {self.max_iterations}")


@dataclass(frozen=True)
class IterationStats:
    iteration: int
    explored: int
    lower: float
    upper: float
    wall_ms: float


@dataclass(frozen=True)
class SubspaceResult:
    """Outcome of the subspace loop.

    ``lower <= val <= upper`` holds for the true optimal value;
    ``converged`` means their gap fell below the configured epsilon.
    ``scheduler`` is the pessimistic sub-model's decision table extended
    to the full model; playing it achieves at least ``lower``.
    ``solver_steps``/``solver_apriori`` describe the grid of the last
    iteration's solves.
    """

    lower: float
    upper: float
    explored: frozenset[StateId]
    iterations: tuple[IterationStats, ...]
    converged: bool
    scheduler: StepScheduler
    master_seed: int
    solver_steps: int
    solver_apriori: float


def subspace_tbr(model: CtmdpModel, horizon: float, config: SubspaceConfig) -> SubspaceResult:
    """Grow a relevant subset until its sub-models pin the value within epsilon.

    Each iteration unions the states of ``n_sim`` fresh simulation runs
    into the explored set, solves the pessimistic and optimistic
    sub-models, and re-selects the simulation scheduler.  The lower bound
    is the pessimistic solve's raw value; the upper bound adds the
    solver's a-priori error to the optimistic solve's value (clamped to
    1), keeping both bounds sound.  Hitting ``max_iterations`` without
    convergence is an expected outcome for models without a small relevant
    subspace and is reported via ``converged=False``, not an exception.
    """
    if horizon < 0.0:
        raise ValueError(f"horizon must be non-negative, got {horizon}")
    if model.initial in model.goals:
        return SubspaceResult(
            lower=1.0,
            upper=1.0,
            explored=frozenset({model.initial}),
            iterations=(),
            converged=True,
            scheduler=fallback_scheduler(horizon, config.objective),
            master_seed=config.master_seed,
            solver_steps=0,
            solver_apriori=0.0,
        )

    explored: set[int] = {model.initial}
    guide: StepScheduler | None = None
    stats: list[IterationStats] = []
    lower = 0.0
    upper = 1.0
    converged = False
    low_outcome: SolveOutcome | None = None
    pair: SubModelPair | None = None

    for iteration in range(1, config.max_iterations + 1):
        start = time.perf_counter()
        sim_scheduler = choose_scheduler(config.guide, iteration, guide, horizon)
        explored |= relevant_subset(
            model,
            horizon,
            sim_scheduler,
            config.n_sim,
            config.master_seed,
            stream_offset=(iteration - 1) * config.n_sim,
        )
        pair = build_submodel_pair(model, explored)
        low_outcome = solve_tbr(
            pair.lower, horizon, config.objective, config.solver_epsilon, config.step_cap
        )
        up_outcome = solve_tbr(
            pair.upper, horizon, config.objective, config.solver_epsilon, config.step_cap
        )
        lower = low_outcome.value_at_initial
        upper = min(1.0, up_outcome.value_at_initial + up_outcome.apriori_bound)
        wall_ms = (time.perf_counter() - start) * 1e3
        stats.append(IterationStats(iteration, len(explored), lower, upper, wall_ms))

        if upper - lower < config.epsilon:
            converged = True
            break

        # The optimistic table chases whatever still looks reachable and
        # valuable; for minimization the pessimistic table plays that role.
        source = up_outcome if config.objective is Objective.MAXIMIZE else low_outcome
        guide = extend_scheduler(source.scheduler, model, explored, pair.state_map)

    assert low_outcome is not None and pair is not None
    extended = extend_scheduler(low_outcome.scheduler, model, explored, pair.state_map)
    return SubspaceResult(
        lower=lower,
        upper=upper,
        explored=frozenset(explored),
        iterations=tuple(stats),
        converged=converged,
        scheduler=extended,
        master_seed=config.master_seed,
        solver_steps=low_outcome.num_steps,
        solver_apriori=low_outcome.apriori_bound,
    )
