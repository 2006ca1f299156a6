"""Greedy search for a near-minimal state subset that preserves the value.

A diagnostic companion to the subspace loop: it asks how small a
sub-model *could* be, independently of how simulations happen to explore.
Each state (except the initial one) is scored by the width of the
interval its removal induces: making ``s`` an absorbing non-goal sink
yields a pessimistic model, making it an absorbing goal an optimistic
one, and

    score(s) = optimistic value - pessimistic value

measures how much the value can depend on what happens beyond ``s``.
States are then accumulated in ascending score order, with both bounding
models rebuilt around the growing removed set, until the next addition
would push the bound gap past the budget.  A large kept set certifies
that no small value-preserving sub-model exists (up to the greedy
heuristic), not merely that exploration was unlucky.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .model import CtmdpModel, ModelError, StateId, TransitionRecord
from .solver import DEFAULT_STEP_CAP, Objective, solve_tbr


def _absorbing_variant(
    model: CtmdpModel, absorbed: frozenset[int], goals: Iterable[int]
) -> CtmdpModel:
    """Copy of ``model`` with every state in ``absorbed`` turned into a sink.

    Each absorbed state keeps its enabled labels, but every action becomes
    a self-loop at the model's maximal exit rate.  The goal set is
    replaced by ``goals``.
    """
    lam = model.max_exit_rate
    records: list[TransitionRecord] = []
    for s in range(model.num_states):
        if s in absorbed:
            for label in model.actions(s):
                records.append((s, label, s, lam))
        else:
            for label in model.actions(s):
                for target, rate in model.transitions(s, label):
                    records.append((s, label, target, rate))
    return CtmdpModel(model.num_states, model.initial, goals, records)


def _bound_gap(
    model: CtmdpModel,
    removed: frozenset[int],
    horizon: float,
    objective: Objective,
    solver_epsilon: float,
    step_cap: int,
) -> tuple[float, float, float]:
    """(gap, pessimistic value, optimistic value) for a removed set."""
    pessimistic = _absorbing_variant(model, removed, model.goals - removed)
    optimistic = _absorbing_variant(model, removed, model.goals | removed)
    low = solve_tbr(pessimistic, horizon, objective, solver_epsilon, step_cap).value_at_initial
    high = solve_tbr(optimistic, horizon, objective, solver_epsilon, step_cap).value_at_initial
    return high - low, low, high


def state_score(
    model: CtmdpModel,
    horizon: float,
    state: StateId,
    solver_epsilon: float = 1e-3,
    objective: Objective = Objective.MAXIMIZE,
    step_cap: int = DEFAULT_STEP_CAP,
) -> float:
    """Bound-gap contribution of a single state (the initial state is not scorable)."""
    if state == model.initial:
        raise ModelError("the initial state cannot be scored for removal")
    model._check_state(state)
    gap, _, _ = _bound_gap(
        model, frozenset({state}), horizon, objective, solver_epsilon, step_cap
    )
    return gap


@dataclass(frozen=True)
class GreedyStep:
    """One attempted removal: the measured cumulative gap and whether it was kept."""

    state: StateId
    gap: float
    accepted: bool


@dataclass(frozen=True)
class GreedyResult:
    removal_order: tuple[StateId, ...]
    scores: dict[StateId, float]
    removed: frozenset[StateId]
    kept: frozenset[StateId]
    final_gap: float
    steps: tuple[GreedyStep, ...]


def greedy_min_subset(
    model: CtmdpModel,
    horizon: float,
    epsilon: float,
    solver_epsilon: float = 1e-3,
    objective: Objective = Objective.MAXIMIZE,
    step_cap: int = DEFAULT_STEP_CAP,
) -> GreedyResult:
    """Accumulate low-impact states into a removed set while the gap budget holds.

    All states except the initial one are scored individually, sorted
    ascending (ties by state id), and then greedily added to the removed
    set; after every candidate both bounding models are rebuilt with the
    whole accumulated set absorbed, and the first candidate whose
    cumulative gap exceeds ``epsilon`` stops the search (it is not
    included).  Removing nothing is a valid outcome.
    """
    scored = sorted(
        (
            (state_score(model, horizon, s, solver_epsilon, objective, step_cap), s)
            for s in range(model.num_states)
            if s != model.initial
        ),
    )
    order = tuple(s for _, s in scored)
    scores = {s: score for score, s in scored}

    removed: set[int] = set()
    steps: list[GreedyStep] = []
    final_gap = 0.0
    for _, candidate in scored:
        attempt = frozenset(removed | {candidate})
        gap, _, _ = _bound_gap(model, attempt, horizon, objective, solver_epsilon, step_cap)
        accepted = gap <= epsilon
        steps.append(GreedyStep(candidate, gap, accepted))
        if not accepted:
            break
        removed.add(candidate)
        final_gap = gap

    kept = frozenset(range(model.num_states)) - removed
    return GreedyResult(
        removal_order=order,
        scores=scores,
        removed=frozenset(removed),
        kept=kept,
        final_gap=final_gap,
        steps=tuple(steps),
    )
