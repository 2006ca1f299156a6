"""Shared builders for the test suite."""

from __future__ import annotations

import random

import pytest

from subtbr import CtmdpModel


def single_chain(stages: int, rate: float, loop_rate: float = 1.0) -> CtmdpModel:
    """CTMC chain 0 -> 1 -> ... -> stages (goal), every hop at ``rate``.

    First-passage time to the goal is Erlang(stages, rate), giving a
    closed-form reachability value.
    """
    records = [(i, "step", i + 1, rate) for i in range(stages)]
    records.append((stages, "loop", stages, loop_rate))
    return CtmdpModel(stages + 1, 0, [stages], records)


def random_ctmdp(
    seed: int,
    max_states: int = 15,
    max_actions: int = 3,
    max_succ: int = 3,
    rate_lo: float = 0.1,
    rate_hi: float = 5.0,
    goal_p: float = 0.25,
) -> CtmdpModel:
    """Small seeded random CTMDP; every state enables at least one action."""
    rng = random.Random(seed)
    n = rng.randint(2, max_states)
    labels = ["a", "b", "c", "d"][:max_actions]
    records = []
    for s in range(n):
        for label in labels[: rng.randint(1, max_actions)]:
            succ = rng.sample(range(n), rng.randint(1, min(max_succ, n)))
            for t in succ:
                records.append((s, label, t, rng.uniform(rate_lo, rate_hi)))
    goals = [s for s in range(n) if rng.random() < goal_p]
    return CtmdpModel(n, 0, goals, records)


def random_explored(seed: int, model: CtmdpModel, keep_p: float = 0.5) -> set[int]:
    """Random state subset always containing the initial state."""
    rng = random.Random(seed ^ 0x5EED)
    explored = {model.initial}
    for s in range(model.num_states):
        if rng.random() < keep_p:
            explored.add(s)
    return explored


@pytest.fixture(scope="session")
def warm_kernels():
    """Compile the numba kernels once so timing-sensitive tests pay no JIT cost."""
    from subtbr import evaluate_scheduler, solve_tbr

    model = single_chain(2, 1.0)
    outcome = solve_tbr(model, 1.0, epsilon=0.25)
    evaluate_scheduler(model, outcome.scheduler, 1.0, epsilon=0.25)
    return True
