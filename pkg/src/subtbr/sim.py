"""Stochastic path sampling used to discover the relevant part of a model.

A simulation run starts in the initial state, repeatedly asks a simulation
scheduler for an action, samples the sojourn from the exponential
distribution of the action's exit rate, then samples the successor from
the branching distribution, and stops as soon as a goal state is entered
or the accumulated time reaches the bound.  The union of the states of
many such runs is the *relevant subset* that the subspace solver builds
its sub-models from.

Randomness comes from SplitMix64 counter streams: stream ``k`` of master
seed ``m`` is the SplitMix64 sequence whose initial counter is the mix of
``m`` and ``k``.  The generator family is part of the package contract and
will not change between releases, so any (master seed, stream index) pair
reproduces its path bit-for-bit.  Distinct stream indices give
statistically independent streams; a set of runs may therefore execute in
any order (or in parallel) without changing the sampled set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol

from .model import ActionLabel, CtmdpModel, StateId
from .solver import StepScheduler

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_UNIT = 2.0**-53


def _mix64(z: int) -> int:
    """SplitMix64 finaliser: bijective 64-bit avalanche."""
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK64
    return z ^ (z >> 31)


class RngStream:
    """One reproducible SplitMix64 stream of a (master seed, stream index) pair."""

    __slots__ = ("master_seed", "stream_index", "_counter")

    def __init__(self, master_seed: int, stream_index: int) -> None:
        self.master_seed = master_seed
        self.stream_index = stream_index
        self._counter = _mix64((master_seed + _GOLDEN * (stream_index + 1)) & _MASK64)

    def next_u64(self) -> int:
        self._counter = (self._counter + _GOLDEN) & _MASK64
        return _mix64(self._counter)

    def uniform(self) -> float:
        """Uniform double in [0, 1): the top 53 bits of the next word."""
        return (self.next_u64() >> 11) * _UNIT

    def exponential(self, rate: float) -> float:
        """Inverse-transform sample: ``-ln(1 - u) / rate``; u = 0 gives 0."""
        return -math.log1p(-self.uniform()) / rate


class SimScheduler(Protocol):
    def choose(
        self, model: CtmdpModel, state: StateId, elapsed: float, rng: RngStream
    ) -> ActionLabel: ...


class UniformScheduler:
    """Picks uniformly among the enabled actions, in lexicographic label order."""

    def choose(
        self, model: CtmdpModel, state: StateId, elapsed: float, rng: RngStream
    ) -> ActionLabel:
        labels = model.actions(state)
        if len(labels) == 1:
            return labels[0]
        idx = int(rng.uniform() * len(labels))
        return labels[min(idx, len(labels) - 1)]

    def __repr__(self) -> str:
        return "UniformScheduler()"


class StepGuidedScheduler:
    """Follows a step-grid decision table, queried at the elapsed time.

    The table is piecewise-constant in remaining time, so at elapsed ``t``
    the decision is the entry for ``remaining = horizon - t``; states or
    steps without an entry fall back to the lexicographically smallest
    enabled action.  Deterministic given (state, elapsed time).
    """

    def __init__(self, scheduler: StepScheduler, horizon: float) -> None:
        self.scheduler = scheduler
        self.horizon = horizon

    def choose(
        self, model: CtmdpModel, state: StateId, elapsed: float, rng: RngStream
    ) -> ActionLabel:
        return self.scheduler.action_at(model, state, self.horizon - elapsed)

    def __repr__(self) -> str:
        return f"StepGuidedScheduler(horizon={self.horizon})"


@dataclass(frozen=True)
class TimedPath:
    """A finite sampled trajectory: ``n+1`` states, ``n`` actions and sojourns."""

    states: tuple[StateId, ...]
    actions: tuple[ActionLabel, ...]
    sojourns: tuple[float, ...]

    @property
    def total_time(self) -> float:
        return sum(self.sojourns)

    def __len__(self) -> int:
        return len(self.actions)


def sample_path(
    model: CtmdpModel,
    horizon: float,
    scheduler: SimScheduler,
    rng: RngStream,
) -> TimedPath:
    """Sample one trajectory from the initial state until a goal or the time bound.

    Per jump the stream is consumed in a fixed order: the scheduler's
    action choice first (the uniform scheduler draws one word, guided
    schedulers none), then the sojourn, then the successor.  Successors
    are located by cumulative search over the branching distribution in
    stored order.  Absorbing non-goal states keep sampling self-loop
    sojourns until the bound is exhausted.
    """
    states = [model.initial]
    actions: list[str] = []
    sojourns: list[float] = []
    elapsed = 0.0
    goals = model.goals
    while elapsed < horizon and states[-1] not in goals:
        s = states[-1]
        label = scheduler.choose(model, s, elapsed, rng)
        sojourn = rng.exponential(model.exit_rate(s, label))
        u = rng.uniform()
        branches = model.branch_distribution(s, label)
        acc = 0.0
        target = branches[-1][0]
        for t, prob in branches:
            acc += prob
            if u < acc:
                target = t
                break
        states.append(target)
        actions.append(label)
        sojourns.append(sojourn)
        elapsed += sojourn
    return TimedPath(tuple(states), tuple(actions), tuple(sojourns))


def relevant_subset(
    model: CtmdpModel,
    horizon: float,
    scheduler: SimScheduler,
    n_sim: int,
    master_seed: int,
    stream_offset: int = 0,
) -> set[StateId]:
    """Union of the states visited by ``n_sim`` sampled paths.

    Run ``i`` (1-based) uses stream index ``stream_offset + i`` of
    ``master_seed``, so repeated calls with distinct offsets draw fresh,
    non-overlapping randomness while staying reproducible.  The result
    always contains the initial state.
    """
    if n_sim < 1:
        raise ValueError(f"n_sim must be at least 1, got {n_sim}")
    visited: set[int] = {model.initial}
    for i in range(1, n_sim + 1):
        path = sample_path(model, horizon, scheduler, RngStream(master_seed, stream_offset + i))
        visited.update(path.states)
    return visited
