"""Sparse in-memory continuous-time Markov decision processes.

A CTMDP couples a finite state space with per-state nondeterministic
actions; each enabled action carries a set of outgoing rates.  Sojourn
times are exponential in the action's exit rate (the sum of its outgoing
rates) and the successor is drawn from the rates normalised by that sum.
Models are immutable after construction: every transformation returns a
new model, and cached quantities (exit rates, branching probabilities,
the maximal exit rate) are computed once.

States are dense integer indices in ``[0, num_states)``.  Action labels
are strings scoped per state; two states may enable entirely different
label sets.  Labels are compared and ordered by their UTF-8 bytes, which
is the tie-breaking order used everywhere in this package.
"""

from __future__ import annotations

import math
from typing import Iterable, Iterator, Sequence

import numpy as np

StateId = int
ActionLabel = str
TransitionRecord = tuple[int, str, int, float]


class ModelError(ValueError):
    """Raised for structurally malformed models or unknown state/action queries."""


def _label_key(label: str) -> bytes:
    return label.encode("utf-8")


class CtmdpModel:
    """Immutable sparse CTMDP with cached exit rates and branching distributions.

    Construction takes a flat iterable of ``(source, label, target, rate)``
    records.  Structural problems (indices out of range, duplicate
    ``(source, label, target)`` triples, malformed labels) raise
    :class:`ModelError` immediately; semantic defects that leave the arrays
    well-formed (a state without any action, a non-positive stored rate)
    are reported by :meth:`validate` instead, so that diagnostic tooling
    can inspect broken inputs.

    Within a state, actions are stored sorted by label bytes.  Within an
    action, transitions keep the order in which records were supplied;
    exit rates are accumulated in exactly that order.
    """

    __slots__ = (
        "num_states",
        "initial",
        "goals",
        "_state_ptr",
        "_pair_label",
        "_pair_exit",
        "_tr_ptr",
        "_tr_target",
        "_tr_rate",
        "_tr_prob",
        "_max_exit",
    )

    def __init__(
        self,
        num_states: int,
        initial: StateId,
        goals: Iterable[StateId],
        transitions: Iterable[TransitionRecord],
    ) -> None:
        if num_states < 1:
            raise ModelError("a model needs at least one state")
        goal_set = frozenset(int(g) for g in goals)
        if not 0 <= initial < num_states:
            raise ModelError(f"initial state {initial} out of range [0, {num_states})")
        for g in goal_set:
            if not 0 <= g < num_states:
                raise ModelError(f"goal state {g} out of range [0, {num_states})")

        per_state: list[dict[str, list[tuple[int, float]]]] = [dict() for _ in range(num_states)]
        seen: set[tuple[int, str, int]] = set()
        for source, label, target, rate in transitions:
            source = int(source)
            target = int(target)
            rate = float(rate)
            if not 0 <= source < num_states:
                raise ModelError(f"transition source {source} out of range [0, {num_states})")
            if not 0 <= target < num_states:
                raise ModelError(f"transition target {target} out of range [0, {num_states})")
            if not label or any(c.isspace() for c in label):
                raise ModelError(f"invalid action label {label!r} on state {source}")
            if not math.isfinite(rate):
                raise ModelError(f"non-finite rate on ({source}, {label!r}, {target})")
            key = (source, label, target)
            if key in seen:
                raise ModelError(f"duplicate transition ({source}, {label!r}, {target})")
            seen.add(key)
            per_state[source].setdefault(label, []).append((target, rate))

        num_pairs = sum(len(acts) for acts in per_state)
        num_records = len(seen)
        state_ptr = np.zeros(num_states + 1, dtype=np.int64)
        pair_label: list[str] = []
        pair_exit = np.zeros(num_pairs, dtype=np.float64)
        tr_ptr = np.zeros(num_pairs + 1, dtype=np.int64)
        tr_target = np.zeros(num_records, dtype=np.int32)
        tr_rate = np.zeros(num_records, dtype=np.float64)

        pair = 0
        pos = 0
        for s in range(num_states):
            for label in sorted(per_state[s], key=_label_key):
                pair_label.append(label)
                tr_ptr[pair] = pos
                exit_rate = 0.0
                for target, rate in per_state[s][label]:
                    tr_target[pos] = target
                    tr_rate[pos] = rate
                    exit_rate += rate
                    pos += 1
                pair_exit[pair] = exit_rate
                pair += 1
            state_ptr[s + 1] = pair
        tr_ptr[num_pairs] = pos

        with np.errstate(divide="ignore", invalid="ignore"):
            exits_per_record = np.repeat(pair_exit, np.diff(tr_ptr))
            tr_prob = np.where(exits_per_record > 0.0, tr_rate / exits_per_record, np.nan)

        self.num_states = num_states
        self.initial = int(initial)
        self.goals = goal_set
        self._state_ptr = state_ptr
        self._pair_label = tuple(pair_label)
        self._pair_exit = pair_exit
        self._tr_ptr = tr_ptr
        self._tr_target = tr_target
        self._tr_rate = tr_rate
        self._tr_prob = tr_prob
        self._max_exit = float(pair_exit.max()) if num_pairs else 0.0

    # -- elementary queries -------------------------------------------------

    def actions(self, state: StateId) -> tuple[str, ...]:
        """Enabled action labels of ``state``, sorted by label bytes."""
        self._check_state(state)
        lo, hi = self._state_ptr[state], self._state_ptr[state + 1]
        return self._pair_label[lo:hi]

    def transitions(self, state: StateId, label: ActionLabel) -> tuple[tuple[int, float], ...]:
        """``(target, rate)`` entries of ``(state, label)`` in stored order."""
        pair = self._pair_index(state, label)
        lo, hi = self._tr_ptr[pair], self._tr_ptr[pair + 1]
        return tuple(
            (int(self._tr_target[j]), float(self._tr_rate[j])) for j in range(lo, hi)
        )

    def exit_rate(self, state: StateId, label: ActionLabel) -> float:
        """Total outgoing rate of ``(state, label)``.

        Summed in stored transition order, so the result is reproducible
        bit-for-bit for a given input ordering.
        """
        return float(self._pair_exit[self._pair_index(state, label)])

    def branch_distribution(self, state: StateId, label: ActionLabel) -> tuple[tuple[int, float], ...]:
        """Successor probabilities of ``(state, label)``: rates over their sum."""
        pair = self._pair_index(state, label)
        lo, hi = self._tr_ptr[pair], self._tr_ptr[pair + 1]
        return tuple(
            (int(self._tr_target[j]), float(self._tr_prob[j])) for j in range(lo, hi)
        )

    @property
    def max_exit_rate(self) -> float:
        """Maximum of ``exit_rate`` over all (state, action) pairs."""
        return self._max_exit

    @property
    def num_transitions(self) -> int:
        return int(self._tr_ptr[-1])

    def records(self) -> Iterator[TransitionRecord]:
        """All transition records in storage order."""
        for s in range(self.num_states):
            for pair in range(self._state_ptr[s], self._state_ptr[s + 1]):
                label = self._pair_label[pair]
                for j in range(self._tr_ptr[pair], self._tr_ptr[pair + 1]):
                    yield (s, label, int(self._tr_target[j]), float(self._tr_rate[j]))

    # -- validation ----------------------------------------------------------

    def validate(self) -> list[str]:
        """Check the model invariants; an empty list means the model is sound.

        Violations are data, not exceptions: each entry names the offending
        state/action so that callers can surface every problem at once.
        """
        violations: list[str] = []
        for s in range(self.num_states):
            if self._state_ptr[s] == self._state_ptr[s + 1]:
                violations.append(f"state {s} has no enabled action")
        for s in range(self.num_states):
            for pair in range(self._state_ptr[s], self._state_ptr[s + 1]):
                label = self._pair_label[pair]
                for j in range(self._tr_ptr[pair], self._tr_ptr[pair + 1]):
                    if not self._tr_rate[j] > 0.0:
                        violations.append(
                            f"non-positive rate on ({s}, {label!r}, {int(self._tr_target[j])})"
                        )
        return violations

    # -- transformations -----------------------------------------------------

    def make_goals_absorbing(self) -> "CtmdpModel":
        """Replace every goal state's actions by a single self-loop at the maximal exit rate.

        Reaching a goal settles a reachability query, so what happens
        afterwards cannot change any value; the returned model is therefore
        value-equivalent.  Models without goal states are returned as-is.
        The retained label is the lexicographically smallest one the goal
        state enabled.
        """
        if not self.goals:
            return self
        lam = self.max_exit_rate
        records: list[TransitionRecord] = []
        for s in range(self.num_states):
            if s in self.goals:
                lo, hi = self._state_ptr[s], self._state_ptr[s + 1]
                if lo == hi:
                    raise ModelError(f"state {s} has no enabled action")
                records.append((s, self._pair_label[lo], s, lam))
            else:
                for pair in range(self._state_ptr[s], self._state_ptr[s + 1]):
                    label = self._pair_label[pair]
                    for j in range(self._tr_ptr[pair], self._tr_ptr[pair + 1]):
                        records.append((s, label, int(self._tr_target[j]), float(self._tr_rate[j])))
        return CtmdpModel(self.num_states, self.initial, self.goals, records)

    def restrict_to_action(self, state: StateId, label: ActionLabel) -> "CtmdpModel":
        """New model in which ``state`` enables only ``label``; other states unchanged.

        Solving the restricted model values the commitment to ``label`` at
        that state (against otherwise optimal behaviour).
        """
        self._pair_index(state, label)  # raises if not enabled
        records = [
            rec for rec in self.records() if rec[0] != state or rec[1] == label
        ]
        return CtmdpModel(self.num_states, self.initial, self.goals, records)

    # -- plumbing --------------------------------------------------------------

    def _check_state(self, state: StateId) -> None:
        if not 0 <= state < self.num_states:
            raise ModelError(f"state {state} out of range [0, {self.num_states})")

    def _pair_index(self, state: StateId, label: ActionLabel) -> int:
        self._check_state(state)
        for pair in range(self._state_ptr[state], self._state_ptr[state + 1]):
            if self._pair_label[pair] == label:
                return pair
        raise ModelError(f"action {label!r} not enabled in state {state}")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CtmdpModel):
            return NotImplemented
        if (
            self.num_states != other.num_states
            or self.initial != other.initial
            or self.goals != other.goals
        ):
            return False
        return sorted(self.records()) == sorted(other.records())

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return (
            f"CtmdpModel(num_states={self.num_states}, initial={self.initial}, "
            f"goals={sorted(self.goals)}, transitions={self.num_transitions})"
        )


def reachable_states(model: CtmdpModel, source: StateId | None = None) -> frozenset[int]:
    """States reachable from ``source`` (default: the initial state) via positive rates."""
    start = model.initial if source is None else source
    model._check_state(start)
    seen = {start}
    stack = [start]
    ptr, tgt = model._state_ptr, model._tr_target
    tr_ptr, rates = model._tr_ptr, model._tr_rate
    while stack:
        s = stack.pop()
        for pair in range(ptr[s], ptr[s + 1]):
            for j in range(tr_ptr[pair], tr_ptr[pair + 1]):
                if rates[j] > 0.0:
                    t = int(tgt[j])
                    if t not in seen:
                        seen.add(t)
                        stack.append(t)
    return frozenset(seen)
