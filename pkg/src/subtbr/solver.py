"""Discretization solver for optimal time-bounded reachability.

The continuous-time value is the fixed point of the Bellman integral
recursion; discretizing the horizon ``T`` into ``N`` slices of width
``delta = T / N`` and allowing at most one jump per slice yields the
backward recursion

    v_0(s)  = 1 if s is a goal else 0
    v_i(s)  = opt_a [ (1 - e^{-E(s,a) delta}) * sum_t p(s,a,t) v_{i-1}(t)
                      + e^{-E(s,a) delta} * v_{i-1}(s) ]          (s not goal)
    v_i(s)  = 1                                                    (s goal)

whose final vector ``v_N`` under-approximates the true value with an
a-priori error of at most ``(lam * T)^2 / (2 N)`` for ``lam`` the model's
maximal exit rate.  Step counts are chosen as
``N = ceil((lam T)^2 / (2 eps))`` so the bound is at most ``eps``.

Besides the per-state values the solver extracts the optimizing decision
per (step, state) as a :class:`StepScheduler`: a piecewise-constant (in
remaining time) deterministic decision table.  Decisions are stored as
breakpoints, i.e. an entry at step ``i`` persists for all later steps
until overridden, and states without entries resolve to the
lexicographically smallest enabled action.  This keeps the table small
even for step counts in the hundreds of millions, where one entry per
step could never be materialised.

Everything here is deterministic: fixed iteration order over states and
actions, ties broken towards the lexicographically smallest label, and
bit-identical outputs for identical inputs.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

import numpy as np

from . import _kernels
from .model import ActionLabel, CtmdpModel, ModelError, StateId

DEFAULT_STEP_CAP = 500_000_000

_VALUE_LOW_TOL = 1e-12
_VALUE_HIGH_TOL = 1e-9


class SolverError(ValueError):
    """Raised when a requested precision cannot be met within the step cap."""


class Objective(Enum):
    MAXIMIZE = "max"
    MINIMIZE = "min"

    @classmethod
    def parse(cls, token: str) -> "Objective":
        for member in cls:
            if member.value == token:
                return member
        raise ValueError(f"objective must be 'max' or 'min', got {token!r}")


def step_count(
    max_exit_rate: float,
    horizon: float,
    epsilon: float,
    step_cap: int = DEFAULT_STEP_CAP,
) -> int:
    """Number of slices needed for an a-priori error of at most ``epsilon``.

    ``N = ceil((lam T)^2 / (2 eps))``, at least 1.  Raises
    :class:`SolverError` when ``N`` exceeds ``step_cap``; the caller must
    loosen ``epsilon`` or raise the cap.
    """
    if not max_exit_rate > 0.0:
        raise ValueError(f"max exit rate must be positive, got {max_exit_rate}")
    if not horizon > 0.0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"precision must lie in (0, 1), got {epsilon}")
    if step_cap < 1:
        raise ValueError(f"step cap must be positive, got {step_cap}")
    steps = max(1, math.ceil((max_exit_rate * horizon) ** 2 / (2.0 * epsilon)))
    if steps > step_cap:
        raise SolverError(
            f"precision unattainable: {steps} steps exceed the cap of {step_cap}"
            f" (loosen the precision or raise the cap)"
        )
    return steps


@dataclass(frozen=True)
class StepScheduler:
    """Deterministic decision table over a step grid of ``num_steps`` slices of width ``delta``.

    ``decisions`` maps a state to ascending ``(step, label)`` breakpoints;
    the decision at step ``i`` is the latest breakpoint with step ``<= i``.
    States (or steps) without an applicable entry fall back to the
    lexicographically smallest enabled action of the state.  At remaining
    time ``r`` the applicable step is ``clamp(ceil(r / delta), 1,
    num_steps)``; non-positive remaining time falls back.
    """

    delta: float
    num_steps: int
    objective: Objective
    decisions: Mapping[StateId, tuple[tuple[int, ActionLabel], ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.num_steps < 0:
            raise ValueError("num_steps must be non-negative")
        if self.num_steps > 0 and not self.delta > 0.0:
            raise ValueError("delta must be positive for a non-empty grid")
        normalized: dict[int, tuple[tuple[int, str], ...]] = {}
        for state, entries in self.decisions.items():
            entries = tuple(sorted(entries))
            steps = [step for step, _ in entries]
            if len(set(steps)) != len(steps):
                raise ValueError(f"duplicate breakpoint steps for state {state}")
            for step, label in entries:
                if not 1 <= step <= max(self.num_steps, 1):
                    raise ValueError(
                        f"breakpoint step {step} for state {state} outside [1, {self.num_steps}]"
                    )
                if not label:
                    raise ValueError(f"empty action label for state {state}")
            normalized[int(state)] = entries
        object.__setattr__(self, "decisions", normalized)
        object.__setattr__(
            self,
            "_steps_index",
            {state: tuple(step for step, _ in entries) for state, entries in normalized.items()},
        )

    @property
    def horizon(self) -> float:
        return self.delta * self.num_steps

    def lookup(self, state: StateId, step: int) -> ActionLabel | None:
        """Label decided for ``state`` at ``step``, or None for the fallback."""
        entries = self.decisions.get(state)
        if not entries:
            return None
        idx = bisect_right(self._steps_index[state], step) - 1
        if idx < 0:
            return None
        return entries[idx][1]

    def step_for_remaining(self, remaining: float) -> int:
        """Grid step applicable at ``remaining`` time units; 0 means fallback."""
        if self.num_steps == 0 or remaining <= 0.0:
            return 0
        return min(max(math.ceil(remaining / self.delta), 1), self.num_steps)

    def action_at(self, model: CtmdpModel, state: StateId, remaining: float) -> ActionLabel:
        """Decision for ``state`` at ``remaining`` time, resolving the fallback."""
        step = self.step_for_remaining(remaining)
        label = self.lookup(state, step) if step else None
        if label is None:
            return model.actions(state)[0]
        return label

    def to_json_dict(self) -> dict:
        by_step: dict[int, dict[int, str]] = {}
        for state in sorted(self.decisions):
            for step, label in self.decisions[state]:
                by_step.setdefault(step, {})[state] = label
        return {
            "delta": self.delta,
            "num_steps": self.num_steps,
            "objective": self.objective.value,
            "fallback": "lex-min",
            "decisions": {
                str(step): {str(state): by_step[step][state] for state in sorted(by_step[step])}
                for step in sorted(by_step)
            },
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "StepScheduler":
        fallback = doc.get("fallback", "lex-min")
        if fallback != "lex-min":
            raise ValueError(f"unsupported fallback rule {fallback!r}")
        per_state: dict[int, list[tuple[int, str]]] = {}
        for step_key, states in doc.get("decisions", {}).items():
            step = int(step_key)
            for state_key, label in states.items():
                per_state.setdefault(int(state_key), []).append((step, str(label)))
        return cls(
            delta=float(doc["delta"]),
            num_steps=int(doc["num_steps"]),
            objective=Objective.parse(doc.get("objective", "max")),
            decisions={s: tuple(v) for s, v in per_state.items()},
        )


def fallback_scheduler(horizon: float, objective: Objective = Objective.MAXIMIZE) -> StepScheduler:
    """Scheduler with no table entries: every state uses the lex-min action."""
    if horizon > 0.0:
        return StepScheduler(delta=horizon, num_steps=1, objective=objective)
    return StepScheduler(delta=0.0, num_steps=0, objective=objective)


def save_scheduler(path: str, scheduler: StepScheduler) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(scheduler.to_json_dict(), handle, indent=2)
        handle.write("\n")


def load_scheduler(path: str) -> StepScheduler:
    with open(path, "r", encoding="utf-8") as handle:
        return StepScheduler.from_json_dict(json.load(handle))


@dataclass(frozen=True)
class SolveOutcome:
    """Result of a solve: per-state values, error bound, and the optimal decisions.

    For maximization, ``values[s]`` is a sound lower bound of the true
    value of ``s`` and ``values[s] + apriori_bound`` a sound upper bound
    (for minimization the same one-sided relation holds).
    """

    values: np.ndarray
    value_at_initial: float
    apriori_bound: float
    scheduler: StepScheduler
    num_steps: int


class _CompiledModel:
    """Kernel-ready layout: simple states first, then general, goals at the end.

    A state is *simple* when it is not a goal, enables exactly one action,
    and that action has exactly one transition; such states dominate
    chain-like models and take the flat fast path in the kernels.
    """

    def __init__(self, model: CtmdpModel):
        n = model.num_states
        ptr = model._state_ptr
        tr_ptr = model._tr_ptr
        goal = np.zeros(n, dtype=bool)
        for g in model.goals:
            goal[g] = True

        simple_states: list[int] = []
        general_states: list[int] = []
        for s in range(n):
            if goal[s]:
                continue
            lo, hi = ptr[s], ptr[s + 1]
            if lo == hi:
                raise ModelError(f"state {s} has no enabled action")
            if hi - lo == 1 and tr_ptr[lo + 1] - tr_ptr[lo] == 1:
                simple_states.append(s)
            else:
                general_states.append(s)
        goal_states = sorted(model.goals)

        perm = np.array(simple_states + general_states + goal_states, dtype=np.int64)
        inv = np.empty(n, dtype=np.int64)
        inv[perm] = np.arange(n, dtype=np.int64)

        ns = len(simple_states)
        self.n_simple = ns
        self.s_tgt = np.empty(ns, dtype=np.int32)
        self.s_exit = np.empty(ns, dtype=np.float64)
        for k, s in enumerate(simple_states):
            pair = ptr[s]
            self.s_tgt[k] = inv[model._tr_target[tr_ptr[pair]]]
            self.s_exit[k] = model._pair_exit[pair]

        ng = len(general_states)
        self.n_general = ng
        self.g_state = np.empty(ng, dtype=np.int32)
        self.g_ptr = np.zeros(ng + 1, dtype=np.int64)
        p_exit: list[float] = []
        p_pair: list[int] = []
        csr_tr_ptr: list[int] = [0]
        csr_tgt: list[int] = []
        csr_prob: list[float] = []
        for k, s in enumerate(general_states):
            self.g_state[k] = inv[s]
            for pair in range(ptr[s], ptr[s + 1]):
                p_exit.append(float(model._pair_exit[pair]))
                p_pair.append(pair)
                for j in range(tr_ptr[pair], tr_ptr[pair + 1]):
                    csr_tgt.append(int(inv[model._tr_target[j]]))
                    csr_prob.append(float(model._tr_prob[j]))
                csr_tr_ptr.append(len(csr_tgt))
            self.g_ptr[k + 1] = len(p_exit)
        self.p_exit = np.array(p_exit, dtype=np.float64)
        self.p_pair = np.array(p_pair, dtype=np.int64)
        self.tr_ptr = np.array(csr_tr_ptr, dtype=np.int64)
        self.tr_tgt = np.array(csr_tgt, dtype=np.int32)
        self.tr_prob = np.array(csr_prob, dtype=np.float64)

        self.perm = perm
        self.inv = inv
        self.model = model
        self.general_model_states = general_states

    def initial_values(self) -> tuple[np.ndarray, np.ndarray]:
        n = self.model.num_states
        v = np.zeros(n, dtype=np.float64)
        v[self.n_simple + self.n_general :] = 1.0
        return v, v.copy()

    def values_in_model_order(self, v: np.ndarray) -> np.ndarray:
        out = np.empty_like(v)
        out[self.perm] = v
        return out

    def csr_pair_for_label(self, k: int, label: str) -> int:
        """CSR pair index of ``label`` for general state ``k``; raises if disabled."""
        s = self.general_model_states[k]
        model = self.model
        for p in range(self.g_ptr[k], self.g_ptr[k + 1]):
            if model._pair_label[self.p_pair[p]] == label:
                return int(p)
        raise ModelError(f"action {label!r} not enabled in state {s}")


def _check_values(values: np.ndarray) -> None:
    # Out-of-range values indicate a recursion bug; never clamp them away.
    low = float(values.min(initial=0.0))
    high = float(values.max(initial=0.0))
    if low < -_VALUE_LOW_TOL or high > 1.0 + _VALUE_HIGH_TOL:
        raise SolverError(f"value recursion left [0, 1]: min={low!r}, max={high!r}")


def _trivial_outcome(model: CtmdpModel, objective: Objective) -> SolveOutcome:
    values = np.zeros(model.num_states, dtype=np.float64)
    for g in model.goals:
        values[g] = 1.0
    values.flags.writeable = False
    return SolveOutcome(
        values=values,
        value_at_initial=float(values[model.initial]),
        apriori_bound=0.0,
        scheduler=StepScheduler(0.0, 0, objective),
        num_steps=0,
    )


def solve_tbr(
    model: CtmdpModel,
    horizon: float,
    objective: Objective = Objective.MAXIMIZE,
    epsilon: float = 1e-3,
    step_cap: int = DEFAULT_STEP_CAP,
) -> SolveOutcome:
    """Optimal time-bounded reachability values of ``model`` within ``horizon``.

    Runs the N-step backward recursion at a grid fine enough for an
    a-priori error of at most ``epsilon`` and returns the final value
    vector (indexed by state), the bound actually achieved, and the
    arg-optimal :class:`StepScheduler`.  ``horizon == 0`` short-circuits
    to the goal indicator with an empty scheduler.
    """
    if horizon < 0.0:
        raise ValueError(f"horizon must be non-negative, got {horizon}")
    if horizon == 0.0:
        return _trivial_outcome(model, objective)

    lam = model.max_exit_rate
    steps = step_count(lam, horizon, epsilon, step_cap)
    delta = horizon / steps
    apriori = (lam * horizon) ** 2 / (2.0 * steps)
    compiled = _CompiledModel(model)
    maximize = objective is Objective.MAXIMIZE

    if not model.goals:
        # The all-zero vector is a fixed point and every q-value ties at 0,
        # so the recursion resolves to the lex-min action at step 1 for
        # every state with a choice; skip the N-step walk.
        values = np.zeros(model.num_states, dtype=np.float64)
        values.flags.writeable = False
        decisions = {}
        for k in range(compiled.n_general):
            if compiled.g_ptr[k + 1] - compiled.g_ptr[k] > 1:
                s = compiled.general_model_states[k]
                decisions[s] = ((1, model.actions(s)[0]),)
        return SolveOutcome(
            values=values,
            value_at_initial=0.0,
            apriori_bound=apriori,
            scheduler=StepScheduler(delta, steps, objective, decisions),
            num_steps=steps,
        )

    s_pstay = np.exp(-compiled.s_exit * delta)
    s_pjump = 1.0 - s_pstay
    p_pstay = np.exp(-compiled.p_exit * delta)
    p_pjump = 1.0 - p_pstay

    switch_cap = 64 * max(compiled.n_general, 1) + 1024
    while True:
        v, vbuf = compiled.initial_values()
        prev_choice = np.full(compiled.n_general, -1, dtype=np.int64)
        sw_step = np.empty(switch_cap, dtype=np.int64)
        sw_gen = np.empty(switch_cap, dtype=np.int64)
        sw_pair = np.empty(switch_cap, dtype=np.int64)
        n_sw = _kernels.backward_induction(
            steps,
            compiled.n_simple,
            compiled.s_tgt,
            s_pjump,
            s_pstay,
            compiled.n_general,
            compiled.g_state,
            compiled.g_ptr,
            p_pjump,
            p_pstay,
            compiled.tr_ptr,
            compiled.tr_tgt,
            compiled.tr_prob,
            maximize,
            v,
            vbuf,
            True,
            prev_choice,
            sw_step,
            sw_gen,
            sw_pair,
        )
        if n_sw >= 0:
            break
        switch_cap *= 8

    values = compiled.values_in_model_order(v)
    _check_values(values)
    values.flags.writeable = False

    per_state: dict[int, list[tuple[int, str]]] = {}
    for idx in range(n_sw):
        k = int(sw_gen[idx])
        s = compiled.general_model_states[k]
        label = model._pair_label[compiled.p_pair[sw_pair[idx]]]
        per_state.setdefault(s, []).append((int(sw_step[idx]), label))
    decisions = {s: tuple(entries) for s, entries in per_state.items()}

    return SolveOutcome(
        values=values,
        value_at_initial=float(values[model.initial]),
        apriori_bound=apriori,
        scheduler=StepScheduler(delta, steps, objective, decisions),
        num_steps=steps,
    )


def evaluate_scheduler(
    model: CtmdpModel,
    scheduler: StepScheduler,
    horizon: float,
    epsilon: float = 1e-3,
    step_cap: int = DEFAULT_STEP_CAP,
) -> float:
    """Value at the initial state when ``scheduler`` fixes every decision.

    Runs the same recursion as :func:`solve_tbr` with the optimization
    replaced by the scheduler's decision per (step, state); where the
    table has no applicable entry the lexicographically smallest enabled
    action is used.  Grids need not match: this solve's step ``i`` maps to
    the scheduler's grid by remaining time, ``clamp(ceil(i * delta /
    sched.delta), 1, sched.num_steps)``.  Decisions naming actions that
    are not enabled raise :class:`~subtbr.model.ModelError`.
    """
    if horizon < 0.0:
        raise ValueError(f"horizon must be non-negative, got {horizon}")
    for state, entries in scheduler.decisions.items():
        if not 0 <= state < model.num_states:
            raise ModelError(f"scheduler references unknown state {state}")
        enabled = model.actions(state)
        for _, label in entries:
            if label not in enabled:
                raise ModelError(f"action {label!r} not enabled in state {state}")
    if horizon == 0.0:
        return 1.0 if model.initial in model.goals else 0.0
    if not model.goals:
        return 0.0

    lam = model.max_exit_rate
    steps = step_count(lam, horizon, epsilon, step_cap)
    delta = horizon / steps
    compiled = _CompiledModel(model)

    bp_ptr = np.zeros(compiled.n_general + 1, dtype=np.int64)
    bp_step: list[int] = []
    bp_pair: list[int] = []
    for k in range(compiled.n_general):
        s = compiled.general_model_states[k]
        for step, label in scheduler.decisions.get(s, ()):
            bp_step.append(step)
            bp_pair.append(compiled.csr_pair_for_label(k, label))
        bp_ptr[k + 1] = len(bp_step)
    bp_step_arr = np.array(bp_step, dtype=np.int64)
    bp_pair_arr = np.array(bp_pair, dtype=np.int64)
    cursor = bp_ptr[:-1].copy() - 1

    s_pstay = np.exp(-compiled.s_exit * delta)
    s_pjump = 1.0 - s_pstay
    p_pstay = np.exp(-compiled.p_exit * delta)
    p_pjump = 1.0 - p_pstay
    grid_ratio = delta / scheduler.delta if scheduler.num_steps > 0 else 0.0

    v, vbuf = compiled.initial_values()
    _kernels.scheduled_induction(
        steps,
        compiled.n_simple,
        compiled.s_tgt,
        s_pjump,
        s_pstay,
        compiled.n_general,
        compiled.g_state,
        compiled.g_ptr,
        p_pjump,
        p_pstay,
        compiled.tr_ptr,
        compiled.tr_tgt,
        compiled.tr_prob,
        grid_ratio,
        scheduler.num_steps,
        bp_ptr,
        bp_step_arr,
        bp_pair_arr,
        cursor,
        v,
        vbuf,
    )
    values = compiled.values_in_model_order(v)
    _check_values(values)
    return float(values[model.initial])
