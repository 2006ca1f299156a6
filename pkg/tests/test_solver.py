import json
import math

import numpy as np
import pytest

from subtbr import (
    CtmdpModel,
    ModelError,
    Objective,
    SolverError,
    StepScheduler,
    evaluate_scheduler,
    fallback_scheduler,
    gen_two_chain,
    load_scheduler,
    save_scheduler,
    solve_tbr,
    step_count,
)

from conftest import random_ctmdp, single_chain
from oracles import erlang_cdf


def test_step_count_formula():
    assert step_count(2.0, 1.0, 0.01) == 200


def test_step_count_floor_is_one():
    assert step_count(1.0, 1.0, 0.9) == 1


def test_step_count_cap_exceeded():
    with pytest.raises(SolverError, match="precision unattainable"):
        step_count(175.0, 3.0, 1e-4)
    # raising the cap admits the same request
    assert step_count(175.0, 3.0, 1e-4, step_cap=2_000_000_000) == 1_378_125_000


@pytest.mark.parametrize(
    "lam,horizon,eps",
    [(0.0, 1.0, 0.1), (1.0, 0.0, 0.1), (1.0, 1.0, 0.0), (1.0, 1.0, 1.0), (-1.0, 1.0, 0.5)],
)
def test_step_count_domain_errors(lam, horizon, eps):
    with pytest.raises(ValueError):
        step_count(lam, horizon, eps)


def test_single_exponential_matches_closed_form():
    m = CtmdpModel(2, 0, [1], [(0, "go", 1, 1.0), (1, "loop", 1, 1.0)])
    out = solve_tbr(m, 2.0, epsilon=1e-3)
    analytic = 1.0 - math.exp(-2.0)
    assert abs(out.value_at_initial - analytic) <= 1e-3
    assert 0.0 <= analytic - out.value_at_initial <= out.apriori_bound


def test_goal_initial_is_exactly_one():
    m = CtmdpModel(2, 0, [0], [(0, "a", 1, 1.0), (1, "l", 1, 1.0)])
    assert solve_tbr(m, 3.0, epsilon=0.01).value_at_initial == 1.0


def test_zero_horizon_returns_goal_indicator():
    m = single_chain(3, 2.0)
    out = solve_tbr(m, 0.0)
    assert out.num_steps == 0
    assert out.apriori_bound == 0.0
    assert list(out.values) == [0.0, 0.0, 0.0, 1.0]
    assert out.scheduler.num_steps == 0
    assert out.scheduler.decisions == {}


def test_negative_horizon_rejected():
    with pytest.raises(ValueError, match="non-negative"):
        solve_tbr(single_chain(1, 1.0), -1.0)


@pytest.mark.parametrize("stages,rate,horizon", [(2, 1.0, 2.0), (6, 0.5, 3.0), (21, 10.0, 2.0)])
def test_chain_value_one_sided_against_erlang_cdf(stages, rate, horizon):
    out = solve_tbr(single_chain(stages, rate), horizon, epsilon=1e-3)
    analytic = erlang_cdf(stages, rate, horizon)
    assert 0.0 <= analytic - out.value_at_initial <= out.apriori_bound


def test_values_stay_in_unit_interval_and_goals_pinned():
    for seed in range(8):
        m = random_ctmdp(seed)
        out = solve_tbr(m, 1.0, epsilon=1e-3)
        assert out.values.min() >= 0.0
        assert out.values.max() <= 1.0 + 1e-9
        for g in m.goals:
            assert out.values[g] == 1.0


def test_value_monotone_in_horizon():
    m = single_chain(3, 1.0)
    previous = 0.0
    for horizon in (0.5, 1.0, 2.0, 4.0):
        out = solve_tbr(m, horizon, epsilon=1e-3)
        assert out.value_at_initial >= previous - out.apriori_bound
        previous = out.value_at_initial


def test_objective_duality_on_single_action_models():
    m = single_chain(4, 1.5)
    vmax = solve_tbr(m, 2.0, Objective.MAXIMIZE, 1e-3)
    vmin = solve_tbr(m, 2.0, Objective.MINIMIZE, 1e-3)
    assert np.array_equal(vmax.values, vmin.values)


def test_solve_is_bit_deterministic():
    m = random_ctmdp(3)
    a = solve_tbr(m, 1.0, epsilon=1e-3)
    b = solve_tbr(m, 1.0, epsilon=1e-3)
    assert np.array_equal(a.values, b.values)
    assert a.scheduler == b.scheduler


def test_minimize_is_below_maximize():
    for seed in range(6):
        m = random_ctmdp(seed)
        vmax = solve_tbr(m, 1.0, Objective.MAXIMIZE, 1e-3).value_at_initial
        vmin = solve_tbr(m, 1.0, Objective.MINIMIZE, 1e-3).value_at_initial
        assert vmin <= vmax + 1e-12


def test_restricting_the_initial_choice_never_beats_the_optimum():
    for seed in range(5):
        m = random_ctmdp(seed)
        out = solve_tbr(m, 1.0, epsilon=1e-3)
        if m.initial in m.goals:
            continue
        committed = [
            solve_tbr(m.restrict_to_action(m.initial, label), 1.0, epsilon=1e-3).value_at_initial
            for label in m.actions(m.initial)
        ]
        assert max(committed) <= out.value_at_initial + 1e-9
        assert out.value_at_initial <= 1.0 + 1e-9


def test_restrict_to_action_requires_enabled_label():
    m = single_chain(2, 1.0)
    with pytest.raises(ModelError, match="not enabled"):
        m.restrict_to_action(0, "nope")
    restricted = m.restrict_to_action(0, "step")
    assert restricted == m


def test_no_goal_model_shortcut():
    m = CtmdpModel(
        2, 0, [], [(0, "a", 1, 1.0), (0, "b", 0, 2.0), (1, "l", 1, 1.0)]
    )
    out = solve_tbr(m, 5.0, epsilon=0.01)
    assert out.value_at_initial == 0.0
    assert list(out.values) == [0.0, 0.0]
    assert out.scheduler.decisions == {0: ((1, "a"),)}


def test_scheduler_consistency_reproduces_optimal_value():
    for seed in range(10):
        m = random_ctmdp(seed)
        out = solve_tbr(m, 1.0, epsilon=1e-3)
        replay = evaluate_scheduler(m, out.scheduler, 1.0, epsilon=1e-3)
        assert replay >= out.value_at_initial - 1e-12 * out.num_steps
        assert replay <= out.value_at_initial + 1e-12 * out.num_steps + 1e-12


def test_evaluate_on_single_action_model_equals_solve():
    m = single_chain(5, 2.0)
    out = solve_tbr(m, 2.0, epsilon=1e-3)
    # any table at all: single-action states always resolve via the fallback
    static = fallback_scheduler(2.0)
    assert evaluate_scheduler(m, static, 2.0, epsilon=1e-3) == out.value_at_initial


def test_evaluate_fixed_beta_on_two_chain():
    m = gen_two_chain("a")
    beta_only = StepScheduler(
        delta=3.0, num_steps=1, objective=Objective.MAXIMIZE, decisions={0: ((1, "beta"),)}
    )
    value = evaluate_scheduler(m, beta_only, 3.0, epsilon=0.01)
    analytic = erlang_cdf(4, 0.5, 3.0)  # four rate-0.5 hops to the goal
    assert 0.0 <= analytic - value <= 0.01


def test_evaluate_rejects_disabled_action():
    m = single_chain(2, 1.0)
    bad = StepScheduler(
        delta=1.0, num_steps=1, objective=Objective.MAXIMIZE, decisions={0: ((1, "nope"),)}
    )
    with pytest.raises(ModelError, match="not enabled"):
        evaluate_scheduler(m, bad, 1.0)


def test_evaluate_rejects_unknown_state():
    m = single_chain(2, 1.0)
    bad = StepScheduler(
        delta=1.0, num_steps=1, objective=Objective.MAXIMIZE, decisions={17: ((1, "step"),)}
    )
    with pytest.raises(ModelError, match="unknown state"):
        evaluate_scheduler(m, bad, 1.0)


def test_evaluate_zero_horizon():
    m = single_chain(2, 1.0)
    assert evaluate_scheduler(m, fallback_scheduler(0.0), 0.0) == 0.0
    goal_start = CtmdpModel(1, 0, [0], [(0, "l", 0, 1.0)])
    assert evaluate_scheduler(goal_start, fallback_scheduler(0.0), 0.0) == 1.0


def test_step_scheduler_lookup_and_fallback():
    sched = StepScheduler(
        delta=0.5,
        num_steps=10,
        objective=Objective.MAXIMIZE,
        decisions={0: ((1, "a"), (4, "b")), 2: ((3, "c"),)},
    )
    assert sched.lookup(0, 1) == "a"
    assert sched.lookup(0, 3) == "a"
    assert sched.lookup(0, 4) == "b"
    assert sched.lookup(0, 10) == "b"
    assert sched.lookup(2, 2) is None
    assert sched.lookup(5, 7) is None
    assert sched.horizon == 5.0


def test_step_scheduler_step_for_remaining_clamps():
    sched = StepScheduler(delta=0.5, num_steps=10, objective=Objective.MAXIMIZE)
    assert sched.step_for_remaining(-1.0) == 0
    assert sched.step_for_remaining(0.0) == 0
    assert sched.step_for_remaining(1e-9) == 1
    assert sched.step_for_remaining(2.2) == 5
    assert sched.step_for_remaining(99.0) == 10


def test_step_scheduler_validation():
    with pytest.raises(ValueError, match="duplicate breakpoint"):
        StepScheduler(1.0, 5, Objective.MAXIMIZE, {0: ((1, "a"), (1, "b"))})
    with pytest.raises(ValueError, match="outside"):
        StepScheduler(1.0, 5, Objective.MAXIMIZE, {0: ((9, "a"),)})
    with pytest.raises(ValueError, match="outside"):
        StepScheduler(1.0, 5, Objective.MAXIMIZE, {0: ((0, "a"),)})
    with pytest.raises(ValueError, match="delta"):
        StepScheduler(0.0, 5, Objective.MAXIMIZE)


def test_scheduler_json_round_trip(tmp_path):
    sched = StepScheduler(
        delta=0.25,
        num_steps=12,
        objective=Objective.MINIMIZE,
        decisions={3: ((1, "a"), (7, "b")), 0: ((2, "c"),)},
    )
    path = tmp_path / "sched.json"
    save_scheduler(str(path), sched)
    again = load_scheduler(str(path))
    assert again == sched
    doc = json.loads(path.read_text())
    assert doc["fallback"] == "lex-min"
    assert doc["objective"] == "min"
    assert doc["decisions"]["1"] == {"3": "a"}


def test_scheduler_json_rejects_unknown_fallback():
    with pytest.raises(ValueError, match="fallback"):
        StepScheduler.from_json_dict(
            {"delta": 1.0, "num_steps": 1, "objective": "max", "fallback": "round-robin"}
        )


def test_apriori_bound_matches_grid():
    m = single_chain(2, 2.0)
    out = solve_tbr(m, 1.5, epsilon=1e-3)
    lam_t = m.max_exit_rate * 1.5
    assert out.num_steps == math.ceil(lam_t**2 / (2 * 1e-3))
    assert out.apriori_bound == lam_t**2 / (2 * out.num_steps)
    assert out.apriori_bound <= 1e-3
