"""Command-line front end.

Four subcommands: ``generate`` writes benchmark models in the explicit
text format, ``solve`` runs the subspace loop (or a whole-model solve
with ``--full``), ``greedy`` runs the greedy reduction, and ``evaluate``
plays a stored decision table against a model.  Results are emitted as
JSON documents; ``solve`` output validates against
``schemas/result.schema.json``.

Exit codes: 0 on success (``solve``: bounds converged), 1 on usage or
input errors, 2 when ``solve`` finishes without convergence (bounds are
still emitted).
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Sequence

from .greedy import greedy_min_subset
from .model import ModelError
from .modelio import ParseError, gen_erlang, gen_polling, gen_two_chain, parse_model, serialize_model
from .solver import (
    Objective,
    evaluate_scheduler,
    load_scheduler,
    save_scheduler,
    solve_tbr,
)
from .subspace import GuidePolicy, SubspaceConfig, subspace_tbr


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: A003 - argparse API
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="subtbr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="bound the reachability value of a model")
    solve.add_argument("--model", required=True, help="model file in the explicit text format")
    solve.add_argument("--time-bound", type=float, required=True)
    solve.add_argument("--epsilon", type=float, required=True)
    solve.add_argument("--objective", choices=["max", "min"], default="max")
    solve.add_argument("--solver-epsilon", type=float, default=None)
    solve.add_argument("--nsim", type=int, default=1000)
    solve.add_argument(
        "--sim-scheduler", choices=["uniform", "optimal", "alternate"], default="uniform"
    )
    solve.add_argument("--seed", type=int, default=0)
    solve.add_argument("--max-iterations", type=int, default=1000)
    solve.add_argument("--full", action="store_true", help="solve the whole model instead")
    solve.add_argument("--emit-scheduler", metavar="FILE", default=None)
    solve.add_argument("--output", metavar="FILE", default=None)

    generate = sub.add_parser("generate", help="write a benchmark model")
    generate.add_argument("family", choices=["erlang", "twochain", "polling"])
    generate.add_argument("--out", required=True)
    generate.add_argument("--k", type=int, help="erlang: chain length; polling: queue capacity")
    generate.add_argument("--r", type=float, help="erlang: stage rate")
    generate.add_argument("--fast-rate", type=float, default=10.0)
    generate.add_argument("--fast-success", type=float, default=0.5)
    generate.add_argument("--variant", choices=["a", "b"], help="twochain variant")
    generate.add_argument("--j", type=int, help="polling: number of stations")
    generate.add_argument("--goal", choices=["all", "one"], help="polling goal mode")
    generate.add_argument("--lambda-arr", type=float, default=1.0)
    generate.add_argument("--mu", type=float, default=4.0)
    generate.add_argument("--q-succ", type=float, default=0.9)

    greedy = sub.add_parser("greedy", help="greedy search for a small value-preserving subset")
    greedy.add_argument("--model", required=True)
    greedy.add_argument("--time-bound", type=float, required=True)
    greedy.add_argument("--epsilon", type=float, required=True)
    greedy.add_argument("--solver-epsilon", type=float, default=None)
    greedy.add_argument("--objective", choices=["max", "min"], default="max")
    greedy.add_argument("--output", metavar="FILE", default=None)

    evaluate = sub.add_parser("evaluate", help="value of a stored decision table on a model")
    evaluate.add_argument("--model", required=True)
    evaluate.add_argument("--scheduler", required=True)
    evaluate.add_argument("--time-bound", type=float, required=True)
    evaluate.add_argument("--solver-epsilon", type=float, default=1e-3)
    evaluate.add_argument("--output", metavar="FILE", default=None)

    return parser


def _load_model(path: str):
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise _UsageError(f"cannot read model file {path}: {exc}") from exc
    return parse_model(text)


def _emit(doc: dict, output: str | None) -> None:
    text = json.dumps(doc, indent=2) + "\n"
    if output is None:
        sys.stdout.write(text)
    else:
        with open(output, "w", encoding="utf-8") as handle:
            handle.write(text)


def _cmd_solve(args: argparse.Namespace) -> int:
    model = _load_model(args.model)
    objective = Objective.parse(args.objective)
    solver_epsilon = args.solver_epsilon
    if solver_epsilon is None:
        solver_epsilon = args.epsilon / 10.0

    if args.full:
        outcome = solve_tbr(model, args.time_bound, objective, solver_epsilon)
        lower = outcome.value_at_initial
        upper = min(1.0, lower + outcome.apriori_bound)
        converged = upper - lower < args.epsilon
        iterations: list[dict] = []
        explored = model.num_states
        scheduler = outcome.scheduler
        steps = outcome.num_steps
        apriori = outcome.apriori_bound
    else:
        config = SubspaceConfig(
            epsilon=args.epsilon,
            solver_epsilon=solver_epsilon,
            n_sim=args.nsim,
            guide=GuidePolicy.parse(args.sim_scheduler),
            objective=objective,
            master_seed=args.seed,
            max_iterations=args.max_iterations,
        )
        result = subspace_tbr(model, args.time_bound, config)
        lower = result.lower
        upper = result.upper
        converged = result.converged
        iterations = [
            {
                "iteration": it.iteration,
                "explored": it.explored,
                "lower": it.lower,
                "upper": it.upper,
                "wall_ms": it.wall_ms,
            }
            for it in result.iterations
        ]
        explored = len(result.explored)
        scheduler = result.scheduler
        steps = result.solver_steps
        apriori = result.solver_apriori

    doc = {
        "model": args.model,
        "num_states": model.num_states,
        "explored": explored,
        "iterations": iterations,
        "lower": lower,
        "upper": upper,
        "epsilon": args.epsilon,
        "time_bound": args.time_bound,
        "objective": objective.value,
        "converged": converged,
        "seed": args.seed,
        "solver": {"name": "discretization", "steps": steps, "apriori_bound": apriori},
    }
    if args.emit_scheduler is not None:
        save_scheduler(args.emit_scheduler, scheduler)
        doc["scheduler_path"] = args.emit_scheduler
    _emit(doc, args.output)
    return 0 if converged else 2


def _cmd_generate(args: argparse.Namespace) -> int:
    if args.family == "erlang":
        if args.k is None or args.r is None:
            raise _UsageError("erlang requires --k and --r")
        model = gen_erlang(args.k, args.r, args.fast_rate, args.fast_success)
    elif args.family == "twochain":
        if args.variant is None:
            raise _UsageError("twochain requires --variant")
        model = gen_two_chain(args.variant)
    else:
        if args.j is None or args.k is None or args.goal is None:
            raise _UsageError("polling requires --j, --k and --goal")
        model = gen_polling(args.j, args.k, args.goal, args.lambda_arr, args.mu, args.q_succ)
    with open(args.out, "w", encoding="utf-8") as handle:
        handle.write(serialize_model(model))
    print(f"states {model.num_states} transitions {model.num_transitions}")
    return 0


def _cmd_greedy(args: argparse.Namespace) -> int:
    model = _load_model(args.model)
    solver_epsilon = args.solver_epsilon
    if solver_epsilon is None:
        solver_epsilon = args.epsilon / 10.0
    result = greedy_min_subset(
        model, args.time_bound, args.epsilon, solver_epsilon, Objective.parse(args.objective)
    )
    doc = {
        "model": args.model,
        "kept": sorted(result.kept),
        "kept_count": len(result.kept),
        "removed": sorted(result.removed),
        "final_gap": result.final_gap,
        "order": list(result.removal_order),
    }
    _emit(doc, args.output)
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    model = _load_model(args.model)
    try:
        scheduler = load_scheduler(args.scheduler)
    except OSError as exc:
        raise _UsageError(f"cannot read scheduler file {args.scheduler}: {exc}") from exc
    value = evaluate_scheduler(model, scheduler, args.time_bound, args.solver_epsilon)
    _emit({"value": value}, args.output)
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "generate":
            return _cmd_generate(args)
        if args.command == "greedy":
            return _cmd_greedy(args)
        return _cmd_evaluate(args)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ParseError, ModelError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
