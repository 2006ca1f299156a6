"""Text format and programmatic generators for explicit CTMDPs.

The on-disk format is line-oriented and bit-exact under round-trips::

    # '#' starts a comment line; blank lines are ignored
    ctmdp
    states <N>
    initial <id>
    goal <id> [<id> ...]
    transition <s> <label> <s'> <rate>

``ctmdp`` must be the first non-comment token.  ``states``, ``initial``
and ``goal`` appear exactly once each; ``goal`` may list zero ids.  After
the leading ``ctmdp`` token, header lines and transition records may come
in any order.  Ids are decimal in ``[0, N)``; rates are positive decimal
or scientific-notation literals.

Serialisation is canonical: headers in fixed order, goal ids ascending,
transitions sorted by ``(source, label, target)``, rates printed in their
shortest round-tripping decimal form.  ``parse(serialize(m))`` therefore
reproduces ``m`` exactly, and serialisation of a parsed document is a
fixpoint.
"""

from __future__ import annotations

import math
import re
from typing import Sequence

from .model import CtmdpModel, ModelError, TransitionRecord

_INT_RE = re.compile(r"^\d+$")
_TOKEN_RE = re.compile(r"\S+")


class ParseError(ValueError):
    """Model text rejected; carries a 1-based line and column when known."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None and column is not None:
            message = f"line {line}, column {column}: {message}"
        elif line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def _tokenize(text: str) -> list[tuple[int, list[tuple[str, int]]]]:
    """Token lists per meaningful line as ``(lineno, [(token, column), ...])``."""
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        toks = [(m.group(0), m.start() + 1) for m in _TOKEN_RE.finditer(raw)]
        out.append((lineno, toks))
    return out


def _parse_id(token: str, column: int, lineno: int, num_states: int, what: str) -> int:
    if not _INT_RE.match(token):
        raise ParseError(f"{what} must be a decimal integer, got {token!r}", lineno, column)
    value = int(token)
    if value >= num_states:
        raise ParseError(
            f"{what} {value} out of range [0, {num_states})", lineno, column
        )
    return value


def _parse_rate(token: str, column: int, lineno: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"malformed rate literal {token!r}", lineno, column) from None
    if not math.isfinite(value) or value <= 0.0:
        raise ParseError(f"non-positive rate {token!r}", lineno, column)
    return value


def parse_model(text: str) -> CtmdpModel:
    """Parse a model document and return a validated :class:`CtmdpModel`.

    Raises :class:`ParseError` with line/column information on syntax
    errors, out-of-range ids, duplicate transitions, duplicate or missing
    headers, states without any action, and non-positive rates.
    """
    lines = _tokenize(text)
    if not lines:
        raise ParseError("empty document: expected leading 'ctmdp' token")
    first_lineno, first_tokens = lines[0]
    if first_tokens[0][0] != "ctmdp":
        raise ParseError(
            f"expected leading 'ctmdp' token, got {first_tokens[0][0]!r}",
            first_lineno,
            first_tokens[0][1],
        )
    if len(first_tokens) > 1:
        raise ParseError("unexpected tokens after 'ctmdp'", first_lineno, first_tokens[1][1])

    num_states: int | None = None
    initial: tuple[int, int, str] | None = None  # (lineno, column, token), resolved later
    goal_tokens: list[tuple[str, int]] | None = None
    goal_line: int | None = None
    raw_transitions: list[tuple[int, list[tuple[str, int]]]] = []

    for lineno, tokens in lines[1:]:
        keyword, column = tokens[0]
        args = tokens[1:]
        if keyword == "states":
            if num_states is not None:
                raise ParseError("duplicate 'states' header", lineno, column)
            if len(args) != 1:
                raise ParseError("'states' takes exactly one count", lineno, column)
            tok, col = args[0]
            if not _INT_RE.match(tok) or int(tok) < 1:
                raise ParseError(f"state count must be a positive integer, got {tok!r}", lineno, col)
            num_states = int(tok)
        elif keyword == "initial":
            if initial is not None:
                raise ParseError("duplicate 'initial' header", lineno, column)
            if len(args) != 1:
                raise ParseError("'initial' takes exactly one id", lineno, column)
            initial = (lineno, args[0][1], args[0][0])
        elif keyword == "goal":
            if goal_tokens is not None:
                raise ParseError("duplicate 'goal' header", lineno, column)
            goal_tokens = args
            goal_line = lineno
        elif keyword == "transition":
            if len(args) != 4:
                raise ParseError(
                    "'transition' takes source, label, target and rate", lineno, column
                )
            raw_transitions.append((lineno, args))
        elif keyword == "ctmdp":
            raise ParseError("duplicate 'ctmdp' token", lineno, column)
        else:
            raise ParseError(f"unknown record {keyword!r}", lineno, column)

    if num_states is None:
        raise ParseError("missing 'states' header")
    if initial is None:
        raise ParseError("missing 'initial' header")
    if goal_tokens is None:
        raise ParseError("missing 'goal' header")

    init_line, init_col, init_tok = initial
    initial_id = _parse_id(init_tok, init_col, init_line, num_states, "initial state")
    goals = [
        _parse_id(tok, col, goal_line, num_states, "goal state") for tok, col in goal_tokens
    ]

    records: list[TransitionRecord] = []
    seen: set[tuple[int, str, int]] = set()
    states_with_action: set[int] = set()
    for lineno, args in raw_transitions:
        (s_tok, s_col), (label, label_col), (t_tok, t_col), (r_tok, r_col) = args
        source = _parse_id(s_tok, s_col, lineno, num_states, "transition source")
        target = _parse_id(t_tok, t_col, lineno, num_states, "transition target")
        rate = _parse_rate(r_tok, r_col, lineno)
        key = (source, label, target)
        if key in seen:
            raise ParseError(
                f"duplicate transition ({source}, {label!r}, {target})", lineno, s_col
            )
        seen.add(key)
        states_with_action.add(source)
        records.append((source, label, target, rate))

    for s in range(num_states):
        if s not in states_with_action:
            raise ParseError(f"state {s} has no enabled action")

    try:
        model = CtmdpModel(num_states, initial_id, goals, records)
    except ModelError as exc:  # pre-checked above; defensive
        raise ParseError(str(exc)) from exc
    violations = model.validate()
    if violations:
        raise ParseError("; ".join(violations))
    return model


def serialize_model(model: CtmdpModel) -> str:
    """Canonical text form of ``model`` (see the module docstring)."""
    lines = ["ctmdp", f"states {model.num_states}", f"initial {model.initial}"]
    goal_ids = " ".join(str(g) for g in sorted(model.goals))
    lines.append(f"goal {goal_ids}".rstrip())
    for source, label, target, rate in sorted(
        model.records(), key=lambda r: (r[0], r[1].encode("utf-8"), r[2])
    ):
        lines.append(f"transition {source} {label} {target} {rate!r}")
    return "\n".join(lines) + "\n"


# -- generators ---------------------------------------------------------------


def gen_erlang(
    k: int,
    r: float,
    fast_rate: float = 10.0,
    fast_success: float = 0.5,
) -> CtmdpModel:
    """Two-route reachability benchmark: a risky shortcut against a long sure chain.

    From the initial state, action ``fast`` races to the goal with rate
    ``fast_rate * fast_success`` and to a dead trap with the complementary
    rate; action ``slow`` enters a ``k``-stage chain of rate ``r`` whose
    last stage feeds the goal.  Goal and trap absorb via rate-1 self-loops.
    States: ``0`` initial, ``1..k`` chain stages, ``k+1`` goal, ``k+2`` trap.

    The slow route alone reaches the goal within ``T`` with probability
    ``P(Erlang(k+1, r) <= T)``, which makes the family a closed-form
    yardstick for solvers.
    """
    if k < 1:
        raise ValueError("chain length k must be >= 1")
    if not (r > 0.0 and fast_rate > 0.0):
        raise ValueError("rates must be positive")
    if not 0.0 < fast_success < 1.0:
        raise ValueError("fast_success must lie in (0, 1)")
    goal = k + 1
    trap = k + 2
    records: list[TransitionRecord] = [
        (0, "fast", goal, fast_rate * fast_success),
        (0, "fast", trap, fast_rate * (1.0 - fast_success)),
        (0, "slow", 1, r),
    ]
    for i in range(1, k):
        records.append((i, "step", i + 1, r))
    records.append((k, "step", goal, r))
    records.append((goal, "loop", goal, 1.0))
    records.append((trap, "loop", trap, 1.0))
    return CtmdpModel(k + 3, 0, [goal], records)


_TWO_CHAIN_FAST_RATE = 175.0
_TWO_CHAIN_SLOW_LEFT = 0.51
_TWO_CHAIN_RIGHT = 0.5


def gen_two_chain(variant: str) -> CtmdpModel:
    """Two competing chains to a single goal, used to exercise exploration guides.

    Variant ``a``: action ``alpha`` at state 0 enters a 3-stage rate-0.51
    prefix followed by an 11-stage rate-175 sprint to the goal; action
    ``beta`` enters a 4-stage rate-0.5 chain to the same goal.  Variant
    ``b`` keeps the left chain and lengthens the right chain to 14 rate-0.5
    stages, making ``beta`` hopeless.  The goal absorbs at rate 1.
    """
    names = two_chain_names(variant)
    records: list[TransitionRecord] = []
    left = ["a1", "a2"] if variant == "a" else ["d1", "d2"]
    fast = [f"b{i}" for i in range(1, 12)] if variant == "a" else [f"e{i}" for i in range(1, 12)]
    right = [f"c{i}" for i in range(1, 4)] if variant == "a" else [f"f{i}" for i in range(1, 14)]
    g = names["g"]

    records.append((0, "alpha", names[left[0]], _TWO_CHAIN_SLOW_LEFT))
    records.append((names[left[0]], "step", names[left[1]], _TWO_CHAIN_SLOW_LEFT))
    records.append((names[left[1]], "step", names[fast[0]], _TWO_CHAIN_SLOW_LEFT))
    for a, b in zip(fast, fast[1:]):
        records.append((names[a], "step", names[b], _TWO_CHAIN_FAST_RATE))
    records.append((names[fast[-1]], "step", g, _TWO_CHAIN_FAST_RATE))

    records.append((0, "beta", names[right[0]], _TWO_CHAIN_RIGHT))
    for a, b in zip(right, right[1:]):
        records.append((names[a], "step", names[b], _TWO_CHAIN_RIGHT))
    records.append((names[right[-1]], "step", g, _TWO_CHAIN_RIGHT))

    records.append((g, "loop", g, 1.0))
    return CtmdpModel(len(names), 0, [g], records)


def two_chain_names(variant: str) -> dict[str, int]:
    """State-name to id mapping for :func:`gen_two_chain`."""
    if variant == "a":
        chain = ["a1", "a2", *[f"b{i}" for i in range(1, 12)], "c1", "c2", "c3"]
    elif variant == "b":
        chain = ["d1", "d2", *[f"e{i}" for i in range(1, 12)], *[f"f{i}" for i in range(1, 14)]]
    else:
        raise ValueError(f"variant must be 'a' or 'b', got {variant!r}")
    names = {"0": 0}
    for i, name in enumerate(chain, start=1):
        names[name] = i
    names["g"] = len(names)
    return names


def gen_polling(
    j: int,
    k: int,
    goal_mode: str,
    lam_arr: float = 1.0,
    mu: float = 4.0,
    q_succ: float = 0.9,
) -> CtmdpModel:
    """Polling system: ``j`` queues of capacity ``k`` served one at a time.

    A state is the vector of queue fills; the id enumerates the vectors in
    mixed radix ``k + 1`` (first queue most significant).  The initial
    state has every queue at ``k - 1``.  Whenever some queue is non-empty,
    one action ``serve_i`` exists per non-empty queue ``i``; it races the
    arrivals (rate ``lam_arr`` per non-full queue, arrivals to a full
    queue are lost) against a service completion (rate ``mu * q_succ``)
    and a failed service that returns the task (self-loop of rate
    ``mu * (1 - q_succ)``).  The all-empty state only sees arrivals via a
    single ``idle`` action.  Goals: the all-empty state (``goal_mode
    'all'``) or every state with at least one empty queue (``'one'``).
    """
    if j < 1 or k < 1:
        raise ValueError("need at least one station and capacity one")
    if not (lam_arr > 0.0 and mu > 0.0):
        raise ValueError("rates must be positive")
    if not 0.0 < q_succ <= 1.0:
        raise ValueError("q_succ must lie in (0, 1]")
    if goal_mode not in ("all", "one"):
        raise ValueError(f"goal_mode must be 'all' or 'one', got {goal_mode!r}")

    base = k + 1
    num_states = base**j

    def state_id(fills: Sequence[int]) -> int:
        sid = 0
        for q in fills:
            sid = sid * base + q
        return sid

    def fills_of(sid: int) -> list[int]:
        out = []
        for _ in range(j):
            out.append(sid % base)
            sid //= base
        return out[::-1]

    records: list[TransitionRecord] = []
    goals: list[int] = []
    for sid in range(num_states):
        fills = fills_of(sid)
        if all(q == 0 for q in fills):
            goals.append(sid)
        elif goal_mode == "one" and any(q == 0 for q in fills):
            goals.append(sid)

        arrival_targets = []
        for m in range(j):
            if fills[m] < k:
                bumped = list(fills)
                bumped[m] += 1
                arrival_targets.append(state_id(bumped))

        nonempty = [i for i in range(j) if fills[i] > 0]
        if not nonempty:
            for target in arrival_targets:
                records.append((sid, "idle", target, lam_arr))
            continue
        for i in nonempty:
            label = f"serve_{i + 1}"
            for target in arrival_targets:
                records.append((sid, label, target, lam_arr))
            served = list(fills)
            served[i] -= 1
            records.append((sid, label, state_id(served), mu * q_succ))
            if q_succ < 1.0:
                records.append((sid, label, sid, mu * (1.0 - q_succ)))

    initial = state_id([k - 1] * j)
    return CtmdpModel(num_states, initial, goals, records)
