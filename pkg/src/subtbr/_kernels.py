"""Compiled inner loops for the discretized backward value recursion.

Both kernels walk the same layout, prepared in :mod:`subtbr.solver`: states
are permuted so that indices ``[0, n_simple)`` hold non-goal states with a
single enabled action owning a single transition (the overwhelmingly common
shape in chain-like models, updated in a flat vectorisable loop), indices
``[n_simple, n_simple + n_general)`` hold the remaining non-goal states
(CSR walk over their action pairs), and goal states sit at the end with
their value pinned to 1 and never written.

Per step and non-goal state the update is

    q(s, a) = (1 - exp(-E(s,a) * delta)) * sum_t p(s,a,t) * v[t]
              + exp(-E(s,a) * delta) * v[s]

with ``v`` the previous step's vector; the optimizing kernel takes the
max/min over the state's pairs, the scheduled kernel evaluates the single
pair dictated by a breakpoint table.

Value arrays are ping-ponged; after an odd number of steps the result is
copied back so the caller always reads ``v``.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True, fastmath=True)
def backward_induction(
    num_steps,
    n_simple,
    s_tgt,
    s_pjump,
    s_pstay,
    n_general,
    g_state,
    g_ptr,
    p_pjump,
    p_pstay,
    tr_ptr,
    tr_tgt,
    tr_prob,
    maximize,
    v,
    vbuf,
    record,
    prev_choice,
    sw_step,
    sw_gen,
    sw_pair,
):
    """Optimizing recursion; returns the switch count, or -1 if the buffer overflowed.

    Argmax/argmin ties resolve to the first pair in CSR order, i.e. the
    lexicographically smallest action label.  A switch entry ``(step, k,
    p)`` is emitted whenever the chosen pair of multi-action state ``k``
    differs from the previous step's choice; single-action states never
    emit (their decision is the fallback).
    """
    n_sw = 0
    cap = sw_step.shape[0]
    src = v
    dst = vbuf
    for i in range(1, num_steps + 1):
        for kk in range(n_simple):
            dst[kk] = s_pjump[kk] * src[s_tgt[kk]] + s_pstay[kk] * src[kk]
        for kk in range(n_general):
            s = g_state[kk]
            vs = src[s]
            best = -1.0 if maximize else 2.0
            bestp = g_ptr[kk]
            for p in range(g_ptr[kk], g_ptr[kk + 1]):
                w = 0.0
                for t in range(tr_ptr[p], tr_ptr[p + 1]):
                    w += tr_prob[t] * src[tr_tgt[t]]
                q = p_pjump[p] * w + p_pstay[p] * vs
                if maximize:
                    if q > best:
                        best = q
                        bestp = p
                else:
                    if q < best:
                        best = q
                        bestp = p
            dst[s] = best
            if record and g_ptr[kk + 1] - g_ptr[kk] > 1 and bestp != prev_choice[kk]:
                if n_sw >= cap:
                    return -1
                sw_step[n_sw] = i
                sw_gen[n_sw] = kk
                sw_pair[n_sw] = bestp
                prev_choice[kk] = bestp
                n_sw += 1
        tmp = src
        src = dst
        dst = tmp
    if num_steps % 2 == 1:
        for s in range(v.shape[0]):
            v[s] = vbuf[s]
    return n_sw


@njit(cache=True, fastmath=True)
def scheduled_induction(
    num_steps,
    n_simple,
    s_tgt,
    s_pjump,
    s_pstay,
    n_general,
    g_state,
    g_ptr,
    p_pjump,
    p_pstay,
    tr_ptr,
    tr_tgt,
    tr_prob,
    grid_ratio,
    sched_steps,
    bp_ptr,
    bp_step,
    bp_pair,
    cursor,
    v,
    vbuf,
):
    """Recursion with actions fixed by a per-state breakpoint table.

    Step ``i`` of this grid is mapped to the scheduler's grid via
    ``j = clamp(ceil(i * grid_ratio), 1, sched_steps)``; the decision of
    general state ``k`` at ``j`` is the latest breakpoint in
    ``bp_step[bp_ptr[k]:bp_ptr[k+1]]`` not exceeding ``j``, or the first
    (lexicographically smallest) pair when none applies.  ``cursor`` must
    come in as ``bp_ptr[:-1] - 1`` and is advanced monotonically.
    """
    src = v
    dst = vbuf
    for i in range(1, num_steps + 1):
        if sched_steps > 0:
            j = int(math.ceil(i * grid_ratio))
            if j < 1:
                j = 1
            elif j > sched_steps:
                j = sched_steps
        else:
            j = 0
        for kk in range(n_simple):
            dst[kk] = s_pjump[kk] * src[s_tgt[kk]] + s_pstay[kk] * src[kk]
        for kk in range(n_general):
            s = g_state[kk]
            c = cursor[kk]
            end = bp_ptr[kk + 1]
            while c + 1 < end and bp_step[c + 1] <= j:
                c += 1
            cursor[kk] = c
            p = bp_pair[c] if c >= bp_ptr[kk] else g_ptr[kk]
            w = 0.0
            for t in range(tr_ptr[p], tr_ptr[p + 1]):
                w += tr_prob[t] * src[tr_tgt[t]]
            dst[s] = p_pjump[p] * w + p_pstay[p] * src[s]
        tmp = src
        src = dst
        dst = tmp
    if num_steps % 2 == 1:
        for s in range(v.shape[0]):
            v[s] = vbuf[s]
