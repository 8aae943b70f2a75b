"""Hot loops: batched random walks and the 1-D absorbing walk.

Each kernel has a numba implementation (scalar loops) and a numpy
implementation (vectorized across walks or episodes). Callers pass pre-drawn
uniforms so both produce identical output; ``_accel.USE_NUMBA`` picks one.
"""
from __future__ import annotations

import numpy as np

from . import _accel
from ._accel import njit
from .agent import transition

# absorbing-walk outcome codes
ALIVE, RUIN, GAIN, CENSORED = 0, 1, 2, 3


@njit
def _walk_batch_nb(occ, dirs, n_headings, starts, uniforms, cum_policy, turn_around,
                   p_fwd_slip, p_turn_slip, xs, ys, hs, actions, collided, motions):
    n_walks, n_steps = xs.shape
    for w in range(n_walks):
        x = starts[w, 0]
        y = starts[w, 1]
        h = starts[w, 2]
        prev_hit = False
        for t in range(n_steps):
            xs[w, t] = x
            ys[w, t] = y
            hs[w, t] = h
            if turn_around and prev_hit:
                a = 3
            else:
                u = uniforms[w, t, 0]
                if u < cum_policy[0]:
                    a = 0
                elif u < cum_policy[1]:
                    a = 1
                else:
                    a = 2
            x, y, h, hit, m = transition(occ, dirs, n_headings, x, y, h, a,
                                         uniforms[w, t, 1], uniforms[w, t, 2],
                                         p_fwd_slip, p_turn_slip)
            actions[w, t] = a
            collided[w, t] = hit
            motions[w, t] = m
            prev_hit = hit


def _walk_batch_np(occ, dirs, n_headings, starts, uniforms, cum_policy, turn_around,
                   p_fwd_slip, p_turn_slip, xs, ys, hs, actions, collided, motions):
    n_walks, n_steps = xs.shape
    x = starts[:, 0].copy()
    y = starts[:, 1].copy()
    h = starts[:, 2].copy()
    prev_hit = np.zeros(n_walks, dtype=bool)
    half = n_headings // 2
    for t in range(n_steps):
        xs[:, t] = x
        ys[:, t] = y
        hs[:, t] = h
        u = uniforms[:, t, 0]
        a = np.where(u < cum_policy[0], 0, np.where(u < cum_policy[1], 1, 2))
        if turn_around:
            a = np.where(prev_hit, 3, a)
        u_fwd = uniforms[:, t, 1]
        u_turn = uniforms[:, t, 2]

        fwd = a == 0
        tx = x + dirs[h, 0]
        ty = y + dirs[h, 1]
        hit = fwd & occ[np.where(fwd, ty, y), np.where(fwd, tx, x)]
        slip = fwd & ~hit & (u_fwd < p_fwd_slip)
        move = fwd & ~hit & ~slip

        delta = np.select([a == 1, a == 2, a == 3], [-1, 1, half], 0)
        sign = np.where(delta > 0, 1, -1)
        turning = ~fwd
        under = turning & (u_turn < 0.5 * p_turn_slip)
        over = turning & ~under & (u_turn < p_turn_slip)
        delta = delta - np.where(under, sign, 0) + np.where(over, sign, 0)

        m = np.zeros(n_walks, dtype=np.int64)
        m[hit] = 4
        m[slip] = 1
        m[under] = 3
        m[over] = 2

        x = np.where(move, tx, x)
        y = np.where(move, ty, y)
        h = np.where(turning, (h + delta) % n_headings, h)
        actions[:, t] = a
        collided[:, t] = hit
        motions[:, t] = m
        prev_hit = hit


def walk_batch(occ, dirs, n_headings, starts, uniforms, cum_policy, turn_around,
               p_fwd_slip, p_turn_slip, use_numba: bool | None = None):
    """Simulate ``len(starts)`` walks; returns (xs, ys, hs, actions, collided, motions)."""
    n_walks, n_steps = uniforms.shape[:2]
    xs = np.empty((n_walks, n_steps), dtype=np.int64)
    ys = np.empty_like(xs)
    hs = np.empty_like(xs)
    actions = np.empty_like(xs)
    motions = np.empty_like(xs)
    collided = np.empty((n_walks, n_steps), dtype=np.bool_)
    if use_numba is None:
        use_numba = _accel.USE_NUMBA
    fn = _walk_batch_nb if use_numba else _walk_batch_np
    fn(np.ascontiguousarray(occ, dtype=np.bool_), np.ascontiguousarray(dirs, dtype=np.int64),
       int(n_headings), np.ascontiguousarray(starts, dtype=np.int64),
       np.ascontiguousarray(uniforms, dtype=np.float64),
       np.asarray(cum_policy, dtype=np.float64), bool(turn_around),
       float(p_fwd_slip), float(p_turn_slip), xs, ys, hs, actions, collided, motions)
    return xs, ys, hs, actions, collided, motions


@njit
def _absorb_nb(pos, times, outcome, rows, uniforms, p_toward, a, t_max):
    n_rows, chunk = uniforms.shape
    for r in range(n_rows):
        e = rows[r]
        p = pos[e]
        t = times[e]
        for c in range(chunk):
            if uniforms[r, c] < p_toward:
                p -= 1
            else:
                p += 1
            t += 1
            if p == 0:
                outcome[e] = 1
                break
            if p == a:
                outcome[e] = 2
                break
            if t >= t_max:
                outcome[e] = 3
                break
        pos[e] = p
        times[e] = t


def _absorb_np(pos, times, outcome, rows, uniforms, p_toward, a, t_max):
    p = pos[rows]
    t = times[rows]
    live = np.ones(len(rows), dtype=bool)
    out = np.zeros(len(rows), dtype=outcome.dtype)
    for c in range(uniforms.shape[1]):
        if not live.any():
            break
        stepv = np.where(uniforms[:, c] < p_toward, -1, 1)
        p = np.where(live, p + stepv, p)
        t = np.where(live, t + 1, t)
        ruin = live & (p == 0)
        gain = live & ~ruin & (p == a)
        cens = live & ~ruin & ~gain & (t >= t_max)
        out[ruin] = RUIN
        out[gain] = GAIN
        out[cens] = CENSORED
        live &= ~(ruin | gain | cens)
    pos[rows] = p
    times[rows] = t
    outcome[rows] = out


def absorb_chunk(pos, times, outcome, rows, uniforms, p_toward, a, t_max,
                 use_numba: bool | None = None):
    """Advance the episodes ``rows`` by up to ``uniforms.shape[1]`` steps in place."""
    if use_numba is None:
        use_numba = _accel.USE_NUMBA
    fn = _absorb_nb if use_numba else _absorb_np
    fn(pos, times, outcome, np.ascontiguousarray(rows, dtype=np.int64),
       np.ascontiguousarray(uniforms, dtype=np.float64), float(p_toward), int(a), int(t_max))
