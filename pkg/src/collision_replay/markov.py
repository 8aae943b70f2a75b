"""Exact hitting-time distributions from the random-walk Markov chain.

Used as an enumeration oracle for the sampled tables. The chain state is
(cell, heading); the start state is assumed not to follow a collision, so a
forced turn-around never applies before the first bump.
"""
from __future__ import annotations

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .agent import NoiseModel
from .estimator import ProbTable
from .gridmap import GridMap, heading_dirs
from .rollout import PolicyConfig


def _chain(grid: GridMap, policy: PolicyConfig, noise: NoiseModel, n_headings: int):
    dirs = heading_dirs(n_headings)
    ys, xs = np.nonzero(grid.free)
    n_cells = len(xs)
    cell_id = -np.ones(grid.occ.shape, dtype=np.int64)
    cell_id[ys, xs] = np.arange(n_cells)
    n = n_cells * n_headings

    def sid(c, h):
        return h * n_cells + c

    pf, pl, pr = policy.p_forward, policy.p_left, policy.p_right
    sf, st = noise.p_forward_slip, noise.p_turn_slip
    collide = np.zeros(n)
    turn_rows, turn_cols, turn_vals = [], [], []
    fwd_rows, fwd_cols, fwd_vals = [], [], []
    for c in range(n_cells):
        x, y = xs[c], ys[c]
        for h in range(n_headings):
            s = sid(c, h)
            tx, ty = x + dirs[h, 0], y + dirs[h, 1]
            if grid.occ[ty, tx]:
                collide[s] = pf
            elif pf > 0:
                fwd_rows += [s, s]
                fwd_cols += [sid(cell_id[ty, tx], h), s]
                fwd_vals += [pf * (1 - sf), pf * sf]
            for p_turn, sign in ((pl, -1), (pr, 1)):
                if p_turn == 0:
                    continue
                for delta, w in ((sign, 1 - st), (0, st / 2), (2 * sign, st / 2)):
                    if w == 0:
                        continue
                    turn_rows.append(s)
                    turn_cols.append(sid(c, (h + delta) % n_headings))
                    turn_vals.append(p_turn * w)
    turns = sparse.csr_matrix((turn_vals, (turn_rows, turn_cols)), shape=(n, n))
    fwd = sparse.csr_matrix((fwd_vals, (fwd_rows, fwd_cols)), shape=(n, n))
    return xs, ys, n_cells, collide, turns, fwd


def exact_hitting_probs(
    grid: GridMap,
    policy: PolicyConfig,
    k: int,
    n_headings: int = 4,
    noise: NoiseModel = NoiseModel.zero(),
    clock: str = "steps",
) -> ProbTable:
    """P(T = t | cell, heading) for t < k, with the tail mass in bin ``k``."""
    xs, ys, n_cells, collide, turns, fwd = _chain(grid, policy, noise, n_headings)
    n = len(collide)
    pmf = np.zeros((n, k + 1))
    if clock == "steps":
        step = (turns + fwd).tocsr()
        v = collide.copy()
        for t in range(k):
            pmf[:, t] = v
            v = step @ v
    elif clock == "forward":
        if policy.p_forward == 0:
            raise ValueError("forward clock needs p_forward > 0")
        lu = splu(sparse.csc_matrix(sparse.identity(n) - turns))
        v = lu.solve(collide)
        for t in range(k):
            pmf[:, t] = v
            v = lu.solve(fwd @ v)
    else:
        raise ValueError(f"unknown clock {clock!r}")
    pmf[:, k] = np.clip(1.0 - pmf[:, :k].sum(axis=1), 0.0, 1.0)

    probs = np.full((n_headings, grid.height, grid.width, k + 1), np.nan)
    known = np.zeros((n_headings, grid.height, grid.width), dtype=bool)
    for h in range(n_headings):
        probs[h, ys, xs] = pmf[h * n_cells:(h + 1) * n_cells]
        known[h, ys, xs] = True
    return ProbTable(probs, known, k, grid.step_size)
