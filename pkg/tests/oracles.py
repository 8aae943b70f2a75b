"""Slow, obviously-correct reference implementations used only by tests."""
from __future__ import annotations

from collections import deque
from itertools import product

import numpy as np

from collision_replay.gridmap import GridMap, heading_dirs


def df_bruteforce(grid: GridMap, n_headings: int = 4) -> np.ndarray:
    """Per-cell BFS to the nearest cell that faces an obstacle, in steps."""
    dirs = heading_dirs(n_headings)
    h, w = grid.occ.shape

    def is_seed(x, y):
        return any(grid.occ[y + dy, x + dx] for dx, dy in dirs)

    out = np.full((h, w), np.nan)
    for sy, sx in product(range(h), range(w)):
        if grid.occ[sy, sx]:
            continue
        seen = {(sx, sy)}
        queue = deque([(sx, sy, 0)])
        while queue:
            x, y, d = queue.popleft()
            if is_seed(x, y):
                out[sy, sx] = d
                break
            for dx, dy in dirs:
                nx, ny = x + dx, y + dy
                if not grid.occ[ny, nx] and (nx, ny) not in seen:
                    seen.add((nx, ny))
                    queue.append((nx, ny, d + 1))
    return out


def flood_fill_components(free: np.ndarray) -> int:
    """Number of 4-connected components of ``free`` by explicit flood fill."""
    h, w = free.shape
    seen = np.zeros_like(free, dtype=bool)
    n = 0
    for y, x in product(range(h), range(w)):
        if not free[y, x] or seen[y, x]:
            continue
        n += 1
        stack = [(x, y)]
        seen[y, x] = True
        while stack:
            cx, cy = stack.pop()
            for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                nx, ny = cx + dx, cy + dy
                if 0 <= nx < w and 0 <= ny < h and free[ny, nx] and not seen[ny, nx]:
                    seen[ny, nx] = True
                    stack.append((nx, ny))
    return n


def auroc_pairs(scores, same) -> float:
    """Brute-force pair counting: P(same-class score < diff-class score), ties half."""
    s_same = [s for s, f in zip(scores, same) if f]
    s_diff = [s for s, f in zip(scores, same) if not f]
    total = 0.0
    for a in s_same:
        for b in s_diff:
            total += 1.0 if a < b else 0.5 if a == b else 0.0
    return total / (len(s_same) * len(s_diff))


def labels_bruteforce(collided, k: int) -> list[int]:
    """Egocentric step-clock labels by scanning forward from every step."""
    n = len(collided)
    out = []
    for j in range(n):
        c = next((t for t in range(j, n) if collided[t]), None)
        if c is None:
            out.append(k if n - j >= k else -1)
        else:
            out.append(min(c - j, k))
    return out


def jsd_plain(p, q) -> float:
    """Base-2 Jensen-Shannon divergence with explicit loops."""
    import math

    m = [(a + b) / 2 for a, b in zip(p, q)]

    def kl(a, b):
        return sum(x * math.log2(x / y) for x, y in zip(a, b) if x > 0)

    return 0.5 * kl(p, m) + 0.5 * kl(q, m)
