"""Numba vs pure-numpy timings for the two hot kernels.

Run: python benchmarks/bench_kernels.py [--walks 200 --steps 2000 --episodes 1000000]

Both backends consume the same pre-drawn uniforms, so the script also checks
that their outputs agree exactly before reporting speedups.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from collision_replay import _accel
from collision_replay._kernels import absorb_chunk, walk_batch
from collision_replay.gridmap import generate_map, heading_dirs
from collision_replay.rollout import PolicyConfig


def _best(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_walks(n_walks: int, n_steps: int, repeat: int) -> dict:
    grid = generate_map("rooms", 0, 48, 48, 0.05)
    rng = np.random.default_rng(0)
    ys, xs = np.nonzero(grid.free)
    pick = rng.integers(len(xs), size=n_walks)
    starts = np.column_stack([xs[pick], ys[pick], rng.integers(4, size=n_walks)]).astype(np.int64)
    u = rng.random((n_walks, n_steps, 3))
    occ = np.ascontiguousarray(grid.occ)
    dirs = heading_dirs(4)
    cum = PolicyConfig().cumulative()

    def run(use_numba):
        return walk_batch(occ, dirs, 4, starts, u, cum, True, 0.1, 0.1, use_numba=use_numba)

    out = {}
    if _accel.HAVE_NUMBA:
        run(True)  # compile outside the timed region
        out["numba"] = _best(lambda: run(True), repeat)
        same = all(np.array_equal(a, b) for a, b in zip(run(True), run(False)))
        out["identical"] = same
    out["numpy"] = _best(lambda: run(False), repeat)
    return out


def bench_absorb(n_episodes: int, repeat: int) -> dict:
    rng = np.random.default_rng(1)
    u = rng.random((n_episodes, 64))
    rows = np.arange(n_episodes)

    def run(use_numba):
        pos = np.full(n_episodes, 5, dtype=np.int64)
        times = np.zeros(n_episodes, dtype=np.int64)
        outcome = np.zeros(n_episodes, dtype=np.int64)
        absorb_chunk(pos, times, outcome, rows, u, 0.7, 15, 10_000, use_numba=use_numba)
        return pos, times, outcome

    out = {}
    if _accel.HAVE_NUMBA:
        run(True)
        out["numba"] = _best(lambda: run(True), repeat)
        out["identical"] = all(np.array_equal(a, b) for a, b in zip(run(True), run(False)))
    out["numpy"] = _best(lambda: run(False), repeat)
    return out


def _report(name: str, res: dict, work: int, unit: str) -> None:
    line = f"{name:<10} numpy {res['numpy'] * 1e3:9.1f} ms ({work / res['numpy']:.3g} {unit}/s)"
    if "numba" in res:
        line += (f" | numba {res['numba'] * 1e3:9.1f} ms ({work / res['numba']:.3g} {unit}/s)"
                 f" | speedup x{res['numpy'] / res['numba']:.1f} | identical={res['identical']}")
    print(line)


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--walks", type=int, default=200)
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--episodes", type=int, default=1_000_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    print(f"numba available: {_accel.HAVE_NUMBA}")
    _report("walks", bench_walks(args.walks, args.steps, args.repeat), args.walks * args.steps, "steps")
    _report("absorb", bench_absorb(args.episodes, args.repeat), args.episodes * 64, "steps")


if __name__ == "__main__":
    main()
