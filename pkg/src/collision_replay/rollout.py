"""Random-walk policy execution and trajectory logs."""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _accel
from ._kernels import walk_batch
from .agent import ACTION_BY_NAME, ACTION_NAMES, Action, NoiseModel
from .gridmap import GridMap, heading_dirs


@dataclass(frozen=True)
class PolicyConfig:
    p_forward: float = 0.6
    p_left: float = 0.2
    p_right: float = 0.2
    turn_around_on_collision: bool = True

    def __post_init__(self):
        probs = (self.p_forward, self.p_left, self.p_right)
        if min(probs) < 0 or abs(sum(probs) - 1.0) > 1e-9:
            raise ValueError(f"policy probabilities must be >= 0 and sum to 1, got {probs}")

    def cumulative(self) -> np.ndarray:
        return np.array([self.p_forward, self.p_forward + self.p_left, 1.0])


@dataclass(eq=False)
class Trajectory:
    """One walk. Row ``t`` holds the pose before action ``t`` and its outcome."""

    map_id: str
    seed: int
    x: np.ndarray
    y: np.ndarray
    heading: np.ndarray
    action: np.ndarray
    collided: np.ndarray
    n_headings: int = 4
    motion: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.x)

    def steps(self):
        for t in range(len(self)):
            yield {
                "t": t,
                "x": int(self.x[t]),
                "y": int(self.y[t]),
                "heading": int(self.heading[t]),
                "action": ACTION_NAMES[Action(int(self.action[t]))],
                "collided": bool(self.collided[t]),
            }

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (
            self.map_id == other.map_id
            and self.seed == other.seed
            and self.n_headings == other.n_headings
            and all(
                np.array_equal(getattr(self, f), getattr(other, f))
                for f in ("x", "y", "heading", "action", "collided")
            )
        )


def _draw(grid: GridMap, n_steps: int, seed: int, n_headings: int):
    rng = np.random.default_rng(seed)
    ys, xs = np.nonzero(grid.free)
    k = int(rng.integers(len(xs) * n_headings))
    start = (int(xs[k // n_headings]), int(ys[k // n_headings]), k % n_headings)
    return start, rng.random((n_steps, 3))


def run_walk(
    grid: GridMap,
    policy: PolicyConfig,
    noise: NoiseModel,
    n_steps: int,
    seed: int,
    n_headings: int = 4,
) -> Trajectory:
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    return run_batch(grid, policy, noise, 1, n_steps, seed, n_headings)[0]


def run_batch(
    grid: GridMap,
    policy: PolicyConfig,
    noise: NoiseModel,
    n_walks: int,
    n_steps: int,
    base_seed: int,
    n_headings: int = 4,
    workers: int | None = None,
) -> list[Trajectory]:
    """Walk ``i`` uses seed ``base_seed + i``; output is independent of ``workers``."""
    if n_walks <= 0:
        return []
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    dirs = heading_dirs(n_headings)
    draws = [_draw(grid, n_steps, base_seed + i, n_headings) for i in range(n_walks)]
    starts = np.array([d[0] for d in draws], dtype=np.int64)
    uniforms = np.stack([d[1] for d in draws])
    args = (grid.occ, dirs, n_headings)
    tail = (policy.cumulative(), policy.turn_around_on_collision,
            noise.p_forward_slip, noise.p_turn_slip)

    workers = _accel.thread_cap() if workers is None else max(1, workers)
    if _accel.USE_NUMBA and workers > 1 and n_walks > 1:
        bounds = np.linspace(0, n_walks, min(workers, n_walks) + 1).astype(int)
        with ThreadPoolExecutor(len(bounds) - 1) as pool:
            parts = list(pool.map(
                lambda lo_hi: walk_batch(*args, starts[lo_hi[0]:lo_hi[1]],
                                         uniforms[lo_hi[0]:lo_hi[1]], *tail),
                zip(bounds[:-1], bounds[1:]),
            ))
        xs, ys, hs, acts, hits, mots = (np.concatenate(p) for p in zip(*parts))
    else:
        xs, ys, hs, acts, hits, mots = walk_batch(*args, starts, uniforms, *tail)

    meta = {"policy": asdict(policy), "noise": asdict(noise)}
    return [
        Trajectory(grid.map_id, base_seed + i, xs[i], ys[i], hs[i], acts[i], hits[i],
                   n_headings, mots[i], dict(meta))
        for i in range(n_walks)
    ]


def check_trajectory(traj: Trajectory, grid: GridMap) -> None:
    """Raise ``AssertionError`` if poses or collision flags are inconsistent with the map."""
    dirs = heading_dirs(traj.n_headings)
    for t in range(len(traj)):
        x, y, h = int(traj.x[t]), int(traj.y[t]), int(traj.heading[t])
        assert grid.is_free(x, y), f"step {t}: pose on occupied cell"
        ahead_occ = bool(grid.occ[y + dirs[h, 1], x + dirs[h, 0]])
        is_fwd = traj.action[t] == Action.FORWARD
        assert bool(traj.collided[t]) == (is_fwd and ahead_occ), f"step {t}: collision flag"
        if t + 1 < len(traj):
            nx, ny = int(traj.x[t + 1]), int(traj.y[t + 1])
            moved = (nx, ny) != (x, y)
            if moved:
                assert is_fwd and not traj.collided[t], f"step {t}: illegal move"
                assert (nx - x, ny - y) == tuple(dirs[h]), f"step {t}: wrong direction"
            if not is_fwd:
                assert not moved


# -- JSON-lines log ----------------------------------------------------------

def trajectory_to_jsonl(traj: Trajectory, extra_header: dict | None = None) -> str:
    header = {
        "type": "header",
        "map_id": traj.map_id,
        "seed": traj.seed,
        "n_headings": traj.n_headings,
        "n_steps": len(traj),
    }
    header.update(traj.meta)
    if extra_header:
        header.update(extra_header)
    lines = [json.dumps(header, sort_keys=True)]
    lines.extend(json.dumps(rec) for rec in traj.steps())
    return "\n".join(lines) + "\n"


def trajectory_from_jsonl(text: str) -> Trajectory:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty trajectory log")
    header = json.loads(lines[0])
    if header.get("type") != "header":
        raise ValueError("trajectory log must start with a header line")
    recs = [json.loads(ln) for ln in lines[1:]]
    for i, r in enumerate(recs):
        if r["t"] != i:
            raise ValueError(f"record {i} has t={r['t']}")
    meta = {k: v for k, v in header.items()
            if k not in ("type", "map_id", "seed", "n_headings", "n_steps")}
    return Trajectory(
        header["map_id"],
        int(header["seed"]),
        np.array([r["x"] for r in recs], dtype=np.int64),
        np.array([r["y"] for r in recs], dtype=np.int64),
        np.array([r["heading"] for r in recs], dtype=np.int64),
        np.array([int(ACTION_BY_NAME[r["action"]]) for r in recs], dtype=np.int64),
        np.array([r["collided"] for r in recs], dtype=bool),
        int(header.get("n_headings", 4)),
        None,
        meta,
    )


def trajectories_from_jsonl(text: str) -> list[Trajectory]:
    """Split a log holding several header-led trajectories."""
    chunks: list[list[str]] = []
    for ln in text.splitlines():
        if not ln.strip():
            continue
        if json.loads(ln).get("type") == "header":
            chunks.append([])
        elif not chunks:
            raise ValueError("trajectory log must start with a header line")
        chunks[-1].append(ln)
    return [trajectory_from_jsonl("\n".join(c)) for c in chunks]
