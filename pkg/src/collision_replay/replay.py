"""Collision replay: turning trajectories into steps-to-collision samples.

Two clocks are supported. ``steps`` counts every action between a pose and
the next collision (turns included). ``forward`` counts only forward moves the
agent believes it made, which is the quantity the distance function measures
when rotation is free.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .agent import Action, turn_delta
from .gridmap import GridMap, heading_dirs
from .rollout import Trajectory

REGIMES = ("oracle", "dead-reckoned")
CLOCKS = ("steps", "forward")

FLAG_OCCUPIED = 1
FLAG_OFFMAP = 2


@dataclass(frozen=True)
class ReplayConfig:
    k: int = 10
    window: int = 20
    regime: str = "oracle"
    clock: str = "steps"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.regime not in REGIMES:
            raise ValueError(f"regime must be one of {REGIMES}")
        if self.clock not in CLOCKS:
            raise ValueError(f"clock must be one of {CLOCKS}")


class ReplaySample(NamedTuple):
    cell: tuple[int, int]
    heading: int
    label: int
    regime: str
    flags: int = 0
    action: int = -1


@dataclass(eq=False)
class ReplaySamples:
    """Column store of replay samples sharing ``k``, regime and heading count."""

    x: np.ndarray
    y: np.ndarray
    heading: np.ndarray
    label: np.ndarray
    k: int
    regime: str
    n_headings: int = 4
    flags: np.ndarray | None = None
    action: np.ndarray | None = None
    step: np.ndarray | None = None
    unwind: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.x)
        if self.flags is None:
            self.flags = np.zeros(n, dtype=np.uint8)
        if self.action is None:
            self.action = np.full(n, -1, dtype=np.int64)
        if self.step is None:
            self.step = np.full(n, -1, dtype=np.int64)
        if self.unwind is None:
            self.unwind = np.zeros(n, dtype=np.int64)
        if n and (self.label.min() < 0 or self.label.max() > self.k):
            raise ValueError("labels must lie in [0, k]")

    def __len__(self) -> int:
        return len(self.x)

    def __iter__(self) -> Iterator[ReplaySample]:
        for i in range(len(self)):
            yield ReplaySample(
                (int(self.x[i]), int(self.y[i])), int(self.heading[i]), int(self.label[i]),
                self.regime, int(self.flags[i]), int(self.action[i]),
            )

    def subset(self, mask: np.ndarray) -> ReplaySamples:
        return ReplaySamples(
            self.x[mask], self.y[mask], self.heading[mask], self.label[mask], self.k,
            self.regime, self.n_headings, self.flags[mask], self.action[mask],
            self.step[mask], self.unwind[mask],
        )

    @classmethod
    def empty(cls, k: int, regime: str = "oracle", n_headings: int = 4) -> ReplaySamples:
        z = np.zeros(0, dtype=np.int64)
        return cls(z, z, z, z, k, regime, n_headings)

    @classmethod
    def from_samples(cls, samples: Sequence[ReplaySample], k: int, n_headings: int = 4) -> ReplaySamples:
        if not samples:
            return cls.empty(k, n_headings=n_headings)
        regime = samples[0].regime
        return cls(
            np.array([s.cell[0] for s in samples], dtype=np.int64),
            np.array([s.cell[1] for s in samples], dtype=np.int64),
            np.array([s.heading for s in samples], dtype=np.int64),
            np.array([s.label for s in samples], dtype=np.int64),
            k, regime, n_headings,
            np.array([s.flags for s in samples], dtype=np.uint8),
            np.array([s.action for s in samples], dtype=np.int64),
        )


def concat(parts: Sequence[ReplaySamples]) -> ReplaySamples:
    if not parts:
        raise ValueError("nothing to concatenate")
    first = parts[0]
    for p in parts[1:]:
        if (p.k, p.regime, p.n_headings) != (first.k, first.regime, first.n_headings):
            raise ValueError("cannot concatenate samples with different k, regime or H")
    cat = lambda name: np.concatenate([getattr(p, name) for p in parts])  # noqa: E731
    return ReplaySamples(
        cat("x"), cat("y"), cat("heading"), cat("label"), first.k, first.regime,
        first.n_headings, cat("flags"), cat("action"), cat("step"), cat("unwind"),
    )


def _observed_moves(traj: Trajectory) -> np.ndarray:
    """Forward actions the collision sensor did not flag."""
    return (traj.action == Action.FORWARD) & ~traj.collided


def steps_to_collision(traj: Trajectory, k: int, clock: str = "steps") -> np.ndarray:
    """Per-step clamped label, or -1 where the walk ends too soon to tell."""
    n = len(traj)
    idx = np.arange(n)
    hits = np.where(traj.collided, idx, n)
    next_hit = np.minimum.accumulate(hits[::-1])[::-1]
    if clock == "steps":
        counter = np.arange(n + 1)
    elif clock == "forward":
        counter = np.concatenate([[0], np.cumsum(_observed_moves(traj))])
    else:
        raise ValueError(f"unknown clock {clock!r}")
    dist = counter[next_hit] - counter[idx]
    labels = np.minimum(dist, k)
    censored = next_hit == n
    labels[censored & (dist < k)] = -1
    return labels


def label_egocentric(traj: Trajectory, cfg: ReplayConfig) -> ReplaySamples:
    labels = steps_to_collision(traj, cfg.k, cfg.clock)
    keep = labels >= 0
    j = np.nonzero(keep)[0]
    return ReplaySamples(
        traj.x[j].copy(), traj.y[j].copy(), traj.heading[j].copy(), labels[j], cfg.k,
        "oracle", traj.n_headings, None, traj.action[j].copy(), j,
    )


def _dead_reckoning_tracks(traj: Trajectory):
    """Intended heading and per-heading move counts, dead-reckoned from step 0."""
    H = traj.n_headings
    deltas = np.array([turn_delta(int(a), H) for a in range(4)])[traj.action]
    dr_heading = np.concatenate([[0], np.cumsum(deltas)]) % H
    moves = _observed_moves(traj)
    counts = np.zeros((len(traj) + 1, H), dtype=np.int64)
    onehot = np.zeros((len(traj), H), dtype=np.int64)
    onehot[np.arange(len(traj)), dr_heading[:-1]] = moves
    counts[1:] = np.cumsum(onehot, axis=0)
    return dr_heading, counts


def label_remote(traj: Trajectory, cfg: ReplayConfig, grid: GridMap | None = None) -> ReplaySamples:
    """Label step ``j`` as seen from every earlier step ``i`` with ``j - i <= window``.

    In the dead-reckoned regime the cell of ``j`` is the true pose at ``i``
    composed with the intended actions ``i..j-1``, so slips become label
    noise. Samples that land off the map or on occupied cells are flagged.
    """
    H = traj.n_headings
    dirs = heading_dirs(H)
    labels = steps_to_collision(traj, cfg.k, cfg.clock)
    valid_j = np.nonzero(labels >= 0)[0]
    if cfg.regime == "dead-reckoned":
        dr_heading, counts = _dead_reckoning_tracks(traj)

    xs, ys, hs, ls, acts, js, ds = [], [], [], [], [], [], []
    for d in range(cfg.window + 1):
        j = valid_j[valid_j >= d]
        i = j - d
        if cfg.regime == "oracle":
            x, y, h = traj.x[j], traj.y[j], traj.heading[j]
        else:
            dc = counts[j] - counts[i]
            offset = (traj.heading[i] - dr_heading[i]) % H
            x = traj.x[i].copy()
            y = traj.y[i].copy()
            for hp in range(H):
                world = dirs[(offset + hp) % H]
                x = x + dc[:, hp] * world[:, 0]
                y = y + dc[:, hp] * world[:, 1]
            h = (traj.heading[i] + dr_heading[j] - dr_heading[i]) % H
        xs.append(x)
        ys.append(y)
        hs.append(h)
        ls.append(labels[j])
        acts.append(traj.action[j])
        js.append(j)
        ds.append(np.full(len(j), d, dtype=np.int64))

    x, y = np.concatenate(xs), np.concatenate(ys)
    flags = np.zeros(len(x), dtype=np.uint8)
    if grid is not None:
        off = (x < 0) | (y < 0) | (x >= grid.width) | (y >= grid.height)
        flags[off] |= FLAG_OFFMAP
        on = ~off
        occ = np.zeros(len(x), dtype=bool)
        occ[on] = grid.occ[y[on], x[on]]
        flags[occ] |= FLAG_OCCUPIED
    return ReplaySamples(
        x, y, np.concatenate(hs), np.concatenate(ls), cfg.k, cfg.regime, H, flags,
        np.concatenate(acts), np.concatenate(js), np.concatenate(ds),
    )


def label_batch(trajs: Sequence[Trajectory], cfg: ReplayConfig, grid: GridMap | None = None,
                remote: bool = True) -> ReplaySamples:
    if not trajs:
        regime = cfg.regime if remote else "oracle"
        return ReplaySamples.empty(cfg.k, regime)
    if remote:
        return concat([label_remote(t, cfg, grid) for t in trajs])
    return concat([label_egocentric(t, cfg) for t in trajs])


def samples_to_csv(samples: ReplaySamples, header: str | None = None) -> str:
    out = []
    if header:
        out.append(f"# {header}")
    out.append("x,y,heading,label,regime,flags")
    for i in range(len(samples)):
        out.append(
            f"{samples.x[i]},{samples.y[i]},{samples.heading[i]},{samples.label[i]},"
            f"{samples.regime},{samples.flags[i]}"
        )
    return "\n".join(out) + "\n"
