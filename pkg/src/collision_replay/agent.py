"""Agent state, actions, collision semantics and the actuation slip model."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ._accel import njit
from .gridmap import GridMap, heading_dirs


class Action(enum.IntEnum):
    FORWARD = 0
    TURN_LEFT = 1
    TURN_RIGHT = 2
    TURN_AROUND = 3


class Motion(enum.IntEnum):
    AS_INTENDED = 0
    SLIPPED_STAY = 1
    SLIPPED_OVER_TURN = 2
    SLIPPED_UNDER_TURN = 3
    BLOCKED = 4


ACTION_NAMES = {
    Action.FORWARD: "forward",
    Action.TURN_LEFT: "left",
    Action.TURN_RIGHT: "right",
    Action.TURN_AROUND: "around",
}
ACTION_BY_NAME = {v: k for k, v in ACTION_NAMES.items()}


@dataclass(frozen=True)
class Pose:
    x: int
    y: int
    heading: int


@dataclass(frozen=True)
class NoiseModel:
    """Independent slip probabilities for forward moves and turns."""

    p_forward_slip: float = 0.1
    p_turn_slip: float = 0.1

    def __post_init__(self):
        for name in ("p_forward_slip", "p_turn_slip"):
            v = getattr(self, name)
            if not 0.0 <= v <= 0.5:
                raise ValueError(f"{name} must be in [0, 0.5], got {v}")

    @classmethod
    def zero(cls) -> NoiseModel:
        return cls(0.0, 0.0)


@dataclass(frozen=True)
class StepOutcome:
    new_pose: Pose
    collided: bool
    intended_action: Action
    actual_motion: Motion


def turn_delta(action: int, n_headings: int) -> int:
    if action == Action.TURN_LEFT:
        return -1
    if action == Action.TURN_RIGHT:
        return 1
    if action == Action.TURN_AROUND:
        return n_headings // 2
    return 0


@njit
def transition(occ, dirs, n_headings, x, y, h, action, u_fwd, u_turn, p_fwd_slip, p_turn_slip):
    """Apply one action given two uniforms. Shared by ``step`` and the walk kernels.

    Returns (x, y, heading, collided, motion code).
    """
    if action == 0:
        tx = x + dirs[h, 0]
        ty = y + dirs[h, 1]
        if occ[ty, tx]:
            return x, y, h, True, 4
        if u_fwd < p_fwd_slip:
            return x, y, h, False, 1
        return tx, ty, h, False, 0
    if action == 1:
        delta = -1
    elif action == 2:
        delta = 1
    else:
        delta = n_headings // 2
    sign = 1 if delta > 0 else -1
    motion = 0
    if u_turn < 0.5 * p_turn_slip:
        delta -= sign
        motion = 3
    elif u_turn < p_turn_slip:
        delta += sign
        motion = 2
    return x, y, (h + delta) % n_headings, False, motion


def step(
    grid: GridMap,
    pose: Pose,
    action: Action,
    noise: NoiseModel,
    rng: np.random.Generator,
    n_headings: int = 4,
) -> StepOutcome:
    if not grid.is_free(pose.x, pose.y):
        raise ValueError(f"pose {pose} is not on a free cell")
    if not 0 <= pose.heading < n_headings:
        raise ValueError(f"heading {pose.heading} out of range for H={n_headings}")
    u_fwd, u_turn = rng.random(2)
    x, y, h, collided, motion = transition(
        grid.occ, heading_dirs(n_headings), n_headings,
        pose.x, pose.y, pose.heading, int(action),
        u_fwd, u_turn, noise.p_forward_slip, noise.p_turn_slip,
    )
    return StepOutcome(Pose(int(x), int(y), int(h)), bool(collided), Action(action), Motion(motion))


@dataclass(frozen=True)
class Displacement:
    """Dead-reckoned motion relative to a start pose.

    ``moves[r]`` counts forward steps taken at relative heading ``r``. Keeping
    the counts (rather than a rotated vector) makes the composition exact for
    8 headings, where a 45 degree turn is not a lattice rotation.
    """

    moves: tuple[int, ...]
    dheading: int

    @property
    def n_headings(self) -> int:
        return len(self.moves)

    @property
    def dx(self) -> int:
        """Cells ahead of the start pose."""
        return int(np.dot(self.moves, heading_dirs(self.n_headings)[:, 0]))

    @property
    def dy(self) -> int:
        """Cells to the right of the start pose (negative is left)."""
        return int(np.dot(self.moves, heading_dirs(self.n_headings)[:, 1]))

    def as_tuple(self) -> tuple[int, int, int]:
        n = self.n_headings
        dh = self.dheading % n
        if dh > n // 2:
            dh -= n
        return self.dx, self.dy, dh

    def apply(self, pose: Pose) -> Pose:
        n = self.n_headings
        dirs = heading_dirs(n)
        world = dirs[(pose.heading + np.arange(n)) % n]
        shift = np.asarray(self.moves) @ world
        return Pose(pose.x + int(shift[0]), pose.y + int(shift[1]), (pose.heading + self.dheading) % n)


def dead_reckon(
    intended: Sequence[Action] | Iterable[int],
    n_headings: int = 4,
    blocked: Sequence[bool] | None = None,
) -> Displacement:
    """Compose intended actions as if executed without noise.

    ``blocked`` marks forward attempts the collision sensor reported; those
    contribute no motion. Without it every forward counts as a move.
    """
    heading_dirs(n_headings)
    moves = [0] * n_headings
    rel = 0
    for i, a in enumerate(intended):
        a = int(a)
        if a == Action.FORWARD:
            if blocked is None or not blocked[i]:
                moves[rel] += 1
        else:
            rel = (rel + turn_delta(a, n_headings)) % n_headings
    return Displacement(tuple(moves), rel)
