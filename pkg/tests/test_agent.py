from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from collision_replay.agent import Action, Displacement, Motion, NoiseModel, Pose, dead_reckon, step

from .helpers import corridor, empty_room

ZERO = NoiseModel.zero()


def test_forward_into_wall_collides_and_stays():
    grid = corridor(3)
    out = step(grid, Pose(3, 1, 0), Action.FORWARD, ZERO, np.random.default_rng(0))
    assert out.collided and out.new_pose == Pose(3, 1, 0)
    assert out.actual_motion == Motion.BLOCKED


def test_forward_in_free_space_moves_one_cell():
    out = step(corridor(3), Pose(1, 1, 0), Action.FORWARD, ZERO, np.random.default_rng(0))
    assert not out.collided and out.new_pose == Pose(2, 1, 0)


@pytest.mark.parametrize("action,heading", [(Action.TURN_LEFT, 3), (Action.TURN_RIGHT, 1),
                                            (Action.TURN_AROUND, 2)])
def test_turns_never_collide(action, heading):
    out = step(corridor(3), Pose(2, 1, 0), action, ZERO, np.random.default_rng(0))
    assert not out.collided and out.new_pose == Pose(2, 1, heading)


def test_turns_with_eight_headings():
    grid = empty_room(5, 5)
    out = step(grid, Pose(2, 2, 0), Action.TURN_RIGHT, ZERO, np.random.default_rng(0), n_headings=8)
    assert out.new_pose.heading == 1
    out = step(grid, Pose(2, 2, 1), Action.FORWARD, ZERO, np.random.default_rng(0), n_headings=8)
    assert out.new_pose == Pose(3, 3, 1)


def test_step_rejects_pose_on_occupied_cell():
    with pytest.raises(ValueError):
        step(corridor(3), Pose(0, 0, 0), Action.FORWARD, ZERO, np.random.default_rng(0))


def test_noise_validation():
    with pytest.raises(ValueError):
        NoiseModel(0.6, 0.1)
    with pytest.raises(ValueError):
        NoiseModel(0.1, -0.1)


def test_forward_slip_frequency_matches_noise_rate():
    grid = empty_room(5, 5)
    rng = np.random.default_rng(3)
    n = 20_000
    stays = sum(
        step(grid, Pose(1, 2, 0), Action.FORWARD, NoiseModel(0.3, 0.0), rng).new_pose.x == 1
        for _ in range(n)
    )
    sigma = np.sqrt(0.3 * 0.7 / n)
    assert abs(stays / n - 0.3) < 4 * sigma


def test_turn_slip_splits_evenly_between_under_and_over():
    grid = empty_room(5, 5)
    rng = np.random.default_rng(4)
    n = 20_000
    heads = np.array([
        step(grid, Pose(2, 2, 0), Action.TURN_RIGHT, NoiseModel(0.0, 0.4), rng).new_pose.heading
        for _ in range(n)
    ])
    freq = np.bincount(heads, minlength=4) / n
    for h, p in ((0, 0.2), (1, 0.6), (2, 0.2)):
        assert abs(freq[h] - p) < 4 * np.sqrt(p * (1 - p) / n)


def test_dead_reckoning_examples():
    assert dead_reckon([Action.FORWARD] * 3).as_tuple() == (3, 0, 0)
    assert dead_reckon([Action.TURN_LEFT, Action.FORWARD, Action.FORWARD]).as_tuple() == (0, -2, -1)
    assert dead_reckon([]).as_tuple() == (0, 0, 0)
    d = dead_reckon([Action.TURN_AROUND, Action.FORWARD])
    assert d.as_tuple() == (-1, 0, 2)


def test_dead_reckoning_skips_blocked_forwards():
    acts = [Action.FORWARD, Action.FORWARD, Action.FORWARD]
    assert dead_reckon(acts, blocked=[False, True, False]).as_tuple() == (2, 0, 0)


def test_displacement_apply_rotates_into_world_frame():
    d = Displacement((2, 1, 0, 0), 1)  # two ahead, then one after a right turn
    assert d.apply(Pose(5, 5, 0)) == Pose(7, 6, 1)
    assert d.apply(Pose(5, 5, 3)) == Pose(6, 3, 0)


@given(st.lists(st.sampled_from(list(Action)), max_size=30), st.sampled_from([4, 8]))
def test_noiseless_execution_matches_dead_reckoning(actions, H):
    size = 2 * len(actions) + 5
    grid = empty_room(size, size)
    start = Pose(size // 2, size // 2, 0)
    pose = start
    rng = np.random.default_rng(0)
    for a in actions:
        pose = step(grid, pose, a, ZERO, rng, n_headings=H).new_pose
    assert dead_reckon(actions, H).apply(start) == pose


@given(st.lists(st.sampled_from(list(Action)), max_size=12), st.lists(st.sampled_from(list(Action)), max_size=12))
def test_dead_reckoning_composes(a, b):
    start = Pose(0, 0, 1)
    assert dead_reckon(a + b).apply(start) == dead_reckon(b).apply(dead_reckon(a).apply(start))
