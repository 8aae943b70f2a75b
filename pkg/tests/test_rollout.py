from __future__ import annotations

import json
import os
import subprocess
import sys

import numpy as np
import pytest

from collision_replay import _accel
from collision_replay._kernels import walk_batch
from collision_replay.agent import Action, NoiseModel
from collision_replay.gridmap import generate_map, heading_dirs
from collision_replay.rollout import (
    PolicyConfig,
    check_trajectory,
    run_batch,
    run_walk,
    trajectories_from_jsonl,
    trajectory_from_jsonl,
    trajectory_to_jsonl,
)

from .helpers import corridor, empty_room

GRID = generate_map("rooms", 11, 18, 14, 0.05)


def test_policy_validation():
    with pytest.raises(ValueError):
        PolicyConfig(0.5, 0.2, 0.2)
    with pytest.raises(ValueError):
        PolicyConfig(1.2, -0.1, -0.1)
    np.testing.assert_allclose(PolicyConfig().cumulative(), [0.6, 0.8, 1.0])


def test_same_seed_same_walk():
    a = run_walk(GRID, PolicyConfig(), NoiseModel(), 300, 5)
    b = run_walk(GRID, PolicyConfig(), NoiseModel(), 300, 5)
    c = run_walk(GRID, PolicyConfig(), NoiseModel(), 300, 6)
    assert a == b and a != c


def test_walks_are_valid():
    for tr in run_batch(GRID, PolicyConfig(), NoiseModel(0.2, 0.2), 10, 400, 0):
        check_trajectory(tr, GRID)
        assert GRID.free[tr.y, tr.x].all()


def test_collision_is_followed_by_turn_around():
    tr = run_walk(corridor(4), PolicyConfig(1.0, 0.0, 0.0), NoiseModel.zero(), 40, 0)
    hits = np.nonzero(tr.collided[:-1])[0]
    assert len(hits) > 0
    assert (tr.action[hits + 1] == Action.TURN_AROUND).all()


def test_without_turn_around_forward_only_walk_sticks_to_wall():
    tr = run_walk(corridor(4), PolicyConfig(1.0, 0.0, 0.0, False), NoiseModel.zero(), 30, 0)
    first = int(np.argmax(tr.collided))
    assert tr.collided[first:].all()


def test_batch_equals_individual_walks_and_is_worker_independent():
    batch = run_batch(GRID, PolicyConfig(), NoiseModel(), 6, 200, 40)
    single = [run_walk(GRID, PolicyConfig(), NoiseModel(), 200, 40 + i) for i in range(6)]
    serial = run_batch(GRID, PolicyConfig(), NoiseModel(), 6, 200, 40, workers=1)
    threaded = run_batch(GRID, PolicyConfig(), NoiseModel(), 6, 200, 40, workers=4)
    assert batch == single == serial == threaded


def test_numba_and_numpy_kernels_agree_bit_for_bit():
    if not _accel.HAVE_NUMBA:
        pytest.skip("numba not installed")
    rng = np.random.default_rng(0)
    ys, xs = np.nonzero(GRID.free)
    pick = rng.integers(len(xs), size=25)
    for H in (4, 8):
        starts = np.column_stack([xs[pick], ys[pick], rng.integers(H, size=25)]).astype(np.int64)
        u = rng.random((25, 300, 3))
        args = (GRID.occ, heading_dirs(H), H, starts, u, PolicyConfig().cumulative(), True, 0.2, 0.3)
        nb = walk_batch(*args, use_numba=True)
        npy = walk_batch(*args, use_numba=False)
        for a, b in zip(nb, npy):
            np.testing.assert_array_equal(a, b)


def test_env_flag_selects_numpy_backend_with_same_output():
    code = ("import json; from collision_replay import _accel; "
            "from collision_replay.rollout import run_batch, PolicyConfig; "
            "from collision_replay.agent import NoiseModel; "
            "from collision_replay.gridmap import generate_map; "
            "g = generate_map('rooms', 11, 18, 14, 0.05); "
            "t = run_batch(g, PolicyConfig(), NoiseModel(), 3, 150, 9); "
            "print(json.dumps([_accel.backend_name(), [x.x.tolist() for x in t]]))")
    outs = []
    for flag in ("0", "1"):
        env = dict(os.environ, COLLISION_REPLAY_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                             check=True)
        outs.append(json.loads(res.stdout))
    assert outs[0][0] == "numpy"
    assert outs[0][1] == outs[1][1]


def test_start_pose_is_uniform_over_free_cells_and_headings():
    grid = empty_room(4, 4)  # 4 free cells x 4 headings
    starts = [(t.x[0], t.y[0], t.heading[0])
              for t in run_batch(grid, PolicyConfig(), NoiseModel(), 3200, 1, 0)]
    counts = np.unique(np.array(starts), axis=0, return_counts=True)[1]
    assert len(counts) == 16
    assert abs(counts - 200).max() < 5 * np.sqrt(200)


def test_jsonl_round_trip():
    tr = run_walk(GRID, PolicyConfig(), NoiseModel(), 50, 3)
    text = trajectory_to_jsonl(tr, {"config_hash": "abc"})
    header = json.loads(text.splitlines()[0])
    assert header["type"] == "header" and header["config_hash"] == "abc"
    assert header["map_id"] == GRID.map_id and header["seed"] == 3
    rec = json.loads(text.splitlines()[1])
    assert set(rec) == {"t", "x", "y", "heading", "action", "collided"}
    back = trajectory_from_jsonl(text)
    assert back == tr
    assert trajectory_to_jsonl(back, {"config_hash": "abc"}) == text


def test_multi_trajectory_log():
    trs = run_batch(GRID, PolicyConfig(), NoiseModel(), 3, 20, 0)
    text = "".join(trajectory_to_jsonl(t) for t in trs)
    assert trajectories_from_jsonl(text) == trs


def test_jsonl_rejects_headerless_log():
    with pytest.raises(ValueError):
        trajectory_from_jsonl('{"t": 0}\n')
