from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from collision_replay.gridmap import (
    DIRS4,
    DIRS8,
    GridMap,
    InvalidMapError,
    MapParseError,
    collision_seeds,
    field_to_csv,
    field_to_pgm,
    generate_map,
    ground_truth_df,
    load_map,
    save_map,
)

from .helpers import corridor, empty_room
from .oracles import df_bruteforce, flood_fill_components


def test_heading_tables_are_clockwise_unit_steps():
    # right turn from East faces South (y grows downward)
    assert tuple(DIRS4[1]) == (0, 1)
    assert all(max(abs(d)) == 1 for d in DIRS8)
    assert [tuple(d) for d in DIRS8[::2]] == [tuple(d) for d in DIRS4]


def test_7x7_room_center_is_half_a_meter(room7):
    df = ground_truth_df(room7)
    assert df.values[3, 3] == pytest.approx(0.5)
    assert np.nanmax(df.values) == pytest.approx(0.5)
    assert df.values[1, 1] == 0.0


def test_single_free_cell_has_zero_distance():
    occ = np.ones((3, 3), dtype=bool)
    occ[1, 1] = False
    df = ground_truth_df(GridMap(occ))
    assert df.values[1, 1] == 0.0
    assert df.defined.sum() == 1


def test_corridor_interior_is_wall_adjacent():
    df = ground_truth_df(corridor(6))
    assert np.all(df.values[1, 1:-1] == 0.0)


def test_occupied_cells_are_undefined(room7):
    df = ground_truth_df(room7)
    assert np.isnan(df.values[0]).all()
    assert not df.defined[room7.occ].any()


@pytest.mark.parametrize("kind", ["rooms", "corridors", "random-obstacles"])
@pytest.mark.parametrize("seed", [0, 3])
def test_bfs_matches_per_cell_bruteforce(kind, seed):
    grid = generate_map(kind, seed, 14, 12, 0.1)
    for H in (4, 8):
        fast = ground_truth_df(grid, H).steps()
        np.testing.assert_array_equal(fast, df_bruteforce(grid, H))


@given(st.integers(0, 10_000), st.sampled_from(["rooms", "corridors", "random-obstacles"]),
       st.integers(8, 16), st.integers(8, 16))
def test_df_is_1_lipschitz_between_neighbours(seed, kind, w, h):
    grid = generate_map(kind, seed, w, h, 0.1)
    d = ground_truth_df(grid).steps()
    for dx, dy in DIRS4:
        a = d[1:-1, 1:-1]
        b = d[1 + dy:d.shape[0] - 1 + dy, 1 + dx:d.shape[1] - 1 + dx]
        both = ~np.isnan(a) & ~np.isnan(b)
        assert (np.abs(a - b)[both] <= 1).all()


@given(st.integers(0, 10_000), st.sampled_from(["rooms", "corridors", "random-obstacles"]),
       st.floats(0.0, 0.3))
def test_generated_maps_are_connected_and_walled(seed, kind, density):
    grid = generate_map(kind, seed, 16, 12, density)
    assert flood_fill_components(grid.free) == 1
    assert grid.occ[0].all() and grid.occ[-1].all()
    assert grid.occ[:, 0].all() and grid.occ[:, -1].all()


def test_generation_is_deterministic():
    a = generate_map("rooms", 7, 32, 32)
    b = generate_map("rooms", 7, 32, 32)
    assert a == b and save_map(a) == save_map(b)
    assert a.map_id == "rooms-s7-32x32"
    assert generate_map("rooms", 8, 32, 32) != a


@pytest.mark.parametrize("args", [("rooms", 0, 4, 20), ("rooms", 0, 20, 20, 0.6), ("caves", 0, 20, 20)])
def test_generator_rejects_bad_arguments(args):
    with pytest.raises(ValueError):
        generate_map(*args)


def test_text_round_trip():
    grid = generate_map("corridors", 2, 15, 11)
    assert load_map(save_map(grid)) == grid
    assert save_map(load_map(save_map(grid))) == save_map(grid)


def test_load_accepts_crlf():
    text = "###\r\n#.#\r\n###\r\n"
    assert load_map(text).n_free == 1


@pytest.mark.parametrize("text,line,col", [
    ("####\n#..#\n#.#\n####\n", 3, 4),
    ("####\n#.x#\n####\n", 2, 3),
    ("####\n#...\n####\n", 2, 4),
])
def test_parse_errors_name_line_and_column(text, line, col):
    with pytest.raises(MapParseError) as err:
        load_map(text)
    assert (err.value.line, err.value.column) == (line, col)


def test_invalid_grids_rejected():
    with pytest.raises(InvalidMapError):
        GridMap(np.ones((3, 3), dtype=bool))
    occ = np.zeros((4, 4), dtype=bool)
    with pytest.raises(InvalidMapError):
        GridMap(occ)
    with pytest.raises(InvalidMapError):
        GridMap(np.ones((2, 5), dtype=bool))


def test_occupancy_is_read_only(room7):
    with pytest.raises(ValueError):
        room7.occ[1, 1] = True


def test_seeds_are_cells_facing_an_obstacle(room7):
    seeds = collision_seeds(room7)
    assert seeds[1, 1] and seeds[1, 3] and not seeds[3, 3]
    assert not seeds[0, 0]


def test_csv_and_pgm_exports(room7):
    df = ground_truth_df(room7)
    csv = field_to_csv(df, "hdr")
    lines = csv.splitlines()
    assert lines[0] == "# hdr" and len(lines) == 8
    assert lines[4].split(",")[:4] == ["occ", "0.0000", "0.2500", "0.5000"]
    pgm = field_to_pgm(df, "c").splitlines()
    assert pgm[:4] == ["P2", "# c", "7 7", "255"]
    assert pgm[4 + 3].split()[3] == "255"
    assert pgm[4].split() == ["0"] * 7


def test_8_heading_df_never_exceeds_4_heading_df():
    grid = generate_map("random-obstacles", 5, 16, 16, 0.15)
    d4 = ground_truth_df(grid, 4).values
    d8 = ground_truth_df(grid, 8).values
    ok = ~np.isnan(d4)
    assert (d8[ok] <= d4[ok]).all()


def test_large_room_df():
    df = ground_truth_df(empty_room(21, 11))
    assert np.nanmax(df.steps()) == 4
