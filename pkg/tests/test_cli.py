from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np
import pytest

from collision_replay import cli
from collision_replay import experiment as ex
from collision_replay.gridmap import MapGenerationError

ROOM7 = "#######\n#.....#\n#.....#\n#.....#\n#.....#\n#.....#\n#######\n"


def write_cfg(path: Path, out: Path, **walks) -> Path:
    cfg = ex.ExperimentConfig(map=ex.MapSource(kind="rooms", seed=5, width=12, height=12),
                              n_walks=walks.get("n_walks", 8), n_steps=300, output=str(out))
    path.write_text(cfg.dumps())
    return path


def tree_digest(root: Path) -> dict:
    return {p.relative_to(root).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


def read_field(path: Path) -> np.ndarray:
    rows = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    return np.array([[np.nan if v in ("", "occ") else float(v) for v in r.split(",")] for r in rows])


def test_map_stats_on_room(tmp_path, capsys):
    f = tmp_path / "room.txt"
    f.write_text(ROOM7)
    assert cli.main(["map", "stats", str(f)]) == 0
    out = capsys.readouterr().out
    assert "free cells 25" in out and "DF range 0.00..0.50 m" in out


def test_map_gen_and_convert(tmp_path, capsys):
    m = tmp_path / "m.txt"
    assert cli.main(["map", "gen", "--kind", "corridors", "--seed", "2", "--size", "16x12", "-o", str(m)]) == 0
    assert m.read_text().startswith("# corridors-s2-16x12")
    assert cli.main(["map", "stats", str(m)]) == 0
    assert "corridors-s2-16x12: 16x12" in capsys.readouterr().out
    assert cli.main(["map", "convert", str(m), "-o", str(tmp_path / "df.pgm")]) == 0
    assert (tmp_path / "df.pgm").read_text().startswith("P2")
    assert cli.main(["map", "convert", str(m), "-o", str(tmp_path / "df.csv")]) == 0
    assert read_field(tmp_path / "df.csv").shape == (12, 16)


def test_usage_errors_exit_2(tmp_path):
    with pytest.raises(SystemExit) as e:
        cli.main(["map", "gen", "--size", "4x4"])
    assert e.value.code == 2
    assert cli.main(["map", "gen", "--density", "0.9"]) == 2
    assert cli.main(["ruin", "--z", "0", "--a", "10", "--p", "0.5"]) == 2
    assert cli.main(["ruin", "--z", "3", "--a", "10", "--p", "1.0"]) == 2
    bad = tmp_path / "bad.ini"
    bad.write_text("[nope]\nx=1\n")
    assert cli.main(["walk", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2


def test_generation_failure_exits_3(monkeypatch):
    def boom(*a, **k):
        raise MapGenerationError("no luck")
    monkeypatch.setattr(cli, "generate_map", boom)
    assert cli.main(["map", "gen"]) == 3


def test_missing_artifacts_exit_4(tmp_path):
    cfg = write_cfg(tmp_path / "c.ini", tmp_path / "out")
    assert cli.main(["fit", "--config", str(cfg)]) == 4
    assert cli.main(["map", "stats", str(tmp_path / "absent.txt")]) == 4
    assert cli.main(["walk", "--config", str(tmp_path / "absent.ini")]) == 4


def test_init_round_trips(tmp_path):
    p = tmp_path / "d.ini"
    assert cli.main(["init", "-o", str(p)]) == 0
    assert ex.ExperimentConfig.loads(p.read_text()) == ex.ExperimentConfig()


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("run")
    cfg = write_cfg(root / "c.ini", root / "out")
    assert cli.main(["run", "--config", str(cfg)]) == 0
    return root


def test_run_writes_tagged_artifacts(run_dir):
    out = run_dir / "out"
    digest = ex.ExperimentConfig.loads((run_dir / "c.ini").read_text()).digest()
    names = {p.name for p in out.iterdir()}
    for r in ex.REGIMES:
        assert {f"table_{r}.csv", f"df_{r}.csv", f"df_{r}.pgm", f"heading_{r}_h3.pgm"} <= names
    assert {"map.txt", "trajectories.jsonl", "eval.csv"} <= names
    for n in ("map.txt", "table_oracle.csv", "df_oracle.csv", "df_oracle.pgm", "eval.csv"):
        assert f"config={digest}" in (out / n).read_text()
    assert f'"config_hash": "{digest}"' in (out / "trajectories.jsonl").read_text()


def test_run_is_deterministic(run_dir, tmp_path):
    cfg = run_dir / "c.ini"
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "again")]) == 0
    assert tree_digest(tmp_path / "again") == tree_digest(run_dir / "out")


def test_larger_eps_never_shrinks_df(run_dir, tmp_path):
    cfg = run_dir / "c.ini"
    fields = {}
    for eps in ("0.05", "0.5"):
        d = tmp_path / eps
        d.mkdir()
        for name in ("map.txt", "trajectories.jsonl", "table_oracle.csv", "table_dead-reckoned.csv"):
            (d / name).write_bytes((run_dir / "out" / name).read_bytes())
        assert cli.main(["decode", "--config", str(cfg), "--out", str(d), "--eps", eps]) == 0
        fields[eps] = read_field(d / "df_oracle.csv")
    lo, hi = fields["0.05"], fields["0.5"]
    ok = ~np.isnan(lo)
    assert np.array_equal(ok, ~np.isnan(hi))
    assert (hi[ok] >= lo[ok] - 1e-12).all()


def test_eval_min_samples(run_dir, capsys):
    cfg = run_dir / "c.ini"
    assert cli.main(["eval", "--config", str(cfg), "--out", str(run_dir / "out"), "--min-samples", "5"]) == 0
    assert "free-space" in capsys.readouterr().out


def test_ruin_report_and_files(tmp_path, capsys):
    args = ["ruin", "--z", "20", "--a", "51", "--p", "0.8"]
    assert cli.main(args) == 0
    out = capsys.readouterr().out
    assert "expected_duration     33.3333" in out
    assert "(1/86.7)" in out
    pmf, curves = tmp_path / "pmf.csv", tmp_path / "curves.csv"
    full = ["ruin", "--z", "3", "--a", "10", "--p", "0.6", "--mc", "2000", "--seed", "4",
            "--horizon", "30", "--csv", str(pmf), "--curves", str(curves)]
    assert cli.main(full) == 0
    first = pmf.read_bytes(), curves.read_bytes()
    lines = pmf.read_text().splitlines()
    assert lines[1] == "t,pmf,mc_frequency" and len(lines) == 32
    assert curves.read_text().splitlines()[1] == "z,p_le_z0,p_le_z2,p_le_z4,mc_le_z0,mc_le_z2,mc_le_z4"
    assert cli.main(full) == 0
    assert (pmf.read_bytes(), curves.read_bytes()) == first


def test_nn_query(run_dir, tmp_path, capsys):
    out = run_dir / "out"
    table = (out / "table_oracle.csv")
    assert table.is_file()
    # pick a cell that has a profile
    from collision_replay.analysis import profiles_from_table
    from collision_replay.estimator import table_from_csv
    prof = profiles_from_table(table_from_csv(table.read_text()))[0]
    x, y = prof.key
    assert cli.main(["nn", str(out), "--query", f"{x},{y}", "-m", "3"]) == 0
    rows = capsys.readouterr().out.strip().splitlines()
    assert rows[0] == "rank,scene,x,y,jsd,label"
    assert rows[1].split(",")[2:5] == [str(x), str(y), "0.000000"]
    assert len(rows) == 4
    assert cli.main(["nn", str(out), str(out), "--query", f"{x},{y}", "-m", "5", "--per-scene"]) == 0
    assert len(capsys.readouterr().out.strip().splitlines()) == 2
    assert cli.main(["nn", str(out), "--query", "0,0"]) == 4
