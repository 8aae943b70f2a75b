"""Command-line front end: map tools, the config-driven pipeline, ruin analytics, NN lookup.

Exit codes: 0 ok, 2 usage / invalid parameters, 3 map generation failure,
4 missing input artifact.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import experiment as ex
from .analysis import CLASS_NAMES, geometry_labels, nearest_neighbors, profiles_from_table
from .decode import DecodeConfig, distance_field, per_heading_map
from .estimator import fit_freespace, table_from_csv, table_mean, table_median, table_to_csv
from .gridmap import (
    MAP_KINDS,
    DistField,
    InvalidMapError,
    MapGenerationError,
    field_to_csv,
    field_to_pgm,
    generate_map,
    ground_truth_df,
    load_map,
    save_map,
)
from .rollout import trajectories_from_jsonl, trajectory_to_jsonl
from .ruin import (
    PrecisionError,
    RuinParams,
    expected_duration,
    mc_absorbing_walk,
    mc_near_shortest_curve,
    near_shortest_curve,
    ruin_probability,
    ruin_time_pmf_table,
    shortest_path_probability,
)

EXIT_OK, EXIT_USAGE, EXIT_GENERATION, EXIT_MISSING = 0, 2, 3, 4

MAP_FILE = "map.txt"
WALK_FILE = "trajectories.jsonl"
EVAL_FILE = "eval.csv"


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _missing(path: Path) -> CliError:
    return CliError(f"missing artifact: {path}", EXIT_MISSING)


def _read(path: Path) -> str:
    if not path.is_file():
        raise _missing(path)
    return path.read_text()


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _size(text: str) -> tuple[int, int]:
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must look like WxH, got {text!r}") from None
    if w < 8 or h < 8:
        raise argparse.ArgumentTypeError(f"size must be at least 8x8, got {text!r}")
    return w, h


def _cell(text: str) -> tuple[int, int]:
    try:
        x, y = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"cell must look like x,y, got {text!r}") from None
    return x, y


def _load_map_file(path: Path, step_size: float) -> ex.GridMap:
    text = _read(path)
    first = text.splitlines()[0] if text else ""
    name = first[2:].split()[0] if first.startswith("# ") else path.stem
    # header lines are "# " + text; map rows never contain a space
    body = "\n".join(ln for ln in text.splitlines() if not ln.startswith("# "))
    return load_map(body, step_size, name)


def _map_text(grid: ex.GridMap, tag: str) -> str:
    return f"# {grid.map_id} {tag}\n" + save_map(grid)


def _df_stats(grid: ex.GridMap, n_headings: int) -> str:
    df = ground_truth_df(grid, n_headings)
    v = df.values[df.defined]
    return (f"map {grid.map_id}: {grid.width}x{grid.height}, free cells {grid.n_free}, "
            f"DF range {v.min():.2f}..{v.max():.2f} m")


# -- map -----------------------------------------------------------------------

def cmd_map_gen(args) -> int:
    w, h = args.size
    try:
        grid = generate_map(args.kind, args.seed, w, h, args.density, args.step_size)
    except MapGenerationError as err:
        raise CliError(str(err), EXIT_GENERATION) from err
    except ValueError as err:
        raise CliError(str(err), EXIT_USAGE) from err
    text = _map_text(grid, f"kind={args.kind} seed={args.seed} density={args.density!r}")
    if args.output:
        _write(Path(args.output), text)
    else:
        sys.stdout.write(text)
    print(_df_stats(grid, 4), file=sys.stderr if not args.output else sys.stdout)
    return EXIT_OK


def cmd_map_stats(args) -> int:
    grid = _load_map_file(Path(args.map), args.step_size)
    print(_df_stats(grid, args.headings))
    return EXIT_OK


def cmd_map_convert(args) -> int:
    grid = _load_map_file(Path(args.map), args.step_size)
    df = ground_truth_df(grid, args.headings)
    tag = f"ground-truth DF of {grid.map_id} H={args.headings}"
    out = Path(args.output)
    if out.suffix == ".pgm":
        _write(out, field_to_pgm(df, tag))
    else:
        _write(out, field_to_csv(df, tag))
    print(f"wrote {out}")
    return EXIT_OK


# -- config-driven pipeline -------------------------------------------------------

def _load_config(args) -> tuple[ex.ExperimentConfig, Path, Path]:
    path = Path(args.config)
    try:
        cfg = ex.ExperimentConfig.loads(_read(path))
    except CliError:
        raise
    except ValueError as err:
        raise CliError(f"invalid config {path}: {err}", EXIT_USAGE) from err
    if getattr(args, "eps", None) is not None:
        try:
            cfg = replace(cfg, decode=replace(cfg.decode, eps=args.eps))
        except ValueError as err:
            raise CliError(str(err), EXIT_USAGE) from err
    out = Path(args.out) if getattr(args, "out", None) else Path(cfg.output)
    return cfg, path.parent, out


def _stage_tag(cfg: ex.ExperimentConfig, stage: str) -> str:
    return f"collision-replay {stage} config={cfg.digest()}"


def _pipeline_map(cfg, out: Path) -> ex.GridMap:
    return _load_map_file(out / MAP_FILE, cfg.map.step_size)


def cmd_walk(args) -> int:
    cfg, base, out = _load_config(args)
    try:
        grid = ex.build_map(cfg, base)
    except MapGenerationError as err:
        raise CliError(str(err), EXIT_GENERATION) from err
    except FileNotFoundError as err:
        raise _missing(Path(err.filename)) from err
    except (InvalidMapError, ValueError) as err:
        raise CliError(f"invalid map: {err}", EXIT_USAGE) from err
    trajs = ex.collect(cfg, grid)
    _write(out / MAP_FILE, _map_text(grid, _stage_tag(cfg, "map")))
    extra = {"config_hash": cfg.digest()}
    _write(out / WALK_FILE, "".join(trajectory_to_jsonl(t, extra) for t in trajs))
    n_coll = sum(int(t.collided.sum()) for t in trajs)
    print(f"walk: {len(trajs)} walks x {cfg.n_steps} steps on {grid.map_id}, "
          f"{n_coll} collisions -> {out / WALK_FILE}")
    return EXIT_OK


def _load_trajs(out: Path):
    return trajectories_from_jsonl(_read(out / WALK_FILE))


def cmd_fit(args) -> int:
    cfg, _, out = _load_config(args)
    grid = _pipeline_map(cfg, out)
    fitted = ex.fit_all(cfg, grid, _load_trajs(out))
    for regime in ex.REGIMES:
        path = out / f"table_{regime}.csv"
        _write(path, table_to_csv(fitted.tables[regime], _stage_tag(cfg, f"fit regime={regime}")))
        print(f"fit: {regime} table, {int(fitted.tables[regime].counts.sum())} samples -> {path}")
    return EXIT_OK


def _load_tables(out: Path) -> dict:
    return {r: table_from_csv(_read(out / f"table_{r}.csv")) for r in ex.REGIMES}


def cmd_decode(args) -> int:
    cfg, _, out = _load_config(args)
    tables = _load_tables(out)
    for regime, table in tables.items():
        tag = _stage_tag(cfg, f"decode regime={regime} eps={cfg.decode.eps!r}")
        df = distance_field(table, cfg.decode)
        _write(out / f"df_{regime}.csv", field_to_csv(df, tag))
        _write(out / f"df_{regime}.pgm", field_to_pgm(df, tag))
        per = per_heading_map(table, cfg.decode)
        for h in range(per.shape[0]):
            dh = DistField(per[h], table.step_size, f"heading {h}")
            _write(out / f"heading_{regime}_h{h}.csv", field_to_csv(dh, f"{tag} heading={h}"))
            _write(out / f"heading_{regime}_h{h}.pgm", field_to_pgm(dh, f"{tag} heading={h}"))
        print(f"decode: {regime} DF on {int(df.defined.sum())} cells -> {out / f'df_{regime}.csv'}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg, _, out = _load_config(args)
    grid = _pipeline_map(cfg, out)
    tables = _load_tables(out)
    fitted = ex.Fitted(
        tables,
        {r: table_mean(t) for r, t in tables.items()},
        {r: table_median(t) for r, t in tables.items()},
        fit_freespace(_load_trajs(out), grid),
    )
    rows = ex.evaluate(cfg, grid, fitted, min_samples=args.min_samples)
    _write(out / EVAL_FILE, ex.rows_to_csv(rows, _stage_tag(cfg, "eval")))
    print(ex.rows_to_text(rows))
    return EXIT_OK


def cmd_run(args) -> int:
    for fn in (cmd_walk, cmd_fit, cmd_decode, cmd_eval):
        code = fn(args)
        if code:
            return code
    return EXIT_OK


def cmd_init(args) -> int:
    text = ex.ExperimentConfig().dumps()
    if args.output:
        _write(Path(args.output), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- ruin -------------------------------------------------------------------------

def cmd_ruin(args) -> int:
    try:
        params = RuinParams(args.z, args.a, args.p)
        if not 0 < args.p < 1:
            raise ValueError("--p must lie strictly between 0 and 1")
    except ValueError as err:
        raise CliError(str(err), EXIT_USAGE) from err
    z, a, p = params.z, params.a, params.p_toward
    lines = [f"ruin z={z} a={a} p_toward={p!r}",
             f"ruin_probability      {ruin_probability(params):.8f}",
             f"expected_duration     {expected_duration(params):.4f}"]
    near = z <= a / 2
    if near:
        sp = shortest_path_probability(params)
        lines.append(f"shortest_path_prob    {sp:.6g} (1/{1 / sp:.1f})")
    mc = None
    if args.mc:
        mc = mc_absorbing_walk(params, args.mc, args.seed, args.t_max)
        lines += [f"mc episodes           {mc.n_episodes} (seed {args.seed})",
                  f"mc ruin_fraction      {mc.ruin_fraction:.6f}",
                  f"mc mean_time          {mc.mean_time:.4f}",
                  f"mc censored           {mc.n_censored}"]
        if near:
            lines.append(f"mc shortest_freq      {mc.ruin_hist[z] / mc.n_episodes:.6f}")
    print("\n".join(lines))

    if args.csv:
        tag = f"# ruin z={z} a={a} p_toward={p!r} mc={args.mc} seed={args.seed}"
        try:
            pmf = ruin_time_pmf_table(params, args.horizon)
        except PrecisionError as err:
            raise CliError(str(err), EXIT_USAGE) from err
        freq = mc.ruin_frequency() if mc is not None else None
        rows = [tag, "t,pmf,mc_frequency"]
        for t in range(1, args.horizon + 1):
            f = "" if freq is None or t >= len(freq) else f"{freq[t]:.8f}"
            rows.append(f"{t},{pmf[t]:.10g},{f}")
        _write(Path(args.csv), "\n".join(rows) + "\n")
        print(f"wrote {args.csv}")
    if args.curves:
        slacks = (0, 2, 4)
        closed = {s: near_shortest_curve(a, p, s)[1] for s in slacks}
        zs = np.arange(1, a // 2 + 1)
        sim = {}
        if args.mc:
            sim = {s: mc_near_shortest_curve(a, p, s, args.mc, args.seed)[1] for s in slacks}
        head = ["z"] + [f"p_le_z{s}" for s in slacks] + ([f"mc_le_z{s}" for s in slacks] if sim else [])
        rows = [f"# near-shortest ruin a={a} p_toward={p!r} mc={args.mc} seed={args.seed}", ",".join(head)]
        for i, zz in enumerate(zs):
            vals = [f"{closed[s][i]:.8f}" for s in slacks] + [f"{sim[s][i]:.8f}" for s in sim]
            rows.append(f"{zz}," + ",".join(vals))
        _write(Path(args.curves), "\n".join(rows) + "\n")
        print(f"wrote {args.curves}")
    return EXIT_OK


# -- nearest neighbours -----------------------------------------------------------

def cmd_nn(args) -> int:
    corpus, labels = [], {}
    for d in args.runs:
        run = Path(d)
        table = table_from_csv(_read(run / "table_oracle.csv"))
        grid = _load_map_file(run / MAP_FILE, table.step_size)
        scene = grid.map_id
        labels[scene] = geometry_labels(grid)
        corpus += profiles_from_table(table, scene, args.min_count)
    query_scene = _load_map_file(Path(args.runs[0]) / MAP_FILE, 0.25).map_id
    query = next((p for p in corpus if p.scene == query_scene and p.key == args.query), None)
    if query is None:
        raise CliError(f"no profile for cell {args.query} in {args.runs[0]}", EXIT_MISSING)
    hits = nearest_neighbors(query, corpus, args.m, args.per_scene)
    print("rank,scene,x,y,jsd,label")
    for rank, (prof, score) in enumerate(hits, start=1):
        x, y = prof.key
        lab = CLASS_NAMES[int(labels[prof.scene][y, x])]
        print(f"{rank},{prof.scene},{x},{y},{score:.6f},{lab}")
    return EXIT_OK


# -- parser -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="collision-replay", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    mp = sub.add_parser("map", help="generate, inspect and convert maps")
    msub = mp.add_subparsers(dest="map_command", required=True)
    g = msub.add_parser("gen", help="generate a seeded map")
    g.add_argument("--kind", choices=MAP_KINDS, default="rooms")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--size", type=_size, default=(32, 32), help="WxH in cells")
    g.add_argument("--density", type=float, default=0.0)
    g.add_argument("--step-size", type=float, default=0.25)
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_map_gen)
    s = msub.add_parser("stats", help="free cells and ground-truth DF range")
    s.add_argument("map")
    s.add_argument("--step-size", type=float, default=0.25)
    s.add_argument("--headings", type=int, choices=(4, 8), default=4)
    s.set_defaults(func=cmd_map_stats)
    c = msub.add_parser("convert", help="export the ground-truth DF as CSV or PGM")
    c.add_argument("map")
    c.add_argument("-o", "--output", required=True, help="target .csv or .pgm")
    c.add_argument("--step-size", type=float, default=0.25)
    c.add_argument("--headings", type=int, choices=(4, 8), default=4)
    c.set_defaults(func=cmd_map_convert)

    stages = (("walk", cmd_walk, "simulate random walks"),
              ("fit", cmd_fit, "fit oracle and dead-reckoned hitting tables"),
              ("decode", cmd_decode, "decode distance fields and per-heading maps"),
              ("eval", cmd_eval, "score decoded fields against ground truth"),
              ("run", cmd_run, "walk, fit, decode and eval in one go"))
    for name, fn, helptext in stages:
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", required=True, help="experiment INI file")
        sp.add_argument("--out", help="output directory (overrides [output] dir)")
        if name in ("decode", "run"):
            sp.add_argument("--eps", type=float, help="override [decode] eps")
        if name in ("eval", "run"):
            sp.add_argument("--min-samples", type=int, default=1,
                            help="evaluate cells with at least this many samples")
        sp.set_defaults(func=fn)

    ip = sub.add_parser("init", help="write the default experiment config")
    ip.add_argument("-o", "--output")
    ip.set_defaults(func=cmd_init)

    rp = sub.add_parser("ruin", help="1-D absorbing walk analytics")
    rp.add_argument("--z", type=int, required=True)
    rp.add_argument("--a", type=int, required=True)
    rp.add_argument("--p", type=float, required=True, help="probability of stepping toward wall 0")
    rp.add_argument("--mc", type=int, default=0, help="Monte Carlo episodes")
    rp.add_argument("--seed", type=int, default=0)
    rp.add_argument("--t-max", type=int, default=100_000)
    rp.add_argument("--horizon", type=int, default=200, help="last t in the pmf CSV")
    rp.add_argument("--csv", help="write t,pmf,mc_frequency")
    rp.add_argument("--curves", help="write near-shortest cumulative curves")
    rp.set_defaults(func=cmd_ruin)

    np_ = sub.add_parser("nn", help="nearest-neighbour cells by aligned JSD")
    np_.add_argument("runs", nargs="+", help="run directories; the query comes from the first")
    np_.add_argument("--query", type=_cell, required=True, help="x,y")
    np_.add_argument("-m", type=int, default=5)
    np_.add_argument("--per-scene", action="store_true")
    np_.add_argument("--min-count", type=int, default=1)
    np_.set_defaults(func=cmd_nn)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as err:
        print(f"error: {err}", file=sys.stderr)
        if err.code == EXIT_USAGE:
            parser.print_usage(sys.stderr)
        return err.code


if __name__ == "__main__":
    sys.exit(main())
