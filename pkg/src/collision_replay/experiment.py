"""Declarative experiment configs and the walk -> fit -> decode -> eval pipeline."""
from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .agent import NoiseModel
from .analysis import MetricsReport, field_metrics, iou
from .decode import DecodeConfig, distance_field, floorplan, scalar_distance_field
from .estimator import FreeSpaceMap, HittingTable, ScalarField, fit_freespace, fit_mean, fit_median, fit_table
from .gridmap import GridMap, generate_map, ground_truth_df, load_map
from .replay import ReplayConfig, label_batch
from .rollout import PolicyConfig, Trajectory, run_batch

REGIMES = ("oracle", "dead-reckoned")


@dataclass(frozen=True)
class MapSource:
    source: str = "generator"
    kind: str = "rooms"
    seed: int = 0
    width: int = 20
    height: int = 20
    density: float = 0.05
    path: str = ""
    step_size: float = 0.25


@dataclass(frozen=True)
class ExperimentConfig:
    map: MapSource = field(default_factory=MapSource)
    n_headings: int = 4
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    noise: NoiseModel = field(default_factory=NoiseModel)
    replay: ReplayConfig = field(default_factory=ReplayConfig)
    alpha: float = 1e-3
    decode: DecodeConfig = field(default_factory=DecodeConfig)
    n_walks: int = 10
    n_steps: int = 500
    base_seed: int = 0
    output: str = "out"

    def __post_init__(self):
        if self.n_headings not in (4, 8):
            raise ValueError("n_headings must be 4 or 8")
        if self.n_walks < 0 or self.n_steps < 1:
            raise ValueError("need n_walks >= 0 and n_steps >= 1")
        if self.map.source not in ("generator", "file"):
            raise ValueError("map source must be 'generator' or 'file'")
        if self.map.source == "file" and not self.map.path:
            raise ValueError("map source 'file' needs a path")

    # -- text form ---------------------------------------------------------

    def to_parser(self) -> configparser.ConfigParser:
        cp = configparser.ConfigParser()
        m = self.map
        cp["map"] = {"source": m.source, "kind": m.kind, "seed": str(m.seed), "width": str(m.width),
                     "height": str(m.height), "density": repr(m.density), "path": m.path,
                     "step_size": repr(m.step_size)}
        cp["agent"] = {"n_headings": str(self.n_headings)}
        p = self.policy
        cp["policy"] = {"p_forward": repr(p.p_forward), "p_left": repr(p.p_left),
                        "p_right": repr(p.p_right),
                        "turn_around_on_collision": str(p.turn_around_on_collision).lower()}
        cp["noise"] = {"p_forward_slip": repr(self.noise.p_forward_slip),
                       "p_turn_slip": repr(self.noise.p_turn_slip)}
        r = self.replay
        cp["replay"] = {"k": str(r.k), "window": str(r.window), "clock": r.clock}
        cp["estimator"] = {"alpha": repr(self.alpha)}
        cp["decode"] = {"eps": repr(self.decode.eps), "interpolate": str(self.decode.interpolate).lower()}
        cp["walks"] = {"n_walks": str(self.n_walks), "n_steps": str(self.n_steps),
                       "base_seed": str(self.base_seed)}
        cp["output"] = {"dir": self.output}
        return cp

    def dumps(self) -> str:
        buf = io.StringIO()
        self.to_parser().write(buf)
        return buf.getvalue()

    def digest(self) -> str:
        """Hash of everything except the output location."""
        cp = self.to_parser()
        cp.remove_section("output")
        buf = io.StringIO()
        cp.write(buf)
        return hashlib.sha256(buf.getvalue().encode()).hexdigest()[:16]

    @classmethod
    def loads(cls, text: str) -> ExperimentConfig:
        cp = configparser.ConfigParser()
        cp.read_string(text)
        known = {"map", "agent", "policy", "noise", "replay", "estimator", "decode", "walks", "output"}
        unknown = set(cp.sections()) - known
        if unknown:
            raise ValueError(f"unknown config sections: {sorted(unknown)}")

        def get(sec, key, conv, default):
            if cp.has_option(sec, key):
                raw = cp.get(sec, key)
                return conv(raw) if conv is not bool else cp.getboolean(sec, key)
            return default

        d = cls()
        m = d.map
        mp = MapSource(
            get("map", "source", str, m.source), get("map", "kind", str, m.kind),
            get("map", "seed", int, m.seed), get("map", "width", int, m.width),
            get("map", "height", int, m.height), get("map", "density", float, m.density),
            get("map", "path", str, m.path), get("map", "step_size", float, m.step_size),
        )
        pol = PolicyConfig(
            get("policy", "p_forward", float, d.policy.p_forward),
            get("policy", "p_left", float, d.policy.p_left),
            get("policy", "p_right", float, d.policy.p_right),
            get("policy", "turn_around_on_collision", bool, d.policy.turn_around_on_collision),
        )
        noise = NoiseModel(
            get("noise", "p_forward_slip", float, d.noise.p_forward_slip),
            get("noise", "p_turn_slip", float, d.noise.p_turn_slip),
        )
        rep = ReplayConfig(
            get("replay", "k", int, d.replay.k), get("replay", "window", int, d.replay.window),
            "oracle", get("replay", "clock", str, d.replay.clock),
        )
        dec = DecodeConfig(get("decode", "eps", float, d.decode.eps),
                           get("decode", "interpolate", bool, d.decode.interpolate))
        return cls(
            mp, get("agent", "n_headings", int, d.n_headings), pol, noise, rep,
            get("estimator", "alpha", float, d.alpha), dec,
            get("walks", "n_walks", int, d.n_walks), get("walks", "n_steps", int, d.n_steps),
            get("walks", "base_seed", int, d.base_seed), get("output", "dir", str, d.output),
        )


def build_map(cfg: ExperimentConfig, base_dir: Path | None = None) -> GridMap:
    m = cfg.map
    if m.source == "file":
        path = Path(m.path)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return load_map(path.read_text(), m.step_size, path.stem)
    return generate_map(m.kind, m.seed, m.width, m.height, m.density, m.step_size)


def collect(cfg: ExperimentConfig, grid: GridMap) -> list[Trajectory]:
    return run_batch(grid, cfg.policy, cfg.noise, cfg.n_walks, cfg.n_steps, cfg.base_seed,
                     cfg.n_headings)


@dataclass
class Fitted:
    tables: dict[str, HittingTable]
    means: dict[str, ScalarField]
    medians: dict[str, ScalarField]
    freespace: FreeSpaceMap


def replay_config(cfg: ExperimentConfig, regime: str) -> ReplayConfig:
    r = cfg.replay
    return ReplayConfig(r.k, r.window, regime, r.clock)


def fit_all(cfg: ExperimentConfig, grid: GridMap, trajs: list[Trajectory]) -> Fitted:
    tables, means, medians = {}, {}, {}
    for regime in REGIMES:
        samples = label_batch(trajs, replay_config(cfg, regime), grid)
        samples.n_headings = cfg.n_headings
        tables[regime] = fit_table(samples, grid, cfg.alpha, cfg.replay.k)
        means[regime] = fit_mean(samples, grid)
        medians[regime] = fit_median(samples, grid)
    return Fitted(tables, means, medians, fit_freespace(trajs, grid))


@dataclass(frozen=True)
class EvalRow:
    method: str
    regime: str
    report: MetricsReport | None
    iou: float


def evaluate(cfg: ExperimentConfig, grid: GridMap, fitted: Fitted, delta: float | None = None,
             min_samples: int = 1) -> list[EvalRow]:
    """Rows mirroring a results table: classification, median, mean, free-space."""
    delta = grid.step_size if delta is None else delta
    truth = ground_truth_df(grid, cfg.n_headings)
    rows = []
    for regime in REGIMES:
        table = fitted.tables[regime]
        mask = table.n_samples.sum(axis=0) >= min_samples
        candidates = [
            ("classification", distance_field(table, cfg.decode)),
            ("regression-l1", scalar_distance_field(fitted.medians[regime])),
            ("regression-l2", scalar_distance_field(fitted.means[regime])),
        ]
        for name, df in candidates:
            rep = field_metrics(df, truth, delta, mask)
            rows.append(EvalRow(name, regime, rep, rep.iou))
    plan = floorplan(fitted.freespace)
    rows.append(EvalRow("free-space", "oracle", None, iou(plan, grid.free)))
    return rows


def rows_to_csv(rows: list[EvalRow], header: str | None = None) -> str:
    out = []
    if header:
        out.append(f"# {header}")
    out.append("method,regime,mae,rmse,pct_within_delta,iou,n_cells,overestimate_fraction")
    for r in rows:
        if r.report is None:
            out.append(f"{r.method},{r.regime},,,,{r.iou:.4f},,")
        else:
            m = r.report
            out.append(f"{r.method},{r.regime},{m.mae:.4f},{m.rmse:.4f},{m.pct_within_delta:.4f},"
                       f"{m.iou:.4f},{m.n_cells},{m.overestimate_fraction:.4f}")
    return "\n".join(out) + "\n"


def rows_to_text(rows: list[EvalRow]) -> str:
    lines = [f"{'method':<16}{'regime':<15}{'MAE':>8}{'RMSE':>8}{'%<d':>8}{'IoU':>8}{'cells':>7}"]
    for r in rows:
        if r.report is None:
            lines.append(f"{r.method:<16}{r.regime:<15}{'-':>8}{'-':>8}{'-':>8}{r.iou:>8.3f}{'-':>7}")
        else:
            m = r.report
            lines.append(f"{r.method:<16}{r.regime:<15}{m.mae:>8.3f}{m.rmse:>8.3f}"
                         f"{m.pct_within_delta:>8.3f}{m.iou:>8.3f}{m.n_cells:>7d}")
    return "\n".join(lines)


def demo_maps(n: int = 5, size: int = 20, density: float = 0.05, first_seed: int = 100) -> list[GridMap]:
    """The bundled demo scenes: seeded room layouts."""
    return [generate_map("rooms", first_seed + i, size, size, density) for i in range(n)]


def field_array(df) -> np.ndarray:
    return np.asarray(df.values)
