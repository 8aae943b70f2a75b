"""Tabular estimators of hitting-time distributions and the scalar baselines."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .agent import Pose
from .gridmap import DEFAULT_STEP_SIZE, DIRS8, GridMap
from .replay import FLAG_OFFMAP, ReplaySamples
from .rollout import Trajectory

TABLE_FORMAT = "collision-replay hitting-table v1"
DEFAULT_ALPHA = 1e-3


class ConfigMismatchError(ValueError):
    pass


class EmptyModelError(LookupError):
    pass


@dataclass(frozen=True, eq=False)
class ProbTable:
    """Normalized distributions per (heading, y, x); ``known`` marks defined keys."""

    probs: np.ndarray
    known: np.ndarray
    k: int
    step_size: float = DEFAULT_STEP_SIZE

    @property
    def n_headings(self) -> int:
        return self.probs.shape[0]


@dataclass(eq=False)
class HittingTable:
    """Multinomial counts over bins ``0..k`` (bin ``k`` means k or more).

    ``counts`` has shape (H, height, width, k + 1).
    """

    counts: np.ndarray
    k: int
    alpha: float = DEFAULT_ALPHA
    step_size: float = DEFAULT_STEP_SIZE

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 4 or self.counts.shape[-1] != self.k + 1:
            raise ValueError("counts must have shape (H, height, width, k + 1)")
        if (self.counts < 0).any():
            raise ValueError("counts must be non-negative")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")

    @classmethod
    def empty(cls, n_headings: int, height: int, width: int, k: int,
              alpha: float = DEFAULT_ALPHA, step_size: float = DEFAULT_STEP_SIZE) -> HittingTable:
        return cls(np.zeros((n_headings, height, width, k + 1), dtype=np.int64), k, alpha, step_size)

    @property
    def n_headings(self) -> int:
        return self.counts.shape[0]

    @property
    def height(self) -> int:
        return self.counts.shape[1]

    @property
    def width(self) -> int:
        return self.counts.shape[2]

    @property
    def n_samples(self) -> np.ndarray:
        return self.counts.sum(axis=-1)

    def config(self) -> tuple:
        return (self.k, self.alpha, self.n_headings, self.height, self.width, self.step_size)

    def distribution(self, x: int, y: int, heading: int) -> np.ndarray:
        c = self.counts[heading, y, x].astype(np.float64)
        n = c.sum()
        denom = n + (self.k + 1) * self.alpha
        if denom == 0:
            raise EmptyModelError(f"no samples at ({x}, {y}, {heading}) and alpha == 0")
        return (c + self.alpha) / denom

    def to_probs(self, min_count: int = 1) -> ProbTable:
        c = self.counts.astype(np.float64)
        n = c.sum(axis=-1, keepdims=True)
        denom = n + (self.k + 1) * self.alpha
        with np.errstate(invalid="ignore", divide="ignore"):
            probs = (c + self.alpha) / denom
        known = self.n_samples >= max(1, min_count)
        probs[~known] = np.nan
        return ProbTable(probs, known, self.k, self.step_size)

    def __eq__(self, other):
        if not isinstance(other, HittingTable):
            return NotImplemented
        return self.config() == other.config() and np.array_equal(self.counts, other.counts)


def _as_parts(samples) -> list[ReplaySamples]:
    if isinstance(samples, ReplaySamples):
        return [samples]
    return list(samples)


def fit_table(
    samples: ReplaySamples | Sequence[ReplaySamples],
    grid: GridMap,
    alpha: float = DEFAULT_ALPHA,
    k: int | None = None,
) -> HittingTable:
    """Count labels per (cell, heading). Off-map samples are skipped."""
    parts = _as_parts(samples)
    ks = {p.k for p in parts}
    if k is not None:
        ks.add(k)
    if len(ks) != 1:
        raise ConfigMismatchError(f"samples carry different k values: {sorted(ks)}")
    k = ks.pop()
    hs = {p.n_headings for p in parts}
    if len(hs) > 1:
        raise ConfigMismatchError("samples carry different heading counts")
    H = hs.pop() if hs else 4
    table = HittingTable.empty(H, grid.height, grid.width, k, alpha, grid.step_size)
    flat = table.counts.reshape(-1)
    for p in parts:
        ok = (p.flags & FLAG_OFFMAP) == 0
        ok &= (p.x >= 0) & (p.y >= 0) & (p.x < grid.width) & (p.y < grid.height)
        idx = (((p.heading[ok] * grid.height + p.y[ok]) * grid.width + p.x[ok]) * (k + 1)
               + p.label[ok])
        flat += np.bincount(idx, minlength=flat.size)
    return table


def fit_within_k(samples: ReplaySamples | Sequence[ReplaySamples], grid: GridMap, K: int,
                 alpha: float = DEFAULT_ALPHA) -> HittingTable:
    """Dedicated binary table: bin 0 holds labels < K, bin 1 the rest."""
    parts = _as_parts(samples)
    if not parts:
        raise ValueError("no samples")
    if not 0 < K <= parts[0].k:
        raise ValueError(f"K must be in (0, {parts[0].k}], got {K}")
    binary = [replace(p, label=(p.label >= K).astype(np.int64), k=1) for p in parts]
    return fit_table(binary, grid, alpha, 1)


def merge(tables: Iterable[HittingTable]) -> HittingTable:
    tables = list(tables)
    if not tables:
        raise ValueError("nothing to merge")
    cfg = tables[0].config()
    for t in tables[1:]:
        if t.config() != cfg:
            raise ConfigMismatchError(f"table config {t.config()} != {cfg}")
    counts = np.sum([t.counts for t in tables], axis=0)
    first = tables[0]
    return HittingTable(counts, first.k, first.alpha, first.step_size)


# -- scalar regressors ---------------------------------------------------------

@dataclass(eq=False)
class ScalarField:
    """Per (heading, y, x) scalar prediction; NaN where no samples exist."""

    values: np.ndarray
    counts: np.ndarray
    step_size: float = DEFAULT_STEP_SIZE
    kind: str = "mean"


def _keys(samples: ReplaySamples, grid: GridMap) -> tuple[np.ndarray, np.ndarray]:
    ok = (samples.flags & FLAG_OFFMAP) == 0
    ok &= (samples.x >= 0) & (samples.y >= 0) & (samples.x < grid.width) & (samples.y < grid.height)
    key = (samples.heading[ok] * grid.height + samples.y[ok]) * grid.width + samples.x[ok]
    return key, samples.label[ok]


def _key_size(samples: ReplaySamples, grid: GridMap) -> int:
    return samples.n_headings * grid.height * grid.width


def fit_mean(samples: ReplaySamples, grid: GridMap) -> ScalarField:
    key, lab = _keys(samples, grid)
    size = _key_size(samples, grid)
    counts = np.bincount(key, minlength=size)
    sums = np.bincount(key, weights=lab, minlength=size)
    with np.errstate(invalid="ignore", divide="ignore"):
        vals = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    shape = (samples.n_headings, grid.height, grid.width)
    return ScalarField(vals.reshape(shape), counts.reshape(shape), grid.step_size, "mean")


def fit_median(samples: ReplaySamples, grid: GridMap) -> ScalarField:
    """Lower median per key."""
    key, lab = _keys(samples, grid)
    size = _key_size(samples, grid)
    counts = np.bincount(key, minlength=size)
    order = np.lexsort((lab, key))
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    vals = np.full(size, np.nan)
    has = counts > 0
    vals[has] = lab[order][starts[has] + (counts[has] - 1) // 2]
    shape = (samples.n_headings, grid.height, grid.width)
    return ScalarField(vals.reshape(shape), counts.reshape(shape), grid.step_size, "median")


def table_mean(table: HittingTable) -> ScalarField:
    """Mean regressor recovered from stored label counts (matches ``fit_mean``)."""
    n = table.n_samples
    sums = (table.counts * np.arange(table.k + 1)).sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        vals = np.where(n > 0, sums / np.maximum(n, 1), np.nan)
    return ScalarField(vals, n, table.step_size, "mean")


def table_median(table: HittingTable) -> ScalarField:
    """Lower median recovered from stored label counts (matches ``fit_median``)."""
    n = table.n_samples
    cum = np.cumsum(table.counts, axis=-1)
    # lower median = first bin whose cumulative count reaches ceil(n / 2)
    target = (n + 1) // 2
    idx = np.argmax(cum >= target[..., None], axis=-1).astype(np.float64)
    return ScalarField(np.where(n > 0, idx, np.nan), n, table.step_size, "median")


@dataclass(eq=False)
class FreeSpaceMap:
    """Fraction of visits to each cell whose step collided; NaN where unvisited."""

    prob: np.ndarray
    visits: np.ndarray
    step_size: float = DEFAULT_STEP_SIZE


def fit_freespace(trajectories: Sequence[Trajectory], grid: GridMap) -> FreeSpaceMap:
    size = grid.width * grid.height
    visits = np.zeros(size, dtype=np.int64)
    hits = np.zeros(size, dtype=np.int64)
    for tr in trajectories:
        idx = tr.y * grid.width + tr.x
        visits += np.bincount(idx, minlength=size)
        hits += np.bincount(idx, weights=tr.collided, minlength=size).astype(np.int64)
    with np.errstate(invalid="ignore", divide="ignore"):
        prob = np.where(visits > 0, hits / np.maximum(visits, 1), np.nan)
    shape = (grid.height, grid.width)
    return FreeSpaceMap(prob.reshape(shape), visits.reshape(shape), grid.step_size)


# -- egocentric scan-conditioned model -----------------------------------------

@dataclass(frozen=True)
class ScanConfig:
    n_beams: int = 5
    levels: int = 8
    max_range: int = 16

    def __post_init__(self):
        if self.n_beams < 1 or self.levels < 1 or self.max_range < 1:
            raise ValueError("scan parameters must be positive")

    def offsets(self) -> np.ndarray:
        return np.arange(self.n_beams) - self.n_beams // 2


def quantize_range(r: int | np.ndarray, levels: int, max_range: int):
    """Log-spaced levels: range 1 maps to 0 and ``max_range`` to ``levels - 1``."""
    r = np.clip(r, 1, max_range)
    if max_range == 1:
        return np.zeros_like(r)
    q = np.floor((levels - 1) * np.log(r) / math.log(max_range) + 1e-9)
    return np.minimum(q, levels - 1).astype(np.int64)


def _ray_range(grid: GridMap, x: int, y: int, d8: int, max_range: int) -> int:
    dx, dy = DIRS8[d8]
    for r in range(1, max_range + 1):
        cx, cy = x + r * dx, y + r * dy
        if not grid.is_free(cx, cy):
            return r
    return max_range


def scan_signature(grid: GridMap, pose: Pose, cfg: ScanConfig = ScanConfig(),
                   n_headings: int = 4) -> tuple[int, ...]:
    """Quantized ray ranges at fixed 45-degree offsets from the agent's heading."""
    if not grid.is_free(pose.x, pose.y):
        raise ValueError(f"pose {pose} is not on a free cell")
    h8 = pose.heading * (8 // n_headings)
    ranges = [_ray_range(grid, pose.x, pose.y, (h8 + int(o)) % 8, cfg.max_range)
              for o in cfg.offsets()]
    return tuple(int(v) for v in quantize_range(np.array(ranges), cfg.levels, cfg.max_range))


def scan_table(grid: GridMap, cfg: ScanConfig = ScanConfig(), n_headings: int = 4) -> np.ndarray:
    """Signatures for every free (heading, y, x); shape (H, height, width, n_beams), -1 if occupied."""
    out = np.full((n_headings, grid.height, grid.width, cfg.n_beams), -1, dtype=np.int64)
    ys, xs = np.nonzero(grid.free)
    for h in range(n_headings):
        for x, y in zip(xs, ys):
            out[h, y, x] = scan_signature(grid, Pose(int(x), int(y), h), cfg, n_headings)
    return out


@dataclass(eq=False)
class EgocentricModel:
    """Counts per (signature, action) with nearest-signature fallback."""

    signatures: np.ndarray  # (n_keys, B)
    actions: np.ndarray  # (n_keys,)
    counts: np.ndarray  # (n_keys, n_bins)
    alpha: float = DEFAULT_ALPHA
    _index: dict = field(default_factory=dict, repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._index = {
            (tuple(int(v) for v in s), int(a)): i
            for i, (s, a) in enumerate(zip(self.signatures, self.actions))
        }

    @property
    def n_bins(self) -> int:
        return self.counts.shape[1]

    def __len__(self) -> int:
        return len(self.actions)

    def lookup(self, signature: Sequence[int], action: int) -> int:
        """Row of the exact key, else of the nearest stored signature (L1)."""
        if len(self) == 0:
            raise EmptyModelError("egocentric model has no keys")
        key = (tuple(int(v) for v in signature), int(action))
        if key in self._index:
            return self._index[key]
        if key in self._cache:
            return self._cache[key]
        cand = np.nonzero(self.actions == key[1])[0]
        if len(cand) == 0:
            cand = np.arange(len(self))
        dist = np.abs(self.signatures[cand] - np.asarray(key[0])).sum(axis=1)
        best = cand[dist == dist.min()]
        if len(best) > 1:
            n = self.counts[best].sum(axis=1)
            best = best[n == n.max()]
        if len(best) > 1:
            best = [min(best, key=lambda i: (tuple(self.signatures[i]), int(self.actions[i])))]
        row = int(best[0])
        self._cache[key] = row
        return row

    def distribution(self, signature: Sequence[int], action: int) -> np.ndarray:
        c = self.counts[self.lookup(signature, action)].astype(np.float64)
        return (c + self.alpha) / (c.sum() + self.n_bins * self.alpha)


def fit_egocentric(signatures: np.ndarray, actions: np.ndarray, labels: np.ndarray, k: int,
                   alpha: float = DEFAULT_ALPHA) -> EgocentricModel:
    signatures = np.asarray(signatures, dtype=np.int64)
    actions = np.asarray(actions, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) == 0:
        return EgocentricModel(np.zeros((0, signatures.shape[1] if signatures.ndim == 2 else 0), np.int64),
                               np.zeros(0, np.int64), np.zeros((0, k + 1), np.int64), alpha)
    rows = np.column_stack([signatures, actions])
    uniq, inv = np.unique(rows, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    counts = np.zeros((len(uniq), k + 1), dtype=np.int64)
    np.add.at(counts, (inv, labels), 1)
    return EgocentricModel(uniq[:, :-1].copy(), uniq[:, -1].copy(), counts, alpha)


def egocentric_inputs(samples: ReplaySamples, scans: np.ndarray) -> np.ndarray:
    """Signatures of each sample's pose looked up in a ``scan_table``."""
    return scans[samples.heading, samples.y, samples.x]


# -- serialization ---------------------------------------------------------------

def table_to_csv(table: HittingTable, header: str | None = None) -> str:
    out = [f"# {TABLE_FORMAT}"]
    if header:
        out.append(f"# {header}")
    out.append(
        f"# k={table.k} alpha={table.alpha!r} n_headings={table.n_headings} "
        f"width={table.width} height={table.height} step_size={table.step_size!r}"
    )
    out.append("x,y,heading," + ",".join(f"c{i}" for i in range(table.k + 1)))
    n = table.n_samples
    for h, y, x in zip(*np.nonzero(n)):
        row = ",".join(str(int(c)) for c in table.counts[h, y, x])
        out.append(f"{x},{y},{h},{row}")
    return "\n".join(out) + "\n"


def table_from_csv(text: str) -> HittingTable:
    lines = text.splitlines()
    if not lines or lines[0] != f"# {TABLE_FORMAT}":
        raise ValueError("not a hitting-table file (missing version line)")
    params = None
    body_start = None
    for i, ln in enumerate(lines[1:], start=1):
        if ln.startswith("# k="):
            params = dict(tok.split("=", 1) for tok in ln[2:].split())
        elif not ln.startswith("#"):
            body_start = i + 1
            break
    if params is None or body_start is None:
        raise ValueError("hitting-table file is missing its parameter or column line")
    k = int(params["k"])
    table = HittingTable.empty(
        int(params["n_headings"]), int(params["height"]), int(params["width"]), k,
        float(params["alpha"]), float(params["step_size"]),
    )
    for ln in lines[body_start:]:
        if not ln.strip():
            continue
        vals = [int(v) for v in ln.split(",")]
        x, y, h = vals[:3]
        table.counts[h, y, x] = vals[3:]
    return table
