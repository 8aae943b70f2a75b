"""Distribution similarity, nearest neighbours, AUROC and field metrics."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import rel_entr
from scipy.stats import rankdata

from .decode import floorplan
from .estimator import HittingTable
from .gridmap import DistField, GridMap, ground_truth_df

OPEN, WALL, CORRIDOR, CORNER = 0, 1, 2, 3
UNLABELED = -1
CLASS_NAMES = {OPEN: "open", WALL: "wall-adjacent", CORRIDOR: "corridor", CORNER: "corner",
               UNLABELED: "-"}


class UndefinedMetricError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class AngleProfile:
    """One distribution per heading, shape (H, k + 1)."""

    dists: np.ndarray
    key: tuple
    scene: str = ""

    def __post_init__(self):
        d = np.asarray(self.dists, dtype=np.float64)
        if d.ndim != 2:
            raise ValueError("profile must be a (H, k + 1) array")
        object.__setattr__(self, "dists", d)


def jsd(p: np.ndarray, q: np.ndarray, axis: int = -1) -> np.ndarray:
    """Base-2 Jensen-Shannon divergence along ``axis``; 0 log 0 = 0."""
    m = 0.5 * (p + q)
    return 0.5 * (rel_entr(p, m).sum(axis=axis) + rel_entr(q, m).sum(axis=axis)) / math.log(2)


def _aligned(d1: np.ndarray, d2: np.ndarray) -> np.ndarray:
    """min over cyclic heading shifts of the mean per-heading JSD.

    ``d1`` is (H, K); ``d2`` is (..., H, K). Returns shape ``d2.shape[:-2]``.
    """
    H = d1.shape[0]
    best = None
    for shift in range(H):
        val = jsd(d1, np.roll(d2, -shift, axis=-2)).mean(axis=-1)
        best = val if best is None else np.minimum(best, val)
    return np.clip(best, 0.0, 1.0)


def jsd_aligned(p1: AngleProfile, p2: AngleProfile) -> float:
    if p1.dists.shape != p2.dists.shape:
        raise ValueError(f"profile shapes differ: {p1.dists.shape} vs {p2.dists.shape}")
    return float(_aligned(p1.dists, p2.dists))


def nearest_neighbors(query: AngleProfile, corpus: Sequence[AngleProfile], m: int,
                      one_per_scene: bool = False) -> list[tuple[AngleProfile, float]]:
    """Corpus entries by ascending aligned JSD; ties fall back to key order."""
    if m <= 0:
        return []
    if not corpus:
        raise ValueError("corpus is empty")
    stack = np.stack([c.dists for c in corpus])
    if stack.shape[1:] != query.dists.shape:
        raise ValueError("query and corpus profiles have different shapes")
    scores = _aligned(query.dists, stack)
    order = sorted(range(len(corpus)), key=lambda i: (scores[i], corpus[i].scene, corpus[i].key))
    out, seen = [], set()
    for i in order:
        if one_per_scene:
            if corpus[i].scene in seen:
                continue
            seen.add(corpus[i].scene)
        out.append((corpus[i], float(scores[i])))
        if len(out) == m:
            break
    return out


def auroc(scores: Sequence[float], same_class: Sequence[bool]) -> float:
    """P(a same-class pair scores lower than a different-class pair), ties count half."""
    s = np.asarray(scores, dtype=np.float64)
    same = np.asarray(same_class, dtype=bool)
    n_same, n_diff = int(same.sum()), int((~same).sum())
    if n_same == 0 or n_diff == 0:
        raise UndefinedMetricError("AUROC needs both same-class and different-class pairs")
    ranks = rankdata(s)
    u = ranks[~same].sum() - n_diff * (n_diff + 1) / 2.0
    return float(u / (n_same * n_diff))


def pairwise_scores(profiles: Sequence[AngleProfile]) -> np.ndarray:
    """Condensed (i < j, row-major) vector of aligned JSD over all profile pairs."""
    if len(profiles) < 2:
        return np.zeros(0)
    stack = np.stack([p.dists for p in profiles])
    return np.concatenate([_aligned(stack[i], stack[i + 1:]) for i in range(len(stack) - 1)])


def pair_same_class(labels: Sequence[int]) -> np.ndarray:
    """Same-class flags in the pair order of :func:`pairwise_scores`."""
    lab = np.asarray(labels)
    if len(lab) < 2:
        return np.zeros(0, dtype=bool)
    return np.concatenate([lab[i + 1:] == lab[i] for i in range(len(lab) - 1)])


def profiles_from_table(table: HittingTable, scene: str = "", min_count: int = 1) -> list[AngleProfile]:
    """Profiles for every cell where each heading has at least ``min_count`` samples."""
    pt = table.to_probs()
    ok = (table.n_samples >= max(1, min_count)).all(axis=0)
    out = []
    for y, x in zip(*np.nonzero(ok)):
        out.append(AngleProfile(pt.probs[:, y, x, :], (int(x), int(y)), scene))
    return out


def geometry_labels(grid: GridMap) -> np.ndarray:
    """Synthetic place classes per cell; occupied and 1-step cells are ``UNLABELED``."""
    occ = grid.occ
    h, w = occ.shape
    df = ground_truth_df(grid, 4).steps()
    labels = np.full((h, w), UNLABELED, dtype=np.int64)
    for y in range(1, h - 1):
        for x in range(1, w - 1):
            if occ[y, x]:
                continue
            n, s, e, wst = occ[y - 1, x], occ[y + 1, x], occ[y, x + 1], occ[y, x - 1]
            if (n and s) or (e and wst):
                labels[y, x] = CORRIDOR
            elif (n or s) and (e or wst):
                labels[y, x] = CORNER
            elif df[y, x] == 0:
                labels[y, x] = WALL
            elif df[y, x] >= 2:
                labels[y, x] = OPEN
    return labels


@dataclass(frozen=True)
class MetricsReport:
    mae: float
    rmse: float
    pct_within_delta: float
    iou: float
    n_cells: int
    delta: float = 0.25
    overestimate_fraction: float = float("nan")

    def as_row(self) -> dict:
        return {
            "mae": self.mae, "rmse": self.rmse, "pct_within_delta": self.pct_within_delta,
            "iou": self.iou, "n_cells": self.n_cells, "delta": self.delta,
            "overestimate_fraction": self.overestimate_fraction,
        }


def iou(pred_free: np.ndarray, truth_free: np.ndarray, region: np.ndarray | None = None) -> float:
    p = np.asarray(pred_free, dtype=bool)
    t = np.asarray(truth_free, dtype=bool)
    if region is not None:
        p, t = p[region], t[region]
    union = (p | t).sum()
    if union == 0:
        raise UndefinedMetricError("IoU undefined: both masks are empty")
    return float((p & t).sum() / union)


def field_metrics(pred: DistField, truth: DistField, delta: float = 0.25,
                  eval_mask: np.ndarray | None = None,
                  pred_free: np.ndarray | None = None) -> MetricsReport:
    """Distance-function errors on cells defined in both fields, plus floorplan IoU.

    ``pred_free`` overrides the floorplan derived from ``pred`` (used for the
    free-space classifier).
    """
    if pred.values.shape != truth.values.shape:
        raise ValueError("fields are on different grids")
    mask = pred.defined & truth.defined
    if eval_mask is not None:
        mask &= eval_mask
    if not mask.any():
        raise UndefinedMetricError("no cells to evaluate")
    err = pred.values[mask] - truth.values[mask]
    plan = floorplan(pred) if pred_free is None else pred_free
    return MetricsReport(
        mae=float(np.abs(err).mean()),
        rmse=float(np.sqrt((err ** 2).mean())),
        pct_within_delta=float((np.abs(err) < delta).mean()),
        iou=iou(plan, floorplan(truth)),
        n_cells=int(mask.sum()),
        delta=delta,
        overestimate_fraction=float((err > 0).mean()),
    )


def binary_f1(pred_probs, truth, threshold: float = 0.5) -> float:
    pred = np.asarray(pred_probs, dtype=np.float64) >= threshold
    truth = np.asarray(truth, dtype=bool)
    if pred.shape != truth.shape:
        raise ValueError("predictions and truth must be aligned")
    if not truth.any():
        raise UndefinedMetricError("F1 undefined without positive truth labels")
    tp = int((pred & truth).sum())
    fp = int((pred & ~truth).sum())
    fn = int((~pred & truth).sum())
    return 2 * tp / (2 * tp + fp + fn)
