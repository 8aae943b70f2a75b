"""Turning hitting-time distributions into distances and floorplans."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimator import FreeSpaceMap, HittingTable, ProbTable, ScalarField
from .gridmap import DistField


@dataclass(frozen=True)
class DecodeConfig:
    eps: float = 0.05
    interpolate: bool = True

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise ValueError(f"eps must be in (0, 1), got {self.eps}")


def eps_decode_array(probs: np.ndarray, eps: float, interpolate: bool = True):
    """Vectorized ε-decoding over the last axis.

    Returns (steps, saturated). Bin ``i`` is the first with CDF >= eps; with
    interpolation its mass is spread uniformly over [i - 0.5, i + 0.5].
    Landing in the final (k or more) bin reports exactly ``k``.
    """
    probs = np.asarray(probs, dtype=np.float64)
    k = probs.shape[-1] - 1
    total = probs.sum(axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = probs / total
    cdf = np.cumsum(p, axis=-1)
    # guard against the last CDF entry rounding below 1
    cdf[..., -1] = np.where(np.isnan(cdf[..., -1]), np.nan, 1.0)
    reached = cdf >= eps
    i = np.argmax(reached, axis=-1)
    valid = reached.any(axis=-1)
    steps = i.astype(np.float64)
    if interpolate:
        prev = np.take_along_axis(cdf, np.maximum(i - 1, 0)[..., None], axis=-1)[..., 0]
        prev = np.where(i > 0, prev, 0.0)
        p_i = np.take_along_axis(p, i[..., None], axis=-1)[..., 0]
        with np.errstate(invalid="ignore", divide="ignore"):
            steps = i - 0.5 + (eps - prev) / p_i
        steps = np.clip(steps, 0.0, float(k))
    saturated = valid & (i == k)
    steps = np.where(saturated, float(k), steps)
    steps = np.where(valid, steps, np.nan)
    return steps, saturated


def eps_decode(dist, eps: float = 0.05, interpolate: bool = True) -> float:
    dist = np.asarray(dist, dtype=np.float64)
    if dist.ndim != 1 or len(dist) < 1:
        raise ValueError("distribution must be a non-empty vector")
    if (dist < 0).any() or not dist.sum() > 0:
        raise ValueError("distribution must be non-negative with positive mass")
    steps, _ = eps_decode_array(dist, eps, interpolate)
    return float(steps)


def _probs(table) -> ProbTable:
    if isinstance(table, ProbTable):
        return table
    if isinstance(table, HittingTable):
        return table.to_probs()
    raise TypeError(f"expected HittingTable or ProbTable, got {type(table).__name__}")


def per_heading_map(table, cfg: DecodeConfig = DecodeConfig()) -> np.ndarray:
    """Decoded collision time in meters per (heading, y, x); NaN where unknown."""
    pt = _probs(table)
    steps, _ = eps_decode_array(np.where(pt.known[..., None], pt.probs, 0.0), cfg.eps, cfg.interpolate)
    steps[~pt.known] = np.nan
    return steps * pt.step_size


def distance_field(table, cfg: DecodeConfig = DecodeConfig(), provenance: str = "decoded") -> DistField:
    pt = _probs(table)
    per = per_heading_map(pt, cfg)
    known = pt.known.any(axis=0)
    vals = np.full(known.shape, np.nan)
    vals[known] = np.nanmin(per[:, known], axis=0)
    return DistField(vals, pt.step_size, provenance, {"eps": cfg.eps, "interpolate": cfg.interpolate})


def scalar_distance_field(field: ScalarField, provenance: str | None = None) -> DistField:
    """Minimum over headings of a regressed steps-to-collision value, in meters."""
    known = ~np.isnan(field.values)
    any_known = known.any(axis=0)
    vals = np.full(any_known.shape, np.nan)
    vals[any_known] = np.nanmin(field.values[:, any_known], axis=0) * field.step_size
    return DistField(vals, field.step_size, provenance or f"decoded-{field.kind}")


def floorplan(source, threshold: float = 0.5) -> np.ndarray:
    """Boolean free-space mask. Unknown cells are treated as occupied."""
    if isinstance(source, DistField):
        return source.defined.copy()
    if isinstance(source, FreeSpaceMap):
        prob = source.prob
        return ~np.isnan(prob) & (np.nan_to_num(prob, nan=1.0) < threshold)
    raise TypeError(f"cannot build a floorplan from {type(source).__name__}")


def binary_within_k(dist, K: int):
    """P(T < K) for a distribution over bins ``0..k``.

    Works elementwise with Python arithmetic, so ``Fraction`` inputs give
    exact results.
    """
    vals = list(dist)
    k = len(vals) - 1
    if not 0 < K <= k:
        raise ValueError(f"K must be in (0, {k}], got {K}")
    return sum(vals[:K]) / sum(vals)
