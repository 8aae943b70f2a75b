"""Collision-replay workbench: grid worlds, random walks, hitting-time tables."""
from __future__ import annotations

from .agent import Action, NoiseModel, Pose, step
from .analysis import AngleProfile, MetricsReport, auroc, field_metrics, geometry_labels, jsd_aligned, nearest_neighbors
from .decode import DecodeConfig, binary_within_k, distance_field, eps_decode, floorplan, per_heading_map
from .estimator import HittingTable, fit_freespace, fit_mean, fit_median, fit_table, merge
from .gridmap import DistField, GridMap, generate_map, ground_truth_df, load_map, save_map
from .replay import ReplayConfig, label_egocentric, label_remote
from .rollout import PolicyConfig, Trajectory, run_batch, run_walk
from .ruin import RuinParams, expected_duration, mc_absorbing_walk, ruin_probability, ruin_time_pmf

__version__ = "0.1.0"

__all__ = [
    "Action", "NoiseModel", "Pose", "step",
    "AngleProfile", "MetricsReport", "auroc", "field_metrics", "geometry_labels", "jsd_aligned",
    "nearest_neighbors",
    "DecodeConfig", "binary_within_k", "distance_field", "eps_decode", "floorplan", "per_heading_map",
    "HittingTable", "fit_freespace", "fit_mean", "fit_median", "fit_table", "merge",
    "DistField", "GridMap", "generate_map", "ground_truth_df", "load_map", "save_map",
    "ReplayConfig", "label_egocentric", "label_remote",
    "PolicyConfig", "Trajectory", "run_batch", "run_walk",
    "RuinParams", "expected_duration", "mc_absorbing_walk", "ruin_probability", "ruin_time_pmf",
]
