"""Realising finite metrics as geodesic distances among congruent triangle obstacles in R^3."""

from .geodesy import apsp, approx_geodesic, beta, doubling_cover, falsify_separation
from .metric import FiniteMetric, load_metric, rescale_to_min, save_metric, spread, validate_metric
from .nets import offset_net, partition_classes, patchwork_net, verify_net
from .patchwork import Patchwork, PatchworkBuilder, rounded_cube, rounded_cube_patchwork
from .realization import layout_surface, realize, tetrahedralize, vert_length, witness_path
from .tsp import reduction_harness, tsp_exact, tsp_heuristic, tsp_with_obstacles
from .walls import ObstacleSet, WallConfig, build_separator, count_separator, flat_wall

__version__ = "0.1.0"

__all__ = [
    "FiniteMetric", "ObstacleSet", "Patchwork", "PatchworkBuilder", "WallConfig",
    "apsp", "approx_geodesic", "beta", "build_separator", "count_separator", "doubling_cover",
    "falsify_separation", "flat_wall", "layout_surface", "load_metric", "offset_net",
    "partition_classes", "patchwork_net", "realize", "reduction_harness", "rescale_to_min",
    "rounded_cube", "rounded_cube_patchwork", "save_metric", "spread", "tetrahedralize",
    "tsp_exact", "tsp_heuristic", "tsp_with_obstacles", "validate_metric", "vert_length",
    "verify_net", "witness_path",
]
