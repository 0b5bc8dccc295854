"""Pillar-level objectness defense pipeline against LiDAR appearing attacks."""

__version__ = "0.1.0"

from .errors import PillarGuardError
from .geometry import Box3D, Footprint2D, depth, footprint, iou_2d, point_density, point_in_box
from .grid import GridSpec, PillarIndex, intersecting_pillars, partition, pillar_footprint
from .pcio import (
    CalibMatrix,
    Detection,
    GroundTruthObject,
    Point,
    PointCloud,
    Scene,
    read_points_bin,
    scene_from_json,
    scene_to_json,
)

__all__ = [
    "__version__",
    "PillarGuardError",
    "Box3D",
    "Footprint2D",
    "depth",
    "footprint",
    "iou_2d",
    "point_density",
    "point_in_box",
    "GridSpec",
    "PillarIndex",
    "intersecting_pillars",
    "partition",
    "pillar_footprint",
    "CalibMatrix",
    "Detection",
    "GroundTruthObject",
    "Point",
    "PointCloud",
    "Scene",
    "read_points_bin",
    "scene_from_json",
    "scene_to_json",
]
