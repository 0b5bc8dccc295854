"""Equal-sized pillar partition of the detection space and pillar queries.

Cells are half-open squares anchored at the region corner (x_min, y_min):
point (x, y) lands in cell (floor((x - x_min)/cell), floor((y - y_min)/cell)).
Pillars are unbounded in z.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .geometry import Box3D, Footprint2D, axis_aligned_footprint, footprint, iou_2d

# KITTI-style forward detection range; configurable everywhere.
DEFAULT_X_RANGE = (0.0, 70.4)
DEFAULT_Y_RANGE = (-40.0, 40.0)


class PillarIndex(NamedTuple):
    i: int
    j: int


@dataclass(frozen=True)
class GridSpec:
    x_min: float = DEFAULT_X_RANGE[0]
    x_max: float = DEFAULT_X_RANGE[1]
    y_min: float = DEFAULT_Y_RANGE[0]
    y_max: float = DEFAULT_Y_RANGE[1]
    cell: float = 1.0

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError("grid extents must be non-empty")
        if not self.cell > 0:
            raise ValueError("cell size must be positive")

    @property
    def nx(self) -> int:
        return math.ceil((self.x_max - self.x_min) / self.cell)

    @property
    def ny(self) -> int:
        return math.ceil((self.y_max - self.y_min) / self.cell)

    def contains_index(self, idx: PillarIndex) -> bool:
        return 0 <= idx.i < self.nx and 0 <= idx.j < self.ny


@dataclass
class Partition:
    """Pillar -> ascending point indices; out-of-region points are counted."""

    pillars: dict
    dropped: int


def partition(pc, spec: GridSpec) -> Partition:
    xyz = pc.xyz if hasattr(pc, "xyz") else np.asarray(pc, dtype=np.float64)
    n = len(xyz)
    if n == 0:
        return Partition({}, 0)
    x = xyz[:, 0]
    y = xyz[:, 1]
    in_bounds = (x >= spec.x_min) & (x < spec.x_max) & (y >= spec.y_min) & (y < spec.y_max)
    dropped = int(n - in_bounds.sum())
    idx = np.nonzero(in_bounds)[0]
    i = np.floor((x[idx] - spec.x_min) / spec.cell).astype(np.int64)
    j = np.floor((y[idx] - spec.y_min) / spec.cell).astype(np.int64)
    pillars: dict[PillarIndex, np.ndarray] = {}
    if len(idx):
        order = np.lexsort((idx, j, i))
        i, j, idx = i[order], j[order], idx[order]
        cut = np.nonzero((np.diff(i) != 0) | (np.diff(j) != 0))[0] + 1
        for chunk, start in zip(np.split(idx, cut), np.concatenate(([0], cut))):
            pillars[PillarIndex(int(i[start]), int(j[start]))] = chunk
    return Partition(pillars, dropped)


def pillar_footprint(idx: PillarIndex, spec: GridSpec) -> Footprint2D:
    if not spec.contains_index(PillarIndex(*idx)):
        raise IndexError(f"pillar {tuple(idx)} outside {spec.nx}x{spec.ny} grid")
    x0 = spec.x_min + idx[0] * spec.cell
    y0 = spec.y_min + idx[1] * spec.cell
    return axis_aligned_footprint(x0, y0, x0 + spec.cell, y0 + spec.cell)


def pillar_center(idx: PillarIndex, spec: GridSpec) -> tuple[float, float]:
    return (
        spec.x_min + (idx[0] + 0.5) * spec.cell,
        spec.y_min + (idx[1] + 0.5) * spec.cell,
    )


def intersecting_pillars(box: Box3D, spec: GridSpec, beta: float) -> list[PillarIndex]:
    """All pillars whose footprint IoU with the box footprint exceeds beta.

    The search is restricted to the box footprint's axis-aligned bounding
    rectangle expanded by one cell; IoU is zero beyond it.
    """
    if beta < 0:
        raise ValueError("beta must be >= 0")
    fp = footprint(box)
    xs = fp.corners[:, 0]
    ys = fp.corners[:, 1]
    i_lo = max(0, math.floor((xs.min() - spec.x_min) / spec.cell) - 1)
    i_hi = min(spec.nx - 1, math.floor((xs.max() - spec.x_min) / spec.cell) + 1)
    j_lo = max(0, math.floor((ys.min() - spec.y_min) / spec.cell) - 1)
    j_hi = min(spec.ny - 1, math.floor((ys.max() - spec.y_min) / spec.cell) + 1)
    hits = []
    for i in range(i_lo, i_hi + 1):
        for j in range(j_lo, j_hi + 1):
            idx = PillarIndex(i, j)
            if iou_2d(pillar_footprint(idx, spec), fp) > beta:
                hits.append(idx)
    return hits
