"""Oriented 3D boxes, rotated-rectangle IoU via polygon clipping, point tests.

All bird's-eye-view computations live on the x-y plane. Box membership is
half-open per axis ([lo, hi) in the box frame) so a point on a shared face
belongs to exactly one box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

# Clipped polygons with area below this are treated as empty; collinear
# vertices otherwise produce tiny negative/positive artifacts.
DEGENERATE_AREA = 1e-12


def normalize_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(a, TWO_PI)
    if a <= -math.pi:
        a += TWO_PI
    elif a > math.pi:
        a -= TWO_PI
    return a


@dataclass(frozen=True)
class Box3D:
    """Oriented box: center (m), extents (m, `l` along heading), yaw about +z from +x."""

    cx: float
    cy: float
    cz: float
    l: float
    w: float
    h: float
    yaw: float = 0.0

    def __post_init__(self):
        if not (self.l > 0 and self.w > 0 and self.h > 0):
            raise ValueError(f"box extents must be positive, got {(self.l, self.w, self.h)}")
        for name in ("cx", "cy", "cz", "l", "w", "h", "yaw"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"box field {name} is not finite")
        object.__setattr__(self, "yaw", normalize_angle(self.yaw))

    @property
    def center(self) -> np.ndarray:
        return np.array([self.cx, self.cy, self.cz])

    @property
    def volume(self) -> float:
        return self.l * self.w * self.h

    def as_row(self) -> list[float]:
        return [self.cx, self.cy, self.cz, self.l, self.w, self.h, self.yaw]

    @staticmethod
    def from_row(row) -> "Box3D":
        return Box3D(*(float(v) for v in row))


@dataclass(frozen=True)
class Footprint2D:
    """Convex quadrilateral on the x-y plane, counter-clockwise corners."""

    corners: np.ndarray  # (4, 2)

    def __post_init__(self):
        c = np.asarray(self.corners, dtype=np.float64)
        if c.shape != (4, 2):
            raise ValueError(f"footprint needs 4 corners, got shape {c.shape}")
        if polygon_area(c) <= 0.0:
            raise ValueError("footprint corners must be counter-clockwise with positive area")
        c = c.copy()
        c.flags.writeable = False
        object.__setattr__(self, "corners", c)

    @property
    def area(self) -> float:
        return polygon_area(self.corners)

    @property
    def center(self) -> np.ndarray:
        return self.corners.mean(axis=0)


def polygon_area(corners: np.ndarray) -> float:
    """Shoelace area; positive for counter-clockwise vertex order."""
    x = corners[:, 0]
    y = corners[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def footprint(box: Box3D) -> Footprint2D:
    """Project a box onto the x-y plane: center +/- rotated (l/2, w/2) offsets."""
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    hl, hw = box.l / 2.0, box.w / 2.0
    # Local corners in CCW order.
    local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
    rot = np.array([[c, -s], [s, c]])
    return Footprint2D(local @ rot.T + np.array([box.cx, box.cy]))


def axis_aligned_footprint(x0: float, y0: float, x1: float, y1: float) -> Footprint2D:
    return Footprint2D(np.array([[x1, y1], [x0, y1], [x0, y0], [x1, y0]]))


def _clip_polygon(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman: clip `subject` by each edge of convex CCW `clip`."""
    output = subject
    n_clip = len(clip)
    for i in range(n_clip):
        if len(output) == 0:
            break
        a = clip[i]
        b = clip[(i + 1) % n_clip]
        edge = b - a
        # Signed area test: >= 0 keeps points on/left of the edge (inside for CCW).
        cross = edge[0] * (output[:, 1] - a[1]) - edge[1] * (output[:, 0] - a[0])
        inside = cross >= 0.0
        verts = []
        n = len(output)
        for j in range(n):
            k = (j + 1) % n
            p, q = output[j], output[k]
            if inside[j]:
                verts.append(p)
                if not inside[k]:
                    verts.append(_edge_intersection(p, q, a, b))
            elif inside[k]:
                verts.append(_edge_intersection(p, q, a, b))
        output = np.array(verts) if verts else np.empty((0, 2))
    return output


def _edge_intersection(p: np.ndarray, q: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d1 = q - p
    d2 = b - a
    denom = d1[0] * d2[1] - d1[1] * d2[0]
    t = ((a[0] - p[0]) * d2[1] - (a[1] - p[1]) * d2[0]) / denom
    return p + t * d1


def iou_2d(a: Footprint2D, b: Footprint2D) -> float:
    """Intersection-over-union of two convex footprints.

    Exactly 0.0 for disjoint footprints and exactly 1.0 when the corner sets
    coincide; otherwise polygon clipping + shoelace, snapping degenerate
    intersections (< 1e-12 m^2) to zero.
    """
    ca = {(x, y) for x, y in a.corners}
    cb = {(x, y) for x, y in b.corners}
    if ca == cb:
        return 1.0
    clipped = _clip_polygon(a.corners, b.corners)
    if len(clipped) < 3:
        return 0.0
    inter = polygon_area(clipped)
    if inter < DEGENERATE_AREA:
        return 0.0
    union = a.area + b.area - inter
    return inter / union


def point_in_box(p, box: Box3D) -> bool:
    """Half-open membership test: box-frame coordinates in [-dim/2, dim/2)."""
    x, y, z = p[0], p[1], p[2]
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    dx, dy, dz = x - box.cx, y - box.cy, z - box.cz
    lx = c * dx + s * dy
    ly = -s * dx + c * dy
    return (
        -box.l / 2 <= lx < box.l / 2
        and -box.w / 2 <= ly < box.w / 2
        and -box.h / 2 <= dz < box.h / 2
    )


def points_in_box_mask(xyz: np.ndarray, box: Box3D) -> np.ndarray:
    """Vectorized half-open membership for an (n, 3) coordinate array."""
    xyz = np.asarray(xyz, dtype=np.float64)
    if xyz.size == 0:
        return np.zeros(0, dtype=bool)
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    dx = xyz[:, 0] - box.cx
    dy = xyz[:, 1] - box.cy
    dz = xyz[:, 2] - box.cz
    lx = c * dx + s * dy
    ly = -s * dx + c * dy
    return (
        (lx >= -box.l / 2) & (lx < box.l / 2)
        & (ly >= -box.w / 2) & (ly < box.w / 2)
        & (dz >= -box.h / 2) & (dz < box.h / 2)
    )


def depth(p) -> float:
    """Euclidean distance from the sensor origin to a point (x, y, z)."""
    return math.sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2])


def point_density(box: Box3D, pc) -> float:
    """Interior point count divided by box volume (points per m^3)."""
    xyz = pc.xyz if hasattr(pc, "xyz") else np.asarray(pc, dtype=np.float64)
    if len(xyz) == 0:
        return 0.0
    count = int(points_in_box_mask(xyz[:, :3], box).sum())
    return count / box.volume
