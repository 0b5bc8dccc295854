"""Reference point-level and detection-level baseline defenses: SRS, SOR, CARLO.

SRS keeps a fixed-size uniform subsample of the cloud. SOR drops points whose
mean k-nearest-neighbor distance leaves the mu +/- alpha*sigma band. CARLO
flags detections whose free-space fraction (FSD) or laser-penetration ratio
(LPD) exceeds a threshold R.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import GeometryError, SizeError
from .geometry import Box3D, footprint, points_in_box_mask
from .pcio import Detection, PointCloud

SOR_ALPHA_DEFAULT = 1.1
FSD_CELL_DEFAULT = 0.25  # m; free-space cell side (unstated upstream, configurable)


@dataclass(frozen=True)
class CarloVerdict:
    detection: Detection
    ratio: float
    flagged: bool


def srs(pc: PointCloud, m: int, rng: np.random.Generator) -> PointCloud:
    """Uniform random subset of size min(m, n); relative order preserved."""
    if m < 0:
        raise ValueError("m must be >= 0")
    n = len(pc)
    if m >= n:
        return PointCloud(arr=pc.arr, frame_id=pc.frame_id)
    keep = np.sort(rng.permutation(n)[:m])
    return PointCloud(arr=pc.arr[keep], frame_id=pc.frame_id)


def sor(pc: PointCloud, k: int, alpha: float = SOR_ALPHA_DEFAULT) -> PointCloud:
    """Keep points whose mean k-NN distance lies within mu +/- alpha*sigma."""
    if k < 1:
        raise ValueError("k must be >= 1")
    n = len(pc)
    if n <= k:
        raise SizeError(f"need more than k={k} points, got {n}")
    tree = cKDTree(pc.xyz)
    dists, _ = tree.query(pc.xyz, k=k + 1)  # column 0 is the point itself
    mean_knn = dists[:, 1:].mean(axis=1)
    mu = float(mean_knn.mean())
    sigma = float(mean_knn.std())  # population std
    keep = (mean_knn >= mu - alpha * sigma) & (mean_knn <= mu + alpha * sigma)
    return PointCloud(arr=pc.arr[keep], frame_id=pc.frame_id)


def carlo_fsd(det: Detection, pc: PointCloud, cell: float = FSD_CELL_DEFAULT,
              r_thresh: float = 0.7) -> CarloVerdict:
    """Free Space Detection: fraction of empty cells inside the detection box.

    The box is cut into ceil(dim/cell) cells per axis in its own frame; r is
    the fraction holding no input point, and the detection is flagged when
    r > r_thresh.
    """
    if cell <= 0:
        raise ValueError("cell must be positive")
    box = det.box
    nx = math.ceil(box.l / cell)
    ny = math.ceil(box.w / cell)
    nz = math.ceil(box.h / cell)
    total = nx * ny * nz
    inside = points_in_box_mask(pc.xyz, box)
    occupied: set = set()
    if inside.any():
        pts = pc.xyz[inside]
        c, s = math.cos(box.yaw), math.sin(box.yaw)
        dx = pts[:, 0] - box.cx
        dy = pts[:, 1] - box.cy
        lx = c * dx + s * dy + box.l / 2
        ly = -s * dx + c * dy + box.w / 2
        lz = pts[:, 2] - box.cz + box.h / 2
        ix = np.minimum((lx / cell).astype(int), nx - 1)
        iy = np.minimum((ly / cell).astype(int), ny - 1)
        iz = np.minimum((lz / cell).astype(int), nz - 1)
        occupied = set(zip(ix.tolist(), iy.tolist(), iz.tolist()))
    r = 1.0 - len(occupied) / total
    return CarloVerdict(det, r, r > r_thresh)


def carlo_lpd(det: Detection, pc: PointCloud, r_thresh: float = 0.7) -> CarloVerdict:
    """Laser Penetration Detection.

    Builds the 2D angular sector subtended by the box footprint from the
    sensor origin with radial bounds from the footprint corners. Sector
    points are classified by planar radius: in front of the near bound
    (S_up), inside the box within bounds (S), beyond the far bound (S_down);
    r = |S_down| / (|S_up| + |S| + |S_down|), 0 when all three are empty.
    """
    box = det.box
    fp = footprint(box)
    if _origin_in_footprint(fp.corners):
        raise GeometryError("sensor origin lies inside the detection footprint")
    corner_radii = np.hypot(fp.corners[:, 0], fp.corners[:, 1])
    r_near, r_far = float(corner_radii.min()), float(corner_radii.max())
    center_az = math.atan2(box.cy, box.cx)
    rel = np.arctan2(fp.corners[:, 1], fp.corners[:, 0]) - center_az
    rel = (rel + math.pi) % (2 * math.pi) - math.pi
    az_lo, az_hi = float(rel.min()), float(rel.max())

    xyz = pc.xyz
    if len(xyz) == 0:
        return CarloVerdict(det, 0.0, False)
    point_rel = np.arctan2(xyz[:, 1], xyz[:, 0]) - center_az
    point_rel = (point_rel + math.pi) % (2 * math.pi) - math.pi
    in_sector = (point_rel >= az_lo) & (point_rel <= az_hi)
    radius = np.hypot(xyz[:, 0], xyz[:, 1])

    n_front = int((in_sector & (radius < r_near)).sum())
    n_behind = int((in_sector & (radius > r_far)).sum())
    within = in_sector & (radius >= r_near) & (radius <= r_far)
    n_inside = int((within & points_in_box_mask(xyz, box)).sum())

    total = n_front + n_inside + n_behind
    r = n_behind / total if total else 0.0
    return CarloVerdict(det, r, r > r_thresh)


def _origin_in_footprint(corners: np.ndarray) -> bool:
    # CCW convex polygon: origin inside iff left of (or on) every edge.
    for i in range(len(corners)):
        a = corners[i]
        b = corners[(i + 1) % len(corners)]
        if (b[0] - a[0]) * (-a[1]) - (b[1] - a[1]) * (-a[0]) < 0:
            return False
    return True
