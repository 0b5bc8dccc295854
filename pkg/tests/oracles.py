"""Independent oracles used by the tests.

Each oracle is a deliberately separate implementation of something the
package computes analytically, kept free of package internals so the two
routes stay independent: Monte-Carlo rasterization for IoU, pure-Python
loops for set distances, shapely polygons for labeling, central finite
differences for gradients.
"""

from __future__ import annotations

import math

import numpy as np


def _halfplane_form(corners: np.ndarray):
    """Inward normals and thresholds: inside iff pts @ N >= T for all edges."""
    n_edges = len(corners)
    normals = np.empty((2, n_edges))
    thresholds = np.empty(n_edges)
    for i in range(n_edges):
        a = corners[i]
        b = corners[(i + 1) % n_edges]
        e = b - a
        normals[:, i] = (-e[1], e[0])
        thresholds[i] = -e[1] * a[0] + e[0] * a[1]
    return normals, thresholds


def _row_intervals(corners: np.ndarray, lo: np.ndarray, cell: np.ndarray, side: int):
    """Certain-inside and outer cell-index intervals per grid row.

    The quad's cross-section [x_lo(y), x_hi(y)] has a convex left boundary
    and a concave right boundary, so over one row band the band-wide bounds
    sit at the band's edge lines; vertex x-coordinates extend the outer
    bounds in their own band. A one-cell margin on each side absorbs
    floating-point rounding, keeping "certain" conservative.
    """
    lines = lo[1] + cell[1] * np.arange(side + 1)
    x_lo = np.full(side + 1, np.inf)
    x_hi = np.full(side + 1, -np.inf)
    for e in range(4):
        ax, ay = corners[e]
        bx, by = corners[(e + 1) % 4]
        if by == ay:
            continue
        mask = (lines >= min(ay, by)) & (lines <= max(ay, by))
        x = ax + (lines[mask] - ay) * (bx - ax) / (by - ay)
        np.minimum.at(x_lo, np.nonzero(mask)[0], x)
        np.maximum.at(x_hi, np.nonzero(mask)[0], x)

    inner_lo = np.maximum(x_lo[:-1], x_lo[1:])
    inner_hi = np.minimum(x_hi[:-1], x_hi[1:])
    outer_lo = np.minimum(x_lo[:-1], x_lo[1:])
    outer_hi = np.maximum(x_hi[:-1], x_hi[1:])
    for vx, vy in corners:
        j = int((vy - lo[1]) / cell[1])
        for jj in (j - 1, j, j + 1):
            if 0 <= jj < side:
                outer_lo[jj] = min(outer_lo[jj], vx)
                outer_hi[jj] = max(outer_hi[jj], vx)

    def to_cells(x):
        return (x - lo[0]) / cell[0]

    with np.errstate(invalid="ignore"):
        ci0 = np.where(np.isfinite(inner_lo), np.ceil(to_cells(inner_lo)) + 1, 1)
        ci1 = np.where(np.isfinite(inner_hi), np.floor(to_cells(inner_hi)) - 2, -1)
        co0 = np.where(np.isfinite(outer_lo), np.floor(to_cells(outer_lo)) - 1, 0)
        co1 = np.where(np.isfinite(outer_hi), np.floor(to_cells(outer_hi)) + 1, -1)
    ci0 = np.clip(ci0, 0, side - 1).astype(np.int64)
    ci1 = np.clip(ci1, -1, side - 1).astype(np.int64)
    co0 = np.clip(co0, 0, side - 1).astype(np.int64)
    co1 = np.clip(co1, -1, side - 1).astype(np.int64)
    empty_inner = ~(np.isfinite(inner_lo) & np.isfinite(inner_hi)) | (ci1 < ci0)
    ci0[empty_inner] = 0
    ci1[empty_inner] = -1
    empty_outer = ~(np.isfinite(outer_lo) & np.isfinite(outer_hi)) | (co1 < co0)
    co0[empty_outer] = 0
    co1[empty_outer] = -1
    # Certain cells must lie within the outer band.
    ci0 = np.maximum(ci0, co0)
    ci1 = np.minimum(ci1, co1)
    return ci0, ci1, co0, co1


def _interval_len(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    return np.maximum(hi - lo + 1, 0)


def mc_iou(corners_a: np.ndarray, corners_b: np.ndarray, n_samples: int = 1_000_000,
           rng: np.random.Generator | None = None) -> float:
    """Stratified Monte-Carlo rasterization over the union's bounding rectangle.

    One jittered sample per grid cell of a sqrt(n) x sqrt(n) raster. Cells
    scanline-classified as certainly inside/outside a quad contribute their
    (known) indicator without drawing the sample; only boundary-band cells
    are sampled, which keeps the 1e6-sample estimator affordable.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    all_corners = np.vstack([corners_a, corners_b])
    lo = all_corners.min(axis=0)
    hi = all_corners.max(axis=0)
    side = int(round(math.sqrt(n_samples)))
    cell = (hi - lo) / side

    ca0, ca1, oa0, oa1 = _row_intervals(corners_a, lo, cell, side)
    cb0, cb1, ob0, ob1 = _row_intervals(corners_b, lo, cell, side)

    n_a = int(_interval_len(ca0, ca1).sum())
    n_b = int(_interval_len(cb0, cb1).sum())
    n_inter = int(_interval_len(np.maximum(ca0, cb0), np.minimum(ca1, cb1)).sum())

    # Cells with an uncertain indicator for either quad.
    cols = []
    rows = []
    for j in range(side):
        spans = []
        if oa1[j] >= oa0[j]:
            if ca1[j] < ca0[j]:
                spans.append((oa0[j], oa1[j]))
            else:
                spans.append((oa0[j], ca0[j] - 1))
                spans.append((ca1[j] + 1, oa1[j]))
        if ob1[j] >= ob0[j]:
            if cb1[j] < cb0[j]:
                spans.append((ob0[j], ob1[j]))
            else:
                spans.append((ob0[j], cb0[j] - 1))
                spans.append((cb1[j] + 1, ob1[j]))
        for s0, s1 in spans:
            if s1 >= s0:
                cols.append(np.arange(s0, s1 + 1))
                rows.append(np.full(s1 - s0 + 1, j))
    if cols:
        i_idx = np.concatenate(cols)
        j_idx = np.concatenate(rows)
        packed = np.unique(j_idx * side + i_idx)
        j_idx, i_idx = packed // side, packed % side
        pts = np.column_stack([
            lo[0] + cell[0] * (i_idx + rng.random(len(packed))),
            lo[1] + cell[1] * (j_idx + rng.random(len(packed))),
        ])
        na, ta = _halfplane_form(corners_a)
        nb, tb = _halfplane_form(corners_b)
        sample_in_a = ((pts @ na) >= ta).all(axis=1)
        sample_in_b = ((pts @ nb) >= tb).all(axis=1)
        cert_a = (i_idx >= ca0[j_idx]) & (i_idx <= ca1[j_idx])
        cert_b = (i_idx >= cb0[j_idx]) & (i_idx <= cb1[j_idx])
        in_a = cert_a | sample_in_a
        in_b = cert_b | sample_in_b
        n_a += int((~cert_a & in_a).sum())
        n_b += int((~cert_b & in_b).sum())
        n_inter += int((~(cert_a & cert_b) & in_a & in_b).sum())
    union = n_a + n_b - n_inter
    if union == 0:
        return 0.0
    return n_inter / union


def _sq_dist(x, y) -> float:
    # (xi - yi) * (xi - yi) rather than ** 2: libm pow(x, 2.0) is not
    # bit-identical to plain multiplication on every platform.
    total = 0.0
    for xi, yi in zip(x[:3], y[:3]):
        d = xi - yi
        total += d * d
    return total


def brute_chamfer(s, s_prime) -> float:
    total = 0.0
    for y in s_prime:
        best = math.inf
        for x in s:
            best = min(best, _sq_dist(x, y))
        total += best
    return total / len(s_prime)


def brute_knn_dist(s, s_prime, k: int) -> float:
    total = 0.0
    for y in s_prime:
        dists = sorted(_sq_dist(x, y) for x in s)
        total += sum(dists[:k]) / k
    return total / len(s_prime)


def shapely_box_iou(corners_a: np.ndarray, corners_b: np.ndarray) -> float:
    """Polygon IoU via shapely, independent of the package's clipping code."""
    from shapely.geometry import Polygon

    pa = Polygon(corners_a)
    pb = Polygon(corners_b)
    inter = pa.intersection(pb).area
    union = pa.union(pb).area
    return inter / union if union > 0 else 0.0


def central_difference(f, x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Central finite differences of a scalar function over a flat array."""
    grad = np.zeros_like(x)
    for i in range(x.size):
        orig = x.flat[i]
        x.flat[i] = orig + eps
        fp = f()
        x.flat[i] = orig - eps
        fm = f()
        x.flat[i] = orig
        grad.flat[i] = (fp - fm) / (2.0 * eps)
    return grad


def random_footprint_corners(rng: np.random.Generator,
                             center_scale: float = 4.0) -> np.ndarray:
    """CCW corners of a random oriented rectangle, for IoU fuzzing."""
    cx, cy = rng.uniform(-center_scale, center_scale, size=2)
    l = rng.uniform(0.5, 6.0)
    w = rng.uniform(0.5, 4.0)
    yaw = rng.uniform(-math.pi, math.pi)
    c, s = math.cos(yaw), math.sin(yaw)
    local = np.array([[l / 2, w / 2], [-l / 2, w / 2], [-l / 2, -w / 2], [l / 2, -w / 2]])
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + np.array([cx, cy])
