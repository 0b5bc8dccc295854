"""Depth-augmented pillar featurization.

Each point inside a pillar becomes a 7-dim row (dx, dy, x, y, z, int, dep):
(dx, dy) relative to the pillar center, dep the Euclidean distance to the
sensor. Pillars are capped at `m_pc` rows by uniform subsampling and padded
with zero rows below it; the padding is never fed to the network (a validity
count accompanies the matrix so max-pooling can ignore it).
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError
from .geometry import Footprint2D

FEATURE_DIM = 7


class PillarFeatures:
    """Fixed-size feature matrix plus the number of real (non-padding) rows."""

    __slots__ = ("valid", "m_pc")

    def __init__(self, valid: np.ndarray, m_pc: int):
        valid = np.ascontiguousarray(valid, dtype=np.float64).reshape(-1, FEATURE_DIM)
        if valid.shape[0] > m_pc:
            raise ValueError("more valid rows than m_pc")
        valid.flags.writeable = False
        self.valid = valid
        self.m_pc = int(m_pc)

    @property
    def valid_count(self) -> int:
        return self.valid.shape[0]

    @property
    def rows(self) -> np.ndarray:
        """Dense (m_pc, 7) matrix; rows beyond valid_count are exactly zero."""
        dense = np.zeros((self.m_pc, FEATURE_DIM))
        dense[: self.valid_count] = self.valid
        return dense

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, PillarFeatures)
            and self.m_pc == other.m_pc
            and bool(np.array_equal(self.valid, other.valid))
        )


def pillar_bounds(pillar: Footprint2D) -> tuple[float, float, float, float]:
    xs = pillar.corners[:, 0]
    ys = pillar.corners[:, 1]
    return float(xs.min()), float(xs.max()), float(ys.min()), float(ys.max())


def augment(points, pillar: Footprint2D, m_pc: int, rng: np.random.Generator) -> PillarFeatures:
    """Featurize a pillar's points into an (m_pc, 7) matrix.

    Over-full pillars draw a uniform subsample of m_pc points without
    replacement (rng-driven, ingest order preserved); under-full pillars
    keep every point. Raises DomainError if a point lies outside the
    pillar's half-open bounds.
    """
    if m_pc < 1:
        raise ValueError("m_pc must be >= 1")
    if isinstance(points, np.ndarray):
        arr = points.astype(np.float64, copy=False).reshape(-1, 4)
    else:
        arr = np.asarray([tuple(p) for p in points], dtype=np.float64).reshape(-1, 4)
    x0, x1, y0, y1 = pillar_bounds(pillar)
    if len(arr):
        x = arr[:, 0]
        y = arr[:, 1]
        outside = (x < x0) | (x >= x1) | (y < y0) | (y >= y1)
        if outside.any():
            k = int(np.nonzero(outside)[0][0])
            raise DomainError(f"point {k} at ({x[k]:.3f}, {y[k]:.3f}) outside pillar")
    if len(arr) > m_pc:
        keep = np.sort(rng.permutation(len(arr))[:m_pc])
        arr = arr[keep]
    cx = (x0 + x1) / 2.0
    cy = (y0 + y1) / 2.0
    feats = np.empty((len(arr), FEATURE_DIM))
    feats[:, 0] = arr[:, 0] - cx
    feats[:, 1] = arr[:, 1] - cy
    feats[:, 2:5] = arr[:, :3]
    feats[:, 5] = arr[:, 3]
    feats[:, 6] = np.sqrt((arr[:, :3] ** 2).sum(axis=1))
    return PillarFeatures(feats, m_pc)


def pillar_rng(seed: int, frame_id: int, i: int, j: int) -> np.random.Generator:
    """Deterministic per-pillar stream derived from (seed, frame, pillar index)."""
    return np.random.default_rng((int(seed), int(frame_id), int(i), int(j)))
