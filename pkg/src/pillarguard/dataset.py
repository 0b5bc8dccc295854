"""Self-supervised pillar labeling and training-set assembly.

A pillar is labeled 1 when its footprint's best 2D IoU against any
ground-truth box exceeds the labeling threshold; features come from the
depth-augmented featurizer. Only occupied pillars produce samples (an empty
pillar is all padding and carries no signal).

Persistence: one binary shard per scene, `shard-<frame_id>.bin`, laid out as

    header  '<4sIIQ'  magic b"PGDS", version, m_pc, sample count
    row     u8 label, '<I' valid_count, m_pc*7 little-endian float32

Rows store the dense zero-padded feature matrix.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .features import FEATURE_DIM, PillarFeatures, augment, pillar_rng
from .geometry import footprint, iou_2d
from .grid import GridSpec, PillarIndex, partition, pillar_footprint
from .pcio import Scene

SHARD_MAGIC = b"PGDS"
SHARD_VERSION = 1
_HEADER = struct.Struct("<4sIIQ")


@dataclass(frozen=True)
class PillarSample:
    features: PillarFeatures
    label: int
    source: tuple | None = None  # (frame_id, PillarIndex)

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")


def label_pillar(idx: PillarIndex, spec: GridSpec, gts, t_iou: float) -> int:
    """1 iff the best footprint IoU over ground-truth boxes exceeds t_iou."""
    if t_iou < 0:
        raise ValueError("t_iou must be >= 0")
    if not gts:
        return 0
    fp = pillar_footprint(idx, spec)
    best = max(iou_2d(fp, footprint(g.box)) for g in gts)
    return 1 if best > t_iou else 0


def generate(scenes, spec: GridSpec, m_pc: int, t_iou: float,
             rng: np.random.Generator) -> list[PillarSample]:
    """One sample per occupied pillar per scene, deterministic under seed."""
    if not scenes:
        raise ValueError("scenes must be non-empty")
    base_seed = int(rng.integers(0, 2**63 - 1))
    samples: list[PillarSample] = []
    for scene in scenes:
        samples.extend(_scene_samples(scene, spec, m_pc, t_iou, base_seed))
    return samples


def _scene_samples(scene: Scene, spec: GridSpec, m_pc: int, t_iou: float,
                   base_seed: int) -> list[PillarSample]:
    part = partition(scene.cloud, spec)
    arr = scene.cloud.arr
    out = []
    for idx in sorted(part.pillars):
        rows = arr[part.pillars[idx]]
        feats = augment(rows, pillar_footprint(idx, spec), m_pc,
                        pillar_rng(base_seed, scene.frame_id, idx.i, idx.j))
        label = label_pillar(idx, spec, scene.ground_truth, t_iou)
        out.append(PillarSample(feats, label, (scene.frame_id, idx)))
    return out


def balance(samples, max_neg_ratio: float = 1.5,
            rng: np.random.Generator | None = None) -> list[PillarSample]:
    """Subsample negatives to at most max_neg_ratio per positive, then shuffle."""
    if max_neg_ratio <= 0:
        raise ValueError("max_neg_ratio must be positive")
    rng = rng if rng is not None else np.random.default_rng(0)
    pos = [s for s in samples if s.label == 1]
    neg = [s for s in samples if s.label == 0]
    if not pos:
        raise DataError("cannot balance a dataset with zero positive samples")
    cap = int(max_neg_ratio * len(pos))
    if len(neg) > cap:
        keep = np.sort(rng.permutation(len(neg))[:cap])
        neg = [neg[i] for i in keep]
    merged = pos + neg
    order = rng.permutation(len(merged))
    return [merged[i] for i in order]


def save_dataset(samples, out_dir) -> list[Path]:
    """Write one shard per source scene; samples must carry sources."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    by_frame: dict[int, list[PillarSample]] = {}
    m_pc = None
    for s in samples:
        if s.source is None:
            raise DataError("samples without a source cannot be sharded by scene")
        if m_pc is None:
            m_pc = s.features.m_pc
        elif m_pc != s.features.m_pc:
            raise DataError("mixed m_pc in one dataset")
        by_frame.setdefault(s.source[0], []).append(s)
    paths = []
    for frame_id in sorted(by_frame):
        shard = by_frame[frame_id]
        path = out_dir / f"shard-{frame_id:06d}.bin"
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(SHARD_MAGIC, SHARD_VERSION, m_pc, len(shard)))
            for s in shard:
                fh.write(struct.pack("<BI", s.label, s.features.valid_count))
                fh.write(s.features.rows.astype("<f4").tobytes())
        paths.append(path)
    return paths


def load_dataset(in_dir) -> list[PillarSample]:
    """Read every shard; sources carry the frame id (pillar index not stored)."""
    in_dir = Path(in_dir)
    shards = sorted(in_dir.glob("shard-*.bin"))
    if not shards:
        raise DataError(f"no dataset shards in {in_dir}")
    samples = []
    for path in shards:
        frame_id = int(path.stem.split("-")[1])
        raw = path.read_bytes()
        magic, version, m_pc, count = _HEADER.unpack_from(raw, 0)
        if magic != SHARD_MAGIC or version != SHARD_VERSION:
            raise DataError(f"{path.name}: bad magic/version")
        offset = _HEADER.size
        row_bytes = m_pc * FEATURE_DIM * 4
        for _ in range(count):
            label, valid_count = struct.unpack_from("<BI", raw, offset)
            offset += 5
            dense = np.frombuffer(raw, dtype="<f4", count=m_pc * FEATURE_DIM, offset=offset)
            offset += row_bytes
            feats = PillarFeatures(
                dense.astype(np.float64).reshape(m_pc, FEATURE_DIM)[:valid_count], m_pc
            )
            samples.append(PillarSample(feats, int(label), (frame_id, None)))
    return samples
