"""Voting-based fake-object elimination.

Each detection collects the occupied pillars whose footprint IoU with its box
exceeds beta; the fraction of those pillars scored objectness-1 is the vote
ratio. Detections with ratio <= B are eliminated. A detection covering no
occupied pillar is eliminated outright (ratio defined as 0). Pillar scores
are computed once per frame and shared across overlapping detections.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .features import augment, pillar_rng
from .grid import GridSpec, intersecting_pillars, partition, pillar_footprint
from .lop import LopModel, predict


@dataclass
class DetectionVerdict:
    detection: object
    ratio: float
    pillar_count: int
    eliminated: bool


@dataclass
class EliminationReport:
    kept: list = field(default_factory=list)
    eliminated: list = field(default_factory=list)  # (detection, ratio, pillar_count)
    verdicts: list = field(default_factory=list)  # one per input detection, in order
    pillar_scores: dict = field(default_factory=dict)  # PillarIndex -> (score01, prob)

    def to_dict(self) -> dict:
        return {
            "verdicts": [
                {
                    "category": v.detection.category,
                    "box": v.detection.box.as_row(),
                    "confidence": v.detection.confidence,
                    "ratio": v.ratio,
                    "pillar_count": v.pillar_count,
                    "eliminated": v.eliminated,
                }
                for v in self.verdicts
            ],
            "pillar_scores": [
                {"pillar": [int(i), int(j)], "score": int(s), "prob": p}
                for (i, j), (s, p) in sorted(self.pillar_scores.items())
            ],
        }


def filter_detections(dets, pc, model: LopModel, spec: GridSpec, beta: float,
                      b: float, rng: np.random.Generator,
                      include_empty: bool = False) -> EliminationReport:
    """Split detections into kept and eliminated by pillar objectness voting.

    `include_empty` switches the vote denominator to every intersecting
    pillar instead of only occupied ones (ablation knob; empty pillars then
    vote 0 without being scored).
    """
    if not (0.0 <= b <= 1.0):
        raise ValueError("boundary value b must be in [0, 1]")
    if beta < 0:
        raise ValueError("beta must be >= 0")
    part = partition(pc, spec)
    arr = pc.arr
    base_seed = int(rng.integers(0, 2**63 - 1))

    needed = []
    per_det = []
    for det in dets:
        pillars = intersecting_pillars(det.box, spec, beta)
        occupied = [p for p in pillars if p in part.pillars]
        per_det.append((pillars, occupied))
        needed.extend(occupied)

    scores: dict = {}
    for idx in sorted(set(needed)):
        feats = augment(
            arr[part.pillars[idx]],
            pillar_footprint(idx, spec),
            model.m_pc,
            pillar_rng(base_seed, pc.frame_id, idx.i, idx.j),
        )
        scores[idx] = predict(model, feats)

    report = EliminationReport(pillar_scores=scores)
    for det, (pillars, occupied) in zip(dets, per_det):
        denominator = pillars if include_empty else occupied
        if len(denominator) == 0:
            ratio = 0.0
        else:
            ratio = sum(scores[p][0] for p in occupied) / len(denominator)
        eliminated = ratio <= b
        report.verdicts.append(DetectionVerdict(det, ratio, len(denominator), eliminated))
        if eliminated:
            report.eliminated.append((det, ratio, len(denominator)))
        else:
            report.kept.append(det)
    return report
