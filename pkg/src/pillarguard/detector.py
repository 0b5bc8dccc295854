"""Victim-detector stub (pillar connected components) and MOT track lifecycle.

The stub clusters occupied pillars with 8-connectivity, fits an axis-aligned
box over each cluster's points, and scores confidence as the cluster's point
count against the count a real car would show at that depth. It stands in
for the heavyweight learned detectors so end-to-end experiments run anywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Box3D, depth
from .grid import GridSpec, partition
from .pcio import Detection, PointCloud
from .synth import DEFAULT_DENSITY_CONSTANT

BOX_MARGIN = 0.1  # m added around the fitted cluster extents

CONFIRM_HITS = 6  # consecutive frames before a track is confirmed
DROP_MISSES = 60  # consecutive unmatched frames before a track dies
GATE_DEFAULT = 2.0  # m, association gate


def detect(pc: PointCloud, spec: GridSpec, min_points: int,
           density_constant: float = DEFAULT_DENSITY_CONSTANT) -> list[Detection]:
    """Cluster occupied pillars (8-connected) into car detections."""
    part = partition(pc, spec)
    if not part.pillars:
        return []
    visited = set()
    detections = []
    pillars = part.pillars
    for start in sorted(pillars):
        if start in visited:
            continue
        stack = [start]
        visited.add(start)
        component = []
        while stack:
            cur = stack.pop()
            component.append(cur)
            for di in (-1, 0, 1):
                for dj in (-1, 0, 1):
                    nb = (cur[0] + di, cur[1] + dj)
                    if nb in pillars and nb not in visited:
                        visited.add(nb)
                        stack.append(nb)
        rows = np.concatenate([pillars[idx] for idx in component])
        if len(rows) < min_points:
            continue
        pts = pc.xyz[rows]
        lo = pts.min(axis=0) - BOX_MARGIN
        hi = pts.max(axis=0) + BOX_MARGIN
        center = (lo + hi) / 2.0
        dims = hi - lo
        box = Box3D(center[0], center[1], center[2], dims[0], dims[1], dims[2], 0.0)
        expected = density_constant / max(depth(center) ** 2, 1e-12)
        confidence = min(1.0, len(rows) / expected)
        detections.append(Detection("car", box, confidence))
    return detections


TENTATIVE = "tentative"
CONFIRMED = "confirmed"
DEAD = "dead"


@dataclass
class Track:
    track_id: int
    box: Box3D
    hit_streak: int = 1
    miss_streak: int = 0
    state: str = TENTATIVE


@dataclass
class TrackSet:
    tracks: list = field(default_factory=list)
    next_id: int = 0

    @property
    def active(self) -> list:
        return [t for t in self.tracks if t.state != DEAD]


def mot_step(track_set: TrackSet, detections, gate: float = GATE_DEFAULT,
             confirm_hits: int = CONFIRM_HITS, drop_misses: int = DROP_MISSES) -> TrackSet:
    """Advance the tracker one frame with greedy nearest-centroid association.

    Each detection and track is used at most once, pairs taken in ascending
    centroid distance (ties by lower track id, then detection index). A
    tentative track confirms on its confirm_hits-th consecutive hit; any
    track dies on its drop_misses-th consecutive miss.
    """
    if gate <= 0:
        raise ValueError("gate must be positive")
    active = track_set.active
    pairs = []
    for t_pos, track in enumerate(active):
        for d_pos, det in enumerate(detections):
            dist = math.hypot(track.box.cx - det.box.cx, track.box.cy - det.box.cy)
            if dist <= gate:
                pairs.append((dist, track.track_id, d_pos, t_pos))
    pairs.sort()
    used_tracks: set = set()
    used_dets: set = set()
    for _, _, d_pos, t_pos in pairs:
        if t_pos in used_tracks or d_pos in used_dets:
            continue
        used_tracks.add(t_pos)
        used_dets.add(d_pos)
        track = active[t_pos]
        track.box = detections[d_pos].box
        track.hit_streak += 1
        track.miss_streak = 0
        if track.state == TENTATIVE and track.hit_streak >= confirm_hits:
            track.state = CONFIRMED

    for t_pos, track in enumerate(active):
        if t_pos in used_tracks:
            continue
        track.miss_streak += 1
        track.hit_streak = 0
        if track.miss_streak >= drop_misses:
            track.state = DEAD

    for d_pos, det in enumerate(detections):
        if d_pos in used_dets:
            continue
        track_set.tracks.append(Track(track_set.next_id, det.box))
        track_set.next_id += 1
    return track_set
