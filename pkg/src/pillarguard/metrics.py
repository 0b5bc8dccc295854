"""Evaluation metrics: matching, precision, 11-point AP, ASR, set distances.

Matching is greedy in descending confidence (ties by input index): each
detection takes the unmatched same-category ground-truth box of maximal
bird's-eye IoU when that IoU reaches the threshold. This makes per-threshold
sweeps consistent with a single pass, which the AP implementation exploits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, EmptySetError, SizeError
from .geometry import Box3D, depth, footprint, iou_2d, point_density
from .grid import GridSpec
from .pcio import Detection


@dataclass
class DetectionVerdict:
    det_index: int
    confidence: float
    matched_gt: int | None
    iou: float

    @property
    def is_tp(self) -> bool:
        return self.matched_gt is not None


@dataclass
class MatchResult:
    tp: int
    fp: int
    fn: int
    verdicts: list = field(default_factory=list)


def match(dets, gts, c_conf: float, c_iou: float) -> MatchResult:
    """One-to-one greedy matching of detections against ground truth."""
    order = sorted(
        (i for i, d in enumerate(dets) if d.confidence >= c_conf),
        key=lambda i: (-dets[i].confidence, i),
    )
    gt_fps = [footprint(g.box) for g in gts]
    taken = [False] * len(gts)
    verdicts = []
    tp = 0
    for i in order:
        det = dets[i]
        det_fp = footprint(det.box)
        best_iou, best_j = 0.0, None
        for j, gt in enumerate(gts):
            if taken[j] or gt.category != det.category:
                continue
            iou = iou_2d(det_fp, gt_fps[j])
            if iou > best_iou:
                best_iou, best_j = iou, j
        if best_j is not None and best_iou >= c_iou:
            taken[best_j] = True
            tp += 1
            verdicts.append(DetectionVerdict(i, det.confidence, best_j, best_iou))
        else:
            verdicts.append(DetectionVerdict(i, det.confidence, None, best_iou))
    fp = len(order) - tp
    fn = len(gts) - tp
    return MatchResult(tp, fp, fn, verdicts)


def precision(mr: MatchResult) -> float:
    """tp / (tp + fp); an empty prediction set raises no false alarm -> 1.0."""
    total = mr.tp + mr.fp
    return mr.tp / total if total else 1.0


def ap_11point(dets_per_frame, gts_per_frame, c_iou: float) -> float:
    """11-point interpolated average precision across frames.

    Greedy descending-confidence matching means the verdict of a detection
    does not depend on lower-confidence detections, so one pass at zero
    confidence yields the verdicts for every threshold of the sweep.
    """
    n_gts = sum(len(g) for g in gts_per_frame)
    if n_gts == 0:
        raise DataError("AP needs at least one ground-truth object")
    verdicts = []
    for dets, gts in zip(dets_per_frame, gts_per_frame):
        mr = match(dets, gts, c_conf=0.0, c_iou=c_iou)
        verdicts.extend((v.confidence, v.is_tp) for v in mr.verdicts)
    if not verdicts:
        return 0.0
    verdicts.sort(key=lambda t: -t[0])
    confs = np.array([c for c, _ in verdicts])
    tps = np.cumsum([1 if hit else 0 for _, hit in verdicts])
    fps = np.cumsum([0 if hit else 1 for _, hit in verdicts])
    # Curve points at each distinct confidence threshold (inclusive).
    last_of_conf = np.nonzero(np.diff(confs, append=-np.inf) != 0)[0]
    recalls = tps[last_of_conf] / n_gts
    precisions = tps[last_of_conf] / (tps[last_of_conf] + fps[last_of_conf])
    total = 0.0
    for r in np.linspace(0.0, 1.0, 11):
        mask = recalls >= r - 1e-12
        total += float(precisions[mask].max()) if mask.any() else 0.0
    return total / 11.0


def asr(traces, dets_by_frame: dict, c_conf: float, c_iou: float) -> float:
    """Fraction of attack attempts whose forged box survives into detections."""
    if not traces:
        raise DataError("ASR needs at least one attack attempt")
    successes = 0
    for trace in traces:
        target_fp = footprint(trace.target_box)
        for det in dets_by_frame.get(trace.base_frame_id, []):
            if det.category != "car" or det.confidence < c_conf:
                continue
            if iou_2d(footprint(det.box), target_fp) >= c_iou:
                successes += 1
                break
    return successes / len(traces)


def _as_points(s) -> np.ndarray:
    arr = np.asarray(s, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] < 3:
        raise ValueError("point set must be (n, >=3)")
    return arr[:, :3]


def _pairwise_sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(|b|, |a|) squared distances, accumulated coordinate by coordinate.

    The explicit x + y + z order keeps every value bit-identical to a
    sequential scalar reference.
    """
    diff = b[:, None, :] - a[None, :, :]
    d2 = diff[:, :, 0] * diff[:, :, 0]
    d2 = d2 + diff[:, :, 1] * diff[:, :, 1]
    d2 = d2 + diff[:, :, 2] * diff[:, :, 2]
    return d2


def chamfer(s, s_prime) -> float:
    """Mean over y in S' of the squared distance to its nearest point in S.

    Reductions accumulate in input order so results are reproducible to the
    bit against a sequential reference.
    """
    a = _as_points(s)
    b = _as_points(s_prime)
    if len(a) == 0 or len(b) == 0:
        raise EmptySetError("chamfer distance needs non-empty sets")
    d2 = _pairwise_sq_dists(a, b)
    return sum(d2.min(axis=1).tolist()) / len(b)


def knn_dist(s, s_prime, k: int = 10) -> float:
    """Mean over y in S' of the mean squared distance to its k NNs in S."""
    a = _as_points(s)
    b = _as_points(s_prime)
    if len(b) == 0:
        raise EmptySetError("kNN distance needs a non-empty S'")
    if len(a) < k:
        raise SizeError(f"need |S| >= k={k}, got {len(a)}")
    d2 = _pairwise_sq_dists(a, b)
    # k smallest per row, ascending, summed sequentially (bit-reproducible).
    nearest = np.sort(np.partition(d2, k - 1, axis=1)[:, :k], axis=1)
    return sum(sum(row) / k for row in nearest.tolist()) / len(b)


@dataclass(frozen=True)
class DiffStats:
    d_global: float
    d_avg_local: float
    d_half_max_local: float


def local_global_diffs(s_r, s_f, spec: GridSpec, metric: str = "chamfer",
                       k: int = 10) -> DiffStats:
    """Global vs pillar-local set distance between a real and a forged object.

    Both sets must already be normalized to the object-local frame; the grid
    spec only provides the pillar tiling of the forged set. d_half_max_local
    is the mean of the ceil(count/2) largest per-pillar distances.
    """
    if metric == "chamfer":
        dist = lambda a, b: chamfer(a, b)
    elif metric == "knn":
        dist = lambda a, b: knn_dist(a, b, k)
    else:
        raise ValueError(f"unknown metric {metric!r}")
    s_r = _as_points(s_r)
    s_f = _as_points(s_f)
    subsets = _split_by_pillar(s_f, spec)
    if not subsets:
        raise EmptySetError("forged set occupies no pillar of the given grid")
    d_global = dist(s_r, s_f)
    locals_ = sorted((dist(s_r, sub) for sub in subsets), reverse=True)
    n_half = math.ceil(len(locals_) / 2)
    return DiffStats(
        d_global=d_global,
        d_avg_local=float(np.mean(locals_)),
        d_half_max_local=float(np.mean(locals_[:n_half])),
    )


def _split_by_pillar(pts: np.ndarray, spec: GridSpec) -> list:
    inb = (
        (pts[:, 0] >= spec.x_min) & (pts[:, 0] < spec.x_max)
        & (pts[:, 1] >= spec.y_min) & (pts[:, 1] < spec.y_max)
    )
    kept = pts[inb]
    if len(kept) == 0:
        return []
    i = np.floor((kept[:, 0] - spec.x_min) / spec.cell).astype(np.int64)
    j = np.floor((kept[:, 1] - spec.y_min) / spec.cell).astype(np.int64)
    out = []
    for key in sorted(set(zip(i.tolist(), j.tolist()))):
        mask = (i == key[0]) & (j == key[1])
        out.append(kept[mask])
    return out


@dataclass(frozen=True)
class ProfileRecord:
    depth: float
    density: float
    is_forged: bool


def depth_density_profile(scenes, traces=None) -> list[ProfileRecord]:
    """Depth and point density per object; forged boxes come from traces.

    Scenes should carry the clouds the objects live in (attacked clouds for
    attacked frames); traces are matched to scenes by frame id.
    """
    by_frame = {}
    for scene in scenes:
        by_frame[scene.frame_id] = scene
    records = []
    for scene in scenes:
        for gt in scene.ground_truth:
            records.append(ProfileRecord(
                depth(gt.box.center), point_density(gt.box, scene.cloud), False,
            ))
    for trace in traces or []:
        scene = by_frame.get(trace.base_frame_id)
        if scene is None:
            continue
        records.append(ProfileRecord(
            depth(trace.target_box.center),
            point_density(trace.target_box, scene.cloud),
            True,
        ))
    return records


def fit_density_law(records) -> tuple[float, float]:
    """Least-squares fit of log(density) = log(a) - b*log(depth) on real objects.

    Returns (a, b); predicted density at depth d is a / d**b.
    """
    real = [(r.depth, r.density) for r in records if not r.is_forged and r.density > 0]
    if len(real) < 2:
        raise DataError("need at least two real objects with points to fit the law")
    logs = np.log([[d, rho] for d, rho in real])
    slope, intercept = np.polyfit(logs[:, 0], logs[:, 1], 1)
    return float(np.exp(intercept)), float(-slope)
