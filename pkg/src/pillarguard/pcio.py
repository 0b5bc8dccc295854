"""Point-cloud and label I/O: raw sensor dumps, the canonical scene JSON, calib.

Coordinate convention (documented once, used everywhere): sensor frame with
x forward, y left, z up, yaw measured about +z from +x. Camera-frame labels
(x right, y down, z forward, rotation about the camera y axis) are converted
on ingest and never used downstream.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CalibError, LengthError, SchemaError
from .geometry import Box3D, normalize_angle

log = logging.getLogger(__name__)

POINT_RECORD_BYTES = 16  # four little-endian float32: x, y, z, intensity

CATEGORIES = ("car", "pedestrian", "cyclist", "unknown")


class Point(tuple):
    """Single LiDAR return: position (m) and reflectance intensity in [0, 1]."""

    __slots__ = ()

    def __new__(cls, x, y, z, intensity):
        return super().__new__(cls, (float(x), float(y), float(z), float(intensity)))

    @property
    def x(self):
        return self[0]

    @property
    def y(self):
        return self[1]

    @property
    def z(self):
        return self[2]

    @property
    def intensity(self):
        return self[3]


class PointCloud:
    """Ordered, immutable collection of points for one frame."""

    __slots__ = ("_arr", "frame_id")

    def __init__(self, points=None, frame_id: int = 0, arr: np.ndarray | None = None):
        if arr is None:
            arr = np.asarray([tuple(p) for p in (points or [])], dtype=np.float64)
            arr = arr.reshape(-1, 4)
        else:
            arr = np.asarray(arr, dtype=np.float64).reshape(-1, 4).copy()
        arr.flags.writeable = False
        self._arr = arr
        self.frame_id = int(frame_id)

    @property
    def arr(self) -> np.ndarray:
        """(n, 4) read-only array of x, y, z, intensity."""
        return self._arr

    @property
    def xyz(self) -> np.ndarray:
        return self._arr[:, :3]

    @property
    def points(self) -> list[Point]:
        return [Point(*row) for row in self._arr]

    def __len__(self) -> int:
        return self._arr.shape[0]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, PointCloud)
            and self.frame_id == other.frame_id
            and self._arr.shape == other._arr.shape
            and bool(np.array_equal(self._arr, other._arr))
        )

    def __repr__(self) -> str:
        return f"PointCloud(frame_id={self.frame_id}, n={len(self)})"


@dataclass(frozen=True)
class GroundTruthObject:
    category: str
    box: Box3D

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")


@dataclass(frozen=True)
class Detection:
    category: str
    box: Box3D
    confidence: float

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class Scene:
    """One frame: cloud, ground-truth boxes, optional detections, provenance."""

    cloud: PointCloud
    ground_truth: tuple = ()
    detections: tuple | None = None
    provenance: str = ""

    def __post_init__(self):
        object.__setattr__(self, "ground_truth", tuple(self.ground_truth))
        if self.detections is not None:
            object.__setattr__(self, "detections", tuple(self.detections))

    @property
    def frame_id(self) -> int:
        return self.cloud.frame_id


@dataclass(frozen=True)
class CalibMatrix:
    rotation: np.ndarray  # (3, 3)
    translation: np.ndarray  # (3,)

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3).copy()
        t = np.asarray(self.translation, dtype=np.float64).reshape(3).copy()
        r.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    def check_orthonormal(self, tol: float = 1e-6) -> None:
        err = np.abs(self.rotation @ self.rotation.T - np.eye(3)).max()
        if err > tol:
            raise CalibError(f"rotation not orthonormal (max deviation {err:.3g})")


def _clamp_intensity(arr: np.ndarray, source: str) -> np.ndarray:
    out_of_range = int(((arr[:, 3] < 0.0) | (arr[:, 3] > 1.0)).sum())
    if out_of_range:
        log.warning("%s: clamped %d out-of-range intensity values", source, out_of_range)
        arr = arr.copy()
        arr[:, 3] = np.clip(arr[:, 3], 0.0, 1.0)
    return arr


def read_points_bin(data: bytes, frame_id: int = 0) -> PointCloud:
    """Decode raw little-endian float32 quadruples (x, y, z, intensity)."""
    if len(data) % POINT_RECORD_BYTES != 0:
        raise LengthError(
            f"byte length {len(data)} is not a multiple of {POINT_RECORD_BYTES}"
        )
    arr = np.frombuffer(data, dtype="<f4").astype(np.float64).reshape(-1, 4)
    if arr.size and not np.isfinite(arr).all():
        raise ValueError("point file contains non-finite values")
    arr = _clamp_intensity(arr, "read_points_bin")
    return PointCloud(arr=arr, frame_id=frame_id)


def write_points_bin(pc: PointCloud) -> bytes:
    return pc.arr.astype("<f4").tobytes()


# ---------------------------------------------------------------------------
# Scene JSON. Schema (all angles radians, all lengths meters):
#   frame_id       int
#   points         [[x, y, z, intensity], ...]
#   ground_truth   [{"category": str, "box": [cx, cy, cz, l, w, h, yaw]}, ...]
#   detections     optional, [{"category", "box", "confidence"}, ...]
#   provenance     str
# Floats are emitted with up to 17 significant digits (shortest repr that
# round-trips IEEE-754 doubles bit-exactly).
# ---------------------------------------------------------------------------


def _expect(doc: dict, key: str, kind, path: str):
    if key not in doc:
        raise SchemaError(path, "missing key")
    value = doc[key]
    if kind is not None and not isinstance(value, kind):
        raise SchemaError(path, f"expected {kind}, got {type(value).__name__}")
    return value


def _parse_box(row, path: str) -> Box3D:
    if not isinstance(row, list) or len(row) != 7:
        raise SchemaError(path, "box must be a 7-element array")
    try:
        return Box3D.from_row(row)
    except (TypeError, ValueError) as exc:
        raise SchemaError(path, str(exc)) from exc


def _reject_constant(token: str):
    raise SchemaError("<document>", f"non-finite literal {token!r}")


def scene_from_json(text: str) -> Scene:
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise SchemaError("<document>", f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("<document>", "top level must be an object")

    frame_id = _expect(doc, "frame_id", int, "frame_id")
    if isinstance(frame_id, bool) or frame_id < 0:
        raise SchemaError("frame_id", "must be a non-negative integer")

    rows = _expect(doc, "points", list, "points")
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != 4:
            raise SchemaError(f"points[{i}]", "point must be a 4-element array")
    pts = np.asarray(rows, dtype=np.float64).reshape(-1, 4) if rows else np.empty((0, 4))
    if rows and not np.isfinite(pts).all():
        raise SchemaError("points", "non-finite coordinate")
    pts = _clamp_intensity(pts, "scene_from_json")

    gts = []
    for i, entry in enumerate(_expect(doc, "ground_truth", list, "ground_truth")):
        if not isinstance(entry, dict):
            raise SchemaError(f"ground_truth[{i}]", "must be an object")
        category = _expect(entry, "category", str, f"ground_truth[{i}].category")
        box = _parse_box(entry.get("box"), f"ground_truth[{i}].box")
        try:
            gts.append(GroundTruthObject(category, box))
        except ValueError as exc:
            raise SchemaError(f"ground_truth[{i}]", str(exc)) from exc

    detections = None
    if "detections" in doc:
        detections = []
        for i, entry in enumerate(_expect(doc, "detections", list, "detections")):
            if not isinstance(entry, dict):
                raise SchemaError(f"detections[{i}]", "must be an object")
            category = _expect(entry, "category", str, f"detections[{i}].category")
            box = _parse_box(entry.get("box"), f"detections[{i}].box")
            conf = _expect(entry, "confidence", (int, float), f"detections[{i}].confidence")
            try:
                detections.append(Detection(category, box, float(conf)))
            except ValueError as exc:
                raise SchemaError(f"detections[{i}]", str(exc)) from exc

    provenance = _expect(doc, "provenance", str, "provenance")
    return Scene(
        cloud=PointCloud(arr=pts, frame_id=frame_id),
        ground_truth=tuple(gts),
        detections=tuple(detections) if detections is not None else None,
        provenance=provenance,
    )


def scene_to_json(scene: Scene) -> str:
    doc = {
        "frame_id": scene.frame_id,
        "points": [list(row) for row in scene.cloud.arr],
        "ground_truth": [
            {"category": g.category, "box": g.box.as_row()} for g in scene.ground_truth
        ],
    }
    if scene.detections is not None:
        doc["detections"] = [
            {"category": d.category, "box": d.box.as_row(), "confidence": d.confidence}
            for d in scene.detections
        ]
    doc["provenance"] = scene.provenance
    return json.dumps(doc, separators=(",", ":"))


def detections_from_json(text: str) -> tuple[int, list[Detection]]:
    """Parse one detection-exchange document: {"frame_id", "detections"}."""
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise SchemaError("<document>", f"invalid JSON: {exc}") from exc
    frame_id = _expect(doc, "frame_id", int, "frame_id")
    dets = []
    for i, entry in enumerate(_expect(doc, "detections", list, "detections")):
        category = _expect(entry, "category", str, f"detections[{i}].category")
        box = _parse_box(entry.get("box"), f"detections[{i}].box")
        conf = _expect(entry, "confidence", (int, float), f"detections[{i}].confidence")
        dets.append(Detection(category, box, float(conf)))
    return frame_id, dets


def detections_to_json(frame_id: int, detections) -> str:
    doc = {
        "frame_id": int(frame_id),
        "detections": [
            {"category": d.category, "box": d.box.as_row(), "confidence": d.confidence}
            for d in detections
        ],
    }
    return json.dumps(doc, separators=(",", ":"))


def cam_box_to_lidar(box_cam: Box3D, calib: CalibMatrix) -> Box3D:
    """Move a camera-frame box into the sensor frame.

    Center maps through p_lidar = R^T (p_cam - t). The camera yaw rotates
    about the camera y (down) axis; in the sensor frame this becomes
    -yaw_cam - pi/2 (camera z forward maps to sensor x forward).
    Dimensions are unchanged.
    """
    calib.check_orthonormal()
    center = calib.rotation.T @ (np.array([box_cam.cx, box_cam.cy, box_cam.cz]) - calib.translation)
    yaw = normalize_angle(-box_cam.yaw - math.pi / 2.0)
    return Box3D(center[0], center[1], center[2], box_cam.l, box_cam.w, box_cam.h, yaw)
