"""Appearing-attack generators: point transplant, random injection, adaptive PGD.

All attacks are append-only (pre-existing points are never touched), inject at
most 200 points, and place the forged box at a planar distance of 5-10 m in
front of the sensor, matching the spoofing threat model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyLibraryError, EmptyPillarError
from .features import augment, pillar_rng
from .geometry import Box3D, points_in_box_mask
from .grid import GridSpec, intersecting_pillars, partition, pillar_footprint
from .lop import LopModel
from .network import forward, grad_of_input
from .pcio import PointCloud, Scene

MAX_INJECTED_POINTS = 200
PLACEMENT_RANGE = (5.0, 10.0)  # planar meters from the sensor
BEARING_LIMIT = math.radians(30.0)  # "front-near" band around +x

PGD_STEPS_DEFAULT = 40
PGD_STEP_SIZE_DEFAULT = 0.05  # m per coordinate per iteration

ATTACK_KINDS = ("physical", "random_inject", "adaptive")


@dataclass(frozen=True)
class AttackTrace:
    injected_points: np.ndarray  # (n, 4) x, y, z, intensity
    target_box: Box3D
    kind: str
    base_frame_id: int

    def __post_init__(self):
        pts = np.asarray(self.injected_points, dtype=np.float64).reshape(-1, 4).copy()
        if len(pts) > MAX_INJECTED_POINTS:
            raise ValueError(f"injection budget is {MAX_INJECTED_POINTS} points, got {len(pts)}")
        if self.kind not in ATTACK_KINDS:
            raise ValueError(f"unknown attack kind {self.kind!r}")
        planar = math.hypot(self.target_box.cx, self.target_box.cy)
        lo, hi = PLACEMENT_RANGE
        if not (lo - 1e-9 <= planar <= hi + 1e-9):
            raise ValueError(f"target box at {planar:.2f} m, outside [{lo}, {hi}] m band")
        pts.flags.writeable = False
        object.__setattr__(self, "injected_points", pts)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "base_frame_id": self.base_frame_id,
            "target_box": self.target_box.as_row(),
            "injected_points": [list(row) for row in self.injected_points],
        }

    @staticmethod
    def from_dict(doc: dict) -> "AttackTrace":
        return AttackTrace(
            injected_points=np.asarray(doc["injected_points"], dtype=np.float64).reshape(-1, 4),
            target_box=Box3D.from_row(doc["target_box"]),
            kind=doc["kind"],
            base_frame_id=int(doc["base_frame_id"]),
        )


@dataclass(frozen=True)
class DonorEntry:
    points_local: np.ndarray  # (k, 4), box-local frame (centered, yaw-aligned)
    dims: tuple  # (l, w, h)
    source_cz: float


@dataclass(frozen=True)
class DonorLibrary:
    entries: tuple

    def __len__(self) -> int:
        return len(self.entries)


def build_donor_library(scenes, max_points: int = MAX_INJECTED_POINTS) -> DonorLibrary:
    """Harvest sparse real cars (1..max_points interior points) in local frame."""
    entries = []
    for scene in scenes:
        arr = scene.cloud.arr
        for gt in scene.ground_truth:
            if gt.category != "car":
                continue
            mask = points_in_box_mask(arr[:, :3], gt.box)
            count = int(mask.sum())
            if count == 0 or count > max_points:
                continue
            pts = arr[mask].copy()
            box = gt.box
            c, s = math.cos(-box.yaw), math.sin(-box.yaw)
            dx = pts[:, 0] - box.cx
            dy = pts[:, 1] - box.cy
            local = pts.copy()
            local[:, 0] = c * dx - s * dy
            local[:, 1] = s * dx + c * dy
            local[:, 2] = pts[:, 2] - box.cz
            entries.append(DonorEntry(local, (box.l, box.w, box.h), box.cz))
    if not entries:
        raise EmptyLibraryError("no ground-truth car with a qualifying point count")
    return DonorLibrary(tuple(entries))


def _append_points(scene: Scene, injected: np.ndarray, note: str) -> Scene:
    arr = np.concatenate([scene.cloud.arr, injected], axis=0)
    provenance = scene.provenance + (";" if scene.provenance else "") + note
    return Scene(
        cloud=PointCloud(arr=arr, frame_id=scene.frame_id),
        ground_truth=scene.ground_truth,
        detections=scene.detections,
        provenance=provenance,
    )


def physical_attack(scene: Scene, library: DonorLibrary,
                    rng: np.random.Generator) -> tuple[Scene, AttackTrace]:
    """Transplant a random donor car to a front-near pose and append its points."""
    if len(library) == 0:
        raise EmptyLibraryError("donor library is empty")
    donor = library.entries[int(rng.integers(len(library)))]
    d = rng.uniform(*PLACEMENT_RANGE)
    bearing = rng.uniform(-BEARING_LIMIT, BEARING_LIMIT)
    yaw = rng.uniform(-math.pi, math.pi)
    cx, cy, cz = d * math.cos(bearing), d * math.sin(bearing), donor.source_cz

    c, s = math.cos(yaw), math.sin(yaw)
    local = donor.points_local
    world = local.copy()
    world[:, 0] = c * local[:, 0] - s * local[:, 1] + cx
    world[:, 1] = s * local[:, 0] + c * local[:, 1] + cy
    world[:, 2] = local[:, 2] + cz

    target = Box3D(cx, cy, cz, *donor.dims, yaw)
    trace = AttackTrace(world, target, "physical", scene.frame_id)
    return _append_points(scene, world, f"attack=physical n={len(world)}"), trace


def frontal_zone(rng: np.random.Generator,
                 dims: tuple = (4.2, 1.7, 1.5),
                 cz: float | None = None) -> Box3D:
    """A car-sized target zone in the 5-10 m front-near band, random yaw."""
    d = rng.uniform(*PLACEMENT_RANGE)
    bearing = rng.uniform(-BEARING_LIMIT, BEARING_LIMIT)
    yaw = rng.uniform(-math.pi, math.pi)
    if cz is None:
        cz = -1.73 + dims[2] / 2
    return Box3D(d * math.cos(bearing), d * math.sin(bearing), cz, *dims, yaw)


def random_inject_attack(scene: Scene, zone: Box3D, n: int,
                         rng: np.random.Generator) -> tuple[Scene, AttackTrace]:
    """Inject n points uniform in the zone volume with random intensities."""
    if not (0 <= n <= MAX_INJECTED_POINTS):
        raise ValueError(f"n must be in [0, {MAX_INJECTED_POINTS}], got {n}")
    local = np.column_stack([
        rng.uniform(-zone.l / 2, zone.l / 2, size=n),
        rng.uniform(-zone.w / 2, zone.w / 2, size=n),
        rng.uniform(-zone.h / 2, zone.h / 2, size=n),
    ])
    c, s = math.cos(zone.yaw), math.sin(zone.yaw)
    world = np.empty((n, 4))
    world[:, 0] = c * local[:, 0] - s * local[:, 1] + zone.cx
    world[:, 1] = s * local[:, 0] + c * local[:, 1] + zone.cy
    world[:, 2] = local[:, 2] + zone.cz
    world[:, 3] = rng.uniform(0.0, 1.0, size=n)
    trace = AttackTrace(world, zone, "random_inject", scene.frame_id)
    return _append_points(scene, world, f"attack=random_inject n={n}"), trace


def _clamp_into_box(xyz: np.ndarray, box: Box3D) -> np.ndarray:
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    dx = xyz[:, 0] - box.cx
    dy = xyz[:, 1] - box.cy
    lx = c * dx + s * dy
    ly = -s * dx + c * dy
    lz = xyz[:, 2] - box.cz
    eps = 1e-6
    lx = np.clip(lx, -box.l / 2 + eps, box.l / 2 - eps)
    ly = np.clip(ly, -box.w / 2 + eps, box.w / 2 - eps)
    lz = np.clip(lz, -box.h / 2 + eps, box.h / 2 - eps)
    out = np.empty_like(xyz)
    out[:, 0] = c * lx - s * ly + box.cx
    out[:, 1] = s * lx + c * ly + box.cy
    out[:, 2] = lz + box.cz
    return out


def adaptive_attack(scene: Scene, model: LopModel, spec: GridSpec, beta: float,
                    n: int, steps: int, step_size: float,
                    rng: np.random.Generator,
                    zone: Box3D | None = None) -> tuple[Scene, AttackTrace]:
    """White-box PGD against the objectness predictor.

    Starts from a random injection, then ascends the mean pillar probability
    over the target box's occupied intersecting pillars with sign steps,
    projecting every injected point back into the target box after each
    iteration. Pre-existing scene points and intensities are never modified.
    """
    if zone is None:
        zone = frontal_zone(rng)
    _, trace = random_inject_attack(scene, zone, n, rng)
    pts = trace.injected_points.copy()
    base_part = partition(scene.cloud, spec)
    base_arr = scene.cloud.arr
    target_pillars = intersecting_pillars(zone, spec, beta)
    attack_seed = int(rng.integers(0, 2**63 - 1))

    for step in range(steps):
        grad = np.zeros((len(pts), 3))
        cell_of = _cell_indices(pts[:, :2], spec)
        active = []
        for idx in target_pillars:
            rows_injected = np.nonzero((cell_of[:, 0] == idx.i) & (cell_of[:, 1] == idx.j))[0]
            base_rows = base_part.pillars.get(idx)
            if len(rows_injected) == 0 and base_rows is None:
                continue
            active.append((idx, rows_injected, base_rows))
        if not active:
            break
        k_pillars = len(active)
        for idx, rows_injected, base_rows in active:
            stack = []
            if base_rows is not None:
                stack.append(base_arr[base_rows])
            stack.append(pts[rows_injected])
            block = np.concatenate(stack, axis=0)
            feats = augment(
                block, pillar_footprint(idx, spec), model.m_pc,
                pillar_rng(attack_seed, step, idx.i, idx.j),
            )
            try:
                dfeat = grad_of_input(model.network, feats)
            except EmptyPillarError:
                continue  # pillar vacated by projection
            n_base = 0 if base_rows is None else len(base_rows)
            if feats.valid_count < len(block):
                continue  # subsampled pillar: rows no longer align, skip its vote
            for local_row, pt_row in enumerate(rows_injected):
                row = dfeat[n_base + local_row]
                x, y, z = pts[pt_row, :3]
                dep = math.sqrt(x * x + y * y + z * z)
                inv = 1.0 / dep if dep > 0 else 0.0
                # Chain rule through (dx, dy, x, y, z, int, dep).
                grad[pt_row, 0] += (row[0] + row[2] + row[6] * x * inv) / k_pillars
                grad[pt_row, 1] += (row[1] + row[3] + row[6] * y * inv) / k_pillars
                grad[pt_row, 2] += (row[4] + row[6] * z * inv) / k_pillars
        pts[:, :3] = _clamp_into_box(pts[:, :3] + step_size * np.sign(grad), zone)

    final = AttackTrace(pts, zone, "adaptive", scene.frame_id)
    return _append_points(scene, pts, f"attack=adaptive n={n} steps={steps}"), final


def _cell_indices(xy: np.ndarray, spec: GridSpec) -> np.ndarray:
    out = np.full((len(xy), 2), -1, dtype=np.int64)
    inb = (
        (xy[:, 0] >= spec.x_min) & (xy[:, 0] < spec.x_max)
        & (xy[:, 1] >= spec.y_min) & (xy[:, 1] < spec.y_max)
    )
    out[inb, 0] = np.floor((xy[inb, 0] - spec.x_min) / spec.cell).astype(np.int64)
    out[inb, 1] = np.floor((xy[inb, 1] - spec.y_min) / spec.cell).astype(np.int64)
    return out


def mean_target_probability(scene_arr: np.ndarray, injected: np.ndarray,
                            model: LopModel, zone: Box3D, spec: GridSpec,
                            beta: float, seed: int = 0) -> float:
    """Mean LOP probability over the target box's occupied intersecting pillars."""
    merged = np.concatenate([scene_arr, injected], axis=0)
    part = partition(merged[:, :3], spec)
    probs = []
    for idx in intersecting_pillars(zone, spec, beta):
        rows = part.pillars.get(idx)
        if rows is None:
            continue
        feats = augment(merged[rows], pillar_footprint(idx, spec), model.m_pc,
                        pillar_rng(seed, 0, idx.i, idx.j))
        probs.append(forward(model.network, feats)[1])
    return float(np.mean(probs)) if probs else 0.0
