"""Pipeline driver: generate data, train, attack, defend, evaluate, analyze.

Commands compose through documented file formats only: scene JSON documents,
detection-exchange JSON (one per frame), attack-trace JSON, binary dataset
shards, and the model file. Every command writes a manifest (config snapshot,
input hashes, tool version) next to its outputs; identical manifests imply
identical outputs. Logs go to stderr, data to files.

Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .attacks import (
    AttackTrace,
    adaptive_attack,
    build_donor_library,
    physical_attack,
    random_inject_attack,
    frontal_zone,
)
from .config import (
    RunConfig,
    config_from_dict,
    config_to_dict,
    load_config,
)
from .dataset import balance, generate, load_dataset, save_dataset
from .defenses import carlo_fsd, carlo_lpd, sor, srs
from .detector import TrackSet, detect, mot_step
from .eliminate import filter_detections
from .errors import PillarGuardError
from .grid import GridSpec
from .lop import TrainConfig, load_model, save_model, train
from .metrics import (
    ap_11point,
    asr,
    chamfer,
    depth_density_profile,
    fit_density_law,
    knn_dist,
    local_global_diffs,
    match,
    precision,
)
from .pcio import (
    Scene,
    detections_from_json,
    detections_to_json,
    scene_from_json,
    scene_to_json,
)
from .report import (
    EVAL_CSV_HEADER,
    render_depth_density_figure,
    render_diffs_figure,
    render_eval_figure,
    write_csv,
    write_json,
)
from .synth import gen_scene, occluded_indices

log = logging.getLogger("pillarguard")


# ---------------------------------------------------------------------------
# File layout helpers
# ---------------------------------------------------------------------------

def scene_path(out_dir: Path, frame_id: int) -> Path:
    return out_dir / f"scene-{frame_id:06d}.json"


def detections_path(out_dir: Path, frame_id: int) -> Path:
    return out_dir / f"detections-{frame_id:06d}.json"


def trace_path(out_dir: Path, frame_id: int) -> Path:
    return out_dir / f"trace-{frame_id:06d}.json"


def load_scenes(in_dir) -> list[Scene]:
    files = sorted(Path(in_dir).glob("scene-*.json"))
    if not files:
        raise PillarGuardError(f"no scene files in {in_dir}")
    return [scene_from_json(p.read_text()) for p in files]


def write_scenes(scenes, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for scene in scenes:
        scene_path(out_dir, scene.frame_id).write_text(scene_to_json(scene))


def load_detections_dir(in_dir) -> dict:
    files = sorted(Path(in_dir).glob("detections-*.json"))
    if not files:
        raise PillarGuardError(f"no detection files in {in_dir}")
    out = {}
    for p in files:
        frame_id, dets = detections_from_json(p.read_text())
        out[frame_id] = dets
    return out


def write_detections_dir(dets_by_frame: dict, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for frame_id in sorted(dets_by_frame):
        detections_path(out_dir, frame_id).write_text(
            detections_to_json(frame_id, dets_by_frame[frame_id])
        )


def load_traces(in_dir) -> list[AttackTrace]:
    files = sorted(Path(in_dir).glob("trace-*.json"))
    if not files:
        raise PillarGuardError(f"no trace files in {in_dir}")
    return [AttackTrace.from_dict(json.loads(p.read_text())) for p in files]


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _hash_inputs(paths) -> dict:
    hashes = {}
    for p in paths:
        p = Path(p)
        if p.is_dir():
            for f in sorted(p.rglob("*")):
                if f.is_file():
                    hashes[str(f)] = _sha256_file(f)
        elif p.is_file():
            hashes[str(p)] = _sha256_file(p)
    return hashes


def write_manifest(out_dir, command: str, cfg: RunConfig, inputs, outputs) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "version": __version__,
        "config": config_to_dict(cfg),
        "inputs": _hash_inputs(inputs),
        "outputs": sorted(str(o) for o in outputs),
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _parallel_map(fn, items, threads: int):
    """Order-preserving map; results never depend on completion order."""
    if threads <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_synth(args, cfg: RunConfig) -> int:
    out = Path(args.out)

    def one(frame_id: int) -> Scene:
        rng = np.random.default_rng((cfg.seed, frame_id))
        return gen_scene(cfg.synth, frame_id, rng)

    scenes = _parallel_map(one, range(args.scenes), cfg.threads)
    write_scenes(scenes, out)
    write_manifest(out, "synth", cfg, [], [scene_path(out, s.frame_id).name for s in scenes])
    log.info("wrote %d scenes to %s", len(scenes), out)
    return 0


def cmd_gen_dataset(args, cfg: RunConfig) -> int:
    scenes = load_scenes(args.scenes)
    rng = np.random.default_rng(cfg.seed)
    samples = generate(scenes, cfg.grid, cfg.train.m_pc, cfg.t_iou, rng)
    kept = balance(samples, cfg.max_neg_ratio, rng)
    paths = save_dataset(kept, args.out)
    write_manifest(args.out, "gen-dataset", cfg, [args.scenes], [p.name for p in paths])
    n_pos = sum(s.label for s in kept)
    log.info("dataset: %d samples (%d positive) in %d shards", len(kept), n_pos, len(paths))
    return 0


def cmd_train_lop(args, cfg: RunConfig) -> int:
    samples = load_dataset(args.dataset)
    # The shard header fixes m_pc; the config must follow the data.
    train_cfg = dataclasses.replace(cfg.train, m_pc=samples[0].features.m_pc)
    cfg = dataclasses.replace(cfg, train=train_cfg)
    model, history = train(samples, train_cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, out)
    write_manifest(out.parent, "train-lop", cfg, [args.dataset], [out.name])
    for h in history:
        log.info(
            "epoch %d: train loss %.6f acc %.4f val loss %.6f",
            h.epoch, h.train_loss, h.train_accuracy, h.val_loss,
        )
    log.info("model written to %s", out)
    return 0


def cmd_attack(args, cfg: RunConfig) -> int:
    scenes = load_scenes(args.scenes)
    out = Path(args.out)
    method = cfg.attack.method
    inputs = [args.scenes]

    library = None
    model = None
    if method == "physical":
        donor_scenes = load_scenes(args.donor_scenes) if args.donor_scenes else scenes
        if args.donor_scenes:
            inputs.append(args.donor_scenes)
        library = build_donor_library(donor_scenes, cfg.attack.donor_max_points)
        log.info("donor library: %d entries", len(library))
    elif method == "adaptive":
        if not args.model:
            raise PillarGuardError("adaptive attack needs --model")
        model = load_model(args.model)
        inputs.append(args.model)
    elif method != "random":
        raise PillarGuardError(f"unknown attack method {method!r}")

    def one(scene: Scene):
        rng = np.random.default_rng((cfg.seed, scene.frame_id, 17))
        if method == "physical":
            return physical_attack(scene, library, rng)
        if method == "random":
            return random_inject_attack(scene, frontal_zone(rng), cfg.attack.n_points, rng)
        return adaptive_attack(
            scene, model, cfg.grid, cfg.defense.beta, cfg.attack.n_points,
            cfg.attack.pgd_steps, cfg.attack.pgd_step_size, rng,
        )

    results = _parallel_map(one, scenes, cfg.threads)
    out.mkdir(parents=True, exist_ok=True)
    names = []
    for attacked, trace in results:
        write_scenes([attacked], out)
        path = trace_path(out, attacked.frame_id)
        path.write_text(json.dumps(trace.to_dict(), separators=(",", ":")))
        names.extend([scene_path(out, attacked.frame_id).name, path.name])
    write_manifest(out, "attack", cfg, inputs, names)
    log.info("attacked %d scenes (%s) into %s", len(results), method, out)
    return 0


def cmd_detect(args, cfg: RunConfig) -> int:
    scenes = load_scenes(args.scenes)

    def one(scene: Scene):
        return scene.frame_id, detect(
            scene.cloud, cfg.grid, cfg.detector.min_points, cfg.synth.density_constant
        )

    results = dict(_parallel_map(one, scenes, cfg.threads))
    write_detections_dir(results, args.out)
    write_manifest(args.out, "detect", cfg, [args.scenes],
                   [detections_path(Path(args.out), f).name for f in sorted(results)])
    log.info("detections for %d frames written to %s", len(results), args.out)
    return 0


def cmd_defend(args, cfg: RunConfig) -> int:
    scenes = load_scenes(args.scenes)
    method = cfg.defense.method
    out = Path(args.out)
    inputs = [args.scenes]
    dets_in = None
    model = None
    if method in ("lop", "carlo-fsd", "carlo-lpd", "none"):
        if not args.detections:
            raise PillarGuardError(f"defense {method!r} needs --detections")
        dets_in = load_detections_dir(args.detections)
        inputs.append(args.detections)
    if method == "lop":
        if not args.model:
            raise PillarGuardError("defense 'lop' needs --model")
        model = load_model(args.model)
        inputs.append(args.model)

    diagnostics = {}

    def one(scene: Scene):
        frame = scene.frame_id
        if method == "none":
            return frame, dets_in.get(frame, []), None
        if method == "srs":
            rng = np.random.default_rng((cfg.seed, frame, 23))
            cloud = srs(scene.cloud, cfg.defense.srs_m, rng)
            return frame, detect(cloud, cfg.grid, cfg.detector.min_points,
                                 cfg.synth.density_constant), None
        if method == "sor":
            cloud = sor(scene.cloud, cfg.defense.sor_k, cfg.defense.sor_alpha)
            return frame, detect(cloud, cfg.grid, cfg.detector.min_points,
                                 cfg.synth.density_constant), None
        dets = dets_in.get(frame, [])
        if method == "lop":
            rng = np.random.default_rng((cfg.seed, frame, 29))
            report = filter_detections(
                dets, scene.cloud, model, cfg.grid, cfg.defense.beta,
                cfg.defense.boundary, rng, cfg.defense.include_empty,
            )
            return frame, report.kept, report.to_dict()
        kept = []
        ratios = []
        for det in dets:
            if method == "carlo-fsd":
                verdict = carlo_fsd(det, scene.cloud, cfg.defense.carlo_cell,
                                    cfg.defense.carlo_r)
            else:
                verdict = carlo_lpd(det, scene.cloud, cfg.defense.carlo_r)
            ratios.append(verdict.ratio)
            if not verdict.flagged:
                kept.append(det)
        return frame, kept, {"ratios": ratios}

    results = _parallel_map(one, scenes, cfg.threads)
    dets_out = {}
    for frame, kept, diag in results:
        dets_out[frame] = kept
        if diag is not None:
            diagnostics[frame] = diag
    write_detections_dir(dets_out, out)
    names = [detections_path(out, f).name for f in sorted(dets_out)]
    if diagnostics:
        for frame in sorted(diagnostics):
            p = out / f"diagnostics-{frame:06d}.json"
            with open(p, "w") as fh:
                json.dump(diagnostics[frame], fh, sort_keys=True, separators=(",", ":"))
            names.append(p.name)
    write_manifest(out, "defend", cfg, inputs, names)
    log.info("defense %s: detections for %d frames written to %s", method, len(dets_out), out)
    return 0


def cmd_track(args, cfg: RunConfig) -> int:
    dets_by_frame = load_detections_dir(args.detections)
    tracker = TrackSet()
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for frame in sorted(dets_by_frame):
        mot_step(tracker, dets_by_frame[frame], cfg.detector.gate,
                 cfg.detector.confirm_hits, cfg.detector.drop_misses)
        for t in tracker.tracks:
            lines.append(json.dumps(
                {"frame": frame, "track_id": t.track_id, "state": t.state,
                 "box": t.box.as_row()},
                separators=(",", ":"),
            ))
    out.write_text("\n".join(lines) + "\n")
    write_manifest(out.parent, "track", cfg, [args.detections], [out.name])
    log.info("track timeline (%d rows) written to %s", len(lines), out)
    return 0


def _eval_arm(label, dets_by_frame, gt_scenes, traces, cfg: RunConfig):
    c_conf, c_iou = cfg.metrics.c_conf, cfg.metrics.c_iou
    tp = fp = fn = 0
    per_frame = []
    for scene in gt_scenes:
        dets = dets_by_frame.get(scene.frame_id, [])
        mr = match(dets, scene.ground_truth, c_conf, c_iou)
        tp += mr.tp
        fp += mr.fp
        fn += mr.fn
        per_frame.append({"frame": scene.frame_id, "tp": mr.tp, "fp": mr.fp, "fn": mr.fn})
    prec = tp / (tp + fp) if (tp + fp) else 1.0
    ap = ap_11point(
        [dets_by_frame.get(s.frame_id, []) for s in gt_scenes],
        [s.ground_truth for s in gt_scenes],
        c_iou,
    )
    rate = asr(traces, dets_by_frame, c_conf, c_iou) if traces else None
    return {
        "label": label,
        "ap": ap,
        "precision": prec,
        "asr": rate,
        "tp": tp,
        "fp": fp,
        "fn": fn,
        "per_frame": per_frame,
    }


def cmd_eval(args, cfg: RunConfig) -> int:
    gt_scenes = load_scenes(args.gt_scenes)
    traces = load_traces(args.traces) if args.traces else None
    arms = []
    inputs = [args.gt_scenes] + ([args.traces] if args.traces else [])
    for spec_str in args.arm:
        if "=" not in spec_str:
            raise PillarGuardError(f"--arm must be label=DIR, got {spec_str!r}")
        label, det_dir = spec_str.split("=", 1)
        arms.append((label, load_detections_dir(det_dir)))
        inputs.append(det_dir)
    if not arms:
        raise PillarGuardError("eval needs at least one --arm label=DIR")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summaries = [
        _eval_arm(label, dets, gt_scenes, traces, cfg) for label, dets in arms
    ]
    rows = [
        [
            s["label"],
            f"c_conf={cfg.metrics.c_conf};c_iou={cfg.metrics.c_iou}",
            f"{s['ap']:.6f}",
            f"{s['precision']:.6f}",
            "" if s["asr"] is None else f"{s['asr']:.6f}",
        ]
        for s in summaries
    ]
    write_csv(out / "report.csv", EVAL_CSV_HEADER, rows)
    write_json(out / "report.json", {
        "config": config_to_dict(cfg),
        "arms": summaries,
    })
    render_eval_figure(rows, out / "report.png")
    write_manifest(out, "eval", cfg, inputs, ["report.csv", "report.json", "report.png"])
    for s in summaries:
        log.info("arm %-16s AP %.4f precision %.4f ASR %s",
                 s["label"], s["ap"], s["precision"],
                 "-" if s["asr"] is None else f"{s['asr']:.4f}")
    return 0


def cmd_analyze(args, cfg: RunConfig) -> int:
    scenes = load_scenes(args.scenes)
    traces = load_traces(args.traces) if args.traces else None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs = []

    records = depth_density_profile(scenes, traces)
    rows = [
        [f"{r.depth:.6f}", f"{r.density:.6f}", int(r.is_forged)] for r in records
    ]
    write_csv(out / "depth_density.csv", ["depth_m", "density_pts_per_m3", "is_forged"], rows)
    outputs.append("depth_density.csv")
    law = None
    try:
        law = fit_density_law(records)
    except PillarGuardError:
        pass
    render_depth_density_figure(records, out / "depth_density.png", law)
    outputs.append("depth_density.png")

    if traces:
        diff_rows = _diff_rows(scenes, traces)
        write_csv(
            out / "diffs.csv",
            ["frame", "metric", "d_global", "d_avg_local", "d_half_max_local"],
            [
                [r["frame"], r["metric"], f"{r['d_global']:.6f}",
                 f"{r['d_avg_local']:.6f}", f"{r['d_half_max_local']:.6f}"]
                for r in diff_rows
            ],
        )
        render_diffs_figure(diff_rows, out / "diffs.png")
        outputs.extend(["diffs.csv", "diffs.png"])

    inputs = [args.scenes] + ([args.traces] if args.traces else [])
    write_manifest(out, "analyze", cfg, inputs, outputs)
    log.info("analysis written to %s", out)
    return 0


def _object_local_points(arr: np.ndarray, box) -> np.ndarray:
    from .geometry import points_in_box_mask

    pts = arr[points_in_box_mask(arr[:, :3], box)][:, :3].copy()
    c, s = math.cos(-box.yaw), math.sin(-box.yaw)
    dx = pts[:, 0] - box.cx
    dy = pts[:, 1] - box.cy
    out = pts.copy()
    out[:, 0] = c * dx - s * dy
    out[:, 1] = s * dx + c * dy
    out[:, 2] = pts[:, 2] - box.cz
    return out


# Object-local pillar tiling for the local-difference statistics.
LOCAL_GRID = GridSpec(x_min=-4.0, x_max=4.0, y_min=-4.0, y_max=4.0, cell=1.0)


def _diff_rows(scenes, traces) -> list[dict]:
    """Eq-style global/local distances of each forged car to a reference car."""
    reference = None
    best_count = 0
    for scene in scenes:
        occluded = set(occluded_indices(scene))
        for k, gt in enumerate(scene.ground_truth):
            if gt.category != "car" or k in occluded:
                continue
            local = _object_local_points(scene.cloud.arr, gt.box)
            if len(local) > best_count:
                best_count = len(local)
                reference = local
    if reference is None or best_count < 10:
        raise PillarGuardError("no real car with enough points for a reference set")
    by_frame = {s.frame_id: s for s in scenes}
    rows = []
    for trace in traces:
        scene = by_frame.get(trace.base_frame_id)
        if scene is None:
            continue
        forged_local = _object_local_points(
            np.asarray(trace.injected_points, dtype=np.float64), trace.target_box
        )
        if len(forged_local) == 0:
            continue
        for metric in ("chamfer", "knn"):
            stats = local_global_diffs(reference, forged_local, LOCAL_GRID, metric)
            rows.append({
                "frame": trace.base_frame_id,
                "metric": metric,
                "d_global": stats.d_global,
                "d_avg_local": stats.d_avg_local,
                "d_half_max_local": stats.d_half_max_local,
            })
    return rows


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run-config file; flags override it")
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    p.add_argument("--threads", type=int, help="worker threads (default 1); results are thread-count invariant")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pillarguard",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"pillarguard {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a labeled synthetic corpus")
    _add_common(p)
    p.add_argument("--scenes", type=int, required=True, help="number of scenes")
    p.add_argument("--out", required=True, help="output scene directory")
    p.add_argument("--n-cars", type=int, help="max cars per scene")
    p.add_argument("--ground-rate", type=float, help="ground points per m^2")
    p.add_argument("--occlusion-prob", type=float, help="per-car occlusion probability")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("gen-dataset", help="build the pillar training set from scenes")
    _add_common(p)
    p.add_argument("--scenes", required=True, help="input scene directory")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--m-pc", type=int, help="rows per pillar (paper default 1024)")
    p.add_argument("--t-iou", type=float, help="labeling IoU threshold (paper default 1e-6)")
    p.add_argument("--max-neg-ratio", type=float, help="negatives per positive (paper default 1.5)")
    p.set_defaults(func=cmd_gen_dataset)

    p = sub.add_parser("train-lop", help="train the local objectness predictor")
    _add_common(p)
    p.add_argument("--dataset", required=True, help="dataset shard directory")
    p.add_argument("--out", required=True, help="output model file")
    p.add_argument("--alpha-fl", type=float, help="focal loss alpha (paper default 1)")
    p.add_argument("--gamma-fl", type=float, help="focal loss gamma (paper default 2)")
    p.add_argument("--lr", type=float, help="learning rate (default 1e-3)")
    p.add_argument("--batch-size", type=int, help="mini-batch size (default 64)")
    p.add_argument("--max-epochs", type=int, help="epoch cap (default 30)")
    p.add_argument("--optimizer", choices=["adam", "sgd"], help="optimizer (default adam)")
    p.set_defaults(func=cmd_train_lop)

    p = sub.add_parser("attack", help="inject forged objects into scenes")
    _add_common(p)
    p.add_argument("--scenes", required=True, help="input scene directory")
    p.add_argument("--out", required=True, help="output directory (scenes + traces)")
    p.add_argument("--method", choices=["physical", "random", "adaptive"],
                   help="attack method (default physical)")
    p.add_argument("--donor-scenes", help="scenes to harvest donors from (physical; default --scenes)")
    p.add_argument("--model", help="model file (adaptive attack target)")
    p.add_argument("--n-points", type=int, help="injection budget (default/maximum 200)")
    p.add_argument("--pgd-steps", type=int, help="PGD iterations (default 40)")
    p.add_argument("--pgd-step-size", type=float, help="PGD step in meters (default 0.05)")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("detect", help="run the victim-detector stub")
    _add_common(p)
    p.add_argument("--scenes", required=True)
    p.add_argument("--out", required=True, help="output detections directory")
    p.add_argument("--min-points", type=int, help="min cluster points (default 8)")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("defend", help="apply a defense, emitting post-defense detections")
    _add_common(p)
    p.add_argument("--scenes", required=True, help="scene directory (attacked clouds)")
    p.add_argument("--detections", help="input detections (lop/carlo/none)")
    p.add_argument("--model", help="model file (lop)")
    p.add_argument("--out", required=True, help="output detections directory")
    p.add_argument("--method", choices=["lop", "srs", "sor", "carlo-fsd", "carlo-lpd", "none"],
                   help="defense method (default lop)")
    p.add_argument("--B", dest="boundary", type=float,
                   help="vote-ratio boundary B (paper default 0.5)")
    p.add_argument("--beta", type=float, help="pillar IoU threshold (paper default 1e-3)")
    p.add_argument("--srs-m", type=int, help="SRS sample size (paper tables use 500)")
    p.add_argument("--sor-k", type=int, help="SOR neighbor count (paper tables use 2)")
    p.add_argument("--carlo-r", type=float, help="CARLO threshold R (paper tables use 0.7)")
    p.add_argument("--min-points", type=int, help="stub detector min cluster points")
    p.set_defaults(func=cmd_defend)

    p = sub.add_parser("track", help="run the MOT lifecycle over detections")
    _add_common(p)
    p.add_argument("--detections", required=True)
    p.add_argument("--out", required=True, help="output JSON-lines timeline")
    p.add_argument("--gate", type=float, help="association gate in meters (default 2)")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("eval", help="score detection arms against ground truth")
    _add_common(p)
    p.add_argument("--gt-scenes", required=True, help="clean scenes with ground truth")
    p.add_argument("--arm", action="append", default=[],
                   help="label=DETECTIONS_DIR; repeatable")
    p.add_argument("--traces", help="attack traces for ASR")
    p.add_argument("--c-conf", type=float, help="confidence threshold (paper default 0.5)")
    p.add_argument("--c-iou", type=float, help="IoU threshold (paper default 0.5)")
    p.add_argument("--out", required=True, help="report directory")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("analyze", help="depth-density profile and local-difference stats")
    _add_common(p)
    p.add_argument("--scenes", required=True)
    p.add_argument("--traces", help="attack traces (enables forged-object rows)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze)

    return parser


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    def override(section, **updates):
        updates = {k: v for k, v in updates.items() if v is not None}
        return dataclasses.replace(section, **updates) if updates else section

    get = lambda name: getattr(args, name, None)
    cfg = dataclasses.replace(
        cfg,
        seed=args.seed if get("seed") is not None else cfg.seed,
        threads=args.threads if get("threads") is not None else cfg.threads,
        t_iou=get("t_iou") if get("t_iou") is not None else cfg.t_iou,
        max_neg_ratio=get("max_neg_ratio") if get("max_neg_ratio") is not None else cfg.max_neg_ratio,
        synth=override(
            cfg.synth,
            ground_rate=get("ground_rate"),
            occlusion_prob=get("occlusion_prob"),
            n_cars_range=(
                (min(cfg.synth.n_cars_range[0], get("n_cars")), get("n_cars"))
                if get("n_cars") is not None
                else None
            ),
        ),
        train=override(
            cfg.train,
            m_pc=get("m_pc"),
            alpha_fl=get("alpha_fl"),
            gamma_fl=get("gamma_fl"),
            lr=get("lr"),
            batch_size=get("batch_size"),
            max_epochs=get("max_epochs"),
            optimizer=get("optimizer"),
            seed=get("seed"),
        ),
        defense=override(
            cfg.defense,
            method=get("method") if args.command == "defend" else None,
            boundary=get("boundary"),
            beta=get("beta"),
            srs_m=get("srs_m"),
            sor_k=get("sor_k"),
            carlo_r=get("carlo_r"),
        ),
        attack=override(
            cfg.attack,
            method=get("method") if args.command == "attack" else None,
            n_points=get("n_points"),
            pgd_steps=get("pgd_steps"),
            pgd_step_size=get("pgd_step_size"),
        ),
        metrics=override(cfg.metrics, c_conf=get("c_conf"), c_iou=get("c_iou")),
        detector=override(cfg.detector, min_points=get("min_points"), gate=get("gate")),
    )
    return cfg


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        cfg = _apply_overrides(cfg, args)
        return args.func(args, cfg)
    except PillarGuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
