"""Prototype of the acceptance end-to-end run; measures margins and timing."""
import time

import numpy as np

from pillarguard.attacks import adaptive_attack, build_donor_library, physical_attack
from pillarguard.config import RunConfig
from pillarguard.dataset import balance, generate
from pillarguard.defenses import carlo_lpd, sor, srs
from pillarguard.detector import detect
from pillarguard.eliminate import filter_detections
from pillarguard.grid import GridSpec
from pillarguard.lop import TrainConfig, train, predict
from pillarguard.metrics import asr, match, ap_11point
from pillarguard.synth import SynthConfig, gen_corpus

T0 = time.time()


def clock(msg):
    print(f"[{time.time() - T0:7.1f}s] {msg}", flush=True)


GRID = GridSpec()
C_CONF, C_IOU = 0.02, 0.3
MIN_POINTS = 8

train_cfg_synth = SynthConfig(occlusion_prob=0.0, depth_range=(5.0, 35.0), n_clutter_range=(18, 30), clutter_depth_range=(5.0, 40.0))
eval_cfg_synth = SynthConfig(clutter_depth_range=(12.0, 45.0))

clock("generating corpora")
train_scenes = gen_corpus(train_cfg_synth, 150, seed=101)
eval_scenes = gen_corpus(eval_cfg_synth, 200, seed=202)
clock(f"train pts/scene ~ {np.mean([len(s.cloud) for s in train_scenes]):.0f}, "
      f"eval ~ {np.mean([len(s.cloud) for s in eval_scenes]):.0f}")

clock("building dataset")
rng = np.random.default_rng(7)
samples = generate(train_scenes, GRID, 1024, 1e-6, rng)
kept = balance(samples, 1.5, rng)
n_pos = sum(s.label for s in kept)
clock(f"dataset: {len(samples)} -> {len(kept)} samples, {n_pos} positive")

clock("training")
model, history = train(kept, TrainConfig(seed=11, max_epochs=60, patience=12, lr_step=15))
print(f"  final epoch {history[-1].epoch}: loss {history[-1].train_loss:.5f} acc {history[-1].train_accuracy:.4f}")
clock(f"trained, {len(history)} epochs")

# held-out pillar accuracy on the eval corpus
clock("held-out accuracy")
rng2 = np.random.default_rng(8)
eval_samples = generate(eval_scenes[:30], GRID, 1024, 1e-6, rng2)
hits = sum(predict(model, s.features)[0] == s.label for s in eval_samples)
clock(f"held-out accuracy {hits / len(eval_samples):.4f} over {len(eval_samples)}")

clock("physical attacks")
donor_scenes = gen_corpus(SynthConfig(depth_range=(20.0, 45.0), occlusion_prob=0.0), 60, seed=303)
library = build_donor_library(donor_scenes)
clock(f"donor library: {len(library)} entries, counts "
      f"{np.percentile([len(e.points_local) for e in library.entries], [0, 25, 50, 75, 100])}")
attacked = []
traces = []
for scene in eval_scenes:
    a, t = physical_attack(scene, library, np.random.default_rng((5, scene.frame_id)))
    attacked.append(a)
    traces.append(t)

clock("detecting")
dets_raw = {s.frame_id: detect(s.cloud, GRID, MIN_POINTS) for s in attacked}
clock(f"avg dets/frame {np.mean([len(v) for v in dets_raw.values()]):.1f}")

arms = {"none": dets_raw}

clock("lop arms")
for b in (0.5, 0.6):
    out = {}
    for s in attacked:
        rep = filter_detections(dets_raw[s.frame_id], s.cloud, model, GRID, 1e-3, b,
                                np.random.default_rng((9, s.frame_id)))
        out[s.frame_id] = rep.kept
    arms[f"lop{b}"] = out
clock("srs arm")
arms["srs"] = {
    s.frame_id: detect(srs(s.cloud, 500, np.random.default_rng((11, s.frame_id))),
                       GRID, MIN_POINTS)
    for s in attacked
}
clock("sor arm")
arms["sor"] = {s.frame_id: detect(sor(s.cloud, 2, 1.1), GRID, MIN_POINTS) for s in attacked}
clock("lpd arm")
arms["lpd"] = {
    s.frame_id: [d for d in dets_raw[s.frame_id]
                 if not carlo_lpd(d, s.cloud, 0.7).flagged]
    for s in attacked
}

clock("forged pillar score introspection")
from pillarguard.grid import intersecting_pillars, partition, pillar_footprint
from pillarguard.features import augment, pillar_rng
fake_scores, real_scores = [], []
for s, t_ in zip(attacked[:40], traces[:40]):
    part = partition(s.cloud, GRID)
    for idx in intersecting_pillars(t_.target_box, GRID, 1e-3):
        if idx in part.pillars:
            f = augment(s.cloud.arr[part.pillars[idx]], pillar_footprint(idx, GRID), 1024,
                        pillar_rng(1, s.frame_id, idx.i, idx.j))
            fake_scores.append(predict(model, f)[0])
    for gt in s.ground_truth[:1]:
        for idx in intersecting_pillars(gt.box, GRID, 1e-3):
            if idx in part.pillars:
                f = augment(s.cloud.arr[part.pillars[idx]], pillar_footprint(idx, GRID), 1024,
                            pillar_rng(1, s.frame_id, idx.i, idx.j))
                real_scores.append(predict(model, f)[0])
print(f"  forged pillar vote-1 rate {np.mean(fake_scores):.3f} over {len(fake_scores)}")
print(f"  real-car pillar vote-1 rate {np.mean(real_scores):.3f} over {len(real_scores)}")

clock("metrics")
for label, dets in arms.items():
    tp = fp = fn = 0
    for s in eval_scenes:
        mr = match(dets[s.frame_id], s.ground_truth, C_CONF, C_IOU)
        tp, fp, fn = tp + mr.tp, fp + mr.fp, fn + mr.fn
    prec = tp / (tp + fp) if tp + fp else 1.0
    ap = ap_11point([dets[s.frame_id] for s in eval_scenes],
                    [s.ground_truth for s in eval_scenes], C_IOU)
    rate = asr(traces, dets, C_CONF, C_IOU)
    print(f"  {label:8s} precision {prec:.4f} AP {ap:.4f} ASR {rate:.4f} (tp {tp} fp {fp} fn {fn})")

clock("adaptive attack (50 scenes)")
adaptive_traces = []
adaptive_scenes = []
for scene in eval_scenes[:50]:
    a, t = adaptive_attack(scene, model, GRID, 1e-3, 200, 40, 0.05,
                           np.random.default_rng((13, scene.frame_id)))
    adaptive_scenes.append(a)
    adaptive_traces.append(t)
clock("adaptive detect + defend")
adet = {s.frame_id: detect(s.cloud, GRID, MIN_POINTS) for s in adaptive_scenes}
adef = {}
for s in adaptive_scenes:
    rep = filter_detections(adet[s.frame_id], s.cloud, model, GRID, 1e-3, 0.6,
                            np.random.default_rng((15, s.frame_id)))
    adef[s.frame_id] = rep.kept
asr_undef = asr(adaptive_traces, adet, C_CONF, C_IOU)
asr_def = asr(adaptive_traces, adef, C_CONF, C_IOU)
print(f"  adaptive ASR undefended {asr_undef:.4f}  lop(B=0.6) {asr_def:.4f} "
      f"ratio {asr_def / max(asr_undef, 1e-9):.3f}")

clock("depth-density forged-below-law check")
from pillarguard.metrics import depth_density_profile, fit_density_law

records = depth_density_profile(attacked, traces)
a_fit, b_fit = fit_density_law(
    [r for r in records if not r.is_forged]
)
forged = [r for r in records if r.is_forged and r.depth <= 10.0 + 2.0]
below = [r for r in forged if r.density < (a_fit / r.depth**b_fit) / 4.0]
print(f"  law fit a={a_fit:.1f} b={b_fit:.3f}; forged below law/4: "
      f"{len(below)}/{len(forged)} = {len(below) / len(forged):.3f}")
clock("done")
