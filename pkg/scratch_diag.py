"""Diagnose what separates forged pillars from real/sliver/clutter pillars."""
import numpy as np

from pillarguard.attacks import build_donor_library, physical_attack
from pillarguard.dataset import balance, generate, label_pillar
from pillarguard.features import augment, pillar_rng
from pillarguard.grid import GridSpec, intersecting_pillars, partition, pillar_footprint
from pillarguard.lop import TrainConfig, predict, train
from pillarguard.geometry import footprint, iou_2d, points_in_box_mask, depth
from pillarguard.synth import SynthConfig, gen_corpus

GRID = GridSpec()

train_scenes = gen_corpus(SynthConfig(occlusion_prob=0.0, depth_range=(5.0, 35.0),
                                      n_clutter_range=(18, 30),
                                      clutter_depth_range=(5.0, 40.0)), 100, seed=101)
eval_scenes = gen_corpus(SynthConfig(clutter_depth_range=(12.0, 45.0)), 60, seed=202)

rng = np.random.default_rng(7)
samples = generate(train_scenes, GRID, 1024, 1e-6, rng)
kept = balance(samples, 1.5, rng)

# Training-sample census: positive pillar counts at near depth
pos_counts_near, pos_counts_all, neg_counts_near = [], [], []
for s in kept:
    dep = s.features.valid[:, 6].mean()
    n = s.features.valid_count
    if s.label == 1:
        pos_counts_all.append(n)
        if dep <= 12:
            pos_counts_near.append(n)
    elif dep <= 12:
        neg_counts_near.append(n)
print(f"positives: {len(pos_counts_all)}; near(<=12m): {len(pos_counts_near)}")
print(f"  near-positive count percentiles: {np.percentile(pos_counts_near, [5, 25, 50, 75, 95])}")
print(f"  near-positive sliver fraction (count<=25): "
      f"{np.mean(np.array(pos_counts_near) <= 25):.3f}")
print(f"near-negatives: {len(neg_counts_near)}, count pct: "
      f"{np.percentile(neg_counts_near, [5, 25, 50, 75, 95]) if neg_counts_near else 'n/a'}")

model, history = train(kept, TrainConfig(seed=11, max_epochs=60, patience=12, lr_step=15))
print(f"trained {len(history)} epochs, final acc {history[-1].train_accuracy:.4f}")

donor_scenes = gen_corpus(SynthConfig(depth_range=(17.0, 40.0), occlusion_prob=0.0), 40, seed=303)
library = build_donor_library(donor_scenes)

rows = []  # (kind, count, dep, vote)
for scene in eval_scenes[:40]:
    attacked, trace = physical_attack(scene, library, np.random.default_rng((5, scene.frame_id)))
    part = partition(attacked.cloud, GRID)

    def vote(idx):
        f = augment(attacked.cloud.arr[part.pillars[idx]], pillar_footprint(idx, GRID),
                    1024, pillar_rng(1, scene.frame_id, idx.i, idx.j))
        return predict(model, f), f.valid_count, float(f.valid[:, 6].mean())

    for idx in intersecting_pillars(trace.target_box, GRID, 1e-3):
        if idx in part.pillars:
            (s01, _), n, dep = vote(idx)
            rows.append(("forged", n, dep, s01))
    for k, gt in enumerate(scene.ground_truth):
        d = depth(gt.box.center)
        for idx in intersecting_pillars(gt.box, GRID, 1e-3):
            if idx in part.pillars:
                (s01, _), n, dep = vote(idx)
                kind = "car_dense" if n > 25 else "car_sliver"
                rows.append((kind, n, dep, s01))

import collections
by_kind = collections.defaultdict(list)
for kind, n, dep, s01 in rows:
    by_kind[kind].append((n, dep, s01))
for kind, data in sorted(by_kind.items()):
    arr = np.array(data)
    print(f"{kind:10s} n={len(arr):4d} vote1={arr[:, 2].mean():.3f} "
          f"count pct {np.percentile(arr[:, 0], [25, 50, 75])} "
          f"dep pct {np.percentile(arr[:, 1], [25, 50, 75])}")

# Oracle: count-vs-depth rule on forged pillars
forged = np.array(by_kind["forged"])
oracle_reject = forged[:, 0] < 0.35 * 50000 / forged[:, 1] ** 2 / 8
print(f"forged pillars rejected by count-at-depth oracle: {oracle_reject.mean():.3f}")
dense = np.array(by_kind["car_dense"])
oracle_keep = dense[:, 0] >= 0.35 * 50000 / dense[:, 1] ** 2 / 8
print(f"dense car pillars kept by oracle: {oracle_keep.mean():.3f}")

# Forged pillar vote as function of count
for lo, hi in [(0, 5), (5, 10), (10, 20), (20, 40), (40, 1000)]:
    sel = forged[(forged[:, 0] >= lo) & (forged[:, 0] < hi)]
    if len(sel):
        print(f"  forged count [{lo:3d},{hi:4d}): n={len(sel):4d} vote1={sel[:, 2].mean():.3f}")
