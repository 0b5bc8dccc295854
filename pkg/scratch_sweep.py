"""Sweep training schedules: held-out accuracy vs forged-pillar rejection."""
import numpy as np

from pillarguard.attacks import build_donor_library, physical_attack
from pillarguard.dataset import balance, generate
from pillarguard.features import augment, pillar_rng
from pillarguard.grid import GridSpec, intersecting_pillars, partition, pillar_footprint
from pillarguard.lop import TrainConfig, predict, train
from pillarguard.synth import SynthConfig, gen_corpus

GRID = GridSpec()
TRAIN_SYNTH = SynthConfig(occlusion_prob=0.0, depth_range=(5.0, 35.0),
                          n_clutter_range=(18, 30), clutter_depth_range=(5.0, 40.0))
EVAL_SYNTH = SynthConfig(clutter_depth_range=(12.0, 45.0))
DONOR_SYNTH = SynthConfig(depth_range=(20.0, 45.0), occlusion_prob=0.0)

train_scenes = gen_corpus(TRAIN_SYNTH, 150, seed=101)
rng = np.random.default_rng(7)
dataset = balance(generate(train_scenes, GRID, 1024, 1e-6, rng), 1.5, rng)

held_out = gen_corpus(TRAIN_SYNTH, 15, seed=404)
ho_samples = generate(held_out, GRID, 1024, 1e-6, np.random.default_rng(8))

eval_scenes = gen_corpus(EVAL_SYNTH, 40, seed=202)
library = build_donor_library(gen_corpus(DONOR_SYNTH, 60, seed=303))


def assess(model):
    hits = sum(predict(model, s.features)[0] == s.label for s in ho_samples)
    acc = hits / len(ho_samples)
    votes = []
    for scene in eval_scenes:
        attacked, trace = physical_attack(scene, library, np.random.default_rng((5, scene.frame_id)))
        part = partition(attacked.cloud, GRID)
        for idx in intersecting_pillars(trace.target_box, GRID, 1e-3):
            if idx in part.pillars:
                f = augment(attacked.cloud.arr[part.pillars[idx]],
                            pillar_footprint(idx, GRID), 1024,
                            pillar_rng(1, scene.frame_id, idx.i, idx.j))
                votes.append(predict(model, f)[0])
    return acc, float(np.mean(votes))


for label, cfg in [
    ("default 60/12/15", TrainConfig(seed=11)),
    ("long 90/18/25", TrainConfig(seed=11, max_epochs=90, patience=18, lr_step=25)),
]:
    model, history = train(dataset, cfg)
    acc, fv = assess(model)
    print(f"{label}: epochs {history[-1].epoch}, best val {min(h.val_loss for h in history):.5f}, "
          f"held-out acc {acc:.4f}, forged vote {fv:.3f}", flush=True)

# error census for the default model
model, _ = train(dataset, TrainConfig(seed=11))
errs = {"pos_sliver": 0, "pos_dense": 0, "neg": 0}
tot = {"pos_sliver": 0, "pos_dense": 0, "neg": 0}
for s in ho_samples:
    pred = predict(model, s.features)[0]
    if s.label == 1:
        kind = "pos_sliver" if s.features.valid_count <= 25 else "pos_dense"
    else:
        kind = "neg"
    tot[kind] += 1
    errs[kind] += int(pred != s.label)
for k in tot:
    print(f"  {k}: {errs[k]}/{tot[k]} errors ({errs[k] / max(tot[k], 1):.3f})")
