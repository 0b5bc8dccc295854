"""What does the adaptive PGD attack achieve against the trained predictor?"""
import numpy as np

from pillarguard.attacks import adaptive_attack, build_donor_library, physical_attack, random_inject_attack, frontal_zone, mean_target_probability
from pillarguard.dataset import balance, generate
from pillarguard.eliminate import filter_detections
from pillarguard.detector import detect
from pillarguard.grid import GridSpec
from pillarguard.lop import TrainConfig, train
from pillarguard.metrics import asr
from pillarguard.synth import SynthConfig, gen_corpus

GRID = GridSpec()

train_scenes = gen_corpus(SynthConfig(occlusion_prob=0.0, depth_range=(5.0, 35.0),
                                      n_clutter_range=(18, 30),
                                      clutter_depth_range=(5.0, 40.0)), 150, seed=101)
eval_scenes = gen_corpus(SynthConfig(clutter_depth_range=(12.0, 45.0)), 30, seed=202)

rng = np.random.default_rng(7)
kept = balance(generate(train_scenes, GRID, 1024, 1e-6, rng), 1.5, rng)
model, _ = train(kept, TrainConfig(seed=11, max_epochs=60, patience=12, lr_step=15))
print("trained")

for steps in (0, 10, 40):
    ratios = []
    probs_after = []
    for scene in eval_scenes:
        srng = np.random.default_rng((13, scene.frame_id))
        zone = frontal_zone(np.random.default_rng((99, scene.frame_id)))
        attacked, trace = adaptive_attack(scene, model, GRID, 1e-3, 200, steps, 0.05,
                                          srng, zone=zone)
        probs_after.append(mean_target_probability(
            scene.cloud.arr, trace.injected_points, model, zone, GRID, 1e-3))
        dets = detect(attacked.cloud, GRID, 8)
        rep = filter_detections(dets, attacked.cloud, model, GRID, 1e-3, 0.6,
                                np.random.default_rng((15, scene.frame_id)))
        # vote ratio of the detection overlapping the zone, if any
        from pillarguard.geometry import footprint, iou_2d
        zfp = footprint(zone)
        for v in rep.verdicts:
            if iou_2d(footprint(v.detection.box), zfp) >= 0.3:
                ratios.append((v.ratio, v.eliminated))
    surv = [r for r, e in ratios if not e]
    print(f"steps={steps:3d}: mean target prob {np.mean(probs_after):.3f}, "
          f"matched dets {len(ratios)}, vote ratios "
          f"{np.percentile([r for r, _ in ratios], [25, 50, 75]).round(3) if ratios else 'n/a'}, "
          f"survivors {len(surv)}")
