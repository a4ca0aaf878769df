"""End-to-end walkthrough: synthesize, filter, train, and drive a gripper.

Runs entirely in-process (no CLI) so each stage's intermediate values can be
printed. Takes ~20 s with the scaled-down model settings below.

    python3 demos/01_pipeline_walkthrough.py
"""

import json
import tempfile
from pathlib import Path

import numpy as np

from emg_teleop import harness, synth
from emg_teleop import subspace as ss

work = Path(tempfile.mkdtemp(prefix="teleop-demo-"))
print(f"working directory: {work}\n")

# --- 1. two seeded sessions: one to train on, one held out -----------------
train_spec = synth.SessionSpec(duration_s=60.0, gesture_interval_s=10.0, seed=0)
test_spec = synth.SessionSpec(duration_s=30.0, gesture_interval_s=10.0, seed=1)
for name, spec in [("train", train_spec), ("test", test_spec)]:
    session = synth.generate_session(spec)
    synth.save_session(session, work / f"{name}.csv")
    counts = {label: session.labels.count(label) for label in session.label_set}
    print(f"{name}: {len(session)} samples, label counts {counts}")

# --- 2. filtering turns raw EMG into smooth activation envelopes -----------
cfg = harness.load_config(None, {
    "train_session": str(work / "train.csv"),
    "test_sessions": [str(work / "test.csv")],
    "out_dir": str(work / "out"),
    "method": 1,
    "models": {"regressor_subsample": 600, "classifier_subsample": 2000,
               "svm_subsample": 600},
})
session = synth.load_session(cfg["train_session"])
feats = harness.filtered_features(session, cfg["filter"])
print(f"\nraw EMG channel 0:      mean {session.emg[:, 0].mean():.3f}, "
      f"std {session.emg[:, 0].std():.3f}")
print(f"filtered envelope 0:    mean {feats[:, 0].mean():.3f}, "
      f"std {feats[:, 0].std():.3f}  (smoother, non-negative)")

# --- 3. train the hybrid controller's models -------------------------------
print("\ntraining method 1 (three regressors + two classifiers)...")
art = harness.train_method(cfg)
print(f"  KRR picked lambda={art.regressors['KRR'].ridge_lambda}, "
      f"gamma={art.regressors['KRR'].kernel_gamma}")

# --- 4. held-out evaluation ------------------------------------------------
report = harness.evaluate(cfg, art)
print()
print(report.render())

# --- 5. stream the held-out session onto a 9-joint gripper -----------------
test_session = synth.load_session(str(work / "test.csv"))
points = harness.run_trajectory(cfg, art, test_session)
stats = harness.trajectory_stats(points)
gripper = ss.bundled_hand_map("gripper-9")
print(f"trajectory on {gripper.name}: {stats['n_samples']} samples, "
      f"sigma variance {stats['sigma_variance']:.4f}, "
      f"{stats['stall_count']} stalled samples")
modes = {m: 0 for m in ("Regressing", "Spreading", "Closing")}
for p in points:
    modes[p.mode] += 1
print(f"mode occupancy: {modes}")
psi_mid = points[len(points) // 2].psi
q_mid = points[len(points) // 2].q
print(f"halfway pose: psi={np.round(psi_mid, 3)} -> "
      f"{q_mid.shape[0]} gripper joints {np.round(q_mid, 3)}")
