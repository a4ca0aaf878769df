"""Experiment driver: training protocols, evaluation, and report building.

Implements the benchmark flow behind the `teleop` CLI: synthesize or load
sessions, train the per-method models, evaluate them on held-out sessions,
and emit a comparison report shaped like the regressor/classifier table
(3 regressors x 2 axes, 2 classifiers).

Training protocol notes:
  * Method 1 regressors train only on samples where no gesture is active;
    the gesture classifier trains on everything.
  * Method 2 ignores gesture labels and regresses PCA coefficients of the
    ground-truth joint angles.
  * Method 4 trains a pose classifier on pose-labeled windows and derives
    per-pose force calibration from envelope percentiles.
Training sets are subsampled with a deterministic even stride to keep
kernel solves and forest fits at desk scale.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from emg_teleop import models as md
from emg_teleop import signal as sig
from emg_teleop import subspace as ss
from emg_teleop import synth
from emg_teleop.controllers import (
    CONTRACT,
    NORMAL,
    SPREAD,
    WRIST_SEGMENTS,
    ForceCalibration,
    Method1Config,
    Method2Controller,
    PoseTemplates,
    TrajectoryPoint,
    method3_variance_analysis,
    run_method1,
    run_method2,
    run_method4,
)

log = logging.getLogger("teleop")

DEFAULT_POSE_TEMPLATES = PoseTemplates(
    open_pose={
        "Power": (0.2, 0.9, 0.1),
        "Precision": (0.5, 0.5, 0.2),
        "Pinch": (0.8, 0.2, 0.2),
    },
    closed_pose={
        "Power": (0.2, 0.9, 0.9),
        "Precision": (0.5, 0.5, 0.8),
        "Pinch": (0.8, 0.2, 0.7),
    },
)

DEFAULT_CONFIG = {
    "method": 1,
    "train_session": "",
    "test_sessions": [],
    "human_map": "",
    "robot_map": "",
    "out_dir": "out",
    "seed": 0,
    "filter": {
        "lowpass_window_s": 0.5,
        "lowpass_cutoff_hz": 200.0,
        "rectify": True,
        "median_window_s": 0.2,
    },
    "rates": {
        "delta_per_s": 0.25,
        "gamma_per_s": 0.40,
        "refractory_s": 0.3,
        "stall_window": 5,
    },
    "models": {
        "cv_folds": 5,
        "lambda_grid": [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0],
        "gamma_grid": [1e-3, 1e-2, 1e-1, 1.0, 10.0],
        "n_trees": 30,
        "max_depth": 10,
        "nmf_components": 4,
        "nmf_iterations": 500,
        "latent_dim": 4,
        "svm_c_grid": [1.0, 10.0],
        "svm_gamma_grid": [0.1, 1.0],
        "svm_cv_folds": 3,
        "regressor_subsample": 1200,
        "classifier_subsample": 4000,
        "svm_subsample": 1200,
        "pca_variance_threshold": 0.9,
    },
    "wrist": {
        "channels": dict(synth.WRIST_CHANNELS),
        "variance_threshold": 10.0,
    },
}


class HarnessError(RuntimeError):
    """User-facing failure with a one-line message."""


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path: str | None, overrides: dict | None = None) -> dict:
    cfg = DEFAULT_CONFIG
    if path:
        try:
            with open(path) as f:
                user = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise HarnessError(f"cannot read config {path}: {e}") from e
        cfg = _deep_merge(cfg, user)
    if overrides:
        cfg = _deep_merge(cfg, {k: v for k, v in overrides.items() if v is not None})
    return cfg


def config_hash(cfg: dict) -> str:
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def _resolve_map(path: str, bundled_default: str = "human-hand-15") -> ss.HandMap:
    if path:
        return ss.load_hand_map(path)
    return ss.bundled_hand_map(bundled_default)


def filtered_features(session: synth.Session, fcfg: dict) -> np.ndarray:
    """Rectify + trailing moving average, vectorized over the whole session."""
    cfg = sig.FilterConfig(
        sample_rate_hz=session.sample_rate_hz,
        lowpass_window_s=fcfg["lowpass_window_s"],
        lowpass_cutoff_hz=fcfg["lowpass_cutoff_hz"],
        rectify=fcfg["rectify"],
        median_window_s=fcfg["median_window_s"],
    )
    sig.check_uniform(session.times, cfg.sample_rate_hz)
    emg = np.abs(session.emg) if cfg.rectify else session.emg
    return sig.moving_average(emg, cfg.lowpass_window_samples)


def _stride_subsample(idx: np.ndarray, cap: int) -> np.ndarray:
    if idx.size <= cap:
        return idx
    stride = int(np.ceil(idx.size / cap))
    return idx[::stride]


def _windows(features, targets=None, labels=None):
    out = []
    for i in range(features.shape[0]):
        out.append(
            md.LabeledWindow(
                features=features[i],
                target=None if targets is None else targets[i],
                gesture=None if labels is None else labels[i],
            )
        )
    return out


@dataclass
class TrainedArtifacts:
    """Everything cli_train writes for one method."""

    method: int
    regressors: dict = field(default_factory=dict)  # name -> model
    classifiers: dict = field(default_factory=dict)  # name -> model
    pca: ss.PcaSubspace | None = None
    coeff_scale: np.ndarray | None = None  # method 2: PCA coefficient normalization
    force_calibration: ForceCalibration | None = None


def train_method(cfg: dict) -> TrainedArtifacts:
    method = int(cfg["method"])
    if method not in (1, 2, 4):
        raise HarnessError(f"training applies to methods 1, 2, 4; got {method} "
                           "(method 3 is calibration-only, see analyze-wrist)")
    session = synth.load_session(cfg["train_session"])
    feats = filtered_features(session, cfg["filter"])
    mcfg = cfg["models"]
    seed = int(cfg["seed"])
    human_map = _resolve_map(cfg["human_map"])

    art = TrainedArtifacts(method=method)
    if method == 1:
        if session.joints is None:
            raise HarnessError("method 1 training needs ground-truth joints in the session")
        if session.labels is None:
            raise HarnessError("method 1 training needs gesture labels in the session")
        psi = ss.project_from_joints_batch(session.joints, human_map)
        targets = psi[:, 1:3]  # sigma, epsilon
        labels = np.asarray(session.labels, dtype=object)
        normal_idx = np.nonzero(labels == NORMAL)[0]
        reg_idx = _stride_subsample(normal_idx, mcfg["regressor_subsample"])
        reg_data = _windows(feats[reg_idx], targets=targets[reg_idx])
        art.regressors["KRR"] = md.train_krr(
            reg_data, cv_folds=mcfg["cv_folds"],
            lambda_grid=mcfg["lambda_grid"], gamma_grid=mcfg["gamma_grid"],
        )
        art.regressors["NMF+LR"] = md.train_nmf_lr(
            reg_data, n_components=mcfg["nmf_components"],
            n_iter=mcfg["nmf_iterations"], seed=seed,
        )
        art.regressors["LS"] = md.train_latent_space(reg_data, latent_dim=mcfg["latent_dim"])
        cls_idx = _stride_subsample(np.arange(len(session)), mcfg["classifier_subsample"])
        cls_data = _windows(feats[cls_idx], labels=labels[cls_idx])
        art.classifiers["RF"] = md.train_forest(
            cls_data, n_trees=mcfg["n_trees"], max_depth=mcfg["max_depth"], seed=seed,
        )
        svm_idx = _stride_subsample(np.arange(len(session)), mcfg["svm_subsample"])
        art.classifiers["SVM"] = md.train_svm(
            _windows(feats[svm_idx], labels=labels[svm_idx]),
            c_grid=mcfg["svm_c_grid"], gamma_grid=mcfg["svm_gamma_grid"],
            cv_folds=mcfg["svm_cv_folds"],
        )
    elif method == 2:
        if session.joints is None:
            raise HarnessError("method 2 training needs ground-truth joints in the session")
        # gesture labels are ignored entirely for this method
        art.pca = ss.fit_pca_subspace(session.joints, mcfg["pca_variance_threshold"])
        coeffs = ss.pca_project(session.joints, art.pca)
        names = tuple(f"basis{i + 1}" for i in range(art.pca.k))
        idx = _stride_subsample(np.arange(len(session)), mcfg["regressor_subsample"])
        scale = np.max(np.abs(coeffs), axis=0)
        scale = np.where(scale > 0, scale, 1.0)
        # LabeledWindow targets live in [0,1]; rescale coefficients into it
        norm = (coeffs / scale + 1.0) / 2.0
        reg_data = _windows(feats[idx], targets=norm[idx])
        art.regressors["KRR"] = md.train_krr(
            reg_data, cv_folds=mcfg["cv_folds"],
            lambda_grid=mcfg["lambda_grid"], gamma_grid=mcfg["gamma_grid"],
            output_names=names,
        )
        art.regressors["NMF+LR"] = md.train_nmf_lr(
            reg_data, n_components=mcfg["nmf_components"],
            n_iter=mcfg["nmf_iterations"], seed=seed, output_names=names,
        )
        art.regressors["LS"] = md.train_latent_space(
            reg_data, latent_dim=mcfg["latent_dim"], output_names=names,
        )
        art.coeff_scale = scale
    else:  # method 4
        if session.labels is None:
            raise HarnessError("method 4 training needs pose labels in the session")
        labels = np.asarray(session.labels, dtype=object)
        pose_idx = np.nonzero(labels != None)[0]  # noqa: E711
        if pose_idx.size == 0:
            raise HarnessError("method 4 training needs pose labels in the session")
        cls_idx = _stride_subsample(pose_idx, mcfg["classifier_subsample"])
        art.classifiers["RF"] = md.train_forest(
            _windows(feats[cls_idx], labels=labels[cls_idx]),
            n_trees=mcfg["n_trees"], max_depth=mcfg["max_depth"], seed=seed,
        )
        svm_idx = _stride_subsample(pose_idx, mcfg["svm_subsample"])
        art.classifiers["SVM"] = md.train_svm(
            _windows(feats[svm_idx], labels=labels[svm_idx]),
            c_grid=mcfg["svm_c_grid"], gamma_grid=mcfg["svm_gamma_grid"],
            cv_folds=mcfg["svm_cv_folds"],
        )
        force = feats.mean(axis=1)
        f_min, f_max = {}, {}
        for g in sorted(set(labels[pose_idx])):
            vals = force[labels == g]
            f_min[g] = float(np.percentile(vals, 5))
            f_max[g] = float(np.percentile(vals, 95))
            if f_max[g] <= f_min[g]:
                f_max[g] = f_min[g] + 1e-6
        art.force_calibration = ForceCalibration(f_min=f_min, f_max=f_max)
    return art


def save_artifacts(art: TrainedArtifacts, out_dir: str, cfg_hash: str) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def _write(name, doc):
        doc["config_hash"] = cfg_hash
        path = os.path.join(out_dir, name)
        with open(path, "w") as f:
            json.dump(doc, f)
            f.write("\n")
        written.append(path)

    prefix = f"method{art.method}"
    for name, model in art.regressors.items():
        safe = name.lower().replace("+", "_")
        _write(f"{prefix}_{safe}.json", md.model_to_doc(model))
    for name, model in art.classifiers.items():
        _write(f"{prefix}_{name.lower()}.json", md.model_to_doc(model))
    if art.pca is not None:
        _write(
            f"{prefix}_pca.json",
            {
                "kind": "pca",
                "mean": art.pca.mean.tolist(),
                "components": art.pca.components.tolist(),
                "explained_variance": art.pca.explained_variance.tolist(),
                "variance_fraction_retained": art.pca.variance_fraction_retained,
                "coeff_scale": (art.coeff_scale if art.coeff_scale is not None else np.ones(art.pca.k)).tolist(),
            },
        )
    if art.force_calibration is not None:
        _write(
            f"{prefix}_force_calibration.json",
            {"kind": "force_calibration",
             "f_min": art.force_calibration.f_min,
             "f_max": art.force_calibration.f_max},
        )
    return written


def load_artifacts(out_dir: str, method: int) -> TrainedArtifacts:
    art = TrainedArtifacts(method=method)
    prefix = f"method{method}"
    mapping = {
        "krr": ("regressors", "KRR"),
        "nmf_lr": ("regressors", "NMF+LR"),
        "ls": ("regressors", "LS"),
        "rf": ("classifiers", "RF"),
        "svm": ("classifiers", "SVM"),
    }
    for stem, (bucket, name) in mapping.items():
        path = os.path.join(out_dir, f"{prefix}_{stem}.json")
        if os.path.exists(path):
            getattr(art, bucket)[name] = md.load_model(path)
    pca_path = os.path.join(out_dir, f"{prefix}_pca.json")
    if os.path.exists(pca_path):
        with open(pca_path) as f:
            doc = json.load(f)
        art.pca = ss.PcaSubspace(
            mean=np.array(doc["mean"]),
            components=np.array(doc["components"]),
            explained_variance=np.array(doc["explained_variance"]),
            variance_fraction_retained=doc["variance_fraction_retained"],
        )
        art.coeff_scale = np.array(doc["coeff_scale"])
    fc_path = os.path.join(out_dir, f"{prefix}_force_calibration.json")
    if os.path.exists(fc_path):
        with open(fc_path) as f:
            doc = json.load(f)
        art.force_calibration = ForceCalibration(f_min=doc["f_min"], f_max=doc["f_max"])
    if not art.regressors and not art.classifiers:
        raise HarnessError(f"no trained method-{method} artifacts in {out_dir}")
    return art


# ---------------------------------------------------------------------------
# Evaluation


@dataclass
class ComparisonReport:
    """Table-shaped evaluation summary averaged over the test sessions."""

    method: int
    output_names: tuple
    regressor_nrmse: dict  # model -> axis -> list of per-session percentages
    classifier_accuracy: dict  # model -> list of per-session percentages
    n_sessions: int

    def means(self) -> dict:
        out = {"regressors": {}, "classifiers": {}}
        for model, axes in self.regressor_nrmse.items():
            out["regressors"][model] = {
                axis: float(np.mean(vals)) for axis, vals in axes.items()
            }
        for model, vals in self.classifier_accuracy.items():
            out["classifiers"][model] = float(np.mean(vals))
        return out

    def render(self) -> str:
        means = self.means()
        lines = [f"Method {self.method} evaluation over {self.n_sessions} test session(s)"]
        if means["regressors"]:
            header = "Regressor  " + "  ".join(f"{a:>10}" for a in self.output_names)
            lines += ["", "nRMSE (% of ground-truth range)", header, "-" * len(header)]
            for model in ("KRR", "NMF+LR", "LS"):
                if model not in means["regressors"]:
                    continue
                cells = "  ".join(
                    f"{means['regressors'][model][a]:>9.1f}%" for a in self.output_names
                )
                lines.append(f"{model:<11}{cells}")
        if means["classifiers"]:
            lines += ["", "Classifier accuracy (%)", "Classifier   Accuracy", "-" * 21]
            for model in ("SVM", "RF"):
                if model in means["classifiers"]:
                    lines.append(f"{model:<11}{means['classifiers'][model]:>9.1f}%")
        return "\n".join(lines) + "\n"

    def to_doc(self) -> dict:
        return {
            "method": self.method,
            "output_names": list(self.output_names),
            "regressor_nrmse_per_session": self.regressor_nrmse,
            "classifier_accuracy_per_session": self.classifier_accuracy,
            "means": self.means(),
            "n_sessions": self.n_sessions,
        }


def _method_truth(session: synth.Session, art: TrainedArtifacts, cfg: dict,
                  human_map: ss.HandMap):
    """(targets, output_names, eval_mask) for regressor evaluation."""
    if session.joints is None:
        raise HarnessError("evaluation session lacks ground-truth joints")
    labels = np.asarray(session.labels, dtype=object) if session.labels else None
    if art.method == 1:
        psi = ss.project_from_joints_batch(session.joints, human_map)
        targets = psi[:, 1:3]
        names = ("sigma", "epsilon")
        mask = labels == NORMAL if labels is not None else np.ones(len(session), bool)
    else:
        coeffs = ss.pca_project(session.joints, art.pca)
        scale = art.coeff_scale if art.coeff_scale is not None else np.ones(art.pca.k)
        targets = (coeffs / scale + 1.0) / 2.0
        names = tuple(f"basis{i + 1}" for i in range(art.pca.k))
        mask = np.ones(len(session), bool)
    return targets, names, mask


def evaluate(cfg: dict, art: TrainedArtifacts) -> ComparisonReport:
    test_paths = cfg["test_sessions"]
    if not test_paths:
        raise HarnessError("no test sessions configured")
    human_map = _resolve_map(cfg["human_map"])
    reg_nrmse: dict = {name: {} for name in art.regressors}
    cls_acc: dict = {name: [] for name in art.classifiers}
    names: tuple = ()
    for path in test_paths:
        session = synth.load_session(path)
        feats = filtered_features(session, cfg["filter"])
        if art.regressors:
            targets, names, mask = _method_truth(session, art, cfg, human_map)
            for model_name, model in art.regressors.items():
                pred = model.predict(feats[mask])
                for j, axis in enumerate(names):
                    reg_nrmse[model_name].setdefault(axis, []).append(
                        md.nrmse(targets[mask][:, j], pred[:, j])
                    )
        if art.classifiers:
            if session.labels is None:
                raise HarnessError(f"test session {path} lacks labels for classifier evaluation")
            labels = np.asarray(session.labels, dtype=object)
            mask = labels != None  # noqa: E711
            for model_name, model in art.classifiers.items():
                pred = model.predict(feats[mask])
                report = md.classification_report(labels[mask], pred,
                                                  class_labels=model.class_labels)
                cls_acc[model_name].append(report.global_accuracy)
    if not names and art.method == 1:
        names = ("sigma", "epsilon")
    return ComparisonReport(
        method=art.method,
        output_names=names,
        regressor_nrmse=reg_nrmse,
        classifier_accuracy=cls_acc,
        n_sessions=len(test_paths),
    )


# ---------------------------------------------------------------------------
# Controller runs


def run_trajectory(cfg: dict, art: TrainedArtifacts, session: synth.Session) -> list[TrajectoryPoint]:
    feats = filtered_features(session, cfg["filter"])
    dt = 1.0 / session.sample_rate_hz
    robot_map = _resolve_map(cfg["robot_map"], bundled_default="gripper-9")
    rcfg = cfg["rates"]
    median_samples = max(1, int(round(cfg["filter"]["median_window_s"] * session.sample_rate_hz)))
    if art.method == 1:
        m1cfg = Method1Config(
            delta_per_s=rcfg["delta_per_s"],
            gamma_per_s=rcfg["gamma_per_s"],
            refractory_s=rcfg["refractory_s"],
            stall_window=rcfg["stall_window"],
            median_window_samples=median_samples,
        )
        return run_method1(
            session.times, feats, dt,
            art.classifiers["RF"], art.regressors["KRR"], robot_map, m1cfg,
        )
    if art.method == 2:
        human_map = _resolve_map(cfg["human_map"])
        scale = art.coeff_scale if art.coeff_scale is not None else np.ones(art.pca.k)
        krr = art.regressors["KRR"]

        class _Denorm:
            def predict(self, x):
                return (krr.predict(x) * 2.0 - 1.0) * scale

        controller = Method2Controller(
            _Denorm(), art.pca, human_map, robot_map,
            median_window_samples=median_samples,
        )
        return run_method2(session.times, feats, controller)
    if art.method == 4:
        return run_method4(
            session.times, feats, art.classifiers["RF"],
            art.force_calibration, DEFAULT_POSE_TEMPLATES, robot_map,
        )
    raise HarnessError(f"run supports methods 1, 2, 4; got {art.method}")


def write_trajectory(points: list[TrajectoryPoint], path: str, cfg_hash: str) -> None:
    n_joints = points[0].q.shape[0] if points else 0
    with open(path, "w") as f:
        f.write("# teleop-trajectory v1\n")
        f.write(f"# config_hash={cfg_hash}\n")
        joint_cols = ",".join(f"q{i + 1}" for i in range(n_joints))
        f.write(f"t,label,alpha,sigma,epsilon,{joint_cols},mode,clamped,stalled\n")
        for p in points:
            q = ",".join(repr(float(v)) for v in p.q)
            f.write(
                f"{p.t!r},{p.label},{p.psi[0]!r},{p.psi[1]!r},{p.psi[2]!r},"
                f"{q},{p.mode},{int(p.clamped)},{int(p.stalled)}\n"
            )


def trajectory_stats(points: list[TrajectoryPoint]) -> dict:
    sigmas = np.array([p.psi[1] for p in points])
    return {
        "n_samples": len(points),
        "sigma_variance": float(np.var(sigmas)) if len(points) else 0.0,
        "clamp_count": int(sum(p.clamped for p in points)),
        "stall_count": int(sum(p.stalled for p in points)),
    }


# ---------------------------------------------------------------------------
# Wrist analysis (Method 3)


def analyze_wrist(cfg: dict, session: synth.Session):
    """Filter the session, trim filter-settling samples, compare variances."""
    feats = filtered_features(session, cfg["filter"])
    if session.labels is None:
        raise HarnessError("wrist analysis needs segment labels (rest/flex_extend/abduct_adduct)")
    labels = np.asarray(session.labels, dtype=object)
    missing = [s for s in WRIST_SEGMENTS if not np.any(labels == s)]
    if missing:
        raise HarnessError(f"wrist session lacks segments: {missing}")
    fcfg = sig.FilterConfig(
        sample_rate_hz=session.sample_rate_hz,
        lowpass_window_s=cfg["filter"]["lowpass_window_s"],
    )
    settle = fcfg.lowpass_window_samples
    keep = np.ones(len(labels), dtype=bool)
    for i in range(1, len(labels)):
        if labels[i] != labels[i - 1]:
            keep[i : i + settle] = False
    keep[:settle] = False  # initial warm-up
    channels = cfg["wrist"]["channels"]
    env = {role: feats[keep, idx] for role, idx in channels.items()}
    calib = {role: float(np.max(feats[:, idx])) for role, idx in channels.items()}
    return method3_variance_analysis(
        labels[keep], env, calib, threshold=cfg["wrist"]["variance_threshold"]
    )


def render_wrist_analysis(analysis) -> str:
    lines = ["Wrist-axis variance analysis", ""]
    header = f"{'axis':<6}" + "".join(f"{s:>16}" for s in WRIST_SEGMENTS)
    lines += [header, "-" * len(header)]
    for axis in ("C1", "C2"):
        row = f"{axis:<6}" + "".join(
            f"{analysis.variances[axis][s]:>16.6g}" for s in WRIST_SEGMENTS
        )
        lines.append(row)
    lines.append("")
    for axis in ("C1", "C2"):
        verdict = (
            "axis responds to expected motion"
            if analysis.verdicts[axis]
            else "axis does NOT respond to expected motion"
        )
        lines.append(
            f"{axis}: gesture/rest variance ratio = {analysis.ratios[axis]:.3g} "
            f"(threshold {analysis.threshold:g}) -> {verdict}"
        )
    return "\n".join(lines) + "\n"
