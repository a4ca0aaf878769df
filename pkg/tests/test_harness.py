import json
import os

import numpy as np
import pytest

from emg_teleop import cli, harness
from emg_teleop import models as md
from emg_teleop import subspace as ss
from emg_teleop import synth
from emg_teleop.controllers import NORMAL
from emg_teleop.harness import (
    ComparisonReport,
    HarnessError,
    TrainedArtifacts,
    analyze_wrist,
    config_hash,
    evaluate,
    filtered_features,
    load_artifacts,
    load_config,
    render_wrist_analysis,
    run_trajectory,
    save_artifacts,
    train_method,
    trajectory_stats,
    write_trajectory,
)
from emg_teleop.signal import moving_average

TINY_MODELS = {
    "cv_folds": 2,
    "lambda_grid": [1e-2, 1.0],
    "gamma_grid": [0.1, 1.0],
    "n_trees": 5,
    "max_depth": 6,
    "nmf_components": 3,
    "nmf_iterations": 100,
    "latent_dim": 3,
    "svm_c_grid": [1.0],
    "svm_gamma_grid": [0.1],
    "svm_cv_folds": 2,
    "regressor_subsample": 300,
    "classifier_subsample": 800,
    "svm_subsample": 300,
    "pca_variance_threshold": 0.9,
}


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Sessions, a small config, and trained artifacts for methods 1, 2, 4."""
    root = tmp_path_factory.mktemp("ws")
    train = root / "train.csv"
    test = root / "test.csv"
    pose = root / "pose.csv"
    wrist = root / "wrist.csv"
    synth.save_session(
        synth.generate_session(synth.SessionSpec(duration_s=30.0, gesture_interval_s=6.0, seed=0)),
        train)
    synth.save_session(
        synth.generate_session(synth.SessionSpec(duration_s=20.0, gesture_interval_s=6.0, seed=1)),
        test)
    synth.save_session(
        synth.generate_session(synth.SessionSpec(duration_s=40.0, gesture_interval_s=4.0,
                                                 label_scheme=synth.POSE_SCHEME, seed=2)),
        pose)
    synth.save_session(
        synth.generate_session(synth.SessionSpec(duration_s=60.0, gesture_interval_s=15.0,
                                                 label_scheme=synth.WRIST_SCHEME,
                                                 noise_std=0.0, seed=5)),
        wrist)
    out = root / "out"
    cfg_path = root / "cfg.json"
    cfg_path.write_text(json.dumps({
        "train_session": str(train),
        "test_sessions": [str(test)],
        "out_dir": str(out),
        "models": TINY_MODELS,
    }))
    cfg4_path = root / "cfg4.json"
    cfg4_path.write_text(json.dumps({
        "train_session": str(pose),
        "test_sessions": [str(pose)],
        "out_dir": str(out),
        "models": TINY_MODELS,
    }))
    for method, cpath in [(1, cfg_path), (2, cfg_path), (4, cfg4_path)]:
        assert cli.main(["train", "--config", str(cpath), "--method", str(method)]) == 0
    return {
        "root": root, "train": train, "test": test, "pose": pose, "wrist": wrist,
        "out": out, "cfg_path": cfg_path, "cfg4_path": cfg4_path,
        "cfg": load_config(str(cfg_path)), "cfg4": load_config(str(cfg4_path)),
    }


class TestConfig:
    def test_defaults_returned_without_path(self):
        cfg = load_config(None)
        assert cfg["rates"]["delta_per_s"] == 0.25
        assert cfg["filter"]["rectify"] is True

    def test_nested_merge_keeps_siblings(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"rates": {"delta_per_s": 0.5}}))
        cfg = load_config(str(p))
        assert cfg["rates"]["delta_per_s"] == 0.5
        assert cfg["rates"]["gamma_per_s"] == 0.40

    def test_overrides_win_and_none_is_skipped(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"seed": 3}))
        cfg = load_config(str(p), {"seed": 9, "out_dir": None})
        assert cfg["seed"] == 9
        assert cfg["out_dir"] == "out"

    def test_missing_file_is_one_line_error(self):
        with pytest.raises(HarnessError, match="cannot read config"):
            load_config("/nonexistent/cfg.json")

    def test_invalid_json_rejected(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{not json")
        with pytest.raises(HarnessError, match="cannot read config"):
            load_config(str(p))

    def test_hash_stable_and_order_independent(self):
        a = config_hash({"b": 1, "a": {"y": 2, "x": 3}})
        b = config_hash({"a": {"x": 3, "y": 2}, "b": 1})
        assert a == b and len(a) == 16
        assert config_hash({"b": 2}) != config_hash({"b": 1})


class TestFilteredFeatures:
    def test_matches_rectify_plus_moving_average(self):
        s = synth.generate_session(synth.SessionSpec(duration_s=3.0, seed=4))
        fcfg = load_config(None)["filter"]
        got = filtered_features(s, fcfg)
        window = int(round(fcfg["lowpass_window_s"] * s.sample_rate_hz))
        np.testing.assert_array_equal(got, moving_average(np.abs(s.emg), window))

    def test_non_uniform_times_rejected(self):
        s = synth.generate_session(synth.SessionSpec(duration_s=2.0, seed=4))
        s.times = s.times.copy()
        s.times[100] += 0.002
        with pytest.raises(Exception, match="sample 100"):
            filtered_features(s, load_config(None)["filter"])


class TestTraining:
    def test_method_3_is_not_trainable(self):
        with pytest.raises(HarnessError, match="methods 1, 2, 4"):
            train_method(dict(load_config(None), method=3))

    def test_method_1_needs_joints(self, workspace):
        cfg = dict(workspace["cfg"], method=1, train_session=str(workspace["wrist"]))
        with pytest.raises(HarnessError, match="joints"):
            train_method(cfg)

    def test_method_1_needs_labels(self, workspace, tmp_path):
        s = synth.generate_session(synth.SessionSpec(duration_s=5.0, seed=0))
        s.labels = None
        p = tmp_path / "nolabels.csv"
        synth.save_session(s, p)
        cfg = dict(workspace["cfg"], method=1, train_session=str(p))
        with pytest.raises(HarnessError, match="labels"):
            train_method(cfg)

    def test_method_4_needs_labels(self, workspace):
        cfg = dict(workspace["cfg4"], method=4, train_session=str(workspace["wrist"]))
        # wrist sessions have labels but no pose classes; strip them instead
        s = synth.load_session(str(workspace["wrist"]))
        s.labels = None
        p = workspace["root"] / "wrist_nolabels.csv"
        synth.save_session(s, p)
        cfg["train_session"] = str(p)
        with pytest.raises(HarnessError, match="pose labels"):
            train_method(cfg)

    def test_method_1_artifacts_complete(self, workspace):
        art = load_artifacts(str(workspace["out"]), 1)
        assert set(art.regressors) == {"KRR", "NMF+LR", "LS"}
        assert set(art.classifiers) == {"RF", "SVM"}
        assert art.pca is None and art.force_calibration is None

    def test_method_2_artifacts_complete(self, workspace):
        art = load_artifacts(str(workspace["out"]), 2)
        assert set(art.regressors) == {"KRR", "NMF+LR", "LS"}
        assert not art.classifiers
        assert art.pca is not None and art.coeff_scale is not None
        assert art.coeff_scale.shape == (art.pca.k,)

    def test_method_4_artifacts_complete(self, workspace):
        art = load_artifacts(str(workspace["out"]), 4)
        assert set(art.classifiers) == {"RF", "SVM"}
        assert not art.regressors
        fc = art.force_calibration
        assert fc is not None
        assert set(fc.f_min) == {"Power", "Precision", "Pinch"}

    def test_loaded_models_predict_identically(self, workspace, tmp_path):
        cfg = dict(workspace["cfg"], method=1)
        art = train_method(cfg)
        save_artifacts(art, str(tmp_path), "deadbeef00000000")
        loaded = load_artifacts(str(tmp_path), 1)
        rng = np.random.default_rng(0)
        X = rng.uniform(0.0, 2.0, size=(20, 8))
        for name in art.regressors:
            np.testing.assert_array_equal(
                art.regressors[name].predict(X), loaded.regressors[name].predict(X))
        for name in art.classifiers:
            assert list(art.classifiers[name].predict(X)) == list(loaded.classifiers[name].predict(X))

    def test_artifact_files_embed_config_hash(self, workspace):
        cfg = workspace["cfg"]
        expected = config_hash(dict(cfg, method=1))
        with open(workspace["out"] / "method1_krr.json") as f:
            assert json.load(f)["config_hash"] == expected

    def test_load_artifacts_empty_dir_rejected(self, tmp_path):
        with pytest.raises(HarnessError, match="no trained"):
            load_artifacts(str(tmp_path), 1)


class _PerfectRegressor:
    """Echoes precomputed targets back, row for row."""

    def __init__(self, rows):
        self.rows = np.asarray(rows)

    def predict(self, X):
        assert X.shape[0] == self.rows.shape[0]
        return self.rows


class _PerfectClassifier:
    def __init__(self, labels, class_labels):
        self.rows = list(labels)
        self.class_labels = tuple(class_labels)

    def predict(self, X):
        return np.array(self.rows[: X.shape[0]], dtype=object)


class TestEvaluate:
    def test_perfect_models_score_zero_and_hundred(self, workspace):
        cfg = dict(workspace["cfg"], method=1)
        session = synth.load_session(str(workspace["test"]))
        feats = filtered_features(session, cfg["filter"])
        human_map = ss.bundled_hand_map("human-hand-15")
        psi = ss.project_from_joints_batch(session.joints, human_map)
        labels = np.asarray(session.labels, dtype=object)
        mask = labels == NORMAL
        art = TrainedArtifacts(
            method=1,
            regressors={"KRR": _PerfectRegressor(psi[mask, 1:3])},
            classifiers={"RF": _PerfectClassifier(labels, ("Normal", "Spread", "Contract"))},
        )
        report = evaluate(cfg, art)
        assert report.means()["regressors"]["KRR"]["sigma"] == 0.0
        assert report.means()["regressors"]["KRR"]["epsilon"] == 0.0
        assert report.means()["classifiers"]["RF"] == 100.0

    def test_no_test_sessions_rejected(self, workspace):
        cfg = dict(workspace["cfg"], method=1, test_sessions=[])
        with pytest.raises(HarnessError, match="no test sessions"):
            evaluate(cfg, load_artifacts(str(workspace["out"]), 1))

    def test_real_models_land_in_sane_range(self, workspace):
        cfg = dict(workspace["cfg"], method=1)
        report = evaluate(cfg, load_artifacts(str(workspace["out"]), 1))
        means = report.means()
        for model in ("KRR", "NMF+LR", "LS"):
            for axis in ("sigma", "epsilon"):
                assert 0.0 < means["regressors"][model][axis] < 60.0
        for model in ("RF", "SVM"):
            assert means["classifiers"][model] > 60.0

    def test_report_means_average_sessions(self):
        r = ComparisonReport(
            method=1, output_names=("sigma", "epsilon"),
            regressor_nrmse={"KRR": {"sigma": [10.0, 20.0], "epsilon": [5.0, 7.0]}},
            classifier_accuracy={"RF": [90.0, 100.0]},
            n_sessions=2,
        )
        m = r.means()
        assert m["regressors"]["KRR"]["sigma"] == pytest.approx(15.0, abs=1e-12)
        assert m["regressors"]["KRR"]["epsilon"] == pytest.approx(6.0, abs=1e-12)
        assert m["classifiers"]["RF"] == pytest.approx(95.0, abs=1e-12)

    def test_report_render_has_all_rows(self):
        r = ComparisonReport(
            method=1, output_names=("sigma", "epsilon"),
            regressor_nrmse={m: {"sigma": [1.0], "epsilon": [2.0]} for m in ("KRR", "NMF+LR", "LS")},
            classifier_accuracy={"RF": [99.0], "SVM": [98.0]},
            n_sessions=1,
        )
        text = r.render()
        for token in ("KRR", "NMF+LR", "LS", "RF", "SVM", "sigma", "epsilon", "nRMSE"):
            assert token in text


class TestTrajectories:
    @pytest.mark.parametrize("method", [1, 2, 4])
    def test_run_and_write(self, workspace, tmp_path, method):
        cfg = dict(workspace["cfg"], method=method)
        art = load_artifacts(str(workspace["out"]), method)
        session = synth.load_session(str(workspace["test"]))
        points = run_trajectory(cfg, art, session)
        assert len(points) == len(session)
        robot_map = ss.bundled_hand_map("gripper-9")
        lo = robot_map.joint_limits[:, 0]
        hi = robot_map.joint_limits[:, 1]
        for p in points[:: max(1, len(points) // 50)]:
            assert np.all(p.psi >= 0.0) and np.all(p.psi <= 1.0)
            assert np.all(p.q >= lo - 1e-12) and np.all(p.q <= hi + 1e-12)
        path = tmp_path / "traj.csv"
        write_trajectory(points, str(path), "cafef00dcafef00d")
        lines = path.read_text().split("\n")
        assert lines[0] == "# teleop-trajectory v1"
        assert lines[1] == "# config_hash=cafef00dcafef00d"
        assert len([l for l in lines if l]) == len(points) + 3

    def test_stats(self, workspace):
        assert trajectory_stats([]) == {
            "n_samples": 0, "sigma_variance": 0.0, "clamp_count": 0, "stall_count": 0,
        }
        cfg = dict(workspace["cfg"], method=1)
        art = load_artifacts(str(workspace["out"]), 1)
        session = synth.load_session(str(workspace["test"]))
        stats = trajectory_stats(run_trajectory(cfg, art, session))
        assert stats["n_samples"] == len(session)
        assert stats["sigma_variance"] >= 0.0


class TestWristAnalysis:
    def test_noiseless_session_verdicts(self, workspace):
        cfg = workspace["cfg"]
        session = synth.load_session(str(workspace["wrist"]))
        analysis = analyze_wrist(cfg, session)
        assert analysis.variances["C1"]["rest"] == 0.0
        assert analysis.variances["C2"]["rest"] == 0.0
        assert analysis.verdicts["C1"] and analysis.ratios["C1"] >= 10
        assert not analysis.verdicts["C2"]
        text = render_wrist_analysis(analysis)
        assert "C1" in text and "does NOT respond" in text

    def test_unlabeled_session_rejected(self, workspace):
        session = synth.load_session(str(workspace["wrist"]))
        session.labels = None
        with pytest.raises(HarnessError, match="segment labels"):
            analyze_wrist(workspace["cfg"], session)

    def test_missing_segment_rejected(self, workspace):
        session = synth.load_session(str(workspace["wrist"]))
        session.labels = ["rest"] * len(session)
        with pytest.raises(HarnessError, match="flex_extend"):
            analyze_wrist(workspace["cfg"], session)


class TestCli:
    def test_synth_writes_deterministic_session(self, tmp_path, capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for p in (a, b):
            assert cli.main(["synth", "--duration", "2", "--session-out", str(p)]) == 0
        assert a.read_bytes() == b.read_bytes()
        out = capsys.readouterr().out
        assert "400 samples" in out

    def test_synth_seed_flag_changes_output(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        cli.main(["synth", "--duration", "2", "--seed", "1", "--session-out", str(a)])
        cli.main(["synth", "--duration", "2", "--seed", "2", "--session-out", str(b)])
        assert a.read_bytes() != b.read_bytes()

    def test_train_without_session_fails_cleanly(self, capsys):
        assert cli.main(["train", "--method", "1"]) == 1
        err = capsys.readouterr().err
        assert err.startswith("error: ")
        assert err.count("\n") == 1

    def test_eval_writes_reports(self, workspace, capsys):
        assert cli.main(["eval", "--config", str(workspace["cfg_path"]), "--method", "1"]) == 0
        out_dir = workspace["out"]
        assert (out_dir / "method1_report.txt").exists()
        doc = json.loads((out_dir / "method1_report.json").read_text())
        assert doc["config_hash"] == config_hash(dict(workspace["cfg"], method=1))
        assert "KRR" in capsys.readouterr().out

    def test_run_writes_trajectory(self, workspace, tmp_path, capsys):
        traj = tmp_path / "t.csv"
        assert cli.main([
            "run", "--config", str(workspace["cfg_path"]), "--method", "1",
            "--session", str(workspace["test"]), "--trajectory-out", str(traj),
        ]) == 0
        assert traj.exists()
        assert f"config_hash={config_hash(dict(workspace['cfg'], method=1))}" in traj.read_text()

    def test_compare_tabulates_all_methods(self, workspace, capsys):
        assert cli.main([
            "compare", "--config", str(workspace["cfg_path"]),
            "--session", str(workspace["test"]),
        ]) == 0
        out = capsys.readouterr().out
        assert "sigma variance" in out
        assert (workspace["out"] / "method_comparison.txt").exists()
        doc = json.loads((workspace["out"] / "method_comparison.json").read_text())
        assert set(doc["stats"]) == {"1", "2", "4"}

    def test_analyze_wrist_command(self, workspace, capsys):
        assert cli.main([
            "analyze-wrist", "--config", str(workspace["cfg_path"]),
            "--session", str(workspace["wrist"]),
        ]) == 0
        out = capsys.readouterr().out
        assert "variance ratio" in out

    def test_missing_session_file_is_single_line_error(self, capsys):
        assert cli.main(["analyze-wrist", "--session", "/nope.csv"]) == 1
        err = capsys.readouterr().err
        assert err.startswith("error: ") and err.count("\n") == 1

    def test_bad_teleop_log_rejected(self, capsys, monkeypatch):
        monkeypatch.setenv("TELEOP_LOG", "loud")
        assert cli.main(["synth", "--duration", "1", "--session-out", "/dev/null"]) == 1
        assert "TELEOP_LOG" in capsys.readouterr().err

    def test_corrupt_session_is_single_line_error(self, tmp_path, capsys):
        p = tmp_path / "bad.csv"
        p.write_text("not a session\n")
        assert cli.main(["analyze-wrist", "--session", str(p)]) == 1
        err = capsys.readouterr().err
        assert err.startswith("error: ") and err.count("\n") == 1
