import numpy as np
import pytest

from emg_teleop.controllers import (
    ABDUCT_ADDUCT,
    CONTRACT,
    FLEX_EXTEND,
    NORMAL,
    REST,
    SPREAD,
)
from emg_teleop.subspace import project_from_joints, project_to_robot
from emg_teleop.synth import (
    GESTURE_SCHEME,
    POSE_SCHEME,
    SESSION_MAGIC,
    WRIST_CHANNELS,
    WRIST_SCHEME,
    Session,
    SessionFormatError,
    SessionSpec,
    generate_session,
    load_session,
    save_session,
)


class TestSessionSpec:
    def test_sample_count(self):
        assert SessionSpec(duration_s=120.0, sample_rate_hz=200.0).n_samples == 24000

    def test_rejects_empty_duration(self):
        with pytest.raises(ValueError, match="at least one sample"):
            SessionSpec(duration_s=0.001, sample_rate_hz=200.0)

    def test_rejects_negative_noise(self):
        with pytest.raises(ValueError, match="noise_std"):
            SessionSpec(noise_std=-0.1)

    def test_rejects_unknown_scheme(self):
        with pytest.raises(ValueError, match="label_scheme"):
            SessionSpec(label_scheme="bogus")

    def test_rejects_bad_gesture_timing(self):
        with pytest.raises(ValueError, match="gesture timing"):
            SessionSpec(gesture_interval_s=0.0)


class TestGenerate:
    def test_shapes_and_count(self):
        s = generate_session(SessionSpec(duration_s=120.0, sample_rate_hz=200.0, seed=0))
        assert len(s) == 24000
        assert s.emg.shape == (24000, 8)
        assert s.joints.shape == (24000, 15)
        assert len(s.labels) == 24000
        np.testing.assert_allclose(np.diff(s.times), 1.0 / 200.0, atol=1e-12)

    def test_deterministic_for_a_seed(self):
        a = generate_session(SessionSpec(duration_s=10.0, seed=42))
        b = generate_session(SessionSpec(duration_s=10.0, seed=42))
        assert a.equals(b)

    def test_seeds_differ(self):
        a = generate_session(SessionSpec(duration_s=10.0, seed=0))
        b = generate_session(SessionSpec(duration_s=10.0, seed=1))
        assert not np.array_equal(a.emg, b.emg)

    def test_gesture_windows_alternate_on_schedule(self):
        spec = SessionSpec(duration_s=120.0, sample_rate_hz=200.0,
                           gesture_interval_s=30.0, gesture_duration_s=2.0, seed=3)
        s = generate_session(spec)
        labels = np.array(s.labels, dtype=object)
        for t0, expected in [(30.0, SPREAD), (60.0, CONTRACT), (90.0, SPREAD)]:
            start = int(round(t0 * 200.0))
            window = labels[start + 1 : start + 399]
            assert np.all(window == expected), t0
            assert labels[start - 2] == NORMAL
            assert labels[start + 401] == NORMAL
        assert set(labels) == {NORMAL, SPREAD, CONTRACT}

    def test_joints_live_on_the_subspace(self):
        spec = SessionSpec(duration_s=5.0, seed=7)
        s = generate_session(spec)
        for i in range(0, len(s), 100):
            psi, clamped = project_from_joints(s.joints[i], spec.human_map)
            assert not np.any(clamped)
            q, _ = project_to_robot(psi, spec.human_map)
            np.testing.assert_allclose(q, s.joints[i], atol=1e-9)

    def test_pose_scheme_labels(self):
        spec = SessionSpec(duration_s=120.0, gesture_interval_s=10.0,
                           label_scheme=POSE_SCHEME, seed=1)
        s = generate_session(spec)
        present = {l for l in s.labels if l is not None}
        assert present == {"Power", "Precision", "Pinch"}
        assert s.label_set == ("Power", "Precision", "Pinch")

    def test_wrist_scheme_properties(self):
        spec = SessionSpec(duration_s=120.0, gesture_interval_s=30.0,
                           label_scheme=WRIST_SCHEME, noise_std=0.0, seed=5)
        s = generate_session(spec)
        labels = np.array(s.labels, dtype=object)
        assert set(labels) == {REST, FLEX_EXTEND, ABDUCT_ADDUCT}
        rest = labels == REST
        # rest-segment envelopes are exactly constant without noise
        for ch in range(s.n_channels):
            col = s.emg[rest, ch]
            assert col.min() == col.max()
        # abductor never moves at all
        ab = s.emg[:, WRIST_CHANNELS["abductor"]]
        assert ab.min() == ab.max() == 0.5
        # flexor/extensor oscillate only during flexion windows
        flex = s.emg[labels == FLEX_EXTEND, WRIST_CHANNELS["flexor"]]
        assert flex.std() > 0.2

    def test_noise_moves_everything(self):
        spec = SessionSpec(duration_s=5.0, label_scheme=WRIST_SCHEME,
                           noise_std=0.05, seed=5)
        s = generate_session(spec)
        assert s.emg[:, WRIST_CHANNELS["abductor"]].std() > 0.0


class TestSessionIO:
    def roundtrip(self, spec, tmp_path):
        s = generate_session(spec)
        p = tmp_path / "s.csv"
        save_session(s, p)
        return s, load_session(p), p

    def test_gesture_roundtrip_exact(self, tmp_path):
        s, loaded, _ = self.roundtrip(SessionSpec(duration_s=5.0, seed=0), tmp_path)
        assert s.equals(loaded)
        assert loaded.hand_map_name == s.hand_map_name
        assert loaded.label_set == s.label_set

    def test_wrist_roundtrip_exact(self, tmp_path):
        s, loaded, _ = self.roundtrip(
            SessionSpec(duration_s=5.0, label_scheme=WRIST_SCHEME, seed=2), tmp_path)
        assert s.equals(loaded)
        assert loaded.joints is None

    def test_save_is_deterministic(self, tmp_path):
        s = generate_session(SessionSpec(duration_s=2.0, seed=9))
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        save_session(s, p1)
        save_session(s, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_magic_rejected(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("# teleop-session v2\n")
        with pytest.raises(SessionFormatError, match="line 1"):
            load_session(p)

    def test_truncated_file_reports_byte_offset(self, tmp_path):
        s, _, p = self.roundtrip(SessionSpec(duration_s=2.0, seed=0), tmp_path)
        text = p.read_text()
        p.write_text(text[:-10])  # chop mid-record, killing the trailing newline
        with pytest.raises(SessionFormatError, match=rf"byte offset {len(text) - 10}"):
            load_session(p)

    def test_wrong_column_count_names_layout(self, tmp_path):
        s, _, p = self.roundtrip(SessionSpec(duration_s=1.0, seed=0), tmp_path)
        lines = p.read_text().split("\n")
        lines[6] = lines[6].rsplit(",", 2)[0] + ","
        p.write_text("\n".join(lines))
        with pytest.raises(SessionFormatError, match=r"8 EMG channels, 15 joints"):
            load_session(p)

    def test_bad_numeric_field_located(self, tmp_path):
        s, _, p = self.roundtrip(SessionSpec(duration_s=1.0, seed=0), tmp_path)
        lines = p.read_text().split("\n")
        fields = lines[10].split(",")
        fields[3] = "oops"
        lines[10] = ",".join(fields)
        p.write_text("\n".join(lines))
        with pytest.raises(SessionFormatError, match="line 11 .*bad numeric"):
            load_session(p)

    def test_non_monotone_timestamps_rejected(self, tmp_path):
        s, _, p = self.roundtrip(SessionSpec(duration_s=1.0, seed=0), tmp_path)
        lines = p.read_text().split("\n")
        lines[7], lines[8] = lines[8], lines[7]
        p.write_text("\n".join(lines))
        with pytest.raises(SessionFormatError, match="strictly increasing"):
            load_session(p)

    def test_empty_body_rejected(self, tmp_path):
        s, _, p = self.roundtrip(SessionSpec(duration_s=1.0, seed=0), tmp_path)
        lines = p.read_text().split("\n")
        p.write_text("\n".join(lines[:6]) + "\n")
        with pytest.raises(SessionFormatError, match="no samples"):
            load_session(p)

    def test_corrupt_header_field_named(self, tmp_path):
        s, _, p = self.roundtrip(SessionSpec(duration_s=1.0, seed=0), tmp_path)
        lines = p.read_text().split("\n")
        lines[2] = "# channels=8"
        p.write_text("\n".join(lines))
        with pytest.raises(SessionFormatError, match="n_channels"):
            load_session(p)

    def test_unlabeled_session_roundtrip(self, tmp_path):
        s = Session(sample_rate_hz=100.0, times=np.arange(4) / 100.0,
                    emg=np.arange(8.0).reshape(4, 2))
        p = tmp_path / "u.csv"
        save_session(s, p)
        loaded = load_session(p)
        assert s.equals(loaded)
        assert loaded.labels is None
