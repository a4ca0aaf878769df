"""Seeded synthetic EMG sessions and session file I/O.

Stands in for armband + dataglove recordings so every pipeline stage is
testable at desk scale. The signal model is intentionally simple: a smooth
latent pose trajectory drives muscle activations, a fixed non-negative
mixing matrix spreads them over the EMG channels, and Gaussian noise is
added on top. Gesture windows inject distinctive bursts and carry labels.

The synthetic parameters are not calibrated to any real recording.

Session file format (schema version 1), all text, one record per line:

    # teleop-session v1
    # sample_rate_hz=<float>
    # n_channels=<int>
    # n_joints=<int>
    # labels=<comma-separated label set, may be empty>
    # hand_map=<name>
    t,e1,...,eC,j1,...,jJ,label

Floats are written with repr (shortest round-trip form), so save followed
by load reproduces every value exactly. The label column is empty for
unlabeled samples.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from emg_teleop.controllers import (
    ABDUCT_ADDUCT,
    CONTRACT,
    FLEX_EXTEND,
    NORMAL,
    PINCH,
    POSE_CLASSES,
    POWER,
    PRECISION,
    REST,
    SPREAD,
)
from emg_teleop.subspace import HandMap, bundled_hand_map

SESSION_MAGIC = "# teleop-session v1"

GESTURE_SCHEME = "gesture"
POSE_SCHEME = "pose"
WRIST_SCHEME = "wrist"

# wrist-analysis channel assignments for synthetic sessions
WRIST_CHANNELS = {"flexor": 0, "extensor": 1, "abductor": 2}


class SessionFormatError(ValueError):
    """Raised on malformed session files; carries line/offset context."""


@dataclass(frozen=True)
class SessionSpec:
    """Parameters of one synthetic recording."""

    duration_s: float = 120.0
    sample_rate_hz: float = 200.0
    gesture_interval_s: float = 30.0
    gesture_duration_s: float = 2.0
    noise_std: float = 0.05
    seed: int = 0
    label_scheme: str = GESTURE_SCHEME
    n_channels: int = 8
    human_map: HandMap = field(default_factory=lambda: bundled_hand_map("human-hand-15"))

    def __post_init__(self):
        if self.duration_s * self.sample_rate_hz < 1:
            raise ValueError("duration x rate must cover at least one sample")
        if self.gesture_interval_s <= 0 or self.gesture_duration_s <= 0:
            raise ValueError("gesture timing must be positive")
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")
        if self.label_scheme not in (GESTURE_SCHEME, POSE_SCHEME, WRIST_SCHEME):
            raise ValueError(f"unknown label_scheme {self.label_scheme!r}")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_s * self.sample_rate_hz))


@dataclass
class Session:
    """Array-backed recording: timestamps, EMG, optional joints and labels."""

    sample_rate_hz: float
    times: np.ndarray
    emg: np.ndarray  # [T, C]
    joints: np.ndarray | None = None  # [T, J]
    labels: list | None = None  # per-sample label or None
    hand_map_name: str = ""
    label_set: tuple = ()

    def __len__(self) -> int:
        return self.times.shape[0]

    @property
    def n_channels(self) -> int:
        return self.emg.shape[1]

    def equals(self, other: "Session") -> bool:
        if self.sample_rate_hz != other.sample_rate_hz:
            return False
        if not np.array_equal(self.times, other.times):
            return False
        if not np.array_equal(self.emg, other.emg):
            return False
        a = self.joints if self.joints is not None else np.empty((len(self), 0))
        b = other.joints if other.joints is not None else np.empty((len(other), 0))
        if not np.array_equal(a, b):
            return False
        return (self.labels or [None] * len(self)) == (other.labels or [None] * len(other))


# fixed non-negative mixing from 5 latent activations to channels
def _default_mixing(n_channels: int, seed: int = 1234) -> np.ndarray:
    rng = np.random.default_rng(seed)
    M = rng.uniform(0.1, 1.0, size=(n_channels, 5))
    return M


def _ou_walk(rng, n: int, dt: float, start, mean=0.5, pull=0.6, diffusion=0.25) -> np.ndarray:
    """Mean-reverting random walk in [0, 1]^3 with reflecting bounds."""
    x = np.empty((n, 3))
    cur = np.array(start, dtype=float)
    for i in range(n):
        cur = cur + pull * (mean - cur) * dt + diffusion * np.sqrt(dt) * rng.standard_normal(3)
        # reflect at the bounds
        cur = np.abs(cur)
        cur = 1.0 - np.abs(1.0 - cur)
        cur = np.clip(cur, 0.0, 1.0)
        x[i] = cur
    return x


def _gesture_windows(spec: SessionSpec) -> list[tuple[int, int, str]]:
    """(start, end, label) sample windows for the configured scheme."""
    if spec.label_scheme == GESTURE_SCHEME:
        cycle = [SPREAD, CONTRACT]
    elif spec.label_scheme == POSE_SCHEME:
        cycle = list(POSE_CLASSES)
    else:
        cycle = [FLEX_EXTEND, ABDUCT_ADDUCT]
    windows = []
    k = 0
    t = spec.gesture_interval_s
    wlen = int(round(spec.gesture_duration_s * spec.sample_rate_hz))
    n = spec.n_samples
    while True:
        start = int(round(t * spec.sample_rate_hz))
        if start >= n:
            break
        windows.append((start, min(n, start + wlen), cycle[k % len(cycle)]))
        k += 1
        t += spec.gesture_interval_s
    return windows


def generate_session(spec: SessionSpec) -> Session:
    """Deterministically synthesize a session from its spec."""
    if spec.label_scheme == WRIST_SCHEME:
        return _generate_wrist_session(spec)
    rng = np.random.default_rng(spec.seed)
    n = spec.n_samples
    dt = 1.0 / spec.sample_rate_hz
    times = np.arange(n) * dt

    psi = _ou_walk(rng, n, dt, start=rng.uniform(0.2, 0.8, size=3))
    windows = _gesture_windows(spec)
    labels: list = [NORMAL if spec.label_scheme == GESTURE_SCHEME else None] * n
    if spec.label_scheme == GESTURE_SCHEME:
        label_set = (NORMAL, SPREAD, CONTRACT)
    elif spec.label_scheme == POSE_SCHEME:
        label_set = POSE_CLASSES
    else:
        label_set = ()

    # latent activations: size, curl, co-contraction, spread burst, contract burst
    rate = np.vstack([np.zeros((1, 3)), np.abs(np.diff(psi, axis=0)) / dt])
    acts = np.zeros((n, 5))
    acts[:, 0] = psi[:, 1]
    acts[:, 1] = psi[:, 2]
    acts[:, 2] = 0.3 * (psi[:, 1] + psi[:, 2]) + 0.2 * rate.mean(axis=1)
    burst_a, burst_b = np.zeros(n), np.zeros(n)
    for start, end, label in windows:
        for i in range(start, end):
            labels[i] = label
        if spec.label_scheme == GESTURE_SCHEME:
            if label == SPREAD:
                burst_a[start:end] = 1.0
            else:
                burst_b[start:end] = 1.0
        else:
            # pose scheme: each pose gets a distinct burst blend plus a
            # contraction ramp so force calibration sees the full range
            blend = {POWER: (1.0, 0.0), PRECISION: (0.0, 1.0), PINCH: (0.7, 0.7)}[label]
            ramp = np.linspace(0.2, 1.0, end - start)
            burst_a[start:end] = blend[0] * ramp
            burst_b[start:end] = blend[1] * ramp
    acts[:, 3] = burst_a
    acts[:, 4] = burst_b

    mixing = _default_mixing(spec.n_channels)
    emg = acts @ mixing.T + spec.noise_std * rng.standard_normal((n, spec.n_channels))

    joints = (psi * spec.human_map.delta_star) @ spec.human_map.A.T + spec.human_map.o
    return Session(
        sample_rate_hz=spec.sample_rate_hz,
        times=times,
        emg=emg,
        joints=joints,
        labels=labels,
        hand_map_name=spec.human_map.name,
        label_set=label_set,
    )


def _generate_wrist_session(spec: SessionSpec) -> Session:
    """Wrist-motion session for the Method-3 analysis.

    The flexor/extensor channels carry an antiphase sinusoid during
    flexion/extension; the abductor channel holds the same constant level
    everywhere, so the second wrist axis never responds.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.n_samples
    dt = 1.0 / spec.sample_rate_hz
    times = np.arange(n) * dt
    emg = np.full((n, spec.n_channels), 0.2)
    emg[:, WRIST_CHANNELS["abductor"]] = 0.5
    labels: list = [REST] * n
    for start, end, label in _gesture_windows(spec):
        for i in range(start, end):
            labels[i] = label
        if label == FLEX_EXTEND:
            phase = 2.0 * np.pi * 1.5 * times[start:end]
            emg[start:end, WRIST_CHANNELS["flexor"]] = 0.6 + 0.4 * np.sin(phase)
            emg[start:end, WRIST_CHANNELS["extensor"]] = 0.6 - 0.4 * np.sin(phase)
    if spec.noise_std > 0:
        emg += spec.noise_std * rng.standard_normal(emg.shape)
    emg = np.abs(emg)
    return Session(
        sample_rate_hz=spec.sample_rate_hz,
        times=times,
        emg=emg,
        joints=None,
        labels=labels,
        hand_map_name="",
        label_set=(REST, FLEX_EXTEND, ABDUCT_ADDUCT),
    )


# ---------------------------------------------------------------------------
# File I/O


def save_session(session: Session, path) -> None:
    n_joints = session.joints.shape[1] if session.joints is not None else 0
    buf = io.StringIO()
    buf.write(SESSION_MAGIC + "\n")
    buf.write(f"# sample_rate_hz={session.sample_rate_hz!r}\n")
    buf.write(f"# n_channels={session.n_channels}\n")
    buf.write(f"# n_joints={n_joints}\n")
    buf.write(f"# labels={','.join(session.label_set)}\n")
    buf.write(f"# hand_map={session.hand_map_name}\n")
    labels = session.labels or [None] * len(session)
    for i in range(len(session)):
        fields = [repr(float(session.times[i]))]
        fields += [repr(float(v)) for v in session.emg[i]]
        if n_joints:
            fields += [repr(float(v)) for v in session.joints[i]]
        fields.append(labels[i] or "")
        buf.write(",".join(fields) + "\n")
    with open(path, "w") as f:
        f.write(buf.getvalue())


def _header_value(line: str, key: str, lineno: int) -> str:
    prefix = f"# {key}="
    if not line.startswith(prefix):
        raise SessionFormatError(f"line {lineno}: expected header field '{key}', got {line!r}")
    return line[len(prefix):]


def load_session(path) -> Session:
    with open(path) as f:
        text = f.read()
    lines = text.split("\n")
    if not lines or lines[0] != SESSION_MAGIC:
        raise SessionFormatError(
            f"line 1: not a teleop session file (expected {SESSION_MAGIC!r}); "
            "unknown or future versions are rejected"
        )
    if len(lines) < 6:
        raise SessionFormatError(f"truncated header at byte offset {len(text)}")
    try:
        rate = float(_header_value(lines[1], "sample_rate_hz", 2))
        n_channels = int(_header_value(lines[2], "n_channels", 3))
        n_joints = int(_header_value(lines[3], "n_joints", 4))
        label_field = _header_value(lines[4], "labels", 5)
        hand_map_name = _header_value(lines[5], "hand_map", 6)
    except ValueError as e:
        if isinstance(e, SessionFormatError):
            raise
        raise SessionFormatError(f"bad header value: {e}") from e
    label_set = tuple(s for s in label_field.split(",") if s)

    expected_cols = 1 + n_channels + n_joints + 1
    if text and not text.endswith("\n"):
        raise SessionFormatError(f"truncated file: no trailing newline at byte offset {len(text)}")
    times, emg, joints, labels = [], [], [], []
    offset = sum(len(l) + 1 for l in lines[:6])
    for lineno, line in enumerate(lines[6:], start=7):
        if line == "":
            continue
        fields = line.split(",")
        if len(fields) != expected_cols:
            raise SessionFormatError(
                f"line {lineno} (byte offset {offset}): expected {expected_cols} columns "
                f"(t, {n_channels} EMG channels, {n_joints} joints, label), got {len(fields)}"
            )
        try:
            times.append(float(fields[0]))
            emg.append([float(v) for v in fields[1 : 1 + n_channels]])
            if n_joints:
                joints.append([float(v) for v in fields[1 + n_channels : 1 + n_channels + n_joints]])
        except ValueError as e:
            raise SessionFormatError(f"line {lineno} (byte offset {offset}): bad numeric field: {e}") from e
        label = fields[-1]
        labels.append(label if label else None)
        offset += len(line) + 1
    if not times:
        raise SessionFormatError(f"no samples in session file at byte offset {len(text)}")
    times_a = np.array(times)
    if np.any(np.diff(times_a) <= 0):
        raise SessionFormatError("timestamps must be strictly increasing")
    return Session(
        sample_rate_hz=rate,
        times=times_a,
        emg=np.array(emg),
        joints=np.array(joints) if n_joints else None,
        labels=labels if any(l is not None for l in labels) else None,
        hand_map_name=hand_map_name,
        label_set=label_set,
    )
