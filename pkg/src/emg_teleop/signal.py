"""EMG preprocessing: rectification, envelope extraction, median smoothing.

All filters here are causal (trailing window) so that streaming evaluation
sample-by-sample matches batch evaluation exactly. Warm-up samples use the
partial window that is available, which keeps output length equal to input
length across the pipeline.
"""

from __future__ import annotations

import bisect
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import maximum_filter1d, minimum_filter1d


class NonUniformSamplingError(ValueError):
    """Raised when a stream's timestamps deviate from uniform spacing."""


@dataclass(frozen=True)
class EmgSample:
    """One multichannel EMG reading.

    Args:
        t: timestamp in seconds.
        channels: per-sensor activation values; may be negative before
            rectification.
    """

    t: float
    channels: np.ndarray

    def __post_init__(self):
        ch = np.asarray(self.channels, dtype=float)
        object.__setattr__(self, "channels", ch)
        if not np.isfinite(self.t):
            raise ValueError(f"non-finite timestamp {self.t!r}")
        if not np.all(np.isfinite(ch)):
            raise ValueError(f"non-finite channel value at t={self.t}")


@dataclass(frozen=True)
class FilterConfig:
    """Envelope-extraction parameters.

    lowpass_cutoff_hz is carried as metadata; the lowpass is implemented as
    a trailing moving average parameterized by window length.
    """

    sample_rate_hz: float
    lowpass_window_s: float = 0.5
    lowpass_cutoff_hz: float = 200.0
    rectify: bool = True
    median_window_s: float = 0.2

    def __post_init__(self):
        for name in ("sample_rate_hz", "lowpass_window_s", "lowpass_cutoff_hz", "median_window_s"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be strictly positive, got {v!r}")
        if self.lowpass_window_samples < 1:
            raise ValueError("lowpass_window_s corresponds to <1 sample at sample_rate_hz")
        if self.median_window_samples < 1:
            raise ValueError("median_window_s corresponds to <1 sample at sample_rate_hz")

    @property
    def lowpass_window_samples(self) -> int:
        return int(round(self.lowpass_window_s * self.sample_rate_hz))

    @property
    def median_window_samples(self) -> int:
        return int(round(self.median_window_s * self.sample_rate_hz))


def stream_to_arrays(stream) -> tuple[np.ndarray, np.ndarray]:
    """Stack a sequence of EmgSample into (t, values) arrays."""
    ts = np.array([s.t for s in stream], dtype=float)
    if len(stream) == 0:
        return ts, np.empty((0, 0))
    vals = np.stack([s.channels for s in stream])
    return ts, vals


def arrays_to_stream(ts: np.ndarray, vals: np.ndarray) -> list[EmgSample]:
    return [EmgSample(t=float(t), channels=v) for t, v in zip(ts, vals)]


def rectify(stream):
    """Full-wave rectification: replace each channel value by its magnitude."""
    return [EmgSample(t=s.t, channels=np.abs(s.channels)) for s in stream]


def check_uniform(ts: np.ndarray, sample_rate_hz: float, jitter: float = 0.01) -> None:
    """Reject streams whose spacing deviates >jitter (relative) from nominal."""
    if len(ts) < 2:
        return
    nominal = 1.0 / sample_rate_hz
    dts = np.diff(ts)
    bad = np.nonzero(np.abs(dts - nominal) > jitter * nominal)[0]
    if bad.size:
        i = int(bad[0])
        raise NonUniformSamplingError(
            f"non-uniform sampling at t={ts[i + 1]:.9g} (sample {i + 1}): "
            f"dt={dts[i]:.9g}s vs nominal {nominal:.9g}s"
        )


def moving_average(values: np.ndarray, window: int) -> np.ndarray:
    """Causal trailing moving average with partial-window warm-up.

    Windows whose min and max coincide pass their value through untouched,
    so constant stretches are reproduced exactly regardless of running-sum
    rounding in the general path.

    Args:
        values: array of shape [T] or [T, C].
        window: window length in samples, >= 1.
    """
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return values.copy()
    x = values if values.ndim > 1 else values[:, None]
    out = np.empty_like(x)
    n = x.shape[0]
    w = min(window, n)
    for i in range(w - 1):
        out[i] = x[: i + 1].mean(axis=0)
    c = np.cumsum(x, axis=0)
    out[w - 1 :] = c[w - 1 :]
    out[w:] -= c[:-w]
    out[w - 1 :] /= w
    origin = (w - 1) // 2
    wmin = minimum_filter1d(x, size=w, axis=0, mode="nearest", origin=origin)[w - 1 :]
    wmax = maximum_filter1d(x, size=w, axis=0, mode="nearest", origin=origin)[w - 1 :]
    constant = wmin == wmax
    out[w - 1 :][constant] = wmin[constant]
    for i in range(w - 1):
        lo, hi = x[: i + 1].min(axis=0), x[: i + 1].max(axis=0)
        const = lo == hi
        out[i][const] = lo[const]
    return out if values.ndim > 1 else out[:, 0]


def lowpass_filter(stream, cfg: FilterConfig):
    """Trailing moving-average envelope over cfg.lowpass_window_s.

    Stream must be uniformly sampled at cfg.sample_rate_hz within 1% jitter.
    Output timestamps and length match the input.
    """
    if len(stream) == 0:
        return []
    ts, vals = stream_to_arrays(stream)
    check_uniform(ts, cfg.sample_rate_hz)
    out = moving_average(vals, cfg.lowpass_window_samples)
    return arrays_to_stream(ts, out)


def filter_stream(stream, cfg: FilterConfig):
    """Full preprocessing chain: optional rectification, then lowpass."""
    if cfg.rectify:
        stream = rectify(stream)
    return lowpass_filter(stream, cfg)


def median_filter(values, window_s: float, sample_rate_hz: float) -> np.ndarray:
    """Causal trailing-window median, per axis, with partial warm-up.

    Args:
        values: array of shape [T] or [T, C].
        window_s: window length in seconds (>= 1 sample at sample_rate_hz).
        sample_rate_hz: sampling rate used to convert the window to samples.
    """
    window = int(round(window_s * sample_rate_hz))
    if window < 1:
        raise ValueError(
            f"median window {window_s}s is <1 sample at {sample_rate_hz}Hz"
        )
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return values.copy()
    x = values if values.ndim > 1 else values[:, None]
    out = np.empty_like(x)
    n = x.shape[0]
    for i in range(n):
        lo = max(0, i - window + 1)
        out[i] = np.median(x[lo : i + 1], axis=0)
    return out if values.ndim > 1 else out[:, 0]


@dataclass
class StreamingMedian:
    """Incremental trailing-window median matching median_filter exactly.

    Keeps the window both in arrival order and sorted so each push is
    O(window). Used by the controllers to smooth regressor output online.
    """

    window: int
    _buf: deque = field(default_factory=deque)
    _sorted: list = field(default_factory=list)

    def __post_init__(self):
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")

    def push(self, value: float) -> float:
        if len(self._buf) == self.window:
            old = self._buf.popleft()
            del self._sorted[bisect.bisect_left(self._sorted, old)]
        self._buf.append(value)
        bisect.insort(self._sorted, value)
        k = len(self._sorted)
        if k % 2:
            return self._sorted[k // 2]
        return 0.5 * (self._sorted[k // 2 - 1] + self._sorted[k // 2])

    def copy(self) -> "StreamingMedian":
        c = StreamingMedian(self.window)
        c._buf = deque(self._buf)
        c._sorted = list(self._sorted)
        return c
