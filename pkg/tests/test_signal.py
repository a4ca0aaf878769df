import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emg_teleop.signal import (
    EmgSample,
    FilterConfig,
    NonUniformSamplingError,
    StreamingMedian,
    arrays_to_stream,
    check_uniform,
    filter_stream,
    lowpass_filter,
    median_filter,
    moving_average,
    rectify,
)


def make_stream(values, rate=200.0):
    values = np.atleast_2d(np.asarray(values, dtype=float).T).T
    ts = np.arange(values.shape[0]) / rate
    return arrays_to_stream(ts, values)


class TestEmgSample:
    def test_rejects_non_finite_timestamp(self):
        with pytest.raises(ValueError, match="timestamp"):
            EmgSample(t=float("nan"), channels=np.zeros(8))

    def test_rejects_non_finite_channel(self):
        with pytest.raises(ValueError, match="channel"):
            EmgSample(t=0.0, channels=np.array([1.0, float("inf")]))


class TestFilterConfig:
    def test_defaults(self):
        cfg = FilterConfig(sample_rate_hz=200.0)
        assert cfg.lowpass_window_samples == 100
        assert cfg.median_window_samples == 40

    @pytest.mark.parametrize("field", ["sample_rate_hz", "lowpass_window_s", "median_window_s"])
    def test_rejects_nonpositive(self, field):
        kwargs = {"sample_rate_hz": 200.0, field: 0.0}
        with pytest.raises(ValueError, match="strictly positive"):
            FilterConfig(**kwargs)

    def test_rejects_subsample_window(self):
        with pytest.raises(ValueError, match="<1 sample"):
            FilterConfig(sample_rate_hz=200.0, lowpass_window_s=1e-4)


class TestRectify:
    def test_mixed_signs(self):
        stream = make_stream(np.array([[1, -2, 0, 3, -0.5, 0, 0, 0]], dtype=float))
        out = rectify(stream)
        np.testing.assert_array_equal(out[0].channels, [1, 2, 0, 3, 0.5, 0, 0, 0])

    def test_zero_fixed_point(self):
        stream = make_stream(np.zeros((3, 8)))
        for s in rectify(stream):
            assert np.all(s.channels == 0.0)

    def test_idempotent_on_nonnegative(self):
        stream = make_stream(np.abs(np.random.default_rng(0).normal(size=(10, 8))))
        out = rectify(stream)
        for a, b in zip(stream, out):
            assert a.t == b.t
            np.testing.assert_array_equal(a.channels, b.channels)


class TestLowpass:
    def test_constant_dc_gain_exact(self):
        c = 0.7231
        stream = make_stream(np.full((40, 2), c))
        out = lowpass_filter(stream, FilterConfig(sample_rate_hz=200.0, lowpass_window_s=0.05))
        for s in out:
            assert np.all(s.channels == c)

    def test_impulse_response_5_sample_window(self):
        x = np.zeros(12)
        x[0] = 1.0
        got = moving_average(x, 5)
        expected = [1.0, 0.5, 1 / 3, 0.25, 0.2, 0, 0, 0, 0, 0, 0, 0]
        np.testing.assert_allclose(got, expected, atol=1e-15)

    def test_alternating_cancels_in_even_window(self):
        x = np.tile([1.0, -1.0], 20)
        got = moving_average(x, 4)
        assert np.all(np.abs(got[3:]) < 1e-12)

    def test_empty_stream(self):
        assert lowpass_filter([], FilterConfig(sample_rate_hz=200.0)) == []

    def test_non_uniform_sampling_names_first_offender(self):
        stream = make_stream(np.zeros((10, 1)))
        bad = EmgSample(t=stream[5].t + 0.004, channels=stream[5].channels)
        stream[5] = bad
        with pytest.raises(NonUniformSamplingError, match="sample 5"):
            lowpass_filter(stream, FilterConfig(sample_rate_hz=200.0))

    def test_causality(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=50)
        base = moving_average(x, 7)
        mutated = x.copy()
        mutated[30:] += 100.0
        np.testing.assert_array_equal(moving_average(mutated, 7)[:30], base[:30])

    def test_determinism(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(200, 8))
        a = moving_average(x, 11)
        b = moving_average(x, 11)
        assert np.array_equal(a, b)

    def test_window_must_be_positive(self):
        with pytest.raises(ValueError, match=">= 1"):
            moving_average(np.zeros(5), 0)

    def test_filter_stream_rectifies_by_default(self):
        stream = make_stream(np.full((30, 1), -2.0))
        out = filter_stream(stream, FilterConfig(sample_rate_hz=200.0, lowpass_window_s=0.05))
        assert np.all([s.channels[0] == 2.0 for s in out])

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=60),
           st.integers(min_value=1, max_value=12))
    @settings(max_examples=60, deadline=None)
    def test_boundedness(self, values, window):
        x = np.array(values)
        out = moving_average(x, window)
        for i in range(len(x)):
            lo = max(0, i - window + 1)
            w = x[lo : i + 1]
            assert w.min() - 1e-9 <= out[i] <= w.max() + 1e-9


class TestMedian:
    def test_constant(self):
        x = np.full(20, 3.5)
        np.testing.assert_array_equal(median_filter(x, 0.05, 200.0), x)

    def test_spike_rejected(self):
        got = median_filter(np.array([0.0, 0, 9, 0, 0]), 3 / 200.0, 200.0)
        np.testing.assert_array_equal(got, np.zeros(5))

    def test_ramp_delayed_one_step(self):
        x = np.arange(10.0)
        got = median_filter(x, 3 / 200.0, 200.0)
        np.testing.assert_array_equal(got[2:], x[2:] - 1.0)

    def test_empty(self):
        out = median_filter(np.empty(0), 0.2, 200.0)
        assert out.size == 0

    def test_window_under_one_sample(self):
        with pytest.raises(ValueError, match="<1 sample"):
            median_filter(np.zeros(5), 1e-4, 200.0)

    def test_odd_window_output_is_a_window_member(self):
        rng = np.random.default_rng(9)
        x = rng.normal(size=50)
        window = 5
        got = median_filter(x, window / 200.0, 200.0)
        for i in range(window - 1, len(x)):
            assert got[i] in x[i - window + 1 : i + 1]

    def test_causality(self):
        rng = np.random.default_rng(11)
        x = rng.normal(size=40)
        base = median_filter(x, 5 / 200.0, 200.0)
        mutated = x.copy()
        mutated[25:] = 99.0
        np.testing.assert_array_equal(median_filter(mutated, 5 / 200.0, 200.0)[:25], base[:25])


class TestStreamingMedian:
    def test_matches_batch_median_filter(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=300)
        window = 9
        batch = median_filter(x, window / 200.0, 200.0)
        sm = StreamingMedian(window)
        stream = np.array([sm.push(float(v)) for v in x])
        np.testing.assert_array_equal(stream, batch)

    def test_copy_is_independent(self):
        sm = StreamingMedian(3)
        for v in (1.0, 2.0, 3.0):
            sm.push(v)
        clone = sm.copy()
        sm.push(100.0)
        assert clone.push(4.0) == 3.0

    def test_rejects_bad_window(self):
        with pytest.raises(ValueError, match=">= 1"):
            StreamingMedian(0)


class TestCheckUniform:
    def test_accepts_within_jitter(self):
        ts = np.arange(100) / 200.0
        ts[50] += 0.00004  # under 1% of 5 ms
        check_uniform(ts, 200.0)

    def test_short_streams_pass(self):
        check_uniform(np.array([0.0]), 200.0)
