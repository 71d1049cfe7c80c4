import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ecgssl.errors import ConfigurationError, DataError
from ecgssl.sigproc import (
    CleanRecording,
    RawRecording,
    Segment,
    apply_filter,
    build_segment_table,
    design_bandpass,
    frequency_response,
    preprocess,
    resample,
    segment,
    znormalize,
    znormalize_array,
)
from oracles import sos_response


def rec(x, fs=100.0, label=1, cls=RawRecording):
    return cls("p1", "p1_v0", fs, np.asarray(x, dtype=float), label, 3)


@pytest.fixture(scope="module")
def default_filter():
    return design_bandpass(0.5, 40.0, 100.0)


def test_response_matches_polynomial_oracle(default_filter):
    f = np.linspace(0, 50, 101)
    np.testing.assert_allclose(frequency_response(default_filter, f),
                               sos_response(default_filter.sos, f, 100.0), rtol=1e-10, atol=1e-14)


def test_dc_rejected_and_passband_flat(default_filter):
    h0, h10, h49 = sos_response(default_filter.sos, [0.0, 10.0, 49.0], 100.0)
    assert h0 <= 1e-3
    assert 0.9 <= h10 <= 1.01
    assert h49 < h10


def test_poles_inside_unit_circle(default_filter):
    assert default_filter.is_stable()
    assert len(default_filter.poles()) == 4


@given(st.floats(0.05, 5.0), st.floats(5.5, 45.0), st.sampled_from([100.0, 128.0, 250.0, 360.0]))
def test_design_stable_over_valid_domain(low, high, fs):
    high = min(high, 0.49 * fs)
    assert design_bandpass(low, high, fs).is_stable()


@pytest.mark.parametrize("low,high,fs", [(0, 40, 100), (40, 10, 100), (0.5, 50, 100)])
def test_bad_band_edges(low, high, fs):
    with pytest.raises(ConfigurationError):
        design_bandpass(low, high, fs)


def test_zero_signal_stays_zero(default_filter):
    out = apply_filter(rec(np.zeros(3000)), default_filter)
    np.testing.assert_array_equal(out.samples, 0.0)


def test_slow_drift_attenuated(default_filter):
    t = np.arange(60000) / 100.0
    x = np.sin(2 * np.pi * 0.05 * t)
    y = apply_filter(rec(x), default_filter).samples
    core = slice(10000, 50000)  # skip edge transients
    ratio = np.sqrt(np.mean(y[core] ** 2) / np.mean(x[core] ** 2))
    assert 20 * np.log10(ratio) <= -20


def test_impulse_response_decays(default_filter):
    x = np.zeros(4000)
    x[2000] = 1.0
    y = apply_filter(rec(x), default_filter).samples
    assert np.isfinite(np.sum(y**2))
    assert np.max(np.abs(y[:200])) < 1e-3 * np.max(np.abs(y))
    assert np.max(np.abs(y[-200:])) < 1e-3 * np.max(np.abs(y))


def test_filter_rejects_wrong_rate(default_filter):
    with pytest.raises(ConfigurationError):
        apply_filter(rec(np.ones(100), fs=200.0), default_filter)


def test_raw_recording_validation():
    with pytest.raises(DataError):
        rec([1.0, np.nan])
    with pytest.raises(DataError):
        rec([])
    with pytest.raises(DataError):
        rec([1.0], fs=0.0)
    with pytest.raises(DataError):
        CleanRecording("p", "r", 200.0, np.ones(3))


def test_resample_identity_at_100hz(rng):
    x = rng.standard_normal(500)
    np.testing.assert_array_equal(resample(rec(x)).samples, x)


def test_resample_length_ratio():
    assert resample(rec(np.zeros(2000), fs=200.0)).samples.size == 1000


def test_resample_keeps_tone_bin():
    t = np.arange(4000) / 200.0
    y = resample(rec(np.sin(2 * np.pi * 5 * t), fs=200.0)).samples
    spec = np.abs(np.fft.rfft(y))
    freqs = np.fft.rfftfreq(y.size, d=1 / 100.0)
    assert freqs[np.argmax(spec)] == pytest.approx(5.0)


def test_resample_upsamples():
    out = resample(rec(np.arange(50.0), fs=50.0))
    assert out.samples.size == 100
    assert out.sample_rate_hz == 100.0


@given(st.sampled_from([100.0, 125.0, 200.0, 250.0, 500.0]))
def test_identity_fields_survive(fs):
    r = rec(np.ones(int(fs * 3)), fs=fs)
    out = preprocess(r)
    assert (out.patient_id, out.recording_id, out.label, out.visit_index) == ("p1", "p1_v0", 1, 3)
    assert out.sample_rate_hz == 100.0


@pytest.mark.parametrize("n,expected", [(180000, 180), (1000, 1), (1999, 1), (999, 0)])
def test_segment_counts(n, expected):
    segs, warned = segment(rec(np.zeros(n), cls=CleanRecording))
    assert len(segs) == expected
    assert warned == (expected == 0)


@given(st.integers(1, 30000))
def test_segment_count_is_floor(n):
    segs, _ = segment(rec(np.zeros(n), cls=CleanRecording))
    assert len(segs) == n // 1000
    assert all(s.values.size == 1000 for s in segs)
    assert [s.start_index for s in segs] == [1000 * k for k in range(n // 1000)]


def test_constant_segment_normalizes_to_zero():
    s = Segment("r", "p", 0, np.full(1000, 3.0))
    np.testing.assert_array_equal(znormalize(s).values, 0.0)


@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 1e3), st.floats(0.01, 100), st.floats(-1e3, 1e3))
def test_znormalize_definition_idempotence_affine(seed, spread, a, b):
    x = np.random.default_rng(seed).standard_normal(1000) * spread
    z = znormalize_array(x)
    assert abs(z.mean()) <= 1e-6
    assert abs(z.std() - 1) <= 1e-6
    np.testing.assert_allclose(znormalize_array(z), z, atol=1e-6)
    np.testing.assert_allclose(znormalize_array(a * x + b), z, atol=1e-5)


def test_segment_table_columns(small_table, small_corpus):
    assert small_table.values.shape[1] == 1000
    assert len(small_table) == len(small_corpus) * 6
    assert set(small_table.labels) == {0, 1}
    assert small_table.segment_ids()[0] == "sub0000_v0@0"


def test_segment_table_needs_a_full_segment():
    with pytest.raises(DataError):
        build_segment_table([rec(np.zeros(500))])
