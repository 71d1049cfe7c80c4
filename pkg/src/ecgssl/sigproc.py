"""Single-lead ECG preprocessing: bandpass, resampling, segmentation,
z-normalization, plus the record types that flow through the pipeline."""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps

from ecgssl.errors import ConfigurationError, DataError

log = logging.getLogger(__name__)

TARGET_HZ = 100.0
SEGMENT_SECONDS = 10.0
SEGMENT_LENGTH = 1000
NORM_EPS = 1e-8


@dataclass(frozen=True)
class RawRecording:
    patient_id: str
    recording_id: str
    sample_rate_hz: float
    samples: np.ndarray = field(repr=False)
    label: int | None = None
    visit_index: int = 0

    def __post_init__(self):
        if not self.sample_rate_hz > 0:
            raise DataError(f"{self.recording_id}: sample rate must be positive")
        arr = np.asarray(self.samples, dtype=np.float64).reshape(-1)
        if arr.size == 0:
            raise DataError(f"{self.recording_id}: empty recording")
        if not np.all(np.isfinite(arr)):
            raise DataError(f"{self.recording_id}: non-finite samples")
        if self.label not in (None, 0, 1):
            raise DataError(f"{self.recording_id}: label must be 0, 1 or None")
        object.__setattr__(self, "samples", arr)

    @property
    def duration_s(self):
        return self.samples.size / self.sample_rate_hz

    def with_samples(self, samples, sample_rate_hz=None):
        return dataclasses.replace(
            self, samples=samples, sample_rate_hz=sample_rate_hz or self.sample_rate_hz
        )


class CleanRecording(RawRecording):
    """Bandpass-filtered recording at exactly 100 Hz."""

    def __post_init__(self):
        super().__post_init__()
        if self.sample_rate_hz != TARGET_HZ:
            raise DataError(f"{self.recording_id}: clean recordings are {TARGET_HZ:g} Hz")


@dataclass(frozen=True)
class Segment:
    recording_id: str
    patient_id: str
    start_index: int
    values: np.ndarray = field(repr=False)
    label: int | None = None

    @property
    def start_s(self):
        return self.start_index / TARGET_HZ


@dataclass(frozen=True)
class BandpassFilter:
    low_hz: float
    high_hz: float
    sample_rate_hz: float
    order: int
    sos: np.ndarray = field(repr=False)

    def poles(self):
        return np.concatenate([np.roots(section[3:]) for section in self.sos])

    def is_stable(self):
        return bool(np.all(np.abs(self.poles()) < 1.0))


def design_bandpass(low_hz=0.5, high_hz=40.0, sample_rate_hz=TARGET_HZ, order=2):
    """Butterworth bandpass as second-order sections (bilinear transform with
    prewarped band edges)."""
    nyquist = sample_rate_hz / 2.0
    if not (0 < low_hz < high_hz < nyquist):
        raise ConfigurationError(
            f"band edges must satisfy 0 < low < high < fs/2; got {low_hz}, {high_hz}, fs={sample_rate_hz}"
        )
    sos = sps.butter(order, [low_hz, high_hz], btype="bandpass", fs=sample_rate_hz, output="sos")
    return BandpassFilter(low_hz, high_hz, sample_rate_hz, order, sos)


def frequency_response(filt, freqs_hz):
    """|H(e^{jw})| evaluated directly from the section coefficients."""
    z = np.exp(1j * 2 * np.pi * np.asarray(freqs_hz, dtype=float) / filt.sample_rate_hz)
    h = np.ones_like(z)
    for b0, b1, b2, a0, a1, a2 in filt.sos:
        h *= (b0 + b1 / z + b2 / z**2) / (a0 + a1 / z + a2 / z**2)
    return np.abs(h)


def apply_filter(recording, filt):
    """Zero-phase (forward-backward) bandpass; identity fields untouched."""
    x = np.asarray(recording.samples, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise DataError(f"{recording.recording_id}: non-finite input sample")
    if not math.isclose(recording.sample_rate_hz, filt.sample_rate_hz):
        raise ConfigurationError(
            f"filter designed for {filt.sample_rate_hz} Hz, recording is {recording.sample_rate_hz} Hz"
        )
    padlen = min(3 * (2 * len(filt.sos) + 1), x.size - 1)
    y = sps.sosfiltfilt(filt.sos, x, padlen=max(padlen, 0))
    return recording.with_samples(y)


def resample(recording, target_hz=TARGET_HZ):
    """Linear interpolation onto a ``target_hz`` grid, after an anti-alias
    low-pass when downsampling.  Output length is round(n * target / fs)."""
    fs = float(recording.sample_rate_hz)
    if target_hz <= 0 or fs <= 0:
        raise ConfigurationError("sample rates must be positive")
    x = recording.samples
    n_out = int(round(x.size * target_hz / fs))
    if n_out < 1:
        raise ConfigurationError(f"{recording.recording_id}: too short to resample to {target_hz} Hz")
    if math.isclose(fs, target_hz):
        y = x.copy()
    else:
        if target_hz < fs and x.size > 27:
            sos = sps.butter(8, 0.45 * target_hz, btype="lowpass", fs=fs, output="sos")
            x = sps.sosfiltfilt(sos, x)
        t_out = np.arange(n_out) / target_hz
        t_in = np.arange(x.size) / fs
        y = np.interp(t_out, t_in, x)
    return CleanRecording(
        recording.patient_id,
        recording.recording_id,
        float(target_hz),
        y,
        recording.label,
        recording.visit_index,
    ) if target_hz == TARGET_HZ else recording.with_samples(y, float(target_hz))


def preprocess(recording, filt=None):
    """Resample to 100 Hz, then bandpass 0.5-40 Hz."""
    clean = resample(recording, TARGET_HZ)
    filt = filt or design_bandpass(0.5, 40.0, TARGET_HZ)
    return apply_filter(clean, filt)


def segment(recording, stride_s=SEGMENT_SECONDS, length=SEGMENT_LENGTH):
    """Cut non-overlapping (by default) 10 s windows; the remainder is dropped.

    Returns ``(segments, warned)`` where ``warned`` flags a recording shorter
    than one segment.
    """
    x = recording.samples
    stride = int(round(stride_s * recording.sample_rate_hz))
    if stride < 1:
        raise ConfigurationError("segment stride must be at least one sample")
    if x.size < length:
        log.warning("%s: %d samples, shorter than one segment", recording.recording_id, x.size)
        return [], True
    starts = range(0, x.size - length + 1, stride)
    segs = [
        Segment(recording.recording_id, recording.patient_id, s, x[s : s + length].copy(),
                recording.label)
        for s in starts
    ]
    return segs, False


def znormalize_array(x, eps=NORM_EPS):
    """Row-wise z-score with population std; near-constant rows map to zeros."""
    x = np.asarray(x, dtype=np.float64)
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    sd = np.sqrt((centered**2).mean(axis=-1, keepdims=True))
    safe = np.where(sd > eps, sd, 1.0)
    return np.where(sd > eps, centered / safe, 0.0)


def znormalize(seg):
    return dataclasses.replace(seg, values=znormalize_array(seg.values))


@dataclass
class SegmentTable:
    """Column-oriented view of many normalized segments."""

    values: np.ndarray
    patient_ids: np.ndarray
    recording_ids: np.ndarray
    start_index: np.ndarray
    labels: np.ndarray  # -1 where unlabeled

    def __len__(self):
        return len(self.values)

    def subset(self, mask):
        return SegmentTable(
            self.values[mask], self.patient_ids[mask], self.recording_ids[mask],
            self.start_index[mask], self.labels[mask],
        )

    def segment_ids(self):
        return [f"{r}@{s}" for r, s in zip(self.recording_ids, self.start_index)]


def build_segment_table(recordings, filt=None, stride_s=SEGMENT_SECONDS):
    """Preprocess, segment and z-normalize every recording."""
    filt = filt or design_bandpass(0.5, 40.0, TARGET_HZ)
    vals, pids, rids, starts, labels = [], [], [], [], []
    for rec in recordings:
        clean = preprocess(rec, filt)
        segs, _ = segment(clean, stride_s)
        for s in segs:
            vals.append(s.values)
            pids.append(rec.patient_id)
            rids.append(rec.recording_id)
            starts.append(s.start_index)
            labels.append(-1 if getattr(rec, "label", None) is None else rec.label)
    if not vals:
        raise DataError("no recording yields a full segment")
    return SegmentTable(
        znormalize_array(np.stack(vals)),
        np.asarray(pids, dtype=object),
        np.asarray(rids, dtype=object),
        np.asarray(starts, dtype=np.int64),
        np.asarray(labels, dtype=np.int64),
    )
