"""Synthetic single-lead ECG cohort.

Each beat is a sum of Gaussian bumps (P, Q, R, S, T) placed on an RR-interval
point process.  Controls (label 0) have a regular rhythm and a clear P wave;
P-AF subjects (label 1) have more RR variability, occasional premature
atrial beats, and an attenuated P wave.  Every patient also carries its own
nuisance morphology (heart rate, QRS/T amplitudes, noise) so that a model
fitted on a handful of patients can latch onto identity instead of class.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ecgssl.errors import ConfigurationError
from ecgssl.sigproc import RawRecording


@dataclass(frozen=True)
class SyntheticSpec:
    n_patients_per_class: int = 40
    recordings_per_patient: int = 2
    duration_s: float = 180.0
    sample_rate_hz: float = 200.0
    rr_cv_control: float = 0.03
    rr_cv_paf: float = 0.07
    ectopy_rate_paf: float = 0.04
    p_amp_control: float = 0.20
    p_amp_paf: float = 0.07
    p_amp_spread: float = 0.03
    noise_std: float = 0.04
    with_labels: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.duration_s < 20:
            raise ConfigurationError("synthetic recordings must last at least 20 s")
        if self.n_patients_per_class < 1:
            raise ConfigurationError("need at least one patient per class")
        if self.recordings_per_patient < 2:
            raise ConfigurationError("need at least two recordings per patient (cross-visit pairs)")
        if self.sample_rate_hz < 100:
            raise ConfigurationError("synthetic sample rate must be >= 100 Hz")


@dataclass(frozen=True)
class _Morphology:
    rr_mean: float
    rr_cv: float
    ectopy: float
    p_amp: float
    r_amp: float
    t_amp: float
    qrs_width: float
    t_width: float
    noise: float


def _patient_morphology(spec, label, rng):
    paf = label == 1
    p_center = spec.p_amp_paf if paf else spec.p_amp_control
    return _Morphology(
        rr_mean=rng.uniform(0.70, 1.05),
        rr_cv=(spec.rr_cv_paf if paf else spec.rr_cv_control) * rng.uniform(0.7, 1.3),
        ectopy=spec.ectopy_rate_paf if paf else 0.0,
        p_amp=max(0.01, rng.normal(p_center, spec.p_amp_spread)),
        r_amp=rng.uniform(0.8, 1.4),
        t_amp=rng.uniform(0.15, 0.45),
        qrs_width=rng.uniform(0.008, 0.014),
        t_width=rng.uniform(0.04, 0.06),
        noise=spec.noise_std * rng.uniform(0.6, 1.4),
    )


def _visit_morphology(m, rng):
    """Small per-recording drift around the patient's morphology."""
    return _Morphology(
        rr_mean=m.rr_mean * rng.uniform(0.94, 1.06),
        rr_cv=m.rr_cv,
        ectopy=m.ectopy,
        p_amp=m.p_amp * rng.uniform(0.9, 1.1),
        r_amp=m.r_amp * rng.uniform(0.9, 1.1),
        t_amp=m.t_amp * rng.uniform(0.9, 1.1),
        qrs_width=m.qrs_width,
        t_width=m.t_width,
        noise=m.noise,
    )


def rr_intervals(m, duration_s, rng):
    """RR sequence covering ``duration_s``: respiratory modulation plus
    AR(1) jitter, and premature beats with compensatory pauses."""
    n = int(duration_s / (m.rr_mean * 0.6)) + 4
    jitter = np.empty(n)
    e = rng.standard_normal(n)
    jitter[0] = e[0]
    for k in range(1, n):
        jitter[k] = 0.5 * jitter[k - 1] + np.sqrt(1 - 0.25) * e[k]
    t_beats = np.cumsum(np.full(n, m.rr_mean))
    resp = 0.02 * np.sin(2 * np.pi * 0.25 * t_beats + rng.uniform(0, 2 * np.pi))
    rr = m.rr_mean * (1.0 + resp + m.rr_cv * jitter)
    if m.ectopy > 0:
        early = np.flatnonzero(rng.random(n - 1) < m.ectopy)
        rr[early] *= 0.65
        rr[early + 1] *= 1.3
    return np.clip(rr, 0.33, 2.0)


_BUMPS = (
    # name, centre (s from R), width (s or attribute), amplitude (attribute or multiple of R)
    ("P", -0.17, 0.022, "p_amp"),
    ("Q", -0.025, 0.008, -0.12),
    ("R", 0.0, "qrs_width", 1.0),
    ("S", 0.028, 0.010, -0.22),
    ("T", 0.28, "t_width", "t_amp"),
)


def _beat_template(m, fs):
    t = np.arange(int(-0.35 * fs), int(0.6 * fs) + 1) / fs
    wave = np.zeros_like(t)
    for _, centre, width, amp in _BUMPS:
        w = getattr(m, width) if isinstance(width, str) else width
        a = getattr(m, amp) if isinstance(amp, str) else amp * m.r_amp
        wave += a * np.exp(-0.5 * ((t - centre) / w) ** 2)
    return wave, int(round(-0.35 * fs))


def synth_recording(m, duration_s, fs, rng):
    n = int(round(duration_s * fs))
    x = np.zeros(n)
    wave, offset = _beat_template(m, fs)
    rr = rr_intervals(m, duration_s, rng)
    beats = rng.uniform(0.1, 0.9) + np.concatenate([[0.0], np.cumsum(rr)])
    amp_jitter = 1.0 + 0.03 * rng.standard_normal(beats.size)
    for tb, aj in zip(beats, amp_jitter):
        start = int(round(tb * fs)) + offset
        lo, hi = max(start, 0), min(start + wave.size, n)
        if lo < hi:
            x[lo:hi] += aj * wave[lo - start : hi - start]
    t = np.arange(n) / fs
    x += 0.1 * np.sin(2 * np.pi * rng.uniform(0.15, 0.3) * t + rng.uniform(0, 2 * np.pi))
    x += m.noise * rng.standard_normal(n)
    return x


def generate_synthetic_corpus(spec=None):
    """Deterministic labeled corpus; patients alternate between classes."""
    spec = spec or SyntheticSpec()
    root = np.random.SeedSequence(spec.seed)
    n_total = 2 * spec.n_patients_per_class
    children = root.spawn(n_total)
    out = []
    for idx, child in enumerate(children):
        label = idx % 2
        rng = np.random.default_rng(child)
        base = _patient_morphology(spec, label, rng)
        pid = f"sub{idx:04d}"
        for visit in range(spec.recordings_per_patient):
            m = _visit_morphology(base, rng)
            x = synth_recording(m, spec.duration_s, spec.sample_rate_hz, rng)
            out.append(
                RawRecording(
                    patient_id=pid,
                    recording_id=f"{pid}_v{visit}",
                    sample_rate_hz=float(spec.sample_rate_hz),
                    samples=x,
                    label=label if spec.with_labels else None,
                    visit_index=visit,
                )
            )
    return out
