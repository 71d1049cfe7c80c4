"""Long-recording inference: aggregate consecutive strip predictions over a
window by taking the label of the most confident strip."""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from ecgssl.errors import ConfigurationError
from ecgssl.evalharness.metrics import accuracy, f1_score

STRIP_SECONDS = 10


@dataclass(frozen=True)
class StripPrediction:
    recording_id: str
    start_s: float
    label: int
    confidence: float
    true_label: int | None = None

    @classmethod
    def from_probability(cls, recording_id, start_s, p, true_label=None):
        label = int(p >= 0.5)
        return cls(recording_id, float(start_s), label, float(max(p, 1.0 - p)), true_label)


@dataclass(frozen=True)
class WindowPrediction:
    recording_id: str
    start_s: float
    label: int
    confidence: float
    true_label: int | None = None


@dataclass
class WindowSweepResult:
    windows: list
    accuracy: list
    f1: list
    best_window: int

    def rows(self):
        return list(zip(self.windows, self.accuracy, self.f1))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["window_s", "accuracy", "f1"])
            for win, acc, f1 in self.rows():
                w.writerow([win, f"{acc:.6f}", f"{f1:.6f}"])


def _by_recording(strips):
    groups = defaultdict(list)
    for s in strips:
        groups[s.recording_id].append(s)
    return {rid: sorted(g, key=lambda s: s.start_s) for rid, g in sorted(groups.items())}


def windowed_inference(strips, window_s):
    """Cut each recording's time-ordered strips into consecutive windows of
    ``window_s`` seconds; each window takes the label of its most confident
    strip (earliest strip on ties).  A window longer than the recording
    covers all of it."""
    if window_s < STRIP_SECONDS or window_s % STRIP_SECONDS:
        raise ConfigurationError(f"window must be a positive multiple of {STRIP_SECONDS} s")
    per = window_s // STRIP_SECONDS
    out = []
    for rid, group in _by_recording(strips).items():
        for start in range(0, len(group), per):
            chunk = group[start : start + per]
            best = max(range(len(chunk)), key=lambda i: (chunk[i].confidence, -i))
            s = chunk[best]
            out.append(WindowPrediction(rid, chunk[0].start_s, s.label, s.confidence, s.true_label))
    return out


def window_grid(strips):
    """10 s up to the longest recording, in strip-length steps."""
    longest = max(len(g) for g in _by_recording(strips).values())
    return [STRIP_SECONDS * k for k in range(1, longest + 1)]


def sweep_window(strips, windows=None):
    """Window-level accuracy and F1 for each window size; the selected size
    maximizes F1 (smallest size on ties)."""
    windows = sorted(set(windows)) if windows is not None else window_grid(strips)
    if not windows:
        raise ConfigurationError("window sweep needs at least one window size")
    accs, f1s = [], []
    for w in windows:
        preds = windowed_inference(strips, w)
        y = np.asarray([p.true_label for p in preds])
        yhat = np.asarray([p.label for p in preds])
        accs.append(accuracy(y, yhat))
        f1s.append(f1_score(y, yhat))
    best = windows[int(np.argmax(f1s))]  # argmax returns the first maximum
    return WindowSweepResult(windows, accs, f1s, best)
