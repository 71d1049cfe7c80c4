"""Positive-pair, triplet and mask samplers.

All samplers work on a :class:`~ecgssl.sigproc.SegmentTable` and return
indices into it (plus the materialized views where augmentation applies),
so provenance constraints can be audited after the fact.
"""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from ecgssl.errors import ConfigurationError

log = logging.getLogger(__name__)


@dataclass
class PositivePairBatch:
    """2N views with rows (2k, 2k+1) forming positive pair k."""

    views: np.ndarray
    pair_index: np.ndarray  # (N, 2) source segment indices
    provenance: str

    def __post_init__(self):
        if len(self.views) % 2 or len(self.views) != 2 * len(self.pair_index):
            raise ConfigurationError("a pair batch holds exactly two views per pair")

    @property
    def n_pairs(self):
        return len(self.pair_index)


@dataclass
class TripletBatch:
    anchor: np.ndarray
    near: np.ndarray
    far: np.ndarray
    gap_near_s: float = 10.0
    gap_far_s: float = 120.0

    def __len__(self):
        return len(self.anchor)


# ---------------------------------------------------------------- augmentation


@dataclass(frozen=True)
class Augmentations:
    jitter_std: float = 0.05
    scale_low: float = 0.8
    scale_high: float = 1.25
    crop_fraction: float = 0.1
    enabled: bool = True

    @classmethod
    def disabled(cls):
        return cls(enabled=False)


def crop_resize(x, keep, offset):
    """Take ``keep`` samples starting at ``offset`` and stretch them back to len(x)."""
    n = x.size
    src = np.arange(keep) + offset
    return np.interp(np.linspace(0, keep - 1, n), np.arange(keep), x[src])


def augment(x, aug, rng):
    x = np.asarray(x, dtype=np.float64)
    if not aug.enabled:
        return x.copy()
    n = x.size
    keep = n - int(rng.integers(0, int(aug.crop_fraction * n) + 1))
    offset = int(rng.integers(0, n - keep + 1))
    y = crop_resize(x, keep, offset)
    y = y * rng.uniform(aug.scale_low, aug.scale_high)
    return y + aug.jitter_std * rng.standard_normal(n)


def sample_simclr_pairs(segments, indices, aug, rng):
    """Two independently augmented views of each selected segment."""
    indices = np.asarray(indices)
    views = np.empty((2 * len(indices), segments.shape[1]))
    for k, i in enumerate(indices):
        views[2 * k] = augment(segments[i], aug, rng)
        views[2 * k + 1] = augment(segments[i], aug, rng)
    return PositivePairBatch(views, np.stack([indices, indices], axis=1), "augmented")


# ---------------------------------------------------------------- mixup


def mixup_views(x1, x2, beta_alpha=0.5, rng=None, lam=None):
    """Convex mixture lam*x1 + (1-lam)*x2 with lam ~ Beta(alpha, alpha) unless forced."""
    if lam is None:
        rng = rng or np.random.default_rng()
        lam = float(rng.beta(beta_alpha, beta_alpha))
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    return lam * x1 + (1.0 - lam) * x2, lam


# ---------------------------------------------------------------- grouping helpers


def recording_index(table):
    """recording_id -> segment indices sorted by start time."""
    groups = defaultdict(list)
    for i, rid in enumerate(table.recording_ids):
        groups[rid].append(i)
    return {
        rid: sorted(idx, key=lambda i: table.start_index[i]) for rid, idx in sorted(groups.items())
    }


def patient_recordings(table):
    """patient_id -> {recording_id -> sorted segment indices}."""
    by_rec = recording_index(table)
    out = defaultdict(dict)
    for rid, idx in by_rec.items():
        out[table.patient_ids[idx[0]]][rid] = idx
    return dict(sorted(out.items()))


def sample_mixup_sources(table, n_pairs, rng, source="same_recording"):
    """Index pairs of two distinct, non-overlapping strips."""
    if source == "same_recording":
        pools = [idx for idx in recording_index(table).values() if len(idx) >= 2]
        if not pools:
            raise ConfigurationError("mixup needs a recording with at least two segments")
        out = []
        for r in rng.integers(0, len(pools), size=n_pairs):
            a, b = rng.choice(len(pools[r]), size=2, replace=False)
            out.append((pools[r][a], pools[r][b]))
        return np.asarray(out)
    if source == "any":
        if len(table) < 2:
            raise ConfigurationError("mixup needs at least two segments")
        return np.asarray([rng.choice(len(table), size=2, replace=False) for _ in range(n_pairs)])
    raise ConfigurationError(f"unknown mixup source {source!r}")


# ---------------------------------------------------------------- CLOCS


def clocs_pair_pool(table, segment_length=1000):
    """Disjoint adjacent pairs (k, k+1), (k+2, k+3), ... within each recording."""
    pool = []
    for rid, idx in recording_index(table).items():
        if len(idx) < 2:
            log.warning("clocs: recording %s has fewer than two segments, skipped", rid)
            continue
        for a, b in zip(idx[0::2], idx[1::2]):
            if table.start_index[b] - table.start_index[a] == segment_length:
                pool.append((a, b))
    if not pool:
        raise ConfigurationError("clocs needs recordings with at least two consecutive segments")
    return np.asarray(pool)


def sample_clocs_pairs(table, n_pairs, rng, pool=None):
    pool = clocs_pair_pool(table) if pool is None else pool
    pick = rng.choice(len(pool), size=n_pairs, replace=len(pool) < n_pairs)
    pairs = pool[pick]
    return PositivePairBatch(_views(table, pairs), pairs, "consecutive")


# ---------------------------------------------------------------- PCLR


def pclr_eligible(table):
    """Patients with at least two recordings, and the per-patient counts."""
    groups = patient_recordings(table)
    counts = {pid: len(recs) for pid, recs in groups.items()}
    eligible = {pid: recs for pid, recs in groups.items() if len(recs) >= 2}
    if not eligible:
        raise ConfigurationError(
            f"pclr needs a patient with >= 2 recordings; recording counts: {counts}"
        )
    return eligible


def sample_pclr_pairs(table, n_pairs, rng, eligible=None):
    """Each pair takes one strip from each of two different recordings of one
    patient; patients are distinct within a batch whenever enough exist."""
    eligible = pclr_eligible(table) if eligible is None else eligible
    pids = list(eligible)
    chosen = rng.choice(len(pids), size=n_pairs, replace=len(pids) < n_pairs)
    pairs = []
    for p in chosen:
        recs = eligible[pids[p]]
        rids = sorted(recs)
        ra, rb = rng.choice(len(rids), size=2, replace=False)
        a = recs[rids[ra]][rng.integers(len(recs[rids[ra]]))]
        b = recs[rids[rb]][rng.integers(len(recs[rids[rb]]))]
        pairs.append((a, b))
    pairs = np.asarray(pairs)
    return PositivePairBatch(_views(table, pairs), pairs, "cross-recording")


def _views(table, pairs):
    return table.values[pairs.reshape(-1)]


# ---------------------------------------------------------------- DEAPS triplets


def triplet_candidates(table, gap_near_s=10.0, gap_far_s=120.0, fs=100.0):
    """Per recording, anchors that have both a near and a far partner."""
    if not gap_near_s < gap_far_s:
        raise ConfigurationError("triplets need gap_near < gap_far")
    out = []
    for idx in recording_index(table).values():
        starts = table.start_index[idx] / fs
        for pos, i in enumerate(idx):
            d = np.abs(starts - starts[pos])
            near = [idx[j] for j in np.flatnonzero((d > 0) & (d <= gap_near_s))]
            far = [idx[j] for j in np.flatnonzero(d >= gap_far_s)]
            if near and far:
                out.append((i, near, far))
    if not out:
        raise ConfigurationError(
            f"deaps needs recordings longer than {gap_far_s + 10:g} s for far strips"
        )
    return out


def sample_deaps_triplets(table, n_triplets, rng, candidates=None, gap_near_s=10.0, gap_far_s=120.0):
    candidates = candidates or triplet_candidates(table, gap_near_s, gap_far_s)
    pick = rng.choice(len(candidates), size=n_triplets, replace=len(candidates) < n_triplets)
    a, n, f = [], [], []
    for c in pick:
        i, near, far = candidates[c]
        a.append(i)
        n.append(near[rng.integers(len(near))])
        f.append(far[rng.integers(len(far))])
    return TripletBatch(np.asarray(a), np.asarray(n), np.asarray(f), gap_near_s, gap_far_s)


# ---------------------------------------------------------------- masking


@dataclass(frozen=True)
class MaskSpec:
    patch_length: int = 50
    ratio: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.ratio <= 1.0:
            raise ConfigurationError(f"masking ratio must lie in [0, 1], got {self.ratio}")
        if self.patch_length < 1:
            raise ConfigurationError("patch length must be positive")

    def n_patches(self, length):
        return math.ceil(length / self.patch_length)

    def n_masked(self, length):
        return int(math.floor(self.ratio * self.n_patches(length) + 0.5))


def patch_mask(length, spec, rng):
    """Sample-level boolean mask covering exactly ``spec.n_masked`` patches."""
    n = spec.n_patches(length)
    chosen = rng.permutation(n)[: spec.n_masked(length)]
    patches = np.zeros(n, dtype=bool)
    patches[chosen] = True
    return np.repeat(patches, spec.patch_length)[:length]


def apply_mask(segment, spec, seed=None, rng=None):
    """Zero-fill masked patches; returns ``(masked, mask)``."""
    x = np.asarray(segment, dtype=np.float64)
    rng = rng if rng is not None else np.random.default_rng(seed)
    mask = patch_mask(x.size, spec, rng)
    return np.where(mask, 0.0, x), mask


def complementary_masks(n_rows, length, spec, rng):
    """Mask pairs for the two-view objective: mask_b is the exact complement."""
    a = np.stack([patch_mask(length, spec, rng) for _ in range(n_rows)])
    return a, ~a
