"""Stratified, patient-wise cross-validation splits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ecgssl.errors import ConfigurationError, DataError


@dataclass(frozen=True)
class FoldSplit:
    fold: int
    train_patients: tuple
    test_patients: tuple


def patient_labels(records):
    """patient_id -> label from records (recordings or any object with
    ``patient_id`` and ``label``); labels must agree within a patient."""
    out = {}
    for r in records:
        if r.label is None:
            raise DataError(f"{r.patient_id}: unlabeled record in a labeled evaluation")
        prev = out.setdefault(r.patient_id, int(r.label))
        if prev != int(r.label):
            raise DataError(f"{r.patient_id}: inconsistent labels across recordings")
    return dict(sorted(out.items()))


def make_stratified_patient_folds(labels_by_patient, k=5, seed=0):
    """Shuffle patients within each class, then deal them round-robin into
    ``k`` test folds so per-fold class counts differ by at most one."""
    by_class = {}
    for pid, lab in sorted(labels_by_patient.items()):
        by_class.setdefault(lab, []).append(pid)
    counts = {lab: len(p) for lab, p in by_class.items()}
    if len(by_class) < 2 or min(counts.values()) < k:
        raise ConfigurationError(f"need >= {k} patients per class for {k}-fold CV, have {counts}")
    rng = np.random.default_rng(seed)
    test = [[] for _ in range(k)]
    offset = 0
    for lab in sorted(by_class):
        pids = by_class[lab]
        order = rng.permutation(len(pids))
        for j, i in enumerate(order):
            test[(offset + j) % k].append(pids[i])
        # continue dealing where the previous class stopped so totals stay balanced
        offset = (offset + len(pids)) % k
    everyone = sorted(labels_by_patient)
    splits = []
    for f in range(k):
        t = sorted(test[f])
        ts = set(t)
        splits.append(FoldSplit(f, tuple(p for p in everyone if p not in ts), tuple(t)))
    return splits


def restrict_budget(train_patients, labels_by_patient, budget, seed=0):
    """Stratified subset of ``budget`` training patients (half per class,
    rounding toward the larger class)."""
    if budget is None or budget >= len(train_patients):
        return tuple(sorted(train_patients))
    rng = np.random.default_rng(seed)
    by_class = {}
    for p in sorted(train_patients):
        by_class.setdefault(labels_by_patient[p], []).append(p)
    classes = sorted(by_class)
    if budget < len(classes):
        raise ConfigurationError(f"labeled budget {budget} cannot cover {len(classes)} classes")
    per = {c: budget // len(classes) for c in classes}
    for c in classes[: budget % len(classes)]:
        per[c] += 1
    chosen = []
    for c in classes:
        pool = by_class[c]
        if len(pool) < per[c]:
            raise ConfigurationError(f"class {c} has {len(pool)} training patients, budget wants {per[c]}")
        chosen += [pool[i] for i in sorted(rng.permutation(len(pool))[: per[c]])]
    return tuple(sorted(chosen))


def inner_validation_split(train_patients, labels_by_patient, fraction=0.2, seed=0):
    """Hold out ``fraction`` of training patients (at least one per class)
    for early stopping.  Returns ``(train_proper, validation)``."""
    rng = np.random.default_rng(seed)
    by_class = {}
    for p in sorted(train_patients):
        by_class.setdefault(labels_by_patient[p], []).append(p)
    val = []
    for c in sorted(by_class):
        pool = by_class[c]
        n_val = max(1, int(round(fraction * len(pool))))
        if n_val >= len(pool):
            raise ConfigurationError(f"class {c} too small for an inner validation split")
        val += [pool[i] for i in rng.permutation(len(pool))[:n_val]]
    val_set = set(val)
    return tuple(p for p in sorted(train_patients) if p not in val_set), tuple(sorted(val))
