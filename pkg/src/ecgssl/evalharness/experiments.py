"""Cross-validated SSL-probe and supervised experiments with a leakage audit."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ecgssl.encoder import EncoderConfig, TrainRecipe, embed_segments, train_supervised
from ecgssl.errors import ConfigurationError, DataError, FoldError
from ecgssl.evalharness.folds import (
    inner_validation_split,
    make_stratified_patient_folds,
    restrict_budget,
)
from ecgssl.evalharness.metrics import MetricsReport, compute_metrics
from ecgssl.evalharness.windowing import StripPrediction
from ecgssl.probes import ProbeKind, fit_probe, predict_proba

log = logging.getLogger(__name__)


class LeakageError(DataError):
    """A test patient's segment reached a model's training data."""


@dataclass(frozen=True)
class EvalConfig:
    k: int = 5
    seed: int = 0
    label_budget: int | None = None  # training patients per fold, None = all
    shuffle_labels: bool = False  # permutation-null control
    inner_val_fraction: float = 0.2
    jobs: int = 1


@dataclass
class ExperimentOutput:
    report: MetricsReport
    strips: list
    audit: list = field(default_factory=list)


def table_patient_labels(table):
    out = {}
    for pid, lab in zip(table.patient_ids, table.labels):
        if lab < 0:
            raise DataError(f"{pid}: unlabeled segment in a labeled evaluation")
        prev = out.setdefault(pid, int(lab))
        if prev != int(lab):
            raise DataError(f"{pid}: inconsistent labels")
    return dict(sorted(out.items()))


def audit_fold(fold, train_rows, test_rows, table, extra=None):
    """Check patient disjointness of the rows actually used, return the record."""
    train_p = set(table.patient_ids[train_rows])
    test_p = set(table.patient_ids[test_rows])
    overlap = train_p & test_p
    if overlap:
        raise LeakageError(f"fold {fold}: patients in both train and test: {sorted(overlap)}")
    rec = {
        "fold": fold,
        "train_patients": sorted(train_p),
        "test_patients": sorted(test_p),
        "n_train_segments": int(len(train_rows)),
        "n_test_segments": int(len(test_rows)),
    }
    rec.update(extra or {})
    return rec


def _guarded(fold, fn, *args):
    """Run one fold, tagging runtime failures with the fold index.
    Configuration problems and leakage pass through unchanged."""
    try:
        return fn(*args)
    except (ConfigurationError, LeakageError, FoldError):
        raise
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        raise FoldError(fold, exc) from exc


def _fold_rows(table, split, labels, cfg):
    train_patients = restrict_budget(split.train_patients, labels, cfg.label_budget,
                                     seed=cfg.seed * 1000 + split.fold)
    train_rows = np.flatnonzero(np.isin(table.patient_ids, list(train_patients)))
    test_rows = np.flatnonzero(np.isin(table.patient_ids, list(split.test_patients)))
    return train_patients, train_rows, test_rows


def _strips(table, rows, scores):
    return [
        StripPrediction.from_probability(
            table.recording_ids[i], table.start_index[i] / 100.0, float(p), int(table.labels[i])
        )
        for i, p in zip(rows, scores)
    ]


def _score(table, test_rows, scores):
    y = table.labels[test_rows]
    return compute_metrics(y, (scores >= 0.5).astype(np.int64), scores)


def run_ssl_experiment(table, encoder, probe_kind=None, cfg=None, meta=None):
    """Frozen-encoder embeddings, probe fitted per fold on training patients,
    segment-level metrics on test patients."""
    cfg = cfg or EvalConfig()
    probe_kind = probe_kind or ProbeKind()
    labels = table_patient_labels(table)
    splits = make_stratified_patient_folds(labels, cfg.k, cfg.seed)
    emb = embed_segments(encoder, table.values)
    folds, strips, audit = [], [], []
    for split in splits:
        _, train_rows, test_rows = _fold_rows(table, split, labels, cfg)
        audit.append(audit_fold(split.fold, train_rows, test_rows, table, meta))
        y_train = table.labels[train_rows].copy()
        if cfg.shuffle_labels:
            y_train = np.random.default_rng(cfg.seed * 7919 + split.fold).permutation(y_train)
        probe = _guarded(split.fold, fit_probe, emb[train_rows], y_train, probe_kind,
                         cfg.seed * 100 + split.fold)
        scores = predict_proba(probe, emb[test_rows])
        folds.append(_guarded(split.fold, _score, table, test_rows, scores))
        strips += _strips(table, test_rows, scores)
    report = MetricsReport(folds, dict(meta or {}, probe=probe_kind.kind, seed=cfg.seed))
    return ExperimentOutput(report, strips, audit)


def _supervised_fold(args):
    return _guarded(args[1].fold, _supervised_fold_body, *args)


def _supervised_fold_body(table, split, labels, cfg, enc_cfg, recipe):
    train_patients, train_rows, test_rows = _fold_rows(table, split, labels, cfg)
    proper, val = inner_validation_split(train_patients, labels, cfg.inner_val_fraction,
                                         seed=cfg.seed * 1000 + split.fold)
    proper_rows = np.flatnonzero(np.isin(table.patient_ids, list(proper)))
    val_rows = np.flatnonzero(np.isin(table.patient_ids, list(val)))
    rec = audit_fold(split.fold, train_rows, test_rows, table,
                     {"validation_patients": sorted(val)})
    if set(val) & set(split.test_patients) or set(val) & set(proper):
        raise LeakageError(f"fold {split.fold}: validation patients overlap train or test")
    y = table.labels
    y_train = y[proper_rows].copy()
    if cfg.shuffle_labels:
        y_train = np.random.default_rng(cfg.seed * 7919 + split.fold).permutation(y_train)
    fold_recipe = TrainRecipe(**dict(asdict(recipe), seed=recipe.seed + 7 * split.fold + cfg.seed * 101))
    result = train_supervised(table.values[proper_rows], y_train, table.values[val_rows],
                              y[val_rows], enc_cfg, fold_recipe)
    scores = result.predict_proba(table.values[test_rows])
    rec["epochs"] = len(result.val_losses)
    rec["best_epoch"] = result.best_epoch
    rec["train_losses"] = result.train_losses
    rec["val_losses"] = result.val_losses
    return _score(table, test_rows, scores), _strips(table, test_rows, scores), rec


def run_supervised_experiment(table, cfg=None, encoder_config=None, recipe=None, meta=None):
    """End-to-end CNN per fold, early-stopped on an inner validation split of
    the (budgeted) training patients."""
    cfg = cfg or EvalConfig()
    recipe = recipe or TrainRecipe()
    enc_cfg = encoder_config or EncoderConfig()
    labels = table_patient_labels(table)
    splits = make_stratified_patient_folds(labels, cfg.k, cfg.seed)
    jobs = [(table, s, labels, cfg, enc_cfg, recipe) for s in splits]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(cfg.jobs) as pool:
            results = list(pool.map(_supervised_fold, jobs))
    else:
        results = [_supervised_fold(j) for j in jobs]
    folds = [r[0] for r in results]
    strips = [s for r in results for s in r[1]]
    audit = [dict(r[2], **(meta or {})) for r in results]
    report = MetricsReport(folds, dict(meta or {}, probe="supervised", seed=cfg.seed))
    return ExperimentOutput(report, strips, audit)


def write_audit(path, audit):
    with open(path, "w") as fh:
        for rec in audit:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
