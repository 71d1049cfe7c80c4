import json

import numpy as np
import pytest

from ecgssl.encoder import Encoder, EncoderConfig, TrainRecipe
from ecgssl.errors import FoldError
from ecgssl.evalharness import experiments as E
from ecgssl.evalharness.experiments import (
    EvalConfig,
    LeakageError,
    audit_fold,
    run_ssl_experiment,
    run_supervised_experiment,
    write_audit,
)
from ecgssl.probes import ProbeKind

TINY = EncoderConfig((4, 8), kernel_size=5, stride=4, embedding_dim=8)
FOREST = ProbeKind(n_trees=10)


@pytest.fixture(scope="module")
def encoder():
    return Encoder(TINY, seed=0)


def test_ssl_audit_disjoint_and_complete(small_table, encoder):
    out = run_ssl_experiment(small_table, encoder, FOREST, EvalConfig(k=5, seed=1))
    assert len(out.report.folds) == 5
    seen = set()
    for rec in out.audit:
        assert not set(rec["train_patients"]) & set(rec["test_patients"])
        seen |= set(rec["test_patients"])
    assert seen == set(small_table.patient_ids)
    assert len(out.strips) == len(small_table)


def test_ssl_budget_and_determinism(small_table, encoder):
    cfg = EvalConfig(k=5, seed=2, label_budget=4)
    a = run_ssl_experiment(small_table, encoder, FOREST, cfg)
    b = run_ssl_experiment(small_table, encoder, FOREST, cfg)
    assert a.report.folds == b.report.folds
    assert all(len(r["train_patients"]) == 4 for r in a.audit)


def test_shuffled_labels_change_the_fit(small_table, encoder):
    base = run_ssl_experiment(small_table, encoder, FOREST, EvalConfig(k=5, seed=3))
    ctrl = run_ssl_experiment(small_table, encoder, FOREST, EvalConfig(k=5, seed=3, shuffle_labels=True))
    assert base.report.folds != ctrl.report.folds


def test_audit_fires_on_overlap(small_table):
    rows = np.arange(len(small_table))
    with pytest.raises(LeakageError):
        audit_fold(0, rows[:10], rows[:20], small_table)


def test_supervised_inner_validation_disjoint_and_deterministic(small_table, tmp_path):
    recipe = TrainRecipe(max_epochs=2, batch_size=16)
    cfg = EvalConfig(k=5, seed=0)
    a = run_supervised_experiment(small_table, cfg, TINY, recipe)
    b = run_supervised_experiment(small_table, cfg, TINY, recipe)
    assert a.report.folds == b.report.folds
    for rec in a.audit:
        val = set(rec["validation_patients"])
        assert val and not val & set(rec["test_patients"])
        assert val <= set(rec["train_patients"])
        assert 1 <= rec["best_epoch"] <= rec["epochs"]
    write_audit(tmp_path / "audit.jsonl", a.audit)
    lines = (tmp_path / "audit.jsonl").read_text().splitlines()
    assert [json.loads(x)["fold"] for x in lines] == [0, 1, 2, 3, 4]


def test_fold_failure_names_the_fold(small_table, encoder, monkeypatch):
    calls = []

    def flaky(*args):
        calls.append(1)
        if len(calls) == 3:
            raise FloatingPointError("overflow in probe")
        return real(*args)

    real = E.fit_probe
    monkeypatch.setattr(E, "fit_probe", flaky)
    with pytest.raises(FoldError) as info:
        run_ssl_experiment(small_table, encoder, FOREST, EvalConfig(k=5))
    assert info.value.fold == 2
    assert "fold 2" in str(info.value)


def test_headline_parallel_matches_serial():
    from dataclasses import replace

    from ecgssl.evalharness.headline import HeadlineConfig, run_headline
    from ecgssl.ssl.pretrain import PretrainConfig
    from ecgssl.synth import SyntheticSpec

    cfg = HeadlineConfig(
        seeds=(0, 1), methods=("pclr",), label_budget=4,
        pretrain_spec=SyntheticSpec(n_patients_per_class=5, duration_s=30),
        eval_spec=SyntheticSpec(n_patients_per_class=5, duration_s=30),
        ssl=PretrainConfig(epochs=1, batches_per_epoch=2, batch_size=8),
        encoder=TINY, probe=ProbeKind(n_trees=10), supervised=TrainRecipe(max_epochs=2),
    )
    serial = run_headline(replace(cfg, jobs=1))
    parallel = run_headline(replace(cfg, jobs=2))
    key = lambda r: [(s.seed, s.ssl_auc, s.control_auc, s.supervised_auc) for s in r.seeds]  # noqa: E731
    assert key(serial) == key(parallel)
    summary = serial.summary()
    assert summary["best_method"] == "pclr"
    assert summary["delta_abs"] == pytest.approx(summary["ssl_auc"]["pclr"] - summary["supervised_auc"])
