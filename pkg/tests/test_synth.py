import numpy as np
import pytest

from ecgssl.errors import ConfigurationError
from ecgssl.evalharness.metrics import roc_auc
from ecgssl.synth import SyntheticSpec, generate_synthetic_corpus
from oracles import auc_pairwise, rr_cv


@pytest.fixture(scope="module")
def corpus():
    return generate_synthetic_corpus(
        SyntheticSpec(n_patients_per_class=10, recordings_per_patient=2, duration_s=120, seed=3)
    )


def test_same_seed_bit_identical():
    spec = SyntheticSpec(n_patients_per_class=2, duration_s=30, seed=11)
    a, b = generate_synthetic_corpus(spec), generate_synthetic_corpus(spec)
    assert [r.recording_id for r in a] == [r.recording_id for r in b]
    for x, y in zip(a, b):
        assert x.samples.tobytes() == y.samples.tobytes()


def test_different_seed_differs():
    a = generate_synthetic_corpus(SyntheticSpec(n_patients_per_class=1, duration_s=30, seed=1))
    b = generate_synthetic_corpus(SyntheticSpec(n_patients_per_class=1, duration_s=30, seed=2))
    assert not np.array_equal(a[0].samples, b[0].samples)


def test_layout(corpus):
    assert len(corpus) == 40
    assert {r.label for r in corpus} == {0, 1}
    for r in corpus:
        assert r.recording_id == f"{r.patient_id}_v{r.visit_index}"
        assert r.samples.size == 120 * 200


def test_unlabeled_spec():
    recs = generate_synthetic_corpus(SyntheticSpec(n_patients_per_class=1, duration_s=20, with_labels=False))
    assert all(r.label is None for r in recs)


@pytest.mark.parametrize("kw", [{"duration_s": 10}, {"n_patients_per_class": 0},
                                {"recordings_per_patient": 1}, {"sample_rate_hz": 50}])
def test_spec_validation(kw):
    with pytest.raises(ConfigurationError):
        SyntheticSpec(**kw)


def test_rr_variability_separates_classes(corpus):
    # independent peak detector, one value per patient (first visit)
    cv = {r.patient_id: (rr_cv(r.samples, r.sample_rate_hz), r.label)
          for r in corpus if r.visit_index == 0}
    y = [lab for _, lab in cv.values()]
    s = [v for v, _ in cv.values()]
    c0 = np.mean([v for v, lab in cv.values() if lab == 0])
    c1 = np.mean([v for v, lab in cv.values() if lab == 1])
    assert c1 > c0
    assert auc_pairwise(y, s) >= 0.85
    assert roc_auc(y, s) == pytest.approx(auc_pairwise(y, s))
