import json
import os

import numpy as np
import pytest

from ecgssl import config as C
from ecgssl import io
from ecgssl.errors import ConfigurationError, DataError
from ecgssl.numcore import checkpoint
from ecgssl.synth import SyntheticSpec, generate_synthetic_corpus


def test_config_roundtrip_and_hash(tmp_path):
    cfg = C.override(C.with_seed(C.ExperimentConfig(), 7), "cv", label_budget=8)
    cfg = C.override(cfg, None, window_grid=(10, 20))
    path = tmp_path / "c.json"
    C.dump_config(cfg, path)
    doc = json.loads(path.read_text())
    assert doc.pop("config_hash") == cfg.config_hash()
    back = C.config_from_dict(doc)
    assert back == cfg
    assert back.ssl.seed == back.supervised.seed == 7


def test_hash_ignores_output_dir_only():
    cfg = C.ExperimentConfig()
    moved = C.override(cfg, "paths", output_dir="elsewhere")
    assert moved.config_hash() == cfg.config_hash()
    assert C.with_seed(cfg, 1).config_hash() != cfg.config_hash()
    assert C.override(cfg, "ssl", temperature=0.2).config_hash() != cfg.config_hash()


def test_override_ignores_none():
    cfg = C.ExperimentConfig()
    assert C.override(cfg, "ssl", method=None) is cfg


def test_unknown_keys_rejected():
    with pytest.raises(ConfigurationError):
        C.config_from_dict({"colour": "red"})
    with pytest.raises(ConfigurationError):
        C.config_from_dict({"probe": {"kind": "random_forest", "depth": 3}})


@pytest.mark.parametrize("suffix", [".f32", ".csv"])
def test_signal_roundtrip(tmp_path, suffix, rng):
    x = rng.standard_normal(300)
    io.write_signal(tmp_path / f"s{suffix}", x)
    np.testing.assert_allclose(io.read_signal(tmp_path / f"s{suffix}"), x, rtol=1e-6, atol=1e-7)


def test_unknown_signal_format(tmp_path):
    (tmp_path / "s.wav").write_bytes(b"RIFF")
    with pytest.raises(DataError):
        io.read_signal(tmp_path / "s.wav")


def test_corpus_manifest_roundtrip(tmp_path):
    recs = generate_synthetic_corpus(SyntheticSpec(n_patients_per_class=1, duration_s=20, seed=5))
    manifest = io.write_corpus(tmp_path / "c", recs)
    back = io.read_manifest(manifest)
    assert [(r.patient_id, r.recording_id, r.label, r.visit_index) for r in back] == \
        [(r.patient_id, r.recording_id, r.label, r.visit_index) for r in recs]
    np.testing.assert_allclose(back[0].samples, recs[0].samples, rtol=1e-6, atol=1e-6)


def test_manifest_errors(tmp_path):
    bad = tmp_path / "m.json"
    bad.write_text("{not json")
    with pytest.raises(DataError):
        io.read_manifest(bad)
    bad.write_text(json.dumps([{"patient_id": "p"}]))
    with pytest.raises(DataError, match="lacks"):
        io.read_manifest(bad)


def test_failed_corpus_write_leaves_nothing(tmp_path, monkeypatch):
    recs = generate_synthetic_corpus(SyntheticSpec(n_patients_per_class=1, duration_s=20))

    def fail(path, samples):
        raise OSError("disk full")

    monkeypatch.setattr(io, "write_signal", fail)
    with pytest.raises(OSError):
        io.write_corpus(tmp_path / "c", recs)
    assert os.listdir(tmp_path) == []


def test_interrupted_checkpoint_write_keeps_old_file(tmp_path, monkeypatch):
    path = tmp_path / "enc.ckpt"
    checkpoint.save(path, {"w": np.ones(3)})
    before = path.read_bytes()

    def fail(*args):
        raise KeyboardInterrupt

    monkeypatch.setattr(checkpoint.os, "replace", fail)
    with pytest.raises(KeyboardInterrupt):
        checkpoint.save(path, {"w": np.zeros(3)})
    assert path.read_bytes() == before
    assert os.listdir(tmp_path) == ["enc.ckpt"]
