"""Experiment configuration: nested dataclasses <-> JSON, plus a stable hash."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import asdict, dataclass, field

from ecgssl.encoder import EncoderConfig, TrainRecipe
from ecgssl.errors import ConfigurationError
from ecgssl.probes import ProbeKind
from ecgssl.ssl.pretrain import PretrainConfig
from ecgssl.synth import SyntheticSpec


@dataclass(frozen=True)
class Paths:
    manifest: str | None = None  # labeled evaluation cohort
    pretrain_manifest: str | None = None  # unlabeled pretraining cohort
    output_dir: str = "runs/default"
    checkpoint: str | None = None


@dataclass(frozen=True)
class SigprocConfig:
    low_hz: float = 0.5
    high_hz: float = 40.0
    stride_s: float = 10.0


@dataclass(frozen=True)
class CVConfig:
    k: int = 5
    label_budget: int | None = None
    inner_val_fraction: float = 0.2


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    paths: Paths = field(default_factory=Paths)
    sigproc: SigprocConfig = field(default_factory=SigprocConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    ssl: PretrainConfig = field(default_factory=PretrainConfig)
    probe: ProbeKind = field(default_factory=ProbeKind)
    cv: CVConfig = field(default_factory=CVConfig)
    supervised: TrainRecipe = field(default_factory=TrainRecipe)
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)
    window_grid: tuple | None = None
    jobs: int = 1

    def to_dict(self):
        return _plain(asdict(self))

    def config_hash(self):
        """sha256 over the resolved config minus the output location."""
        d = self.to_dict()
        d["paths"] = {k: v for k, v in d["paths"].items() if k != "output_dir"}
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


_SECTIONS = {
    "paths": Paths,
    "sigproc": SigprocConfig,
    "encoder": EncoderConfig,
    "ssl": PretrainConfig,
    "probe": ProbeKind,
    "cv": CVConfig,
    "supervised": TrainRecipe,
    "synthetic": SyntheticSpec,
}


def _build(cls, values):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ConfigurationError(f"unknown {cls.__name__} fields: {sorted(unknown)}")
    return cls(**values)


def config_from_dict(d):
    d = dict(d)
    kwargs = {}
    for name, cls in _SECTIONS.items():
        if name in d:
            kwargs[name] = _build(cls, d.pop(name) or {})
    if d.get("window_grid") is not None:
        d["window_grid"] = tuple(int(w) for w in d["window_grid"])
    unknown = set(d) - {"seed", "window_grid", "jobs"}
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    kwargs.update(d)
    return ExperimentConfig(**kwargs)


def load_config(path):
    with open(path) as fh:
        return config_from_dict(json.load(fh))


def override(cfg, section, **values):
    """Replace fields of one section (``None`` values are ignored)."""
    values = {k: v for k, v in values.items() if v is not None}
    if not values:
        return cfg
    if section is None:
        return dataclasses.replace(cfg, **values)
    sub = dataclasses.replace(getattr(cfg, section), **values)
    return dataclasses.replace(cfg, **{section: sub})


def with_seed(cfg, seed):
    """Propagate the experiment seed into every seeded section."""
    cfg = dataclasses.replace(cfg, seed=seed)
    cfg = override(cfg, "ssl", seed=seed)
    return override(cfg, "supervised", seed=seed)


def dump_config(cfg, path):
    doc = cfg.to_dict()
    doc["config_hash"] = cfg.config_hash()
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
