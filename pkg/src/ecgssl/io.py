"""Dataset manifests and signal files.

A manifest is a JSON array of objects with keys ``patient_id``,
``recording_id``, ``label`` (0, 1 or null), ``visit_index``,
``sample_rate_hz`` and ``path``.  Paths are resolved relative to the
manifest's directory.  Signal files are either ``.csv`` (one decimal sample
per line) or ``.f32`` (raw little-endian float32).
"""

from __future__ import annotations

import json
import os
import shutil
import tempfile
from pathlib import Path

import numpy as np

from ecgssl.errors import DataError
from ecgssl.sigproc import RawRecording

MANIFEST_KEYS = ("patient_id", "recording_id", "label", "visit_index", "sample_rate_hz", "path")


def read_signal(path):
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".f32":
        return np.fromfile(path, dtype="<f4").astype(np.float64)
    if suffix == ".csv":
        try:
            return np.loadtxt(path, dtype=np.float64, ndmin=1)
        except ValueError as exc:
            raise DataError(f"{path}: {exc}") from None
    raise DataError(f"{path}: unknown signal format {suffix!r} (expected .csv or .f32)")


def write_signal(path, samples):
    path = Path(path)
    x = np.asarray(samples, dtype=np.float64)
    if path.suffix == ".f32":
        x.astype("<f4").tofile(path)
    elif path.suffix == ".csv":
        with open(path, "w") as fh:
            fh.writelines(f"{v:.7g}\n" for v in x)
    else:
        raise DataError(f"{path}: unknown signal format")


def read_manifest(path):
    path = Path(path)
    try:
        entries = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(entries, list):
        raise DataError(f"{path}: manifest must be a JSON array")
    out = []
    for i, e in enumerate(entries):
        missing = [k for k in MANIFEST_KEYS if k not in e]
        if missing:
            raise DataError(f"{path}: entry {i} lacks {missing}")
        out.append(
            RawRecording(
                patient_id=str(e["patient_id"]),
                recording_id=str(e["recording_id"]),
                sample_rate_hz=float(e["sample_rate_hz"]),
                samples=read_signal(path.parent / e["path"]),
                label=None if e["label"] is None else int(e["label"]),
                visit_index=int(e["visit_index"]),
            )
        )
    return out


def manifest_entry(rec, rel_path):
    return {
        "patient_id": rec.patient_id,
        "recording_id": rec.recording_id,
        "label": rec.label,
        "visit_index": rec.visit_index,
        "sample_rate_hz": rec.sample_rate_hz,
        "path": rel_path,
    }


def write_corpus(out_dir, recordings, fmt="f32"):
    """Write ``manifest.json`` and ``signals/*`` into ``out_dir``.

    Everything is staged in a sibling temporary directory and moved into
    place at the end, so a failure leaves no partial corpus behind.
    """
    out_dir = Path(out_dir)
    if fmt not in ("f32", "csv"):
        raise DataError(f"unknown signal format {fmt!r}")
    if out_dir.exists() and (not out_dir.is_dir() or any(out_dir.iterdir())):
        raise FileExistsError(f"{out_dir} exists and is not an empty directory")
    parent = out_dir.parent
    if not parent.is_dir():
        raise FileNotFoundError(f"parent directory {parent} does not exist")
    stage = Path(tempfile.mkdtemp(dir=parent, prefix=f".{out_dir.name}.stage-"))
    try:
        (stage / "signals").mkdir()
        entries = []
        for rec in recordings:
            rel = f"signals/{rec.recording_id}.{fmt}"
            write_signal(stage / rel, rec.samples)
            entries.append(manifest_entry(rec, rel))
        with open(stage / "manifest.json", "w") as fh:
            json.dump(entries, fh, indent=1)
            fh.write("\n")
        if out_dir.exists():
            out_dir.rmdir()
        os.replace(stage, out_dir)
    except BaseException:
        shutil.rmtree(stage, ignore_errors=True)
        raise
    return out_dir / "manifest.json"
