"""Versioned binary checkpoints.

Layout::

    b"ECGSSLCK"                      8-byte magic
    uint32 LE                        header length H
    H bytes                          UTF-8 JSON header (sorted keys)
    float64 LE values                parameters, concatenated in header order

The header carries ``format_version``, ``names``, ``shapes`` and a free
``meta`` mapping.  Equal parameters and meta give byte-identical files.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from ecgssl.errors import DataError

MAGIC = b"ECGSSLCK"
FORMAT_VERSION = 1


def dumps(named_arrays, meta=None):
    names = list(named_arrays)
    arrays = [np.asarray(named_arrays[n], dtype="<f8") for n in names]
    header = {
        "format_version": FORMAT_VERSION,
        "names": names,
        "shapes": [list(a.shape) for a in arrays],
        "meta": meta or {},
    }
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    body = b"".join(np.ascontiguousarray(a).tobytes() for a in arrays)
    return MAGIC + struct.pack("<I", len(hbytes)) + hbytes + body


def loads(blob):
    if blob[:8] != MAGIC:
        raise DataError("not a checkpoint (bad magic)")
    (hlen,) = struct.unpack("<I", blob[8:12])
    header = json.loads(blob[12 : 12 + hlen].decode())
    if header.get("format_version") != FORMAT_VERSION:
        raise DataError(f"unsupported checkpoint version {header.get('format_version')}")
    offset = 12 + hlen
    out = {}
    for name, shape in zip(header["names"], header["shapes"]):
        n = int(np.prod(shape)) if shape else 1
        end = offset + 8 * n
        if end > len(blob):
            raise DataError("checkpoint truncated")
        out[name] = np.frombuffer(blob[offset:end], dtype="<f8").reshape(shape).copy()
        offset = end
    if offset != len(blob):
        raise DataError("checkpoint has trailing bytes")
    return out, header["meta"]


def atomic_write_bytes(path, data):
    """Write to a sibling temp file then rename, so readers never see a partial file."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save(path, named_arrays, meta=None):
    atomic_write_bytes(path, dumps(named_arrays, meta))


def load(path):
    return loads(Path(path).read_bytes())
