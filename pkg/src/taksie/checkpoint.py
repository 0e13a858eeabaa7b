"""Checkpoint persistence for parameter sets.

Layout: a `TAKSIE-CKPT v1` header line, a version/count line, then one record
per entry: a text line `name dim0 dim1 ...` followed by the row-major data as
little-endian 64-bit floats.  Round trips are byte-exact.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np

from .nn import ParameterSet

HEADER = b"TAKSIE-CKPT v1\n"


def save_params(params: ParameterSet, path: str | Path) -> None:
    params.validate()
    buf = io.BytesIO()
    buf.write(HEADER)
    buf.write(f"version {params.version} entries {len(params.entries)}\n".encode())
    for name, arr in params.entries.items():
        if any(c.isspace() for c in name):
            raise ValueError(f"entry name {name!r} may not contain whitespace")
        dims = " ".join(str(d) for d in arr.shape) if arr.ndim else "0"
        buf.write(f"{name} {dims}\n".encode())
        buf.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    Path(path).write_bytes(buf.getvalue())


def _read_line(f: io.BufferedReader, what: str) -> str:
    line = f.readline()
    if not line.endswith(b"\n"):
        raise ValueError(f"truncated checkpoint: incomplete {what}")
    return line[:-1].decode()


def load_params(path: str | Path) -> ParameterSet:
    with open(path, "rb") as f:
        if f.readline() != HEADER:
            raise ValueError(f"{path}: missing TAKSIE-CKPT v1 header")
        meta = _read_line(f, "metadata line").split()
        if len(meta) != 4 or meta[0] != "version" or meta[2] != "entries":
            raise ValueError(f"{path}: malformed metadata line")
        version, count = int(meta[1]), int(meta[3])
        entries: dict[str, np.ndarray] = {}
        for i in range(count):
            fields = _read_line(f, f"record {i}").split()
            name = fields[0]
            shape = tuple(int(d) for d in fields[1:])
            if shape == (0,):
                shape = ()
            n = int(np.prod(shape)) if shape else 1
            raw = f.read(8 * n)
            if len(raw) != 8 * n:
                raise ValueError(f"{path}: truncated data for record {i} ({name!r})")
            entries[name] = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)
        if f.read(1):
            raise ValueError(f"{path}: trailing bytes after last record")
    ps = ParameterSet(entries, version)
    ps.validate()
    return ps
