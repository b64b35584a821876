"""File formats: VMFB binary matrices, history CSVs and JSON helpers.

A VMFB record is the 4-byte magic ``b"VMFB"``, little-endian u32 rows, u32
cols, then rows*cols little-endian float64 values in row-major order.  An
instance file is a plain concatenation of records.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"VMFB"
_HEADER = struct.Struct("<4sII")

HISTORY_COLUMNS = ("k", "F", "gap", "alpha", "backtracks", "time_s")


class FormatError(ValueError):
    pass


def pack_matrix(a):
    a = np.asarray(a, dtype="<f8")
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise ValueError("only 1-D or 2-D arrays can be stored")
    rows, cols = a.shape
    return _HEADER.pack(MAGIC, rows, cols) + np.ascontiguousarray(a).tobytes()


def unpack_matrices(buf):
    out = []
    pos = 0
    while pos < len(buf):
        if len(buf) - pos < _HEADER.size:
            raise FormatError("truncated header")
        magic, rows, cols = _HEADER.unpack_from(buf, pos)
        if magic != MAGIC:
            raise FormatError(f"bad magic {magic!r} at offset {pos}")
        pos += _HEADER.size
        nbytes = 8 * rows * cols
        if len(buf) - pos < nbytes:
            raise FormatError("truncated payload")
        data = np.frombuffer(buf, dtype="<f8", count=rows * cols, offset=pos)
        out.append(data.reshape(rows, cols).astype(float))
        pos += nbytes
    return out


def save_matrix(path, a):
    Path(path).write_bytes(pack_matrix(a))


def load_matrix(path):
    mats = unpack_matrices(Path(path).read_bytes())
    if len(mats) != 1:
        raise FormatError(f"{path}: expected one record, found {len(mats)}")
    return mats[0]


def save_matrices(path, arrays):
    Path(path).write_bytes(b"".join(pack_matrix(a) for a in arrays))


def load_matrices(path):
    return unpack_matrices(Path(path).read_bytes())


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_history_csv(path, rows):
    """``rows`` are mappings holding at least :data:`HISTORY_COLUMNS`."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTORY_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in HISTORY_COLUMNS])


def read_history_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        out.append({
            "k": int(r["k"]),
            "F": float(r["F"]),
            "gap": float(r["gap"]),
            "alpha": float(r["alpha"]),
            "backtracks": int(r["backtracks"]),
            "time_s": float(r["time_s"]),
        })
    return out


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) if isinstance(v, (int, float, np.number)) else v for v in r])


def _default(v):
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, Path):
        return str(v)
    raise TypeError(f"cannot serialize {type(v).__name__}")


def write_json(path, obj):
    text = json.dumps(obj, indent=2, sort_keys=True, default=_default)
    Path(path).write_text(text + "\n", encoding="utf-8")


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True, default=_default) + "\n")


def read_jsonl(path):
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
