"""Serialization of operators and measurements, and report writers.

Text operator format::

    # qdefinetti-operator 1
    # factor_dims: 2 2
    # flags: hermitian psd
    re,im,re,im,...        (one line per matrix row, 2 * dim numbers)

Binary operator format (little endian): magic ``b"QDFOP1\\0\\0"``, ``uint32``
factor count ``m``, ``m`` ``uint32`` dims, one ``uint8`` flag byte (bit 0
hermitian, bit 1 psd), then the row-major entries as ``complex128``.
"""

from __future__ import annotations

import csv
import json
import math
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import Operator
from .measurements import Measurement

MAGIC = b"QDFOP1\0\0"
TEXT_HEADER = "# qdefinetti-operator 1"


def _flags(op: Operator) -> list[str]:
    out = []
    if op.hermitian:
        out.append("hermitian")
        if op.psd:
            out.append("psd")
    return out


def write_operator_text(op: Operator, path) -> None:
    lines = [TEXT_HEADER, "# factor_dims: " + " ".join(map(str, op.factor_dims)), "# flags: " + " ".join(_flags(op))]
    for row in op.data:
        pairs = np.stack([row.real, row.imag], axis=1).ravel()
        lines.append(",".join(repr(float(x)) for x in pairs))
    Path(path).write_text("\n".join(lines) + "\n")


def read_operator_text(path) -> Operator:
    text = Path(path).read_text().splitlines()
    if not text or text[0].strip() != TEXT_HEADER:
        raise ValueError("not a qdefinetti text operator file")
    dims = None
    rows = []
    for line in text[1:]:
        if line.startswith("# factor_dims:"):
            dims = tuple(int(x) for x in line.split(":", 1)[1].split())
        elif line.startswith("#") or not line.strip():
            continue
        else:
            vals = np.array([float(x) for x in line.split(",")])
            rows.append(vals[0::2] + 1j * vals[1::2])
    if dims is None:
        raise ValueError("missing factor_dims header")
    data = np.array(rows)
    n = math.prod(dims)
    if data.shape != (n, n):
        raise ValueError(f"expected {n}x{n} entries, found {data.shape}")
    return Operator(data, dims)


def write_operator_binary(op: Operator, path) -> None:
    flags = _flags(op)
    fb = (1 if "hermitian" in flags else 0) | (2 if "psd" in flags else 0)
    head = MAGIC + struct.pack("<I", len(op.factor_dims)) + struct.pack(f"<{len(op.factor_dims)}I", *op.factor_dims)
    head += struct.pack("<B", fb)
    Path(path).write_bytes(head + np.ascontiguousarray(op.data, dtype="<c16").tobytes())


def read_operator_binary(path) -> Operator:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise ValueError("not a qdefinetti binary operator file")
    (m,) = struct.unpack_from("<I", raw, 8)
    dims = struct.unpack_from(f"<{m}I", raw, 12)
    off = 12 + 4 * m + 1
    n = math.prod(dims)
    data = np.frombuffer(raw, dtype="<c16", count=n * n, offset=off).reshape(n, n)
    return Operator(data.astype(complex), tuple(dims))


def measurement_to_json(lam: Measurement) -> dict:
    return {
        "dim": lam.dim,
        "labels": list(lam.labels),
        "elements": [[[[float(z.real), float(z.imag)] for z in row] for row in el] for el in lam.elements],
    }


def measurement_from_json(obj: dict) -> Measurement:
    els = np.array(obj["elements"], dtype=float)
    return Measurement(els[..., 0] + 1j * els[..., 1], obj.get("labels"))


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating,)):
        x = float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


def dumps_record(rec: dict) -> str:
    return json.dumps(_jsonable(rec), sort_keys=True)


def write_jsonl(records: Iterable[dict], path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(dumps_record(rec) + "\n")


def read_jsonl(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(rows: Sequence[dict], path, columns: Sequence[str] | None = None) -> None:
    columns = list(columns or (rows[0].keys() if rows else []))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])
