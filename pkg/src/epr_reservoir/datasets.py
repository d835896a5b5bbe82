"""CSV / JSON encodings of command outputs, each with a provenance header.

CSV: ``# key: value`` provenance lines (values JSON-encoded), one header
row, comma separated, ``.`` decimal, floats written with ``repr`` so the
text round-trips exactly. JSON: one object ``{"meta": {...}, "data": [...]}``
with one object per row.
"""

from __future__ import annotations

import csv
import io
import json
import platform
from dataclasses import dataclass

import numpy as np
import scipy

from . import __version__


def provenance(config_hash=None, seed=None, **extra) -> dict:
    meta = {
        "config_hash": config_hash,
        "seed": seed,
        "versions": {
            "epr_reservoir": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    }
    meta.update(extra)
    return meta


@dataclass
class Dataset:
    columns: list
    rows: list  # list of tuples, in column order
    meta: dict

    def column(self, name):
        i = self.columns.index(name)
        return [row[i] for row in self.rows]

    def as_records(self):
        return [dict(zip(self.columns, row)) for row in self.rows]


def _plain(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.ndarray):
        return [_plain(x) for x in v.tolist()]
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return v


def make_dataset(columns, data, meta) -> Dataset:
    """``data`` is a mapping ``column -> sequence`` or a list of row tuples."""
    columns = list(columns)
    if isinstance(data, dict):
        n = len(data[columns[0]]) if columns else 0
        rows = [tuple(_plain(data[c][i]) for c in columns) for i in range(n)]
    else:
        rows = [tuple(_plain(v) for v in row) for row in data]
    meta = dict(meta)
    meta["columns"] = columns
    return Dataset(columns, rows, _plain(meta))


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def to_csv(ds: Dataset) -> str:
    buf = io.StringIO()
    for key in sorted(ds.meta):
        buf.write(f"# {key}: {json.dumps(ds.meta[key], sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ds.columns)
    for row in ds.rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def to_json(ds: Dataset) -> str:
    obj = {"meta": ds.meta, "data": ds.as_records()}
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def encode(ds: Dataset, fmt: str) -> str:
    if fmt == "csv":
        return to_csv(ds)
    if fmt == "json":
        return to_json(ds)
    raise ValueError(f"unknown format {fmt!r}")


def _parse_cell(s):
    if s in ("true", "false"):
        return s == "true"
    for conv in (int, float):
        try:
            return conv(s)
        except ValueError:
            pass
    return s


def read_csv(text: str) -> Dataset:
    meta = {}
    body = []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            meta[key] = json.loads(value)
        elif line:
            body.append(line)
    reader = csv.reader(body)
    columns = next(reader)
    rows = [tuple(_parse_cell(c) for c in row) for row in reader]
    return Dataset(columns, rows, meta)


def read_json(text: str) -> Dataset:
    obj = json.loads(text)
    data = obj["data"]
    columns = obj["meta"].get("columns") or (list(data[0].keys()) if data else [])
    rows = [tuple(rec[c] for c in columns) for rec in data]
    return Dataset(columns, rows, obj["meta"])


def decode(text: str, fmt: str) -> Dataset:
    return read_csv(text) if fmt == "csv" else read_json(text)
