"""Time series container and the CSV/JSON dialect used for every output file.

CSV: comma separated, '.' decimal point, LF line endings, metadata as
leading ``# key: value`` comment lines. Floats are written with ``repr`` so
files round-trip exactly and are byte-identical across runs.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _meta_value(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple, dict)):
        return json.dumps(v, sort_keys=True, default=_json_default)
    return str(v)


def format_csv(header: list[str], rows, meta: dict | None = None) -> str:
    buf = io.StringIO(newline="")
    for key, value in (meta or {}).items():
        buf.write(f"# {key}: {_meta_value(value)}\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(x) for x in row) + "\n")
    return buf.getvalue()


def write_csv(path, header, rows, meta=None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(format_csv(header, rows, meta))
    return path


def read_csv(path) -> tuple[dict, list[str], np.ndarray]:
    meta, header, rows = {}, None, []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition(":")
            meta[key.strip()] = value.strip()
        elif header is None:
            header = line.split(",")
        elif line:
            rows.append([float(x) for x in line.split(",")])
    return meta, header or [], np.array(rows)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if hasattr(obj, "__dataclass_fields__"):
        return {k: getattr(obj, k) for k in obj.__dataclass_fields__}
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(dumps(obj))
    return path


@dataclass
class TimeSeries:
    times: np.ndarray
    columns: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("time grid must be strictly increasing")
        for name, col in self.columns.items():
            col = np.asarray(col)
            if col.shape != self.times.shape:
                raise ValueError(f"column {name!r} has shape {col.shape}, expected {self.times.shape}")
            if not np.all(np.isfinite(col)):
                raise ValueError(f"column {name!r} contains non-finite values")
            self.columns[name] = col

    def __getitem__(self, name) -> np.ndarray:
        return self.columns[name]

    def to_csv(self, path=None):
        header = ["t", *self.columns]
        rows = zip(self.times, *self.columns.values())
        if path is None:
            return format_csv(header, rows, self.meta)
        return write_csv(path, header, rows, self.meta)
