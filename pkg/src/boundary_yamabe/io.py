"""CSV fields and JSON reports.

CSV files carry a header row and the columns ``index, r, value[, extra...]``
with LF line endings and 17 significant digits, so a written field reads
back bit for bit.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, is_dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DimensionError

DIGITS = 17


def _fmt(x) -> str:
    return format(float(x), f".{DIGITS - 1}e")


def write_field_csv(path, nodes, columns: dict) -> Path:
    """Write ``index, r`` followed by the named columns (first one is the main value)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    nodes = np.asarray(nodes, dtype=float)
    cols = {k: np.asarray(v, dtype=float) for k, v in columns.items()}
    for name, col in cols.items():
        if col.shape != nodes.shape:
            raise DimensionError(f"column '{name}' length differs from the grid")
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "r", *cols])
        for i, r in enumerate(nodes):
            w.writerow([i, _fmt(r), *(_fmt(c[i]) for c in cols.values())])
    return path


def read_field_csv(path):
    """Return ``(nodes, columns)`` from a file written by :func:`write_field_csv`."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"CSV file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:2] != ["index", "r"] or len(rows[0]) < 3:
        raise ConfigError(f"{path}: header must start with index,r,<value>")
    names = rows[0][2:]
    body = rows[1:]
    try:
        data = np.array([[float(x) for x in row[1:]] for row in body])
        index = [int(row[0]) for row in body]
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"{path}: malformed row") from exc
    if index != list(range(len(body))) or data.ndim != 2 or data.shape[1] != len(names) + 1:
        raise ConfigError(f"{path}: rows must be numbered 0..N-1 with {len(names) + 2} columns")
    return data[:, 0], {name: data[:, k + 1] for k, name in enumerate(names)}


def _plain(obj):
    """JSON-ready copy: arrays become lists (or summaries when long), non-finite floats strings."""
    if is_dataclass(obj) and not isinstance(obj, type):
        return _plain(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if obj.size > 16:
            return {"length": int(obj.size), "min": _plain(float(np.min(obj))), "max": _plain(float(np.max(obj)))}
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, (str, int, bool)) or obj is None:
        return obj
    return repr(obj)


def write_report(path, report: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        json.dump(_plain(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def read_report(path) -> dict:
    with Path(path).open(encoding="utf-8") as fh:
        return json.load(fh)
