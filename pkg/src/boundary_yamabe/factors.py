"""Conformal factor specifications.

A spec is one of ``flat``, ``power:k`` (v = r**k), ``gauss:A,s,rc``
(v = 1 + A exp(-(r-rc)^2/s^2)), ``csv:PATH`` (two columns r, v resampled by
monotone cubic interpolation), or a product of these joined by ``*``.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import ConfigError


def _parse_floats(text, count, spec):
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != count:
        raise ConfigError(f"factor '{spec}' expects {count} parameters")
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise ConfigError(f"factor '{spec}' has a non-numeric parameter") from exc


def _read_csv_factor(path, base_dir):
    path = Path(path)
    if not path.is_absolute() and base_dir is not None:
        path = Path(base_dir) / path
    if not path.exists():
        raise ConfigError(f"factor file not found: {path}")
    rows = []
    with path.open(newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError):
                if rows:
                    raise ConfigError(f"bad row in factor file {path}: {row}")
                continue  # header
    if len(rows) < 2:
        raise ConfigError(f"factor file {path} needs at least two rows")
    data = np.array(sorted(rows))
    if np.any(np.diff(data[:, 0]) <= 0):
        raise ConfigError(f"factor file {path} has repeated radii")
    interp = PchipInterpolator(data[:, 0], data[:, 1], extrapolate=False)
    lo, hi = data[0, 0], data[-1, 0]

    def factor(r):
        r = np.asarray(r, dtype=float)
        if np.any(r < lo - 1e-12) or np.any(r > hi + 1e-12):
            raise ConfigError(f"factor file {path} does not cover [{r.min()}, {r.max()}]")
        return interp(np.clip(r, lo, hi))

    return factor


def _single(spec, base_dir):
    name, _, args = spec.partition(":")
    name = name.strip().lower()
    if name == "flat":
        return lambda r: np.ones_like(np.asarray(r, dtype=float))
    if name == "power":
        (k,) = _parse_floats(args, 1, spec)
        return lambda r: np.asarray(r, dtype=float) ** k
    if name == "gauss":
        amp, width, centre = _parse_floats(args, 3, spec)
        if width <= 0:
            raise ConfigError(f"factor '{spec}' needs a positive width")
        return lambda r: 1.0 + amp * np.exp(-((np.asarray(r, dtype=float) - centre) / width) ** 2)
    if name == "csv":
        return _read_csv_factor(args.strip(), base_dir)
    if spec.strip().lower().endswith(".csv"):
        return _read_csv_factor(spec.strip(), base_dir)
    raise ConfigError(f"unknown conformal factor '{spec}'")


def parse_factor(spec: str, base_dir=None):
    """Return a vectorised callable r -> v(r) for a factor spec."""
    if not spec or not spec.strip():
        raise ConfigError("empty conformal factor spec")
    pieces = [_single(part.strip(), base_dir) for part in spec.split("*")]

    def factor(r):
        out = np.ones_like(np.asarray(r, dtype=float))
        for piece in pieces:
            out = out * piece(r)
        return out

    return factor
