"""Run configuration: INI-style ``key = value`` sections.

Sections and keys (all optional unless marked):

``[geometry]``
    ``n`` (int >= 3, default 3), ``r0``, ``r1`` (required, 0 < r0 < r1),
    ``N`` (nodes, >= 5, default 1001), ``factor`` (required; see
    :mod:`boundary_yamabe.factors`), ``precondition`` (extra factor applied
    as a conformal change), ``R`` (synthetic constant scalar curvature),
    ``R_shift`` (number added to R, or ``-eta1`` to move the first Robin
    eigenvalue to zero), ``h_inner``, ``h_outer`` (synthetic mean curvatures).
``[case]``
    ``mode`` (auto | zero | negative | positive), ``lambda`` (negative case).
``[solver]``
    ``tol``, ``max_iter``, ``tau0`` (< 0), ``steps`` (>= 1),
    ``strategy`` (auto | glue), ``seed``.
``[output]``
    ``directory``, ``formats`` (comma list of csv, json).
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigError

CASES = ("auto", "zero", "negative", "positive")
STRATEGIES = ("auto", "glue")
FORMATS = ("csv", "json")
NULL_SHIFT = "-eta1"

_KNOWN = {
    "geometry": {"n", "r0", "r1", "N", "factor", "precondition", "R", "R_shift", "h_inner", "h_outer"},
    "case": {"mode", "lambda"},
    "solver": {"tol", "max_iter", "tau0", "steps", "strategy", "seed"},
    "output": {"directory", "formats"},
}


@dataclass(frozen=True)
class GeometryConfig:
    r0: float
    r1: float
    factor: str
    n: int = 3
    num_nodes: int = 1001
    precondition: str | None = None
    R: float | None = None
    R_shift: float | str = 0.0
    h_inner: float | None = None
    h_outer: float | None = None
    base_dir: str | None = None

    @property
    def synthetic(self) -> bool:
        return self.R is not None or self.R_shift != 0.0 or self.h_inner is not None or self.h_outer is not None


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-10
    max_iter: int = 20000
    tau0: float = -0.01
    steps: int = 8
    strategy: str = "auto"
    seed: int = 0


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    formats: tuple = ("csv", "json")


@dataclass(frozen=True)
class RunConfig:
    geometry: GeometryConfig
    case: str = "auto"
    lam: float | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    source: str | None = None

    def with_overrides(self, case=None, lam=None, seed=None, out=None) -> "RunConfig":
        cfg = self
        if case is not None:
            if case not in CASES:
                raise ConfigError(f"unknown case '{case}'")
            cfg = replace(cfg, case=case)
        if lam is not None:
            cfg = replace(cfg, lam=_check_lambda(lam, None))
        if seed is not None:
            cfg = replace(cfg, solver=replace(cfg.solver, seed=int(seed)))
        if out is not None:
            cfg = replace(cfg, output=replace(cfg.output, directory=str(out)))
        return cfg


def _key_lines(text: str) -> dict:
    """Map (section, key) -> 1-based line number."""
    lines = {}
    section = None
    for num, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        head = re.fullmatch(r"\[([^\]]+)\]", line)
        if head:
            section = head.group(1).strip()
            lines[(section, None)] = num
            continue
        key = re.split(r"[=:]", line, maxsplit=1)[0].strip()
        lines[(section, key)] = num
    return lines


class _Reader:
    def __init__(self, parser, lines, source):
        self.parser = parser
        self.lines = lines
        self.source = source

    def fail(self, section, key, message):
        line = self.lines.get((section, key)) or self.lines.get((section, None))
        where = f"{self.source}:{line}" if line else str(self.source)
        raise ConfigError(f"{where}: [{section}] {key}: {message}", line=line, section=section, key=key)

    def raw(self, section, key):
        if not self.parser.has_section(section):
            return None
        value = self.parser[section].get(key)
        return None if value is None else value.strip()

    def number(self, section, key, default=None, required=False, kind=float, check=None, what=""):
        text = self.raw(section, key)
        if text is None or text == "":
            if required:
                self.fail(section, key, "required key missing")
            return default
        try:
            value = kind(text)
        except ValueError:
            self.fail(section, key, f"expected {'an integer' if kind is int else 'a number'}, got '{text}'")
        if kind is float and not math.isfinite(value):
            self.fail(section, key, "must be finite")
        if check is not None and not check(value):
            self.fail(section, key, what)
        return value

    def choice(self, section, key, options, default):
        text = self.raw(section, key)
        if text is None or text == "":
            return default
        text = text.lower()
        if text not in options:
            self.fail(section, key, f"must be one of {', '.join(options)}")
        return text


def _check_lambda(value, reader):
    value = float(value)
    if not math.isfinite(value) or value >= 0:
        if reader is None:
            raise ConfigError("lambda override must be a negative number")
        reader.fail("case", "lambda", "must be negative (it only applies to the negative case)")
    return value


def parse_config(text: str, source: str = "<config>", base_dir=None) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    parser.optionxform = str  # keys are case-sensitive: n (dimension) and N (nodes)
    try:
        parser.read_string(text, source=str(source))
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigError(f"{source}:{line or '?'}: {exc}",
                          line=line) from exc
    lines = _key_lines(text)
    rd = _Reader(parser, lines, source)
    for section in parser.sections():
        name = section
        if name not in _KNOWN:
            rd.fail(name, None, "unknown section (names are lower case)")
        for key in parser[section]:
            if key not in _KNOWN[name]:
                rd.fail(name, key, "unknown key")
    if not parser.has_section("geometry"):
        raise ConfigError(f"{source}: missing [geometry] section")

    g = "geometry"
    n = rd.number(g, "n", 3, kind=int, check=lambda v: v >= 3, what="dimension must be >= 3")
    r0 = rd.number(g, "r0", required=True, check=lambda v: v > 0, what="must be positive")
    r1 = rd.number(g, "r1", required=True, check=lambda v: v > r0, what="must exceed r0")
    nodes = rd.number(g, "N", 1001, kind=int, check=lambda v: v >= 5, what="need at least 5 nodes")
    factor = rd.raw(g, "factor")
    if not factor:
        rd.fail(g, "factor", "required key missing")
    precondition = rd.raw(g, "precondition") or None
    R = rd.number(g, "R")
    shift_text = rd.raw(g, "R_shift")
    if shift_text is not None and shift_text.lower() == NULL_SHIFT:
        R_shift = NULL_SHIFT
    else:
        R_shift = rd.number(g, "R_shift", 0.0)
    h_in = rd.number(g, "h_inner")
    h_out = rd.number(g, "h_outer")
    base = str(base_dir) if base_dir is not None else None
    from .factors import parse_factor

    for key, spec in (("factor", factor), ("precondition", precondition)):
        if spec:
            try:
                parse_factor(spec, base)
            except ConfigError as exc:
                rd.fail(g, key, str(exc))
    geometry = GeometryConfig(r0=r0, r1=r1, factor=factor, n=n, num_nodes=nodes, precondition=precondition,
                              R=R, R_shift=R_shift, h_inner=h_in, h_outer=h_out, base_dir=base)

    case = rd.choice("case", "mode", CASES, "auto")
    lam = rd.number("case", "lambda")
    if lam is not None:
        lam = _check_lambda(lam, rd)

    s = "solver"
    solver = SolverConfig(
        tol=rd.number(s, "tol", 1e-10, check=lambda v: 0 < v < 1, what="must lie in (0, 1)"),
        max_iter=rd.number(s, "max_iter", 20000, kind=int, check=lambda v: v >= 1, what="must be >= 1"),
        tau0=rd.number(s, "tau0", -0.01, check=lambda v: v < 0, what="must be negative"),
        steps=rd.number(s, "steps", 8, kind=int, check=lambda v: v >= 1, what="must be >= 1"),
        strategy=rd.choice(s, "strategy", STRATEGIES, "auto"),
        seed=rd.number(s, "seed", 0, kind=int, check=lambda v: v >= 0, what="must be >= 0"),
    )

    directory = rd.raw("output", "directory") or "out"
    fmt_text = rd.raw("output", "formats")
    formats = ("csv", "json")
    if fmt_text:
        formats = tuple(f.strip().lower() for f in fmt_text.split(",") if f.strip())
        bad = [f for f in formats if f not in FORMATS]
        if bad or not formats:
            rd.fail("output", "formats", f"formats must be drawn from {', '.join(FORMATS)}")
    if base is not None and not Path(directory).is_absolute():
        directory = str(Path(base) / directory)
    return RunConfig(geometry=geometry, case=case, lam=lam, solver=solver,
                     output=OutputConfig(directory=directory, formats=formats), source=str(source))


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError(f"{path}: not valid UTF-8") from exc
    return parse_config(text, source=str(path), base_dir=path.parent)


def build_from_config(cfg: GeometryConfig):
    """RadialGeometry described by a geometry block."""
    from .factors import parse_factor
    from .geometry import Dimension, build_geometry, with_curvature
    from .operators import conformal_change
    from .spectral import robin_eta

    geom = build_geometry(Dimension(cfg.n), cfg.r0, cfg.r1, cfg.num_nodes, parse_factor(cfg.factor, cfg.base_dir))
    shift = cfg.R_shift
    if cfg.R is not None or cfg.h_inner is not None or cfg.h_outer is not None or (shift != 0.0 and shift != NULL_SHIFT):
        geom = with_curvature(geom, R=cfg.R, h_inner=cfg.h_inner, h_outer=cfg.h_outer,
                              R_shift=0.0 if shift == NULL_SHIFT else shift)
    if cfg.precondition:
        geom = conformal_change(geom, parse_factor(cfg.precondition, cfg.base_dir)(geom.nodes))
    if shift == NULL_SHIFT:
        geom = with_curvature(geom, R_shift=-robin_eta(geom))
    return geom
