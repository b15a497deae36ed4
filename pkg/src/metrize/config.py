"""Run configuration files.

An INI-style file with four sections::

    [input]
    dimension = 3
    kind = connection-family
    A111 = 0
    A122 = -r
    A212 = 1/r
    A = 0

    [grid]
    r = 0.5, 3, 20

    [tolerances]
    residual = 1e-8

    [constants]
    K = 1
    L = 1

Symbol keys depend on dimension and kind:

* ``connection-family``: 3D ``A111 A122 A212 A``; 4D the twelve ``B{j}{k}{i}``
  profiles, or the metrizable shorthand ``A000 A111 A212``.
* ``connection-full``: ``N{i}_{jk}`` with the same index base as the profile
  names (1-based in 3D, 0-based in 4D); one of each symmetric pair.
* ``metric``: 3D ``P Q``; 4D ``g_tt g_tr g_rr Q``.

Missing symbols default to ``0``.
"""

from __future__ import annotations

import configparser
import hashlib
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

from .calculus import Chart, ExprField, GridSpec, Tolerances
from .errors import ConfigError, ExprSyntaxError, UnknownIdentifier
from .metrizability import Signature
from .so3 import PROFILE_4D_NAMES, default_grid, spherical_chart_3d, spherical_chart_4d

KINDS = ("connection-family", "connection-full", "metric")
RESERVED = ("dimension", "kind", "signature", "coordinates")
SECTIONS = ("input", "grid", "tolerances", "constants")
DEFAULT_COORDS = {3: ("r", "theta", "phi"), 4: ("u", "v", "theta", "phi")}
FAMILY_3D = ("A111", "A122", "A212", "A")
SHORTHAND_4D = ("A000", "A111", "A212")
METRIC_3D = ("P", "Q")
METRIC_4D = ("g_tt", "g_tr", "g_rr", "Q")
CONSTANTS = {3: ("K", "L"), 4: ("C1", "C2")}


def full_component_key(i: int, j: int, k: int, dim: int) -> str:
    base = 1 if dim == 3 else 0
    return f"N{i + base}_{j + base}{k + base}"


def schema(dim: int, kind: str) -> tuple[str, ...]:
    if kind == "connection-family":
        return FAMILY_3D if dim == 3 else tuple(PROFILE_4D_NAMES) + SHORTHAND_4D
    if kind == "metric":
        return METRIC_3D if dim == 3 else METRIC_4D
    return tuple(full_component_key(i, j, k, dim) for i, j, k in itertools.product(range(dim), repeat=3))


@dataclass
class RunConfig:
    dimension: int
    kind: str
    chart: Chart
    grid: GridSpec
    signature: Signature | None = None
    sources: dict[str, str] = field(default_factory=dict)
    fields: dict[str, ExprField] = field(default_factory=dict)
    constants: dict[str, float] = field(default_factory=dict)
    digest: str = ""

    def expr(self, name: str) -> ExprField:
        """The parsed field for ``name`` (zero when the key is absent)."""
        if name not in self.fields:
            self.fields[name] = ExprField.parse("0", self.chart.coord_names)
        return self.fields[name]

    def has(self, name: str) -> bool:
        return name in self.sources


def _float(section: str, key: str, text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"[{section}] {key}", f"not a number: {text!r}") from None
    if not math.isfinite(value):
        raise ConfigError(f"[{section}] {key}", f"must be finite, got {text!r}")
    return value


def _axis(key: str, text: str, where: str = "grid") -> tuple[float, float, int]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise ConfigError(f"[{where}] {key}", f"expected 'min, max, count', got {text!r}")
    lo, hi = _float(where, key, parts[0]), _float(where, key, parts[1])
    try:
        count = int(parts[2])
    except ValueError:
        raise ConfigError(f"[{where}] {key}", f"count must be an integer, got {parts[2]!r}") from None
    if count < 2:
        raise ConfigError(f"[{where}] {key}", f"count must be >= 2, got {count}")
    if not lo < hi:
        raise ConfigError(f"[{where}] {key}", f"min must be below max, got {lo} >= {hi}")
    return lo, hi, count


def parse_config(text: str, overrides: Sequence[str] = ()) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("config", str(exc).splitlines()[0]) from None

    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"[{section}]", f"unknown section (expected one of {', '.join(SECTIONS)})")
    if not parser.has_section("input"):
        raise ConfigError("[input]", "missing section")
    inp = parser["input"]

    try:
        dim = int(inp.get("dimension", ""))
    except ValueError:
        raise ConfigError("[input] dimension", f"expected 3 or 4, got {inp.get('dimension')!r}") from None
    if dim not in (3, 4):
        raise ConfigError("[input] dimension", f"expected 3 or 4, got {dim}")
    kind = inp.get("kind", "").strip()
    if kind not in KINDS:
        raise ConfigError("[input] kind", f"expected one of {', '.join(KINDS)}, got {kind!r}")

    signature = None
    if "signature" in inp:
        try:
            signature = Signature(inp["signature"].strip().lower())
        except ValueError:
            raise ConfigError("[input] signature", f"expected riemann or lorentz, got {inp['signature']!r}") from None
        if dim == 3:
            raise ConfigError("[input] signature", "only meaningful in dimension 4")

    coords = DEFAULT_COORDS[dim]
    if "coordinates" in inp:
        coords = tuple(c.strip() for c in inp["coordinates"].split(","))
        if len(coords) != dim or len(set(coords)) != dim or not all(c.isidentifier() for c in coords):
            raise ConfigError("[input] coordinates", f"expected {dim} distinct names, got {inp['coordinates']!r}")
        if "pi" in coords:
            raise ConfigError("[input] coordinates", "'pi' is reserved")
    chart = spherical_chart_3d(coords) if dim == 3 else spherical_chart_4d(coords)

    allowed = schema(dim, kind)
    sources, fields_ = {}, {}
    for key, src in inp.items():
        if key in RESERVED:
            continue
        if key not in allowed:
            raise ConfigError(key, f"unknown symbol {key!r} for dimension {dim}, kind {kind}")
        try:
            fields_[key] = ExprField.parse(src, coords)
        except (ExprSyntaxError, UnknownIdentifier) as exc:
            raise ConfigError(key, str(exc)) from None
        sources[key] = src.strip()

    if kind == "connection-family" and dim == 4:
        general = [k for k in sources if k in PROFILE_4D_NAMES]
        short = [k for k in sources if k in SHORTHAND_4D]
        if general and short:
            raise ConfigError(short[0], f"cannot mix B-profile keys ({general[0]}) with the A000/A111/A212 shorthand")
    if kind == "connection-full":
        for key in sources:
            i, jk = key[1:].split("_")
            twin = f"N{i}_{jk[::-1]}"
            if twin != key and twin in sources:
                raise ConfigError(key, f"give only one of {key} and {twin} (the connection is symmetric)")

    grid = _grid(parser, chart, dim, overrides)
    constants = {}
    if parser.has_section("constants"):
        for key, value in parser["constants"].items():
            if key not in CONSTANTS[dim]:
                raise ConfigError(f"[constants] {key}", f"unknown constant (expected {', '.join(CONSTANTS[dim])})")
            constants[key] = _float("constants", key, value)

    digest = hashlib.sha256(("\n".join([text, *overrides])).encode()).hexdigest()
    return RunConfig(dim, kind, chart, grid, signature, sources, fields_, constants, digest)


def _grid(parser, chart: Chart, dim: int, overrides: Sequence[str]) -> GridSpec:
    base = default_grid(chart)
    axes = list(base.axes)
    names = chart.coord_names
    if parser.has_section("grid"):
        for key, text in parser["grid"].items():
            if key not in names:
                raise ConfigError(f"[grid] {key}", f"not a coordinate (expected one of {', '.join(names)})")
            axes[names.index(key)] = _axis(key, text)
    for item in overrides:
        key, sep, text = item.partition("=")
        key = key.strip()
        if not sep or key not in names:
            raise ConfigError(f"--grid-override {item}", f"expected <coordinate>=min,max,count with coordinate in {', '.join(names)}")
        axes[names.index(key)] = _axis(key, text, "grid-override")

    tol = Tolerances()
    if parser.has_section("tolerances"):
        values = {}
        for key, text in parser["tolerances"].items():
            if key not in ("residual", "ratio", "quadrature"):
                raise ConfigError(f"[tolerances] {key}", "unknown tolerance (expected residual, ratio, quadrature)")
            values[key] = _float("tolerances", key, text)
            if values[key] <= 0:
                raise ConfigError(f"[tolerances] {key}", "must be positive")
        tol = Tolerances(**values)
    return GridSpec(tuple(axes), tol)


def load_config(path: str, overrides: Sequence[str] = ()) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, overrides)
