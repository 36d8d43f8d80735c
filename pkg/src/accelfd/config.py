"""Study configuration: a small ``[section]`` / ``key = value`` text format.

Example::

    # heat equation, second order
    [problem]
    preset = heat1d-sym

    [grid]
    meshes = 1/16, 1/32, 1/64

    [study]
    mode = convergence
    order_min = 1.8
    order_max = 2.2

Per-direction coefficients use keys such as ``q[1,0]`` or ``p[-1]``; a plain
``q`` or ``p`` applies to every direction.  Directions are written as
``(1,0) (-1,0) (0,1)``.  Unknown sections or keys are errors.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from . import expr as ex
from .presets import ALIASES, PRESETS, Preset, get_preset

KINDS = ("parabolic", "elliptic")
MODES = ("single", "convergence", "expansion", "acceptance")
VARIANTS = ("none", "full", "tilde")
FORMATS = ("csv", "table")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class StudyConfig:
    kind: str | None = None
    preset: str | None = None
    dim: int | None = None
    directions: tuple[tuple[int, ...], ...] | None = None
    q: tuple[tuple[tuple[int, ...] | None, str], ...] = ()
    p: tuple[tuple[tuple[int, ...] | None, str], ...] = ()
    c: str | None = None
    f: str | None = None
    g: str | None = None
    exact: str | None = None
    period: float | None = None
    origin: float | None = None
    horizon: float | None = None
    c_floor: float | None = None
    meshes: tuple[float, ...] = ()
    variant: str = "none"
    k: int = 0
    mode: str = "convergence"
    expansion_order: int = 1
    reference_factor: int = 8
    order_min: float | None = None
    order_max: float | None = None
    ratio_limit: float = 3.0
    floor: float = 1e-12
    tol: float = 1e-12
    out: str | None = None
    format: str = "csv"

    def resolved_preset(self) -> Preset | None:
        return get_preset(self.preset) if self.preset else None


# (section, key) -> StudyConfig field
_KEYS = {
    ("problem", "kind"): "kind",
    ("problem", "preset"): "preset",
    ("problem", "dim"): "dim",
    ("problem", "directions"): "directions",
    ("problem", "c"): "c",
    ("problem", "f"): "f",
    ("problem", "g"): "g",
    ("problem", "exact"): "exact",
    ("problem", "period"): "period",
    ("problem", "origin"): "origin",
    ("problem", "horizon"): "horizon",
    ("problem", "c_floor"): "c_floor",
    ("grid", "meshes"): "meshes",
    ("extrapolation", "variant"): "variant",
    ("extrapolation", "k"): "k",
    ("study", "mode"): "mode",
    ("study", "expansion_order"): "expansion_order",
    ("study", "reference_factor"): "reference_factor",
    ("study", "order_min"): "order_min",
    ("study", "order_max"): "order_max",
    ("study", "ratio_limit"): "ratio_limit",
    ("study", "floor"): "floor",
    ("study", "tol"): "tol",
    ("output", "path"): "out",
    ("output", "format"): "format",
}
_SECTIONS = {s for s, _ in _KEYS}
_FLOATS = {"period", "origin", "horizon", "c_floor", "order_min", "order_max", "ratio_limit", "floor", "tol"}
_INTS = {"dim", "k", "expansion_order", "reference_factor"}
_EXPRS = {"c", "f", "g", "exact"}
_COEF_KEY = re.compile(r"^([qp])(?:\[([^\]]*)\])?$")
_TUPLE = re.compile(r"\(([^()]*)\)")


def _number(text: str, line: int) -> float:
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"expected a number, got {text.strip()!r}", line) from None


def _integer(text: str, line: int) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise ConfigError(f"expected an integer, got {text.strip()!r}", line) from None


def _int_vector(text: str, line: int) -> tuple[int, ...]:
    try:
        return tuple(int(s) for s in text.split(","))
    except ValueError:
        raise ConfigError(f"expected an integer vector, got {text!r}", line) from None


def _directions(text: str, line: int) -> tuple[tuple[int, ...], ...]:
    found = _TUPLE.findall(text)
    if not found or _TUPLE.sub("", text).strip():
        raise ConfigError(f"directions must be written as (a,b,...) groups, got {text!r}", line)
    return tuple(_int_vector(s, line) for s in found)


def _expression(text: str, line: int) -> str:
    try:
        return ex.to_source(ex.parse(text))
    except ex.ExpressionError as err:
        raise ConfigError(f"bad expression: {err}", line) from None


def parse_config(text: str) -> StudyConfig:
    """Parse and validate; errors carry the offending line number."""
    values: dict[str, object] = {}
    q: list = []
    p: list = []
    section = None
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {line!r}", lineno)
            section = line[1:-1].strip()
            if section not in _SECTIONS:
                raise ConfigError(f"unknown section [{section}]", lineno)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        if section is None:
            raise ConfigError("key outside of any section", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if not value:
            raise ConfigError(f"empty value for key {key!r}", lineno)
        m = _COEF_KEY.match(key)
        if section == "problem" and m:
            lam = None if m.group(2) is None else _int_vector(m.group(2), lineno)
            target = q if m.group(1) == "q" else p
            if any(d == lam for d, _ in target):
                raise ConfigError(f"duplicate key {key!r}", lineno)
            target.append((lam, _expression(value, lineno)))
            continue
        name = _KEYS.get((section, key))
        if name is None:
            raise ConfigError(f"unknown key {key!r} in section [{section}]", lineno)
        if name in seen:
            raise ConfigError(f"duplicate key {key!r} (first set on line {seen[name]})", lineno)
        seen[name] = lineno
        if name in _FLOATS:
            values[name] = _number(value, lineno)
        elif name in _INTS:
            values[name] = _integer(value, lineno)
        elif name in _EXPRS:
            values[name] = _expression(value, lineno)
        elif name == "directions":
            values[name] = _directions(value, lineno)
        elif name == "meshes":
            values[name] = tuple(_number(s, lineno) for s in value.split(","))
        else:
            values[name] = value
    cfg = StudyConfig(**values, q=_sort_coefs(q), p=_sort_coefs(p))
    validate(cfg, seen)
    return cfg


def _sort_coefs(items) -> tuple:
    return tuple(sorted(items, key=lambda it: (it[0] is not None, it[0] or ())))


def validate(cfg: StudyConfig, lines: dict[str, int] | None = None) -> None:
    lines = lines or {}

    def fail(msg, name=None):
        raise ConfigError(msg, lines.get(name))

    if cfg.preset is not None and cfg.preset not in PRESETS and cfg.preset not in ALIASES:
        fail(f"unknown preset {cfg.preset!r}; available: {', '.join(sorted(PRESETS))}", "preset")
    if cfg.kind is not None and cfg.kind not in KINDS:
        fail(f"kind must be one of {KINDS}", "kind")
    if cfg.mode not in MODES:
        fail(f"mode must be one of {MODES}", "mode")
    if cfg.variant not in VARIANTS:
        fail(f"variant must be one of {VARIANTS}", "variant")
    if cfg.format not in FORMATS:
        fail(f"format must be one of {FORMATS}", "format")
    if cfg.variant == "tilde" and cfg.k % 2 == 0:
        fail("tilde extrapolation needs an odd k", "k")
    if cfg.k < 0 or cfg.expansion_order < 0:
        fail("orders must be nonnegative", "k")
    if cfg.reference_factor < 2:
        fail("reference_factor must be at least 2", "reference_factor")
    if any(not h > 0 for h in cfg.meshes):
        fail("meshes must be positive", "meshes")
    if len(set(cfg.meshes)) != len(cfg.meshes):
        fail("meshes must be distinct", "meshes")
    if cfg.preset is None and cfg.mode != "acceptance":
        if cfg.directions is None:
            fail("without a preset the problem needs directions")
        if cfg.kind == "elliptic" and cfg.f is None:
            fail("an elliptic problem without a preset needs f")
        if cfg.kind != "elliptic" and (cfg.g is None or cfg.horizon is None):
            fail("a parabolic problem without a preset needs g and horizon")
    preset = cfg.resolved_preset()
    dim = cfg.dim or (len(cfg.directions[0]) if cfg.directions else None) or (preset.dim if preset else None)
    if cfg.dim is not None and cfg.dim < 1:
        fail("dim must be positive", "dim")
    if cfg.directions is not None and dim is not None:
        if any(len(lam) != dim for lam in cfg.directions):
            fail(f"directions do not all have dimension {dim}", "directions")
    dirs = set(cfg.directions or (preset.directions if preset else ()))
    for lam, _ in (*cfg.q, *cfg.p):
        if lam is not None and lam not in dirs:
            raise ConfigError(f"coefficient given for direction {lam}, which is not in the stencil")
    if dim is not None:
        for name in ("c", "f", "g", "exact"):
            src = getattr(cfg, name)
            if src is not None and ex.max_space_index(ex.parse(src)) > dim:
                fail(f"{name} uses a coordinate beyond dimension {dim}", name)
        for lam, src in (*cfg.q, *cfg.p):
            if ex.max_space_index(ex.parse(src)) > dim:
                raise ConfigError(f"coefficient for {lam} uses a coordinate beyond dimension {dim}")


def _fmt_number(x: float) -> str:
    return repr(float(x))


def _fmt_dir(lam) -> str:
    return ",".join(str(v) for v in lam)


def serialize_config(cfg: StudyConfig) -> str:
    """Text that parses back to ``cfg``; fields at their defaults are omitted."""
    default = StudyConfig()
    out: dict[str, list[str]] = {}
    for (section, key), name in _KEYS.items():
        val = getattr(cfg, name)
        if val == getattr(default, name):
            continue
        if name in _FLOATS:
            text = _fmt_number(val)
        elif name == "directions":
            text = " ".join(f"({_fmt_dir(lam)})" for lam in val)
        elif name == "meshes":
            text = ", ".join(_fmt_number(h) for h in val)
        else:
            text = str(val)
        out.setdefault(section, []).append(f"{key} = {text}")
    for letter, items in (("q", cfg.q), ("p", cfg.p)):
        for lam, src in items:
            key = letter if lam is None else f"{letter}[{_fmt_dir(lam)}]"
            out.setdefault("problem", []).append(f"{key} = {src}")
    blocks = []
    for section in ("problem", "grid", "extrapolation", "study", "output"):
        if section in out:
            blocks.append(f"[{section}]\n" + "\n".join(out[section]) + "\n")
    return "\n".join(blocks)


def load_config(path: str) -> StudyConfig:
    with open(path, encoding="ascii") as fh:
        return parse_config(fh.read())


__all__ = ["StudyConfig", "ConfigError", "parse_config", "serialize_config", "load_config", "validate",
           "KINDS", "MODES", "VARIANTS", "FORMATS"]
