"""Space-time scalar coefficient fields: constants, expressions, sampled arrays."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from . import expr as ex
from .grid import GridError, GridFunction, GridSpec


class FieldError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CoefficientField:
    """A scalar field ``(t, x) -> value``.

    ``kind`` is ``"constant"`` (payload a float), ``"expression"`` (payload a
    parsed expression tree in ``t, x1..xd``) or ``"sampled"`` (payload a tuple
    of ``(time, GridFunction)`` pairs, linearly interpolated in time and
    clamped outside the sampled range).  ``bound`` is an optional declared
    sup of ``|value|``.
    """

    kind: str
    payload: object
    bound: float | None = None

    @classmethod
    def constant(cls, value: float, bound: float | None = None) -> "CoefficientField":
        return cls("constant", float(value), bound)

    @classmethod
    def expression(cls, source, bound: float | None = None) -> "CoefficientField":
        node = ex.parse(source) if isinstance(source, str) else source
        if isinstance(node, ex.Num):
            return cls.constant(node.value, bound)
        return cls("expression", node, bound)

    @classmethod
    def sampled(cls, data, bound: float | None = None) -> "CoefficientField":
        if isinstance(data, GridFunction):
            data = [(0.0, data)]
        pairs = tuple(sorted(((float(t), g) for t, g in data), key=lambda p: p[0]))
        if not pairs:
            raise FieldError("sampled field needs at least one sample")
        spec = pairs[0][1].spec
        if any(g.spec != spec for _, g in pairs):
            raise FieldError("all time samples must share one grid")
        for _, g in pairs:
            if not np.all(np.isfinite(g.values)):
                raise FieldError("sampled field contains non-finite values")
        return cls("sampled", pairs, bound)

    @property
    def time_dependent(self) -> bool:
        if self.kind == "expression":
            return "t" in ex.variables(self.payload)
        if self.kind == "sampled":
            return len(self.payload) > 1
        return False

    def source(self) -> str:
        if self.kind == "constant":
            return repr(self.payload)
        if self.kind == "expression":
            return ex.to_source(self.payload)
        return f"<sampled on {self.payload[0][1].spec.shape}>"

    def on(self, grid: GridSpec) -> "FieldSampler":
        return FieldSampler(self, grid)

    def sample(self, grid: GridSpec, t: float = 0.0) -> np.ndarray:
        return self.on(grid)(t)

    def sup_abs(self, grid: GridSpec, times: Sequence[float] = (0.0,)) -> float:
        if self.kind == "constant":
            return abs(self.payload)
        sampler = self.on(grid)
        ts = times if self.time_dependent else times[:1]
        return max(float(np.max(np.abs(sampler(t)))) for t in ts)

    # arithmetic keeps constants and expressions symbolic; sampled fields stay sampled
    def _combine(self, other, op: str) -> "CoefficientField":
        other = as_field(other)
        if self.kind == "constant" and other.kind == "constant":
            a, b = self.payload, other.payload
            return CoefficientField.constant({"+": a + b, "-": a - b, "*": a * b}[op])
        if self.kind != "sampled" and other.kind != "sampled":
            return CoefficientField("expression", ex.BinOp(op, _node(self), _node(other)))
        sampled = self if self.kind == "sampled" else other
        spec = sampled.payload[0][1].spec
        pairs = []
        for t, _ in sampled.payload:
            a, b = self.sample(spec, t), other.sample(spec, t)
            pairs.append((t, GridFunction(spec, {"+": a + b, "-": a - b, "*": a * b}[op])))
        return CoefficientField.sampled(pairs)

    def __add__(self, other):
        return self._combine(other, "+")

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, "-")

    def __rsub__(self, other):
        return as_field(other)._combine(self, "-")

    def __mul__(self, other):
        return self._combine(other, "*")

    __rmul__ = __mul__

    def __neg__(self):
        if self.kind == "constant":
            return CoefficientField.constant(-self.payload)
        if self.kind == "expression":
            return CoefficientField("expression", ex.Neg(self.payload))
        return CoefficientField.sampled([(t, -g) for t, g in self.payload])

    def same_as(self, other: "CoefficientField") -> bool:
        """Structural identity (not numerical equality)."""
        if self is other:
            return True
        if self.kind != other.kind:
            return False
        if self.kind == "sampled":
            return all(
                ta == tb and ga.spec == gb.spec and np.array_equal(ga.values, gb.values)
                for (ta, ga), (tb, gb) in zip(self.payload, other.payload)
            ) and len(self.payload) == len(other.payload)
        return self.payload == other.payload


def _node(f: CoefficientField):
    if f.kind == "constant":
        v = f.payload
        return ex.Neg(ex.Num(-v)) if v < 0 else ex.Num(v)
    return f.payload


FieldLike = Union[CoefficientField, float, int, str, GridFunction]


def as_field(value: FieldLike) -> CoefficientField:
    if isinstance(value, CoefficientField):
        return value
    if isinstance(value, GridFunction):
        return CoefficientField.sampled(value)
    if isinstance(value, str):
        return CoefficientField.expression(value)
    if isinstance(value, (int, float, np.floating, np.integer)):
        return CoefficientField.constant(float(value))
    raise FieldError(f"cannot interpret {value!r} as a coefficient field")


class FieldSampler:
    """Evaluates a field on one grid; time-independent results are cached."""

    def __init__(self, field: CoefficientField, grid: GridSpec):
        self.field = field
        self.grid = grid
        self.time_dependent = field.time_dependent
        self._cache = None
        if field.kind == "expression":
            need = ex.max_space_index(field.payload)
            if need > grid.dim:
                raise FieldError(f"expression uses x{need} on a {grid.dim}-dimensional grid")
            self._bound = ex.BoundExpression(field.payload, grid.coord_env())
        elif field.kind == "sampled":
            fine = field.payload[0][1].spec
            try:
                self._samples = [(t, g.restrict(grid).values) for t, g in field.payload]
            except GridError as err:
                raise FieldError(
                    f"sampled field on mesh {fine.mesh} cannot be evaluated on mesh {grid.mesh}; "
                    "supply it at the finest mesh"
                ) from err

    def __call__(self, t: float = 0.0) -> np.ndarray:
        if not self.time_dependent and self._cache is not None:
            return self._cache
        f = self.field
        if f.kind == "constant":
            out = np.full(self.grid.shape, f.payload)
        elif f.kind == "expression":
            out = self._bound(t)
        else:
            out = _interp(self._samples, t)
        if not np.all(np.isfinite(out)):
            raise FieldError(f"field {f.source()} is not finite at t={t}")
        if not self.time_dependent:
            out.setflags(write=False)
            self._cache = out
        return out


def _interp(samples, t):
    times = [s[0] for s in samples]
    if t <= times[0]:
        return samples[0][1].copy()
    if t >= times[-1]:
        return samples[-1][1].copy()
    k = int(np.searchsorted(times, t, side="right")) - 1
    (t0, a), (t1, b) = samples[k], samples[k + 1]
    w = (t - t0) / (t1 - t0)
    return (1 - w) * a + w * b
