"""Periodic lattice grids and exact shift/difference calculus."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

DEFAULT_ORDER_CAP = 4


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic lattice ``origin + h*i``, ``i`` modulo ``cells`` per axis."""

    cells: tuple[int, ...]
    mesh: float
    origin: tuple[float, ...] | None = None

    def __post_init__(self):
        cells = tuple(int(n) for n in self.cells)
        if not cells or any(n < 1 for n in cells):
            raise GridError(f"cells per axis must be positive, got {self.cells}")
        if not (self.mesh > 0 and np.isfinite(self.mesh)):
            raise GridError(f"mesh must be positive, got {self.mesh}")
        origin = (0.0,) * len(cells) if self.origin is None else tuple(float(o) for o in self.origin)
        if len(origin) != len(cells):
            raise GridError("origin and cells differ in dimension")
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "mesh", float(self.mesh))
        object.__setattr__(self, "origin", origin)

    @classmethod
    def from_period(cls, period, mesh: float, origin=None, dim: int | None = None) -> "GridSpec":
        """Grid with the given per-axis period; ``period/mesh`` must be an integer."""
        if np.ndim(period) == 0:
            period = (float(period),) * (dim or 1)
        cells = []
        for P in period:
            n = int(round(P / mesh))
            if n < 1 or abs(n * mesh - P) > 1e-12 * abs(P):
                raise GridError(f"period {P} is not a whole number of meshes {mesh}")
            cells.append(n)
        return cls(tuple(cells), mesh, origin)

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells

    @property
    def size(self) -> int:
        return int(np.prod(self.cells))

    @property
    def period(self) -> tuple[float, ...]:
        return tuple(n * self.mesh for n in self.cells)

    def axes(self) -> list[np.ndarray]:
        return [o + self.mesh * np.arange(n) for o, n in zip(self.origin, self.cells)]

    def coords(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays, one per axis, each of full grid shape."""
        return tuple(np.meshgrid(*self.axes(), indexing="ij"))

    def coord_env(self) -> dict[str, np.ndarray]:
        return {f"x{i + 1}": c for i, c in enumerate(self.coords())}

    def refine(self, factor: int = 2) -> "GridSpec":
        return GridSpec(tuple(n * factor for n in self.cells), self.mesh / factor, self.origin)

    def refinement_factor(self, fine: "GridSpec") -> int:
        """Integer ``r`` with ``fine == self.refine(r)``; raises if not nested."""
        if fine.dim != self.dim or fine.origin != self.origin:
            raise GridError("grids do not share dimension and origin")
        r = int(round(self.mesh / fine.mesh))
        if r < 1 or fine.cells != tuple(n * r for n in self.cells) or abs(r * fine.mesh - self.mesh) > 1e-12 * self.mesh:
            raise GridError(f"grid with mesh {fine.mesh} is not nested in grid with mesh {self.mesh}")
        return r

    def check_direction(self, direction: Sequence[int]) -> tuple[int, ...]:
        lam = tuple(int(v) for v in direction)
        if len(lam) != self.dim or any(v != w for v, w in zip(lam, direction)):
            raise GridError(f"direction {tuple(direction)} is not an integer vector of dimension {self.dim}")
        return lam


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real values on every point of a periodic grid."""

    spec: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.spec.shape:
            raise GridError(f"values of shape {values.shape} do not match grid {self.spec.shape}")
        object.__setattr__(self, "values", values)

    @classmethod
    def sample(cls, spec: GridSpec, func: Callable[..., np.ndarray]) -> "GridFunction":
        """Sample ``func(x1, ..., xd)`` at the grid points."""
        vals = np.broadcast_to(np.asarray(func(*spec.coords()), dtype=float), spec.shape)
        return cls(spec, np.array(vals))

    @classmethod
    def constant(cls, spec: GridSpec, value: float) -> "GridFunction":
        return cls(spec, np.full(spec.shape, float(value)))

    def restrict(self, coarse: GridSpec) -> "GridFunction":
        """Values at the points of a coarser nested grid."""
        r = coarse.refinement_factor(self.spec)
        return GridFunction(coarse, self.values[(slice(None, None, r),) * self.spec.dim].copy())

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def _coerce(self, other):
        if isinstance(other, GridFunction):
            if other.spec != self.spec:
                raise GridError("grid functions live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return GridFunction(self.spec, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return GridFunction(self.spec, self.values - self._coerce(other))

    def __rsub__(self, other):
        return GridFunction(self.spec, self._coerce(other) - self.values)

    def __mul__(self, other):
        return GridFunction(self.spec, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return GridFunction(self.spec, self.values / self._coerce(other))

    def __neg__(self):
        return GridFunction(self.spec, -self.values)


@dataclass(frozen=True)
class MultiIndex:
    alpha: tuple[int, ...]

    def __post_init__(self):
        alpha = tuple(int(a) for a in self.alpha)
        if any(a < 0 for a in alpha):
            raise GridError(f"multi-index entries must be nonnegative, got {self.alpha}")
        object.__setattr__(self, "alpha", alpha)

    @property
    def order(self) -> int:
        return sum(self.alpha)

    @staticmethod
    def all_of_order(dim: int, order: int) -> list["MultiIndex"]:
        return [MultiIndex(a) for a in itertools.product(range(order + 1), repeat=dim) if sum(a) == order]


def roll(values: np.ndarray, direction: Sequence[int], steps: int = 1) -> np.ndarray:
    """``out[i] = values[i + steps*direction]`` with periodic wraparound."""
    shifts = tuple(-steps * v for v in direction)
    axes = tuple(range(len(shifts)))
    if not any(shifts):
        return values.copy()
    return np.roll(values, shifts, axis=axes)


def shift(f: GridFunction, direction: Sequence[int], steps: int = 1) -> GridFunction:
    """``x -> f(x + steps*h*direction)``; an exact permutation of values."""
    lam = f.spec.check_direction(direction)
    return GridFunction(f.spec, roll(f.values, lam, steps))


def delta(f: GridFunction, direction: Sequence[int]) -> GridFunction:
    """Forward difference quotient ``(f(x + h*lambda) - f(x)) / h``."""
    lam = f.spec.check_direction(direction)
    return GridFunction(f.spec, (roll(f.values, lam) - f.values) / f.spec.mesh)


def delta2(f: GridFunction, direction: Sequence[int]) -> GridFunction:
    """Centred second difference ``(f(x+h*lambda) - 2 f(x) + f(x-h*lambda)) / h^2``."""
    lam = f.spec.check_direction(direction)
    v = f.values
    return GridFunction(f.spec, (roll(v, lam) - 2.0 * v + roll(v, lam, -1)) / f.spec.mesh**2)


def delta_alpha(f: GridFunction, alpha, cap: int = DEFAULT_ORDER_CAP) -> GridFunction:
    """Forward differences ``delta_{h,e_1}^{a_1} ... delta_{h,e_d}^{a_d}``, axis 1 first."""
    alpha = alpha if isinstance(alpha, MultiIndex) else MultiIndex(tuple(alpha))
    if len(alpha.alpha) != f.spec.dim:
        raise GridError(f"multi-index {alpha.alpha} does not match dimension {f.spec.dim}")
    if alpha.order > cap:
        raise GridError(f"difference order {alpha.order} exceeds cap {cap}")
    out = f
    for axis, a in enumerate(alpha.alpha):
        e = tuple(int(i == axis) for i in range(f.spec.dim))
        for _ in range(a):
            out = delta(out, e)
    if out is f:
        out = GridFunction(f.spec, f.values.copy())
    return out


def norms(f: GridFunction, m: int, mask: np.ndarray | None = None, cap: int = DEFAULT_ORDER_CAP) -> np.ndarray:
    """``(s_0, ..., s_m)``, ``s_k`` the max over the grid (or ``mask``) of the
    Euclidean norm of all order-``k`` forward differences of ``f``."""
    if m > cap:
        raise GridError(f"norm order {m} exceeds cap {cap}")
    sel = np.ones(f.spec.shape, bool) if mask is None else np.asarray(mask, bool)
    out = np.empty(m + 1)
    for k in range(m + 1):
        sq = sum(delta_alpha(f, a, cap).values ** 2 for a in MultiIndex.all_of_order(f.spec.dim, k))
        out[k] = float(np.sqrt(np.max(sq[sel])))
    return out


def interior_mask(spec: GridSpec, width: int) -> np.ndarray:
    """Points at least ``width`` indices away from the periodic seam on every axis."""
    mask = np.ones(spec.shape, bool)
    for axis, n in enumerate(spec.cells):
        idx = np.arange(n)
        ok = (idx >= width) & (idx < n - width)
        shape = [1] * spec.dim
        shape[axis] = n
        mask &= ok.reshape(shape)
    return mask
