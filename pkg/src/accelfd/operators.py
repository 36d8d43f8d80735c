"""Difference operator ``L_h``, structural checks, and the continuum operators.

``L_h u = (1/h) sum_l q_l delta_{h,l} u + sum_l p_l delta_{h,l} u - c u`` over a
finite set of nonzero integer directions ``l``.  Its formal limit is

    Lu = 1/2 sum_l q_l d_l^2 u + sum_l p_l d_l u - c u,

and the Taylor operators ``L^(i)`` are the coefficients of ``h^i/i!`` in the
expansion of ``L_h`` in powers of ``h``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np
from scipy import sparse

from .fields import CoefficientField, FieldError, FieldLike, as_field
from .grid import GridError, GridFunction, GridSpec, roll

Direction = tuple[int, ...]

SYMMETRY_RTOL = 1e-12
CONTINUUM_ACCURACY = 4
TAYLOR_ACCURACY = 6
DERIVATIVE_CAP = 6


class StencilError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Stencil:
    """Directions ``Lambda_1`` with coefficient fields ``q``, ``p`` and ``c``."""

    directions: tuple[Direction, ...]
    q: Mapping[Direction, CoefficientField]
    p: Mapping[Direction, CoefficientField]
    c: CoefficientField

    def __post_init__(self):
        dirs = tuple(tuple(int(v) for v in lam) for lam in self.directions)
        if not dirs:
            raise StencilError("stencil needs at least one direction")
        dim = len(dirs[0])
        if any(len(lam) != dim for lam in dirs):
            raise StencilError("directions differ in dimension")
        if any(not any(lam) for lam in dirs):
            raise StencilError("the zero vector is not an admissible direction")
        if len(set(dirs)) != len(dirs):
            raise StencilError("directions must be distinct")
        zero = CoefficientField.constant(0.0)
        q = {lam: as_field(self.q.get(lam, zero)) for lam in dirs}
        p = {lam: as_field(self.p.get(lam, zero)) for lam in dirs}
        extra = (set(self.q) | set(self.p)) - set(dirs)
        if extra:
            raise StencilError(f"coefficients given for directions not in the stencil: {sorted(extra)}")
        object.__setattr__(self, "directions", dirs)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "c", as_field(self.c))

    @classmethod
    def build(cls, directions, q=None, p=None, c: FieldLike = 0.0) -> "Stencil":
        """Convenience constructor; ``q``/``p`` may be a mapping or one value for all directions."""
        dirs = [tuple(int(v) for v in lam) for lam in directions]

        def spread(vals):
            if vals is None:
                return {}
            if isinstance(vals, Mapping):
                return {tuple(int(v) for v in k): as_field(x) for k, x in vals.items()}
            return {lam: as_field(vals) for lam in dirs}

        return cls(tuple(dirs), spread(q), spread(p), as_field(c))

    @property
    def dim(self) -> int:
        return len(self.directions[0])

    def fields(self) -> list[CoefficientField]:
        return [*self.q.values(), *self.p.values(), self.c]

    @property
    def time_dependent(self) -> bool:
        return any(f.time_dependent for f in self.fields())

    def with_c(self, c: FieldLike) -> "Stencil":
        return Stencil(self.directions, self.q, self.p, as_field(c))

    def declared_m0(self) -> float | None:
        bounds = [f.bound if f.kind != "constant" else abs(f.payload) for f in self.fields()]
        return None if any(b is None for b in bounds) else max(bounds)

    def measured_m0(self, grid: GridSpec, times: Sequence[float] = (0.0,)) -> float:
        return max(f.sup_abs(grid, times) for f in self.fields())


@dataclass(frozen=True)
class OperatorContext:
    stencil: Stencil
    grid: GridSpec
    time: float = 0.0
    h0: float | None = None

    def __post_init__(self):
        if self.stencil.dim != self.grid.dim:
            raise StencilError(f"stencil dimension {self.stencil.dim} does not match grid dimension {self.grid.dim}")
        if self.h0 is not None and self.grid.mesh > self.h0 * (1 + 1e-12):
            raise StencilError(f"mesh {self.grid.mesh} exceeds the cap h0={self.h0}")

    @property
    def h(self) -> float:
        return self.grid.mesh

    def at(self, time: float) -> "OperatorContext":
        return OperatorContext(self.stencil, self.grid, time, self.h0)

    def on(self, grid: GridSpec) -> "OperatorContext":
        return OperatorContext(self.stencil, grid, self.time, self.h0)


def _is_identity_shift(grid: GridSpec, lam: Direction) -> bool:
    return all(v % n == 0 for v, n in zip(lam, grid.cells))


class SampledStencil:
    """Coefficient arrays of a stencil on one grid, cached when time-independent."""

    def __init__(self, stencil: Stencil, grid: GridSpec):
        if stencil.dim != grid.dim:
            raise StencilError(f"stencil dimension {stencil.dim} does not match grid dimension {grid.dim}")
        self.stencil = stencil
        self.grid = grid
        self.q = {lam: f.on(grid) for lam, f in stencil.q.items()}
        self.p = {lam: f.on(grid) for lam, f in stencil.p.items()}
        self.c = stencil.c.on(grid)
        self.time_dependent = stencil.time_dependent
        self._weights = None

    def weights(self, t: float):
        """``[(direction, chi/h^2)]`` without identity shifts, plus the ``c`` array."""
        if self._weights is not None:
            return self._weights
        h = self.grid.mesh
        pairs = []
        for lam in self.stencil.directions:
            if _is_identity_shift(self.grid, lam):
                continue
            w = (self.q[lam](t) + h * self.p[lam](t)) / h**2
            if np.any(w):
                pairs.append((lam, w))
        out = (pairs, self.c(t))
        if not self.time_dependent:
            self._weights = out
        return out


class DiscreteOperator:
    """Fast ``L_h`` on raw arrays, for time stepping and fixed-point sweeps."""

    def __init__(self, stencil: Stencil, grid: GridSpec, extra_c: float = 0.0):
        self.sampled = SampledStencil(stencil, grid)
        self.grid = grid
        self.extra_c = float(extra_c)

    def __call__(self, u: np.ndarray, t: float) -> np.ndarray:
        pairs, c = self.sampled.weights(t)
        out = -(c + self.extra_c) * u
        for lam, w in pairs:
            out += w * (roll(u, lam) - u)
        return out


def _check_f(ctx: OperatorContext, f: GridFunction) -> np.ndarray:
    if f.spec != ctx.grid:
        raise GridError("grid function does not live on the context grid")
    return f.values


def apply_Lh(ctx: OperatorContext, f: GridFunction, form: str = "auto") -> GridFunction:
    """Apply ``L_h`` at ``ctx.time``.

    ``form="difference"`` uses the forward-difference definition;
    ``form="symmetric"`` writes the ``q`` part as ``1/2 sum q Delta_{h,l}``, which
    is only valid under the symmetry condition; ``"auto"`` picks the symmetric
    form when that condition holds.
    """
    u = _check_f(ctx, f)
    st = SampledStencil(ctx.stencil, ctx.grid)
    t, h = ctx.time, ctx.h
    if form == "auto":
        form = "symmetric" if symmetry_flags(ctx).condition_s else "difference"
    out = -st.c(t) * u
    for lam in ctx.stencil.directions:
        d = (roll(u, lam) - u) / h
        out = out + st.p[lam](t) * d
        if form == "difference":
            out = out + st.q[lam](t) * d / h
        elif form == "symmetric":
            out = out + 0.5 * st.q[lam](t) * (roll(u, lam) - 2.0 * u + roll(u, lam, -1)) / h**2
        else:
            raise ValueError(f"unknown form {form!r}")
    return GridFunction(ctx.grid, out)


def chi(ctx: OperatorContext, direction: Sequence[int]) -> GridFunction:
    """``q_l + h p_l`` at ``ctx.time``."""
    lam = tuple(int(v) for v in direction)
    if lam not in ctx.stencil.q:
        raise StencilError(f"direction {lam} is not in the stencil")
    st = ctx.stencil
    vals = st.q[lam].sample(ctx.grid, ctx.time) + ctx.h * st.p[lam].sample(ctx.grid, ctx.time)
    return GridFunction(ctx.grid, vals)


def _times(ctx: OperatorContext, times: Sequence[float] | None) -> list[float]:
    return [ctx.time] if not times else [float(t) for t in times]


@dataclass
class MonotoneReport:
    passed: bool
    min_chi: float
    time: float
    index: tuple[int, ...]
    direction: Direction | None

    def __str__(self):
        return f"monotone: {'pass' if self.passed else 'fail'} (min chi {self.min_chi:.6g} at t={self.time}, index {self.index}, direction {self.direction})"


def validate_monotone(ctx: OperatorContext, times: Sequence[float] | None = None) -> MonotoneReport:
    """Check ``q_l + h p_l >= 0`` at every sampled time, point and direction."""
    best = (math.inf, ctx.time, (0,) * ctx.grid.dim, None)
    for t in _times(ctx, times):
        c_t = ctx.at(t)
        for lam in ctx.stencil.directions:
            vals = chi(c_t, lam).values
            k = int(np.argmin(vals))
            if vals.flat[k] < best[0]:
                best = (float(vals.flat[k]), t, tuple(int(i) for i in np.unravel_index(k, vals.shape)), lam)
    return MonotoneReport(best[0] >= 0, *best)


def _m0(ctx: OperatorContext, times) -> float:
    declared = ctx.stencil.declared_m0()
    return declared if declared is not None else ctx.stencil.measured_m0(ctx.grid, times)


@dataclass
class ConsistencyReport:
    passed: bool
    residual: np.ndarray
    tolerance: float
    x_independent: bool

    def __str__(self):
        return f"consistency: {'pass' if self.passed else 'fail'} (max |sum l q_l| = {np.array2string(self.residual)}, tol {self.tolerance:.3g})"


def validate_consistency(ctx: OperatorContext, times: Sequence[float] | None = None) -> ConsistencyReport:
    """Check ``sum_l l q_l == 0`` (and, weaker, that it does not depend on ``x``)."""
    ts = _times(ctx, times)
    tol = SYMMETRY_RTOL * (1 + _m0(ctx, ts))
    resid = np.zeros(ctx.grid.dim)
    x_indep = True
    for t in ts:
        total = np.zeros((ctx.grid.dim,) + ctx.grid.shape)
        for lam in ctx.stencil.directions:
            qv = ctx.stencil.q[lam].sample(ctx.grid, t)
            for i, li in enumerate(lam):
                if li:
                    total[i] += li * qv
        resid = np.maximum(resid, np.abs(total).reshape(ctx.grid.dim, -1).max(axis=1))
        spread = total.reshape(ctx.grid.dim, -1)
        x_indep &= bool(np.all(spread.max(axis=1) - spread.min(axis=1) <= tol))
    return ConsistencyReport(bool(np.all(resid <= tol)), resid, tol, x_indep)


@dataclass
class SymmetryFlags:
    condition_s: bool
    p_antisym: bool


def symmetry_flags(ctx: OperatorContext, times: Sequence[float] | None = None) -> SymmetryFlags:
    """Sample-based check of ``Lambda = -Lambda, q_l = q_-l`` and of ``p_-l = -p_l``."""
    ts = _times(ctx, times)
    st = ctx.stencil
    dirs = set(st.directions)
    if any(tuple(-v for v in lam) not in dirs for lam in dirs):
        return SymmetryFlags(False, False)
    tol = SYMMETRY_RTOL * (1 + _m0(ctx, ts))
    cond_s = p_anti = True
    for t in ts:
        for lam in st.directions:
            neg = tuple(-v for v in lam)
            if cond_s and not st.q[lam].same_as(st.q[neg]):
                d = st.q[lam].sample(ctx.grid, t) - st.q[neg].sample(ctx.grid, t)
                cond_s = bool(np.max(np.abs(d)) <= tol)
            if p_anti:
                s = st.p[lam].sample(ctx.grid, t) + st.p[neg].sample(ctx.grid, t)
                p_anti = bool(np.max(np.abs(s)) <= tol)
    return SymmetryFlags(cond_s, p_anti)


@dataclass
class StencilFlags:
    monotone: MonotoneReport
    consistency: ConsistencyReport
    condition_s: bool
    p_antisym: bool

    def lines(self) -> list[str]:
        return [
            str(self.monotone),
            str(self.consistency),
            f"condition (S): {'holds' if self.condition_s else 'fails'}",
            f"p antisymmetric: {'holds' if self.p_antisym else 'fails'}",
        ]


def verify_flags(ctx: OperatorContext, times: Sequence[float] | None = None) -> StencilFlags:
    sym = symmetry_flags(ctx, times)
    return StencilFlags(validate_monotone(ctx, times), validate_consistency(ctx, times), sym.condition_s, sym.p_antisym)


def symmetrize(
    s: Stencil,
    m0: float | None = None,
    grid: GridSpec | None = None,
    times: Sequence[float] = (0.0,),
) -> Stencil:
    """Equivalent stencil satisfying the symmetry condition with ``p >= 0``.

    Directions become ``Lambda u (-Lambda)``; ``q`` is split evenly between
    ``l`` and ``-l``; ``p`` is shifted by ``m0`` (a bound on ``|p|``) so that the
    new drift coefficients are nonnegative while ``sum p_l l`` is unchanged.
    ``m0`` defaults to the sup of ``|p|`` sampled on ``grid``.
    """
    if m0 is None:
        if grid is None:
            raise StencilError("symmetrize needs m0 or a grid to measure it on")
        m0 = max(s.p[lam].sup_abs(grid, times) for lam in s.directions)
    elif grid is not None:
        worst = max(s.p[lam].sup_abs(grid, times) for lam in s.directions)
        if worst > m0:
            raise StencilError(f"declared bound m0={m0} is smaller than sampled |p| = {worst}")
    M = CoefficientField.constant(m0)
    dirs = set(s.directions)
    q_hat, p_hat, order = {}, {}, []
    for lam in s.directions:
        neg = tuple(-v for v in lam)
        if neg in dirs:
            if s.q[lam].same_as(s.q[neg]):
                q_hat[lam] = s.q[lam]
            else:
                q_hat[lam] = 0.5 * (s.q[lam] + s.q[neg])
            p_hat[lam] = M + s.p[lam]
            order.append(lam)
        else:
            half_q = 0.5 * s.q[lam]
            q_hat[lam] = q_hat[neg] = half_q
            p_hat[lam] = M + 0.5 * s.p[lam]
            p_hat[neg] = M - 0.5 * s.p[lam]
            order.extend([lam, neg])
    return Stencil(tuple(order), q_hat, p_hat, s.c)


def continuum_coeffs(s: Stencil, grid: GridSpec, t: float = 0.0, index: Sequence[int] | None = None):
    """Diffusion matrix ``a = 1/2 sum q_l l l^T``, drift ``b = sum p_l l`` and ``c``.

    Returns arrays of shape ``(d, d) + grid.shape``, ``(d,) + grid.shape`` and
    ``grid.shape``, or point values if ``index`` is given.
    """
    d = s.dim
    a = np.zeros((d, d) + grid.shape)
    b = np.zeros((d,) + grid.shape)
    for lam in s.directions:
        qv = s.q[lam].sample(grid, t)
        pv = s.p[lam].sample(grid, t)
        l = np.asarray(lam, float)
        a += 0.5 * np.outer(l, l).reshape((d, d) + (1,) * d) * qv
        b += l.reshape((d,) + (1,) * d) * pv
    c = np.array(s.c.sample(grid, t))
    if index is not None:
        idx = tuple(index)
        return a[(slice(None), slice(None)) + idx], b[(slice(None),) + idx], float(c[idx])
    return a, b, c


# ---------------------------------------------------------------- derivatives


@lru_cache(maxsize=None)
def fd_weights(order: int, accuracy: int) -> tuple[Fraction, ...]:
    """Exact centred weights ``w_k``, ``k = -K..K``, with
    ``sum_k w_k f(x + k s) / s^order = f^(order)(x) + O(s^accuracy)``."""
    if order < 0 or accuracy < 2 or accuracy % 2:
        raise ValueError("need order >= 0 and an even accuracy >= 2")
    K = (order - 1) // 2 + accuracy // 2 if order > 0 else 0
    nodes = list(range(-K, K + 1))
    # Fornberg's recursion in exact arithmetic, expansion point 0
    n = len(nodes)
    C = [[Fraction(0)] * n for _ in range(order + 1)]
    C[0][0] = Fraction(1)
    c1 = Fraction(1)
    c4 = Fraction(nodes[0])
    for i in range(1, n):
        mn = min(i, order)
        c2 = Fraction(1)
        c5, c4 = c4, Fraction(nodes[i])
        for j in range(i):
            c3 = Fraction(nodes[i] - nodes[j])
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    C[k][i] = c1 * (k * C[k - 1][i - 1] - c5 * C[k][i - 1]) / c2
                C[0][i] = -c1 * c5 * C[0][i - 1] / c2
            for k in range(mn, 0, -1):
                C[k][j] = (c4 * C[k][j] - k * C[k - 1][j]) / c3
            C[0][j] = c4 * C[0][j] / c3
        c1 = c2
    return tuple(C[order])


def directional_derivative(
    values: np.ndarray, lam: Direction, order: int, step: float, accuracy: int
) -> np.ndarray:
    """Centred approximation of ``d_lam^order`` from samples at spacing ``step*lam``.

    Derivatives along ``-lam`` are computed from ``lam`` and a sign, so that
    opposite directions give exactly opposite odd derivatives.
    """
    if order == 0:
        return values.copy()
    first = next(v for v in lam if v)
    if first < 0:
        base = directional_derivative(values, tuple(-v for v in lam), order, step, accuracy)
        return -base if order % 2 else base
    w = fd_weights(order, accuracy)
    K = (len(w) - 1) // 2
    out = np.zeros_like(values)
    for k, wk in zip(range(-K, K + 1), w):
        if wk:
            out += float(wk) * roll(values, lam, k)
    return out / step**order


def _fine_values(ctx: OperatorContext, f, fine_factor: int) -> tuple[GridSpec, np.ndarray]:
    """Sample ``f`` on ``ctx.grid`` refined by ``fine_factor``."""
    fine = ctx.grid.refine(fine_factor) if fine_factor > 1 else ctx.grid
    if isinstance(f, GridFunction):
        if f.spec == fine:
            return fine, f.values
        if fine_factor == 1:
            raise GridError("grid function does not live on the context grid")
        raise GridError("a grid function argument must be given on the refined grid")
    if callable(f) and not isinstance(f, CoefficientField):
        return fine, GridFunction.sample(fine, f).values
    return fine, as_field(f).sample(fine, ctx.time)


class ContinuumOperator:
    """Centred-difference approximations of ``L`` and ``L^(i)`` on one grid."""

    def __init__(self, stencil: Stencil, grid: GridSpec, accuracy: int = CONTINUUM_ACCURACY,
                 taylor_accuracy: int = TAYLOR_ACCURACY, cap: int = DERIVATIVE_CAP):
        self.sampled = SampledStencil(stencil, grid)
        self.stencil = stencil
        self.grid = grid
        self.accuracy = accuracy
        self.taylor_accuracy = taylor_accuracy
        self.cap = cap

    def __call__(self, u: np.ndarray, t: float) -> np.ndarray:
        st, h = self.sampled, self.grid.mesh
        out = -st.c(t) * u
        for lam in self.stencil.directions:
            qv, pv = st.q[lam](t), st.p[lam](t)
            if np.any(qv):
                out = out + 0.5 * qv * directional_derivative(u, lam, 2, h, self.accuracy)
            if np.any(pv):
                out = out + pv * directional_derivative(u, lam, 1, h, self.accuracy)
        return out

    def taylor(self, i: int, u: np.ndarray, t: float) -> np.ndarray:
        if i < 1:
            raise ValueError("Taylor operators are indexed from 1")
        if i + 2 > self.cap:
            raise StencilError(f"L^({i}) needs derivatives of order {i + 2}, above the cap {self.cap}")
        st, h = self.sampled, self.grid.mesh
        out = np.zeros_like(u)
        for lam in self.stencil.directions:
            qv, pv = st.q[lam](t), st.p[lam](t)
            if np.any(qv):
                out = out + qv * directional_derivative(u, lam, i + 2, h, self.taylor_accuracy) / ((i + 1) * (i + 2))
            if np.any(pv):
                out = out + pv * directional_derivative(u, lam, i + 1, h, self.taylor_accuracy) / (i + 1)
        return out

    def _derivative_matrix(self, lam: Direction, order: int, accuracy: int):
        first = next(v for v in lam if v)
        if first < 0:
            base = self._derivative_matrix(tuple(-v for v in lam), order, accuracy)
            return -base if order % 2 else base
        w = fd_weights(order, accuracy)
        K = (len(w) - 1) // 2
        idx = np.arange(self.grid.size).reshape(self.grid.shape)
        rows = np.arange(self.grid.size)
        out = sparse.csr_matrix((self.grid.size, self.grid.size))
        for k, wk in zip(range(-K, K + 1), w):
            if wk:
                cols = roll(idx, lam, k).ravel()
                out = out + sparse.csr_matrix((np.full(self.grid.size, float(wk)), (rows, cols)),
                                              shape=out.shape)
        return out / self.grid.mesh**order

    def matrix(self, t: float = 0.0):
        """Sparse matrix of ``L`` on the flattened grid at time ``t``."""
        st = self.sampled
        out = sparse.diags(-np.ravel(st.c(t))).tocsr()
        for lam in self.stencil.directions:
            qv, pv = np.ravel(st.q[lam](t)), np.ravel(st.p[lam](t))
            if np.any(qv):
                out = out + sparse.diags(0.5 * qv) @ self._derivative_matrix(lam, 2, self.accuracy)
            if np.any(pv):
                out = out + sparse.diags(pv) @ self._derivative_matrix(lam, 1, self.accuracy)
        return _canonical(out)

    def taylor_matrix(self, i: int, t: float = 0.0):
        """Sparse matrix of ``L^(i)`` on the flattened grid at time ``t``."""
        if i < 1:
            raise ValueError("Taylor operators are indexed from 1")
        if i + 2 > self.cap:
            raise StencilError(f"L^({i}) needs derivatives of order {i + 2}, above the cap {self.cap}")
        st = self.sampled
        n = self.grid.size
        out = sparse.csr_matrix((n, n))
        for lam in self.stencil.directions:
            qv, pv = np.ravel(st.q[lam](t)), np.ravel(st.p[lam](t))
            if np.any(qv):
                d = self._derivative_matrix(lam, i + 2, self.taylor_accuracy)
                out = out + sparse.diags(qv / ((i + 1) * (i + 2))) @ d
            if np.any(pv):
                d = self._derivative_matrix(lam, i + 1, self.taylor_accuracy)
                out = out + sparse.diags(pv / (i + 1)) @ d
        return _canonical(out)

    def spectral_bound(self, t: float) -> float:
        """Upper bound on the magnitude of the operator's eigenvalues."""
        h = self.grid.mesh
        s2 = sum(abs(float(w)) for w in fd_weights(2, self.accuracy))
        s1 = sum(abs(float(w)) for w in fd_weights(1, self.accuracy))
        st = self.sampled
        tot = np.abs(st.c(t)).astype(float)
        for lam in self.stencil.directions:
            tot = tot + 0.5 * np.abs(st.q[lam](t)) * s2 / h**2 + np.abs(st.p[lam](t)) * s1 / h
        return float(np.max(tot))


def _canonical(m):
    m = sparse.csr_matrix(m)
    m.sum_duplicates()
    m.eliminate_zeros()
    m.sort_indices()
    return m


def apply_continuum_L(ctx: OperatorContext, f, fine_factor: int = 8, accuracy: int = CONTINUUM_ACCURACY,
                      tol: float | None = None) -> GridFunction:
    """Reference evaluation of ``L f`` on ``ctx.grid``.

    ``f`` is an expression (text, tree, field or callable of ``x1..xd``) or a
    GridFunction on the grid refined by ``fine_factor``.  Derivatives are
    centred differences of the given accuracy on the refined grid.  With
    ``tol``, the result is compared against a twice finer evaluation and a
    StencilError is raised if they differ by more than ``tol``.
    """
    fine, vals = _fine_values(ctx, f, fine_factor)
    op = ContinuumOperator(ctx.stencil, fine, accuracy=accuracy)
    out = GridFunction(fine, op(vals, ctx.time))
    result = out.restrict(ctx.grid) if fine is not ctx.grid else out
    if tol is not None:
        if isinstance(f, GridFunction):
            raise StencilError("refinement check needs f as an expression")
        finer = apply_continuum_L(ctx, f, 2 * fine_factor, accuracy)
        gap = float(np.max(np.abs(finer.values - result.values)))
        if gap > tol:
            raise StencilError(f"insufficient refinement: fine_factor={fine_factor} changes by {gap:.3g} > {tol:.3g} when doubled")
    return result


def apply_taylor_L(ctx: OperatorContext, i: int, f, fine_factor: int = 1,
                   accuracy: int = TAYLOR_ACCURACY, cap: int = DERIVATIVE_CAP) -> GridFunction:
    """``L^(i) f = 1/((i+1)(i+2)) sum q_l d_l^{i+2} f + 1/(i+1) sum p_l d_l^{i+1} f`` on ``ctx.grid``."""
    fine, vals = _fine_values(ctx, f, fine_factor)
    op = ContinuumOperator(ctx.stencil, fine, taylor_accuracy=accuracy, cap=cap)
    out = GridFunction(fine, op.taylor(i, vals, ctx.time))
    return out.restrict(ctx.grid) if fine is not ctx.grid else out


def remainder_Oj(ctx: OperatorContext, j: int, f, fine_factor: int = 8,
                 accuracy: int = TAYLOR_ACCURACY, cap: int = DERIVATIVE_CAP) -> GridFunction:
    """Defect ``L_h f - L f - sum_{1<=i<=j} h^i/i! L^(i) f`` on ``ctx.grid``."""
    if j < 0:
        raise ValueError("j must be nonnegative")
    fine, vals = _fine_values(ctx, f, fine_factor)
    coarse = GridFunction(fine, vals).restrict(ctx.grid) if fine is not ctx.grid else GridFunction(fine, vals)
    out = apply_Lh(ctx, coarse, form="difference").values
    op = ContinuumOperator(ctx.stencil, fine, accuracy=max(accuracy, CONTINUUM_ACCURACY),
                           taylor_accuracy=accuracy, cap=cap)
    lf = GridFunction(fine, op(vals, ctx.time))
    out = out - (lf.restrict(ctx.grid).values if fine is not ctx.grid else lf.values)
    h = ctx.h
    for i in range(1, j + 1):
        ti = GridFunction(fine, op.taylor(i, vals, ctx.time))
        ti = ti.restrict(ctx.grid) if fine is not ctx.grid else ti
        out = out - h**i / math.factorial(i) * ti.values
    return GridFunction(ctx.grid, out)


__all__ = [
    "Stencil", "OperatorContext", "SampledStencil", "DiscreteOperator", "ContinuumOperator",
    "apply_Lh", "chi", "validate_monotone", "validate_consistency", "symmetry_flags", "verify_flags",
    "symmetrize", "continuum_coeffs", "apply_continuum_L", "apply_taylor_L", "remainder_Oj",
    "fd_weights", "directional_derivative", "MonotoneReport", "ConsistencyReport", "StencilFlags",
    "StencilError", "FieldError",
]
