"""Expansion of ``u_h`` in powers of ``h`` and empirical convergence orders.

The coefficients ``u^(j)`` of

    u_h = sum_{j<=k} h^j/j! u^(j) + h^{k+1} r_h

solve the triangular continuum system

    u^(j)' = L u^(j) + sum_{i=1..j} C(j, i) L^(i) u^(j-i),   u^(j)(0) = 0  (j >= 1),

with ``u^(0)`` the solution of ``u' = L u + f``, ``u(0) = g``.  Here they are
approximated on a reference mesh finer than every study mesh, with
high-order centred differences for ``L`` and ``L^(i)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import sparse

from .grid import GridError, GridFunction, GridSpec, delta_alpha
from .operators import CONTINUUM_ACCURACY, DERIVATIVE_CAP, TAYLOR_ACCURACY, ContinuumOperator, StencilError
from .parabolic import ParabolicProblem, TimeIntegratorConfig, rk4, solve_parabolic

BELOW_FLOOR = "below-floor"
REMAINDER_RATIO_LIMIT = 3.0


@dataclass
class CoefficientSolution:
    """``coefficients[j][n]`` is ``u^(j)`` at ``times[n]`` on ``grid``."""

    grid: GridSpec
    times: list[float]
    coefficients: list[list[GridFunction]]
    dt: float
    steps: int

    @property
    def order(self) -> int:
        return len(self.coefficients) - 1


def solve_coefficient_system(p: ParabolicProblem, k: int, cfg: TimeIntegratorConfig | None = None,
                             sample_times: Sequence[float] | None = None,
                             accuracy: int = CONTINUUM_ACCURACY, taylor_accuracy: int = TAYLOR_ACCURACY,
                             cap: int = DERIVATIVE_CAP) -> CoefficientSolution:
    """``u^(0), ..., u^(k)`` on ``p.grid`` (which should be the reference mesh).

    All ``k + 1`` equations advance together with one RK4 step size chosen
    from the spectral bound of the discrete ``L``.  Row ``j`` only reads rows
    ``<= j``, so a run with smaller ``k`` reproduces the leading rows bitwise.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    if k >= 1 and k + 2 > cap:
        raise StencilError(f"L^({k}) needs derivatives of order {k + 2}, above the cap {cap}")
    cfg = cfg or TimeIntegratorConfig()
    grid = p.grid
    times = [p.horizon] if sample_times is None else [float(t) for t in sample_times]
    op = ContinuumOperator(p.ctx.stencil, grid, accuracy=accuracy, taylor_accuracy=taylor_accuracy, cap=cap)
    src = p.f.on(grid)
    binom = [[math.comb(j, i) for i in range(j + 1)] for j in range(k + 1)]

    if p.ctx.stencil.time_dependent:
        def rhs(t, U):
            out = np.empty_like(U)
            out[0] = op(U[0], t) + src(t)
            for j in range(1, k + 1):
                acc = op(U[j], t)
                for i in range(1, j + 1):
                    acc = acc + binom[j][i] * op.taylor(i, U[j - i], t)
                out[j] = acc
            return out
    else:
        # one block lower-triangular sparse matrix; row blocks never read later blocks
        L = op.matrix()
        taylor = [None] + [op.taylor_matrix(i) for i in range(1, k + 1)]
        blocks = [[L if i == j else binom[j][j - i] * taylor[j - i] if i < j else None
                   for i in range(k + 1)] for j in range(k + 1)]
        A = sparse.bmat(blocks, format="csr") if k else L
        A.sort_indices()
        f0 = None if src.time_dependent else np.ravel(src(0.0))

        def rhs(t, U):
            out = (A @ U.reshape(-1)).reshape(U.shape)
            out[0] += np.reshape(f0 if f0 is not None else src(t), grid.shape)
            return out

    if cfg.dt is not None:
        dt = cfg.dt
    else:
        ts = np.linspace(0.0, p.horizon, cfg.bound_samples) if p.ctx.stencil.time_dependent else [0.0]
        bound = max(op.spectral_bound(float(t)) for t in ts)
        dt = p.horizon if bound == 0 else min(cfg.safety / bound, p.horizon)
    U0 = np.zeros((k + 1,) + grid.shape)
    U0[0] = p.g.sample(grid)
    states, steps = rk4(rhs, U0, times, dt)
    coeffs = [[GridFunction(grid, s[j]) for s in states] for j in range(k + 1)]
    return CoefficientSolution(grid, times, coeffs, dt, steps)


@dataclass
class ExpansionReport:
    order: int
    meshes: list[float]
    coefficients: CoefficientSolution
    remainder_norms: list[float]
    exponent: float | str
    ratio: float
    passed: bool

    def lines(self) -> list[str]:
        rows = [f"h={h:.6g}  sup|r_h|={r:.6e}" for h, r in zip(self.meshes, self.remainder_norms)]
        rows.append(f"max/min ratio {self.ratio:.4g} (limit {REMAINDER_RATIO_LIMIT}), fitted exponent {self.exponent}")
        return rows


def reference_grid(p: ParabolicProblem, meshes: Sequence[float], factor: int = 8) -> GridSpec:
    """Grid ``factor`` times finer than the finest of ``meshes``, sharing the problem's origin and period."""
    finest = min(meshes)
    return GridSpec.from_period(p.grid.period, finest / factor, p.grid.origin)


def expansion_remainder(p: ParabolicProblem, k: int, meshes: Sequence[float],
                        cfg: TimeIntegratorConfig | None = None, reference_factor: int = 8, alpha=None,
                        time: float | None = None) -> ExpansionReport:
    """Sup norms of ``r_h = h^{-(k+1)} (u_h - sum_{j<=k} h^j/j! u^(j))`` at time ``time``
    (default the horizon), over the points of the coarsest mesh.

    With a multi-index ``alpha`` both ``u_h`` and the coefficients are first
    differenced by ``delta_alpha`` on the mesh ``h``.  Passes when the largest
    norm is at most three times the smallest.
    """
    meshes = sorted((float(h) for h in meshes), reverse=True)
    if len(meshes) < 2:
        raise ValueError("need at least two meshes")
    t_end = p.horizon if time is None else float(time)
    ref = reference_grid(p, meshes, reference_factor)
    grids = [GridSpec.from_period(p.grid.period, h, p.grid.origin) for h in meshes]
    for g in grids:
        g.refinement_factor(ref)
    base = grids[0]
    for g in grids[1:]:
        base.refinement_factor(g)
    coeffs = solve_coefficient_system(p.on(ref), k, cfg, [t_end])
    norms = []
    for g in grids:
        uh = solve_parabolic(p.on(g), cfg, [t_end])[0]
        if alpha is not None:
            uh = delta_alpha(uh, alpha)
        total = uh.values.copy()
        for j in range(k + 1):
            uj = coeffs.coefficients[j][0].restrict(g)
            if alpha is not None:
                uj = delta_alpha(uj, alpha)
            total -= g.mesh**j / math.factorial(j) * uj.values
        r = GridFunction(g, total / g.mesh ** (k + 1)).restrict(base)
        norms.append(r.sup())
    ratio = max(norms) / min(norms) if min(norms) > 0 else math.inf
    exponent = observed_order(list(zip(meshes, norms)))
    return ExpansionReport(k, meshes, coeffs, norms, exponent, ratio, bool(ratio <= REMAINDER_RATIO_LIMIT))


def observed_order(errors: Sequence[tuple[float, float]]) -> float | str:
    """Least-squares slope of ``log e`` against ``log h``.

    Returns ``BELOW_FLOOR`` when any error is zero or negative.
    """
    if len(errors) < 2:
        raise ValueError("need at least two (h, error) pairs")
    hs = np.array([h for h, _ in errors], float)
    es = np.array([e for _, e in errors], float)
    if np.any(hs <= 0):
        raise ValueError("mesh sizes must be positive")
    if np.any(np.diff(hs) >= 0):
        raise ValueError("mesh sizes must be strictly decreasing")
    if np.any(~(es > 0)):
        return BELOW_FLOOR
    x, y = np.log(hs), np.log(es)
    slope = np.sum((x - x.mean()) * (y - y.mean())) / np.sum((x - x.mean()) ** 2)
    return float(slope)


def local_orders(errors: Sequence[tuple[float, float]]) -> list[float | str]:
    """Pairwise orders between consecutive meshes (empty string for the first)."""
    out: list[float | str] = [""]
    for a, b in zip(errors, errors[1:]):
        out.append(observed_order([a, b]))
    return out


@dataclass
class FloorFit:
    order: float | str
    used: int
    floor_index: int | None

    @property
    def floor_detected(self) -> bool:
        return self.floor_index is not None


def fit_before_floor(errors: Sequence[tuple[float, float]], floor: float = 0.0, stall: float = 0.5) -> FloorFit:
    """Fit the order on the leading meshes that are still converging.

    A mesh is at the floor when its error is not above ``floor`` or when the
    local order into it falls below ``stall`` times the first local order.
    The fit uses every mesh before the first one at the floor (at least two).
    """
    errors = list(errors)
    cut = None
    first = None
    for i in range(len(errors)):
        e = errors[i][1]
        if not e > floor:
            cut = i
            break
        if i == 0:
            continue
        loc = observed_order(errors[i - 1:i + 1])
        if loc == BELOW_FLOOR:
            cut = i
            break
        if first is None:
            first = loc
        elif first > 0 and loc < stall * first:
            cut = i
            break
    used = len(errors) if cut is None else max(cut, 2)
    return FloorFit(observed_order(errors[:used]), used, cut)


__all__ = [
    "BELOW_FLOOR", "CoefficientSolution", "ExpansionReport", "FloorFit", "solve_coefficient_system",
    "expansion_remainder", "observed_order", "local_orders", "fit_before_floor", "reference_grid", "GridError",
]
