"""Stationary problem ``L_h v + f = 0`` by contraction fixed-point iteration.

With ``w_l = chi_l / h^2`` the equation is equivalent to

    v(x) = (f(x) + sum_l w_l(x) v(x + h l)) / (c(x) + sum_l w_l(x)),

a map with sup-norm Lipschitz constant ``rho = max sum w / (c + sum w) < 1``
when ``c >= c0 > 0`` and all ``chi >= 0``.  Iteration is Jacobi-style: every
sweep is computed from the previous iterate only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .fields import CoefficientField, FieldLike, as_field
from .grid import GridFunction, GridSpec, roll
from .operators import OperatorContext, SampledStencil, apply_Lh, validate_monotone


class EllipticError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class EllipticProblem:
    ctx: OperatorContext
    f: CoefficientField
    c_floor: float

    def __post_init__(self):
        object.__setattr__(self, "f", as_field(self.f))
        if not self.c_floor > 0:
            raise EllipticError("c_floor must be positive")
        if self.ctx.stencil.time_dependent or self.f.time_dependent:
            raise EllipticError("elliptic data must not depend on t")

    @property
    def grid(self) -> GridSpec:
        return self.ctx.grid

    def on(self, grid: GridSpec) -> "EllipticProblem":
        return replace(self, ctx=self.ctx.on(grid))

    def with_f(self, f: FieldLike) -> "EllipticProblem":
        return replace(self, f=as_field(f))


@dataclass(frozen=True)
class IterationConfig:
    tol: float = 1e-12
    max_iters: int | None = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")

    def iteration_cap(self, grid: GridSpec) -> int:
        return self.max_iters if self.max_iters is not None else max(1, 10**7 // grid.size)


class _FixedPointMap:
    def __init__(self, p: EllipticProblem):
        grid = p.grid
        st = SampledStencil(p.ctx.stencil, grid)
        pairs, c = st.weights(0.0)
        if np.any(c < p.c_floor * (1 - 1e-14)):
            raise EllipticError(f"c falls below c_floor={p.c_floor} (min {float(np.min(c)):.6g})")
        mono = validate_monotone(p.ctx)
        if not mono.passed:
            raise EllipticError(f"scheme is not monotone: {mono}")
        self.pairs = pairs
        wsum = sum((w for _, w in pairs), np.zeros(grid.shape))
        self.denom = c + wsum
        self.f = p.f.sample(grid)
        self.rho = float(np.max(wsum / self.denom))

    def __call__(self, v: np.ndarray) -> np.ndarray:
        acc = self.f.copy()
        for lam, w in self.pairs:
            acc += w * roll(v, lam)
        return acc / self.denom


def contraction_factor(p: EllipticProblem) -> float:
    """``max_x sum_l chi_l / (h^2 c + sum_l chi_l)``."""
    return _FixedPointMap(p).rho


@dataclass
class FixedPointResult:
    solution: GridFunction
    iterations: int
    rho: float
    first_step: float
    last_step: float
    defect: float
    defect_bound: float
    steps: list[float]

    def predicted_iterations(self, tol: float) -> int:
        """Iterations after which ``rho^n * |v1 - v0|`` meets the stopping threshold."""
        if self.rho == 0 or self.first_step == 0:
            return 1
        target = tol * (1 - self.rho) / self.rho
        if self.first_step <= target:
            return 1
        return 1 + math.ceil(math.log(target / self.first_step) / math.log(self.rho))


def fixed_point_iterate(p: EllipticProblem, cfg: IterationConfig | None = None) -> FixedPointResult:
    """Iterate from ``v = 0`` until ``|v_{n+1} - v_n| <= tol (1 - rho)/rho``.

    Raises ConvergenceError when the iteration cap is reached and
    EllipticError when the final defect exceeds its guaranteed bound.
    """
    cfg = cfg or IterationConfig()
    T = _FixedPointMap(p)
    rho = T.rho
    cap = cfg.iteration_cap(p.grid)
    threshold = cfg.tol * (1 - rho) / rho if rho > 0 else math.inf
    v = np.zeros(p.grid.shape)
    steps = []
    n = 0
    while True:
        nxt = T(v)
        n += 1
        step = float(np.max(np.abs(nxt - v)))
        steps.append(step)
        v = nxt
        if rho == 0 or step <= threshold:
            break
        if n >= cap:
            last = apply_Lh(p.ctx, GridFunction(p.grid, v), form="difference").values + T.f
            raise ConvergenceError(
                f"no convergence after {n} iterations (rho={rho:.9g}, last step {step:.3g}, "
                f"defect {float(np.max(np.abs(last))):.3g})"
            )
    sol = GridFunction(p.grid, v)
    defect = float(np.max(np.abs(apply_Lh(p.ctx, sol, form="difference").values + T.f)))
    # |L_h v + f| = (c + sum w) |T v - v| <= (c + sum w) tol; plus rounding in L_h itself
    bound = cfg.tol * float(np.max(T.denom)) + 64 * np.finfo(float).eps * float(np.max(T.denom)) * max(sol.sup(), 1.0)
    if defect > bound:
        raise EllipticError(f"defect {defect:.3g} exceeds guaranteed bound {bound:.3g}")
    return FixedPointResult(sol, n, rho, steps[0], steps[-1], defect, bound, steps)


def solve_elliptic(p: EllipticProblem, cfg: IterationConfig | None = None) -> GridFunction:
    """The unique bounded solution of ``L_h v + f = 0`` within ``cfg.tol`` in sup norm."""
    return fixed_point_iterate(p, cfg).solution
