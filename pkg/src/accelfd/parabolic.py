"""Method-of-lines integration of ``u' = L_h u + f``, ``u(0) = g``.

Time stepping is the classical four-stage Runge-Kutta scheme with a fixed
step tied to the stiffness of ``L_h`` (``dt ~ h^2`` for diffusion), so the
temporal error stays far below the spatial errors being measured.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .fields import CoefficientField, FieldLike, as_field
from .grid import GridFunction, GridSpec
from .operators import DiscreteOperator, OperatorContext, validate_monotone


class IntegrationError(RuntimeError):
    pass


class MonotonicityError(ValueError):
    pass


@dataclass(frozen=True)
class ParabolicProblem:
    ctx: OperatorContext
    f: CoefficientField
    g: CoefficientField
    horizon: float

    def __post_init__(self):
        object.__setattr__(self, "f", as_field(self.f))
        object.__setattr__(self, "g", as_field(self.g))
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if self.g.time_dependent:
            raise ValueError("initial data must not depend on t")

    @property
    def grid(self) -> GridSpec:
        return self.ctx.grid

    def on(self, grid: GridSpec) -> "ParabolicProblem":
        return replace(self, ctx=self.ctx.on(grid))

    def with_data(self, f: FieldLike | None = None, g: FieldLike | None = None, c: FieldLike | None = None):
        ctx = self.ctx
        if c is not None:
            ctx = OperatorContext(ctx.stencil.with_c(c), ctx.grid, ctx.time, ctx.h0)
        return ParabolicProblem(ctx, self.f if f is None else f, self.g if g is None else g, self.horizon)


@dataclass(frozen=True)
class TimeIntegratorConfig:
    """Fixed-step RK4 settings; ``dt=None`` means ``safety / spectral bound``."""

    dt: float | None = None
    safety: float = 0.5
    c_shift: float = 0.0
    allow_nonmonotone: bool = False
    bound_samples: int = 9

    def __post_init__(self):
        if not 0 < self.safety <= 1:
            raise ValueError("safety must lie in (0, 1]")
        if self.c_shift < 0:
            raise ValueError("c_shift must be nonnegative")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")


def coefficient_times(p: ParabolicProblem, cfg: TimeIntegratorConfig) -> list[float]:
    if not p.ctx.stencil.time_dependent:
        return [0.0]
    return list(np.linspace(0.0, p.horizon, cfg.bound_samples))


def stiffness(p: ParabolicProblem, cfg: TimeIntegratorConfig) -> float:
    """sup over grid and sampled times of ``(2/h^2) sum q + (2/h) sum |p| + |c|``."""
    st, grid = p.ctx.stencil, p.grid
    h = grid.mesh
    worst = 0.0
    for t in coefficient_times(p, cfg):
        tot = np.abs(st.c.sample(grid, t)) + cfg.c_shift
        for lam in st.directions:
            tot = tot + 2.0 / h**2 * np.abs(st.q[lam].sample(grid, t)) + 2.0 / h * np.abs(st.p[lam].sample(grid, t))
        worst = max(worst, float(np.max(tot)))
    return worst


def stable_dt(p: ParabolicProblem, cfg: TimeIntegratorConfig | None = None) -> float:
    cfg = cfg or TimeIntegratorConfig()
    lam = stiffness(p, cfg)
    if lam == 0:
        return p.horizon
    return min(cfg.safety / lam, p.horizon)


def rk4(rhs: Callable[[float, np.ndarray], np.ndarray], u0: np.ndarray, times: Sequence[float], dt: float,
        on_step: Callable[[float, np.ndarray], None] | None = None):
    """Integrate from ``t=0`` and return copies of the state at each of ``times``.

    Each interval between consecutive output times is split into equal steps
    no longer than ``dt``.  Returns ``(states, number_of_steps)``.
    """
    ts = [float(t) for t in times]
    if any(t < 0 for t in ts) or any(b < a for a, b in zip(ts, ts[1:])):
        raise ValueError("sample times must be nonnegative and nondecreasing")
    u = np.array(u0, dtype=float)
    t = 0.0
    out, steps = [], 0
    for target in ts:
        span = target - t
        n = max(1, math.ceil(span / dt * (1 - 1e-12))) if span > 0 else 0
        k = span / n if n else 0.0
        for i in range(n):
            k1 = rhs(t, u)
            k2 = rhs(t + 0.5 * k, u + 0.5 * k * k1)
            k3 = rhs(t + 0.5 * k, u + 0.5 * k * k2)
            k4 = rhs(t + k, u + k * k3)
            u = u + (k / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t = target if i == n - 1 else t + k
            steps += 1
            if not np.all(np.isfinite(u)):
                raise IntegrationError(f"non-finite values appeared at t={t:.6g}")
            if on_step is not None:
                on_step(t, u)
        out.append(u.copy())
    return out, steps


@dataclass
class ParabolicRun:
    times: list[float]
    solutions: list[GridFunction]
    dt: float
    steps: int
    flags: list[str] = field(default_factory=list)


def _is_zero(op: DiscreteOperator) -> bool:
    pairs, c = op.sampled.weights(0.0)
    return not pairs and not np.any(c)


def _check_monotone(p: ParabolicProblem, cfg: TimeIntegratorConfig) -> None:
    report = validate_monotone(p.ctx, coefficient_times(p, cfg))
    if not report.passed and not cfg.allow_nonmonotone:
        raise MonotonicityError(f"scheme is not monotone: {report}")


def run_parabolic(p: ParabolicProblem, cfg: TimeIntegratorConfig | None = None,
                  sample_times: Sequence[float] | None = None) -> ParabolicRun:
    """Solve and return samples with step statistics."""
    cfg = cfg or TimeIntegratorConfig()
    times = [p.horizon] if sample_times is None else [float(t) for t in sample_times]
    if any(t > p.horizon * (1 + 1e-12) for t in times):
        raise ValueError("sample times beyond the horizon")
    _check_monotone(p, cfg)
    grid = p.grid
    gamma = cfg.c_shift
    op = DiscreteOperator(p.ctx.stencil, grid, extra_c=gamma)
    src = p.f.on(grid)
    # zero operator: the solution is g plus the time integral of f
    inert = not p.ctx.stencil.time_dependent and not gamma and _is_zero(op)
    scale = (lambda t: math.exp(-gamma * t)) if gamma else (lambda t: 1.0)
    f0 = None if src.time_dependent else src(0.0)

    def rhs(t, u):
        ft = f0 if f0 is not None else src(t)
        if inert:
            return ft.copy()
        return op(u, t) + scale(t) * ft

    dt = cfg.dt if cfg.dt is not None else stable_dt(p, cfg)
    states, steps = rk4(rhs, p.g.sample(grid), times, dt)
    sols = [GridFunction(grid, s * math.exp(gamma * t) if gamma else s) for s, t in zip(states, times)]
    return ParabolicRun(times, sols, dt, steps)


def solve_parabolic(p: ParabolicProblem, cfg: TimeIntegratorConfig | None = None,
                    sample_times: Sequence[float] | None = None) -> list[GridFunction]:
    """``u_h`` at each requested time (default: the horizon)."""
    return run_parabolic(p, cfg, sample_times).solutions


def check_time_resolution(p: ParabolicProblem, cfg: TimeIntegratorConfig | None, spatial_tol: float,
                          sample_times: Sequence[float] | None = None) -> tuple[float, bool]:
    """Rerun with half the step; pass if no sample moves by ``0.01*spatial_tol`` or more."""
    cfg = cfg or TimeIntegratorConfig()
    first = run_parabolic(p, cfg, sample_times)
    second = run_parabolic(p, replace(cfg, dt=first.dt / 2), sample_times)
    change = max(float(np.max(np.abs(a.values - b.values))) for a, b in zip(first.solutions, second.solutions))
    return change, change < 0.01 * spatial_tol


@dataclass
class MaxPrincipleReport:
    passed: bool
    max_excess: float
    nu: float
    times: list[float]
    sups: list[float]
    bounds: list[float]
    tolerance: float

    def __str__(self):
        return (f"max principle: {'pass' if self.passed else 'fail'} "
                f"(max of sup v - bound = {self.max_excess:.3g}, nu = {self.nu:.3g})")


def max_principle_bound(p: ParabolicProblem, cfg: TimeIntegratorConfig | None, C: FieldLike,
                        F: Callable[[float], float] | float, sample_times: Sequence[float] | None = None,
                        tolerance: float = 1e-8) -> MaxPrincipleReport:
    """Integrate ``v' = L_h v + C (sup_x v)_+ + F(t)``, ``v(0) = g`` and compare
    ``sup_x v(t)`` with ``sup_x v_+(0) + sup_[0,t] F / |nu|``, ``nu = sup(C - c) < 0``.

    The problem's own source ``f`` is not used.
    """
    cfg = cfg or TimeIntegratorConfig()
    grid, st = p.grid, p.ctx.stencil
    C = as_field(C)
    Fn = (lambda t, _v=float(F): _v) if not callable(F) else F
    ctimes = sorted(set(coefficient_times(p, cfg)) | ({0.0, p.horizon} if C.time_dependent else {0.0}))
    nu = max(float(np.max(C.sample(grid, t) - st.c.sample(grid, t))) for t in ctimes)
    if nu >= 0:
        raise ValueError(f"maximum principle needs sup(C - c) < 0, got {nu}")
    _check_monotone(p, cfg)
    times = list(np.linspace(0.0, p.horizon, 21)) if sample_times is None else [float(t) for t in sample_times]
    op = DiscreteOperator(st, grid)
    Cs = C.on(grid)

    def rhs(t, v):
        return op(v, t) + Cs(t) * max(float(np.max(v)), 0.0) + Fn(t)

    dt = cfg.dt if cfg.dt is not None else stable_dt(p, cfg)
    v0 = p.g.sample(grid)
    states, _ = rk4(rhs, v0, times, dt)
    start = max(float(np.max(v0)), 0.0)
    sups, bounds = [], []
    for t, v in zip(times, states):
        fs = [Fn(s) for s in np.linspace(0.0, t, max(2, int(math.ceil(t / dt)) + 1))]
        bounds.append(start + max(fs) / abs(nu))
        sups.append(float(np.max(v)))
    excess = max(s - b for s, b in zip(sups, bounds))
    return MaxPrincipleReport(excess <= tolerance, excess, nu, times, sups, bounds, tolerance)
