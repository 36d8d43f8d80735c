"""Study orchestration: resolve a configuration, solve across meshes, measure."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import StudyConfig
from .elliptic import EllipticProblem, IterationConfig, solve_elliptic
from .expansion import BELOW_FLOOR, expansion_remainder, fit_before_floor, observed_order
from .fields import CoefficientField, as_field
from .grid import GridFunction, GridSpec
from .operators import OperatorContext, Stencil, verify_flags
from .parabolic import ParabolicProblem, TimeIntegratorConfig, coefficient_times, solve_parabolic
from .richardson import make_plan, solve_accelerated

DEFAULT_MESHES = (1 / 16, 1 / 32, 1 / 64)


class StudyError(ValueError):
    pass


@dataclass
class Resolved:
    """A configuration with preset defaults filled in."""

    kind: str
    stencil: Stencil
    f: CoefficientField
    g: CoefficientField | None
    exact: CoefficientField | None
    period: float
    origin: float
    horizon: float | None
    c_floor: float | None
    meshes: tuple[float, ...]

    def grid(self, mesh: float) -> GridSpec:
        d = self.stencil.dim
        return GridSpec.from_period((self.period,) * d, mesh, (self.origin,) * d)

    def problem(self, mesh: float):
        ctx = OperatorContext(self.stencil, self.grid(mesh))
        if self.kind == "elliptic":
            return EllipticProblem(ctx, self.f, self.c_floor)
        return ParabolicProblem(ctx, self.f, self.g, self.horizon)


def resolve(cfg: StudyConfig) -> Resolved:
    pre = cfg.resolved_preset()
    kind = cfg.kind or (pre.kind if pre else "parabolic")
    if pre is not None and cfg.directions is None:
        dirs = pre.directions
    elif cfg.directions is not None:
        dirs = cfg.directions
    else:
        raise StudyError("no directions given")
    q = {lam: s for lam, s in (pre.q.items() if pre else ()) if lam in dirs}
    p = {lam: s for lam, s in (pre.p.items() if pre else ()) if lam in dirs}
    for target, items in ((q, cfg.q), (p, cfg.p)):
        for lam, src in items:
            if lam is None:
                target.update({d: src for d in dirs})
            else:
                target[lam] = src
    c = cfg.c or (pre.c if pre else "0")
    stencil = Stencil.build(dirs, q, p, c)

    def pick(name, pre_name=None):
        v = getattr(cfg, name)
        if v is None and pre is not None:
            v = getattr(pre, pre_name or name)
        return v

    if kind == "elliptic":
        f = pick("f", "elliptic_f")
        exact = pick("exact", "elliptic_exact")
        g = horizon = None
        c_floor = pick("c_floor")
        if c_floor is None:
            c_floor = float(np.min(stencil.c.sample(GridSpec((8,) * stencil.dim, 1 / 8))))
        if f is None:
            raise StudyError("elliptic problem needs f")
    else:
        f = pick("f") or "0"
        g = pick("g")
        exact = pick("exact")
        horizon = pick("horizon")
        c_floor = None
        if g is None or horizon is None:
            raise StudyError("parabolic problem needs g and horizon")
    meshes = cfg.meshes or ((pre.mesh,) if pre and cfg.mode == "single" else DEFAULT_MESHES)
    return Resolved(
        kind, stencil, as_field(f), None if g is None else as_field(g), None if exact is None else as_field(exact),
        pick("period") or 1.0, pick("origin") or 0.0, horizon, c_floor, tuple(sorted(meshes, reverse=True)),
    )


@dataclass
class Row:
    h: float
    error: float | None
    order: float | str = ""
    wall_ms: float = 0.0
    note: str = ""


@dataclass
class Verdict:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class StudyReport:
    rows: list[Row] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)
    verdicts: list[Verdict] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    fitted_order: float | str | None = None

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)


def _solve(res: Resolved, cfg: StudyConfig, mesh: float) -> GridFunction:
    prob = res.problem(mesh)
    if cfg.variant != "none":
        plan = make_plan(cfg.k, mesh, cfg.variant)
        icfg = IterationConfig(tol=cfg.tol) if res.kind == "elliptic" else None
        out = solve_accelerated(prob, plan, icfg)
        return out if res.kind == "elliptic" else out[0]
    if res.kind == "elliptic":
        return solve_elliptic(prob, IterationConfig(tol=cfg.tol))
    return solve_parabolic(prob)[0]


def _timed(res, cfg, mesh):
    t0 = time.perf_counter()
    try:
        u, err = _solve(res, cfg, mesh), None
    except Exception as exc:  # collected per mesh so one failure does not abort the table
        u, err = None, f"{type(exc).__name__}: {exc}"
    return u, err, 1000 * (time.perf_counter() - t0)


def _map(fn, items, threads):
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _flags(res: Resolved) -> list[str]:
    prob = res.problem(res.meshes[0])
    times = coefficient_times(prob, TimeIntegratorConfig()) if res.kind == "parabolic" else [0.0]
    return verify_flags(prob.ctx, times).lines()


def _orders(rows: list[Row], floor: float) -> None:
    for prev, row in zip(rows, rows[1:]):
        if prev.error is None or row.error is None:
            row.order = ""
        elif prev.error <= floor or row.error <= floor:
            row.order = BELOW_FLOOR
        else:
            row.order = observed_order([(prev.h, prev.error), (row.h, row.error)])


def _order_verdict(report: StudyReport, cfg: StudyConfig, rows: list[Row]) -> None:
    good = [(r.h, r.error) for r in rows if r.error is not None]
    if len(good) < 2 or len(good) != len(rows):
        if cfg.order_min is not None or cfg.order_max is not None:
            report.verdicts.append(Verdict("observed order", False, "fewer than two meshes solved"))
        return
    fit = fit_before_floor(good, cfg.floor)
    report.fitted_order = fit.order
    where = (f"floor reached at h={good[fit.floor_index][0]:.6g}" if fit.floor_detected
             else "no floor reached")
    report.notes.append(f"fitted order {fit.order if isinstance(fit.order, str) else f'{fit.order:.4f}'} "
                        f"over {fit.used} meshes; {where}")
    if cfg.order_min is None and cfg.order_max is None:
        return
    lo = -math.inf if cfg.order_min is None else cfg.order_min
    hi = math.inf if cfg.order_max is None else cfg.order_max
    ok = isinstance(fit.order, float) and lo <= fit.order <= hi
    report.verdicts.append(Verdict("observed order", ok, f"{fit.order} within [{lo}, {hi}]; {where}"))


def run_study(cfg: StudyConfig, threads: int = 1) -> StudyReport:
    """Execute the study described by ``cfg``."""
    if cfg.mode == "acceptance":
        from .acceptance import run_acceptance

        return run_acceptance()
    res = resolve(cfg)
    report = StudyReport()
    try:
        report.flags = _flags(res)
    except Exception as exc:
        report.flags = [f"flag evaluation failed: {exc}"]
    if cfg.mode == "expansion":
        return _expansion(res, cfg, report)
    outs = _map(lambda h: _timed(res, cfg, h), list(res.meshes), threads)
    rows = []
    if res.exact is not None:
        for h, (u, err, ms) in zip(res.meshes, outs):
            if u is None:
                rows.append(Row(h, None, wall_ms=ms, note=err))
                continue
            t = res.horizon if res.kind == "parabolic" else 0.0
            e = float(np.max(np.abs(u.values - res.exact.sample(u.spec, t))))
            rows.append(Row(h, e, wall_ms=ms))
    else:
        # compare against the finest mesh on the coarser grids' points
        ref = outs[-1][0]
        report.notes.append(f"no exact solution: errors measured against the h={res.meshes[-1]:.6g} solution")
        for h, (u, err, ms) in zip(res.meshes[:-1], outs[:-1]):
            if u is None or ref is None:
                rows.append(Row(h, None, wall_ms=ms, note=err or "reference solve failed"))
                continue
            rows.append(Row(h, float(np.max(np.abs(u.values - ref.restrict(u.spec).values))), wall_ms=ms))
    _orders(rows, cfg.floor)
    report.rows = rows
    for r in rows:
        if r.note:
            report.verdicts.append(Verdict(f"solve at h={r.h:.6g}", False, r.note))
    if cfg.mode == "convergence":
        _order_verdict(report, cfg, rows)
    return report


def _expansion(res: Resolved, cfg: StudyConfig, report: StudyReport) -> StudyReport:
    if res.kind != "parabolic":
        raise StudyError("expansion studies need a parabolic problem")
    prob = res.problem(res.meshes[0])
    t0 = time.perf_counter()
    rep = expansion_remainder(prob, cfg.expansion_order, res.meshes, reference_factor=cfg.reference_factor)
    ms = 1000 * (time.perf_counter() - t0) / len(res.meshes)
    report.rows = [Row(h, r, wall_ms=ms) for h, r in zip(rep.meshes, rep.remainder_norms)]
    _orders(report.rows, 0.0)
    report.fitted_order = rep.exponent
    ok = rep.ratio <= cfg.ratio_limit
    report.verdicts.append(Verdict(
        f"expansion remainder k={cfg.expansion_order}", ok,
        f"max/min of sup|r_h| = {rep.ratio:.4g} (limit {cfg.ratio_limit})",
    ))
    return report
