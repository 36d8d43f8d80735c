"""The twelve acceptance criteria, each a function returning a Criterion.

Results are cached per process so that the test suite and the CLI can ask
for the same criterion repeatedly without recomputing it.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .elliptic import fixed_point_iterate
from .expansion import expansion_remainder, fit_before_floor, observed_order, solve_coefficient_system
from .grid import GridSpec
from .operators import OperatorContext, remainder_Oj
from .parabolic import TimeIntegratorConfig, max_principle_bound, run_parabolic, solve_parabolic
from .presets import DEGENERATE_PERTURBATION, get_preset
from .richardson import make_plan, moment_residuals, solve_accelerated, tilde_coeffs, vandermonde_coeffs

STUDY_MESHES = (1 / 16, 1 / 32, 1 / 64, 1 / 128)
TRIG = "sin(2*pi*x1) + 0.5*cos(4*pi*x1)"


@dataclass(frozen=True)
class Criterion:
    number: int
    title: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} C{self.number} {self.title}: {self.detail}"


def _fmt(x) -> str:
    return x if isinstance(x, str) else f"{x:.4f}"


def _errors(preset: str, meshes, variant="none", k=0):
    pr = get_preset(preset)
    exact = pr.exact_field()
    out = []
    for h in meshes:
        P = pr.parabolic(h)
        if variant == "none":
            u = solve_parabolic(P)[0]
        else:
            u = solve_accelerated(P, make_plan(k, h, variant))[0]
        out.append((h, float(np.max(np.abs(u.values - exact.sample(P.grid, P.horizon))))))
    return out


def _order_line(errors) -> str:
    return ", ".join(f"h={h:.6g}: {e:.3e}" for h, e in errors)


@lru_cache(maxsize=None)
def criterion_1() -> Criterion:
    errs = _errors("drift-upwind", STUDY_MESHES)
    order = observed_order(errs)
    ok = isinstance(order, float) and 0.8 <= order <= 1.2
    return Criterion(1, "first order, drift-upwind", ok, f"order {_fmt(order)} in [0.8, 1.2] ({_order_line(errs)})")


@lru_cache(maxsize=None)
def criterion_2() -> Criterion:
    errs = _errors("heat1d-sym", STUDY_MESHES)
    order = observed_order(errs)
    ok = isinstance(order, float) and 1.8 <= order <= 2.2
    return Criterion(2, "second order, heat1d-sym", ok, f"order {_fmt(order)} in [1.8, 2.2] ({_order_line(errs)})")


def integrator_floor(preset: str, mesh: float, variant: str, k: int) -> float:
    """Estimated error floor of an accelerated solve with base ``mesh``: the change
    under halving the time step, or accumulated rounding, whichever is larger."""
    P = get_preset(preset).parabolic(mesh)
    plan = make_plan(k, mesh, variant)
    first = solve_accelerated(P, plan)[0]
    finest = run_parabolic(P.on(P.grid.refine(2 ** (len(plan.weights) - 1))))
    half = solve_accelerated(P, plan, TimeIntegratorConfig(dt=finest.dt / 2))[0]
    change = float(np.max(np.abs(first.values - half.values)))
    rounding = np.finfo(float).eps * finest.steps * first.sup()
    return max(change, rounding)


@lru_cache(maxsize=None)
def criterion_3() -> Criterion:
    errs = _errors("heat1d-sym", STUDY_MESHES, "tilde", 3)
    floor = integrator_floor("heat1d-sym", STUDY_MESHES[-1], "tilde", 3)
    fit = fit_before_floor(errs, 10 * floor)
    ok = isinstance(fit.order, float) and 3.5 <= fit.order <= 4.5
    where = (f"floor reached at h={errs[fit.floor_index][0]:.6g}" if fit.floor_detected
             else "all meshes above the floor")
    return Criterion(3, "tilde k=3 acceleration, heat1d-sym", ok,
                     f"order {_fmt(fit.order)} in [3.5, 4.5] over {fit.used} meshes; estimated floor "
                     f"{floor:.2e}, {where} ({_order_line(errs)})")


@lru_cache(maxsize=None)
def criterion_4() -> Criterion:
    errs = _errors("drift-upwind", STUDY_MESHES[1:], "full", 2)
    order = observed_order(errs)
    ok = isinstance(order, float) and order >= 2.5
    return Criterion(4, "full k=2 acceleration, drift-upwind", ok, f"order {_fmt(order)} >= 2.5 ({_order_line(errs)})")


@lru_cache(maxsize=None)
def criterion_5() -> Criterion:
    parts, ok = [], True
    for name in ("decay", "heat1d-sym"):
        P = get_preset(name).parabolic(1 / 32).with_data(g=0.0, c=1.0)
        rep = max_principle_bound(P, None, C=0.0, F=1.0)
        top = max(rep.sups)
        good = top <= 1 + 1e-8 and rep.passed
        ok &= good
        parts.append(f"{name}: max sup v = {top:.12f}")
    return Criterion(5, "maximum-principle bound", ok, "; ".join(parts) + " (limit 1 + 1e-8)")


@lru_cache(maxsize=None)
def criterion_6() -> Criterion:
    parts, ok = [], True
    for name in ("decay", "aniso2d", "degenerate-ode"):
        r = fixed_point_iterate(get_preset(name).elliptic())
        pred = r.predicted_iterations(1e-12)
        ratio = pred / r.iterations
        good = r.defect <= 1e-8 and 1 / 3 <= ratio <= 3
        ok &= good
        parts.append(f"{name}: defect {r.defect:.2e}, rho {r.rho:.6f}, {r.iterations} iterations vs "
                     f"{pred} predicted (ratio {ratio:.2f}){'' if good else ' <- outside'}")
    return Criterion(6, "elliptic fixed point", ok, "; ".join(parts))


@lru_cache(maxsize=None)
def criterion_7() -> Criterion:
    pr = get_preset("degenerate-ode")
    a = fixed_point_iterate(pr.elliptic()).solution.values
    b = fixed_point_iterate(pr.elliptic(f=f"{pr.elliptic_f} + {DEGENERATE_PERTURBATION}")).solution.values
    x = pr.grid().coords()[0]
    inside = np.abs(x) < 1
    diff = float(np.max(np.abs(a - b)[inside]))
    outside = float(np.max(np.abs(a - b)[~inside]))
    has_ends = bool(np.any(x == 1.0) and np.any(x == -1.0))
    ok = diff <= 1e-13 and has_ends
    return Criterion(7, "degenerate decoupling", ok,
                     f"max diff on (-1,1) = {diff:.3e} (limit 1e-13), outside = {outside:.3g}; "
                     f"+-1 on the grid: {has_ends}")


@lru_cache(maxsize=None)
def criterion_8() -> Criterion:
    meshes = STUDY_MESHES[:3]
    good = expansion_remainder(get_preset("heat1d-sym").parabolic(), 1, meshes)
    bad = expansion_remainder(get_preset("heat1d-biased").parabolic(), 1, meshes)
    ok = good.ratio <= 3 and bad.ratio >= 3
    return Criterion(8, "expansion remainder, k=1", ok,
                     f"heat1d-sym ratio {good.ratio:.3f} <= 3 (norms {', '.join(f'{r:.3e}' for r in good.remainder_norms)}); "
                     f"negative control heat1d-biased ratio {bad.ratio:.3g} >= 3: "
                     f"{'FAIL as expected' if bad.ratio >= 3 else 'unexpectedly bounded'}")


@lru_cache(maxsize=None)
def criterion_9() -> Criterion:
    pr = get_preset("skew")
    P = pr.parabolic(1 / 32)
    sol = solve_coefficient_system(P.on(GridSpec.from_period((pr.period,), 1 / 256, (pr.origin,))), 1)
    rel = sol.coefficients[1][0].sup() / sol.coefficients[0][0].sup()
    return Criterion(9, "odd coefficient vanishes, skew", rel <= 1e-6, f"|u1|/|u0| = {rel:.3e} (limit 1e-6)")


@lru_cache(maxsize=None)
def criterion_10() -> Criterion:
    st = get_preset("drift-upwind").stencil()
    parts, ok = [], True
    for j in (0, 1, 2):
        errs = [(h, remainder_Oj(OperatorContext(st, GridSpec.from_period((1.0,), h)), j, TRIG).sup())
                for h in STUDY_MESHES]
        order = observed_order(errs)
        good = isinstance(order, float) and abs(order - (j + 1)) <= 0.4
        ok &= good
        parts.append(f"j={j}: exponent {_fmt(order)} (target {j + 1} +- 0.4)")
    return Criterion(10, "remainder operator order", ok, "; ".join(parts))


@lru_cache(maxsize=None)
def criterion_11() -> Criterion:
    worst_full = max(float(np.max(np.abs(moment_residuals(vandermonde_coeffs(k), 0.5)))) for k in range(9))
    worst_tilde = max(float(np.max(np.abs(moment_residuals(tilde_coeffs(k), 0.25)))) for k in range(1, 12, 2))
    ok = worst_full <= 1e-12 and worst_tilde <= 1e-12
    return Criterion(11, "weight identities", ok,
                     f"max moment residual {worst_full:.2e} (full, k<=8), {worst_tilde:.2e} (tilde, odd k<=11)")


@lru_cache(maxsize=None)
def criterion_12() -> Criterion:
    pr = get_preset("freeflow")
    free = 0.0
    for h in STUDY_MESHES[:3]:
        P = pr.parabolic(h)
        u = solve_parabolic(P)[0]
        free = max(free, float(np.max(np.abs(u.values - pr.exact_field().sample(P.grid, P.horizon)))))
    dec = get_preset("decay")
    v = fixed_point_iterate(dec.elliptic()).solution
    ell = float(np.max(np.abs(v.values - dec.exact_field("elliptic").sample(v.spec))))
    ok = free <= 1e-10 and ell <= 1e-12
    return Criterion(12, "exact special cases", ok,
                     f"freeflow |u - (g + T f)| = {free:.2e} (limit 1e-10); decay |v - f/c| = {ell:.2e} (limit 1e-12)")


CRITERIA = (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10, criterion_11, criterion_12)


def run_criteria(numbers=None) -> list[Criterion]:
    chosen = CRITERIA if numbers is None else [CRITERIA[n - 1] for n in numbers]
    out = []
    for fn in chosen:
        try:
            out.append(fn())
        except Exception as exc:
            n = CRITERIA.index(fn) + 1
            out.append(Criterion(n, fn.__name__, False, f"raised {type(exc).__name__}: {exc}"))
    return out


def run_acceptance(numbers=None):
    """All criteria as a StudyReport with one verdict per criterion."""
    from .study import StudyReport, Verdict

    report = StudyReport()
    for c in run_criteria(numbers):
        report.verdicts.append(Verdict(f"C{c.number} {c.title}", c.passed, c.detail))
    return report


__all__ = ["Criterion", "CRITERIA", "run_criteria", "run_acceptance", "integrator_floor"]
