"""Richardson extrapolation across dyadically nested meshes.

For the full variant with order ``k`` the weights ``b`` solve

    sum_j b_j = 1,    sum_j b_j 2^{-ij} = 0  (i = 1..k),

so that ``sum_j b_j u_{2^-j h}`` cancels the ``h, ..., h^k`` terms of an
expansion of ``u_h`` in powers of ``h``.  When only even powers occur the
tilde variant needs ``(k - 1)/2 + 1`` meshes and uses ratios ``4^{-ij}``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .elliptic import EllipticProblem, IterationConfig, solve_elliptic
from .grid import GridError, GridFunction, GridSpec, delta_alpha
from .operators import symmetry_flags
from .parabolic import ParabolicProblem, TimeIntegratorConfig, coefficient_times, solve_parabolic

MAX_FULL_ORDER = 12
MAX_TILDE_ORDER = 15


class PlanError(ValueError):
    pass


def _moment_weights(ratio: float, n: int) -> np.ndarray:
    """Weights ``b_0..b_n`` with ``sum b_j = 1`` and ``sum b_j ratio^{ij} = 0`` for ``i = 1..n``.

    These are the Lagrange basis polynomials on the nodes ``ratio^j`` evaluated
    at zero, ``b_j = prod_{m != j} ratio^m / (ratio^m - ratio^j)``.  The product
    keeps full relative accuracy in every weight, unlike a linear solve with the
    (badly conditioned) moment matrix.
    """
    nodes = ratio ** np.arange(n + 1, dtype=float)
    b = np.ones(n + 1)
    for j in range(n + 1):
        for m in range(n + 1):
            if m != j:
                b[j] *= nodes[m] / (nodes[m] - nodes[j])
    return b


def vandermonde_coeffs(k: int) -> np.ndarray:
    """``(b_0, ..., b_k)`` for the full variant."""
    if not 0 <= k <= MAX_FULL_ORDER:
        raise PlanError(f"order k={k} outside 0..{MAX_FULL_ORDER}")
    return _moment_weights(0.5, k)


def tilde_coeffs(k: int) -> np.ndarray:
    """``(b~_0, ..., b~_m)``, ``m = (k - 1)/2``, for odd ``k``."""
    if k < 1 or k % 2 == 0:
        raise PlanError(f"tilde variant needs an odd positive order, got k={k}")
    if k > MAX_TILDE_ORDER:
        raise PlanError(f"order k={k} above {MAX_TILDE_ORDER}")
    return _moment_weights(0.25, (k - 1) // 2)


def moment_residuals(weights: Sequence[float], ratio: float) -> np.ndarray:
    """``[sum b_j - 1, sum b_j ratio^j, sum b_j ratio^{2j}, ...]``; all zero for exact weights."""
    b = np.asarray(weights, float)
    j = np.arange(len(b))
    res = np.array([np.sum(b * ratio ** (i * j)) for i in range(len(b))])
    res[0] -= 1.0
    return res


@dataclass(frozen=True)
class ExtrapolationPlan:
    order: int
    variant: str
    base_mesh: float
    weights: tuple[float, ...]

    @property
    def meshes(self) -> list[float]:
        return [self.base_mesh / 2**j for j in range(len(self.weights))]

    @property
    def ratio(self) -> float:
        return 0.5 if self.variant == "full" else 0.25


def make_plan(k: int, base_mesh: float, variant: str = "full") -> ExtrapolationPlan:
    if not base_mesh > 0:
        raise PlanError("base mesh must be positive")
    if variant == "full":
        w = vandermonde_coeffs(k)
    elif variant == "tilde":
        w = tilde_coeffs(k)
    else:
        raise PlanError(f"unknown variant {variant!r} (expected 'full' or 'tilde')")
    return ExtrapolationPlan(k, variant, float(base_mesh), tuple(float(x) for x in w))


def combine(plan: ExtrapolationPlan, solutions: Sequence[GridFunction], alpha=None) -> GridFunction:
    """``sum_j b_j u_{2^-j h}`` on the points of the base grid.

    With a multi-index ``alpha`` each solution is first differenced by
    ``delta_alpha`` on its own mesh, which extrapolates the derivative.
    """
    if len(solutions) != len(plan.weights):
        raise PlanError(f"plan needs {len(plan.weights)} solutions, got {len(solutions)}")
    base = solutions[0].spec
    if abs(base.mesh - plan.base_mesh) > 1e-12 * plan.base_mesh:
        raise PlanError(f"first solution has mesh {base.mesh}, plan expects {plan.base_mesh}")
    total = np.zeros(base.shape)
    for j, (b, u) in enumerate(zip(plan.weights, solutions)):
        if base.refinement_factor(u.spec) != 2**j:
            raise GridError(f"solution {j} does not live on mesh {plan.base_mesh}/2^{j}")
        if alpha is not None:
            u = delta_alpha(u, alpha)
        total += b * u.restrict(base).values
    return GridFunction(base, total)


Problem = Union[ParabolicProblem, EllipticProblem]


def _solve_one(problem: Problem, cfg, sample_times):
    if isinstance(problem, EllipticProblem):
        return [solve_elliptic(problem, cfg)]
    return solve_parabolic(problem, cfg, sample_times)


def _check_tilde(problem: Problem, grids: Sequence[GridSpec], cfg) -> None:
    if isinstance(problem, ParabolicProblem):
        times = coefficient_times(problem, cfg if isinstance(cfg, TimeIntegratorConfig) else TimeIntegratorConfig())
    else:
        times = [0.0]
    for g in grids:
        flags = symmetry_flags(problem.ctx.on(g), times)
        if not (flags.condition_s and flags.p_antisym):
            raise PlanError("tilde extrapolation needs a symmetric stencil with antisymmetric p "
                            f"(condition S: {flags.condition_s}, p antisymmetric: {flags.p_antisym})")


def solve_accelerated(problem: Problem, plan: ExtrapolationPlan, cfg=None, threads: int = 1,
                      sample_times: Sequence[float] | None = None):
    """Solve on every mesh of ``plan`` and combine on the base grid.

    Returns one GridFunction for an elliptic problem, and a list (one per
    sample time, default the horizon) for a parabolic one.
    """
    base = problem.grid
    if abs(base.mesh - plan.base_mesh) > 1e-12 * plan.base_mesh:
        raise PlanError(f"problem grid has mesh {base.mesh}, plan expects {plan.base_mesh}")
    grids = [base.refine(2**j) for j in range(len(plan.weights))]
    if plan.variant == "tilde":
        _check_tilde(problem, grids, cfg)
    if cfg is None:
        cfg = IterationConfig() if isinstance(problem, EllipticProblem) else TimeIntegratorConfig()
    jobs = [problem.on(g) for g in grids]
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            runs = list(pool.map(lambda pr: _solve_one(pr, cfg, sample_times), jobs))
    else:
        runs = [_solve_one(pr, cfg, sample_times) for pr in jobs]
    out = [combine(plan, [r[i] for r in runs]) for i in range(len(runs[0]))]
    return out[0] if isinstance(problem, EllipticProblem) else out
