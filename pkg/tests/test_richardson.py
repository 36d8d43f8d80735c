from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from accelfd.grid import GridError, GridFunction, GridSpec
from accelfd.presets import get_preset
from accelfd.richardson import (PlanError, combine, make_plan, moment_residuals, solve_accelerated, tilde_coeffs,
                                vandermonde_coeffs)


def lagrange_at_zero(ratio, n):
    """Exact weights of polynomial extrapolation to 0 from the nodes ratio^j, j = 0..n."""
    nodes = [ratio**j for j in range(n + 1)]
    out = []
    for j, xj in enumerate(nodes):
        w = Fraction(1)
        for m, xm in enumerate(nodes):
            if m != j:
                w *= (0 - xm) / (xj - xm)
        out.append(w)
    return out


def test_weights_small_cases():
    np.testing.assert_allclose(vandermonde_coeffs(0), [1.0])
    np.testing.assert_allclose(vandermonde_coeffs(1), [-1.0, 2.0], rtol=1e-14)
    np.testing.assert_allclose(vandermonde_coeffs(2), [1 / 3, -2.0, 8 / 3], rtol=1e-13)
    np.testing.assert_allclose(tilde_coeffs(1), [1.0])
    np.testing.assert_allclose(tilde_coeffs(3), [-1 / 3, 4 / 3], rtol=1e-14)


@pytest.mark.parametrize("k", range(0, 13))
def test_full_weights_match_exact_oracle(k):
    exact = np.array([float(w) for w in lagrange_at_zero(Fraction(1, 2), k)])
    got = vandermonde_coeffs(k)
    np.testing.assert_allclose(got, exact, rtol=1e-13)
    assert np.max(np.abs(moment_residuals(got, 0.5))) <= 1e-14


@pytest.mark.parametrize("k", [1, 3, 5, 7, 9, 11, 13, 15])
def test_tilde_weights_match_exact_oracle(k):
    exact = np.array([float(w) for w in lagrange_at_zero(Fraction(1, 4), (k - 1) // 2)])
    np.testing.assert_allclose(tilde_coeffs(k), exact, rtol=1e-13)


def test_plan_guards():
    with pytest.raises(PlanError):
        vandermonde_coeffs(13)
    with pytest.raises(PlanError):
        tilde_coeffs(4)
    with pytest.raises(PlanError):
        tilde_coeffs(17)
    with pytest.raises(PlanError):
        make_plan(1, 0.1, "other")
    plan = make_plan(3, 1 / 8, "tilde")
    assert plan.meshes == [1 / 8, 1 / 16] and plan.ratio == 0.25


def _expanded(spec_list, coeffs, powers):
    """u_h = sum_i coeffs[i] * h^powers[i] * (1 + 0.1*sin(2 pi x)) on each grid."""
    out = []
    for g in spec_list:
        shape = 1 + 0.1 * np.sin(2 * np.pi * g.axes()[0])
        out.append(GridFunction(g, sum(c * g.mesh**p for c, p in zip(coeffs, powers)) * shape))
    return out


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.lists(st.floats(-10, 10), min_size=7, max_size=7))
def test_full_variant_cancels_powers_up_to_k(k, coeffs):
    plan = make_plan(k, 1 / 8)
    grids = [GridSpec.from_period(1.0, h) for h in plan.meshes]
    sols = _expanded(grids, coeffs[:k + 1], range(k + 1))
    got = combine(plan, sols).values
    target = coeffs[0] * (1 + 0.1 * np.sin(2 * np.pi * grids[0].axes()[0]))
    assert np.max(np.abs(got - target)) <= 1e-9 * (1 + max(abs(c) for c in coeffs))


@settings(max_examples=50, deadline=None)
@given(st.sampled_from([1, 3, 5]), st.lists(st.floats(-10, 10), min_size=4, max_size=4))
def test_tilde_variant_cancels_even_powers(k, coeffs):
    plan = make_plan(k, 1 / 8, "tilde")
    grids = [GridSpec.from_period(1.0, h) for h in plan.meshes]
    m = (k - 1) // 2
    sols = _expanded(grids, coeffs[:m + 1], [2 * i for i in range(m + 1)])
    got = combine(plan, sols).values
    target = coeffs[0] * (1 + 0.1 * np.sin(2 * np.pi * grids[0].axes()[0]))
    assert np.max(np.abs(got - target)) <= 1e-9 * (1 + max(abs(c) for c in coeffs))


def test_leading_error_scales_as_next_power():
    # u_h = 1 + h^{k+1}: the combination leaves c_k h^{k+1} with c_k = sum_j b_j 2^{-j(k+1)}
    for k in (1, 2, 3):
        errs = []
        for h in (1 / 8, 1 / 16):
            plan = make_plan(k, h)
            grids = [GridSpec.from_period(1.0, m) for m in plan.meshes]
            sols = [GridFunction(g, np.full(g.shape, 1 + g.mesh ** (k + 1))) for g in grids]
            errs.append(abs(combine(plan, sols).values[0] - 1))
        assert errs[0] / errs[1] == pytest.approx(2 ** (k + 1), rel=1e-6)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 5), st.floats(-100, 100))
def test_constant_shift_passes_through(k, c):
    plan = make_plan(k, 1 / 4)
    rng = np.random.default_rng(k)
    sols = [GridFunction(GridSpec.from_period(1.0, h), rng.normal(size=round(1 / h))) for h in plan.meshes]
    shifted = [GridFunction(u.spec, u.values + c) for u in sols]
    diff = combine(plan, shifted).values - combine(plan, sols).values
    assert np.max(np.abs(diff - c)) <= 1e-9 * (1 + abs(c)) * np.sum(np.abs(plan.weights))


def test_combine_checks_grids():
    plan = make_plan(1, 1 / 4)
    a = GridFunction(GridSpec.from_period(1.0, 1 / 4), np.zeros(4))
    with pytest.raises(PlanError):
        combine(plan, [a])
    with pytest.raises(GridError):
        combine(plan, [a, GridFunction(GridSpec.from_period(1.0, 1 / 12), np.zeros(12))])


def test_tilde_needs_symmetric_stencil():
    p = get_preset("drift-upwind").parabolic(1 / 16)
    with pytest.raises(PlanError, match="symmetric"):
        solve_accelerated(p, make_plan(3, 1 / 16, "tilde"))


def test_accelerated_elliptic_exact_case():
    pre = get_preset("decay")
    v = solve_accelerated(pre.elliptic(1 / 8), make_plan(2, 1 / 8))
    np.testing.assert_allclose(v.values, pre.exact_field("elliptic").sample(v.spec), atol=1e-12)


def test_accelerated_parabolic_improves_error():
    pre = get_preset("heat1d-sym")
    P = pre.parabolic(1 / 16)
    exact = pre.exact_field().sample(P.grid, P.horizon)
    plain = np.max(np.abs(solve_accelerated(P, make_plan(0, 1 / 16))[0].values - exact))
    tilde = np.max(np.abs(solve_accelerated(P, make_plan(3, 1 / 16, "tilde"), threads=2)[0].values - exact))
    assert tilde < plain / 50
