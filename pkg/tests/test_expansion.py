import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from accelfd.expansion import (BELOW_FLOOR, expansion_remainder, fit_before_floor, local_orders, observed_order,
                               reference_grid, solve_coefficient_system)
from accelfd.grid import GridFunction
from accelfd.operators import ContinuumOperator
from accelfd.parabolic import TimeIntegratorConfig
from accelfd.presets import get_preset


def test_observed_order_examples():
    assert observed_order([(0.1, 1e-2), (0.05, 2.5e-3)]) == pytest.approx(2.0)
    assert observed_order([(0.1, 1e-3), (0.05, 1.25e-4), (0.025, 1.5625e-5)]) == pytest.approx(3.0)
    assert observed_order([(0.1, 1e-3), (0.05, 0.0)]) == BELOW_FLOOR
    assert local_orders([(0.2, 4.0), (0.1, 1.0), (0.05, 0.5)]) == ["", pytest.approx(2.0), pytest.approx(1.0)]
    with pytest.raises(ValueError):
        observed_order([(0.1, 1.0)])
    with pytest.raises(ValueError):
        observed_order([(0.05, 1.0), (0.1, 1.0)])


@settings(max_examples=100, deadline=None)
@given(st.floats(0.5, 6), st.floats(1e-3, 1e3), st.integers(2, 6))
def test_observed_order_recovers_power_law(s, C, n):
    errs = [(2.0**-i, C * 2.0 ** (-i * s)) for i in range(n)]
    assert observed_order(errs) == pytest.approx(s, abs=1e-9)


def test_fit_before_floor():
    clean = [(2.0**-i, 2.0 ** (-4 * i)) for i in range(4)]
    fit = fit_before_floor(clean, floor=1e-14)
    assert fit.used == 4 and not fit.floor_detected and fit.order == pytest.approx(4)
    stalled = clean[:3] + [(1 / 8, clean[2][1] * 0.9)]
    fit = fit_before_floor(stalled)
    assert fit.used == 3 and fit.floor_index == 3 and fit.order == pytest.approx(4)
    under = clean[:2] + [(1 / 4, 1e-20), (1 / 8, 0.0)]
    fit = fit_before_floor(under, floor=1e-15)
    assert fit.used == 2 and fit.floor_index == 2


def test_continuum_matrix_matches_operator():
    pre = get_preset("skew")
    g = pre.grid(1 / 32)
    op = ContinuumOperator(pre.stencil(), g)
    u = GridFunction.sample(g, lambda x: np.exp(np.cos(2 * np.pi * x))).values
    np.testing.assert_allclose(op.matrix() @ u, np.ravel(op(u, 0.0)), atol=1e-10)
    for i in (1, 2):
        np.testing.assert_allclose(op.taylor_matrix(i) @ u, np.ravel(op.taylor(i, u, 0.0)), atol=1e-9)


def test_zero_operator_coefficients_vanish():
    for name in ("freeflow", "decay"):
        p = get_preset(name).parabolic(1 / 16)
        sol = solve_coefficient_system(p, 2)
        assert sol.order == 2
        for j in (1, 2):
            assert sol.coefficients[j][0].sup() == 0.0


def test_lower_order_runs_reproduce_leading_coefficients():
    p = get_preset("drift-upwind").parabolic(1 / 64)
    cfg = TimeIntegratorConfig()
    one = solve_coefficient_system(p, 1, cfg, [0.1, 0.2])
    two = solve_coefficient_system(p, 2, cfg, [0.1, 0.2])
    assert one.dt == two.dt and one.steps == two.steps
    for j in (0, 1):
        for n in (0, 1):
            np.testing.assert_array_equal(one.coefficients[j][n].values, two.coefficients[j][n].values)


def test_odd_coefficient_vanishes_for_skew():
    sol = solve_coefficient_system(get_preset("skew").parabolic(1 / 64), 2)
    u1, u2 = sol.coefficients[1][0].sup(), sol.coefficients[2][0].sup()
    assert u2 > 1e-3
    assert u1 <= 1e-10 * u2


def test_drift_has_first_order_coefficient():
    sol = solve_coefficient_system(get_preset("drift-upwind").parabolic(1 / 64), 1)
    assert sol.coefficients[1][0].sup() > 1e-2


def test_reference_grid():
    p = get_preset("degenerate-ode").context(1 / 16)
    g = reference_grid(get_preset("heat1d-sym").parabolic(), [1 / 16, 1 / 32], 8)
    assert g.mesh == 1 / 256 and g.cells == (256,)
    assert p.grid.origin == (-2.0,)


def test_remainder_bounded_for_drift():
    p = get_preset("drift-upwind").parabolic(1 / 16)
    rep = expansion_remainder(p, 0, [1 / 16, 1 / 32, 1 / 64])
    assert rep.passed and rep.ratio <= 3
    assert len(rep.lines()) == 4


def test_remainder_detects_missing_term():
    # skew has u^(1) = 0, so u_h - u = O(h^2) and h^-1 (u_h - u) shrinks like h
    p = get_preset("skew").parabolic(1 / 8)
    rep = expansion_remainder(p, 0, [1 / 8, 1 / 16, 1 / 32])
    assert not rep.passed
    assert rep.exponent == pytest.approx(1.0, abs=0.15)
    with pytest.raises(ValueError):
        expansion_remainder(p, 0, [1 / 16])
