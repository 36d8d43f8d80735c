import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from accelfd.grid import GridSpec
from accelfd.operators import OperatorContext, Stencil
from accelfd.parabolic import (IntegrationError, MonotonicityError, ParabolicProblem, TimeIntegratorConfig,
                               check_time_resolution, max_principle_bound, rk4, run_parabolic,
                               solve_parabolic, stable_dt)
from accelfd.presets import get_preset

E1 = [(1,), (-1,)]


def problem(stencil, h, f="0", g="sin(2*pi*x1)", T=0.1):
    return ParabolicProblem(OperatorContext(stencil, GridSpec.from_period(1.0, h)), f, g, T)


def test_stable_dt_examples():
    zero = problem(Stencil.build(E1), 0.1, T=0.7)
    assert stable_dt(zero) == 0.7
    heat = problem(Stencil.build(E1, q=1.0), 0.1)
    assert stable_dt(heat, TimeIntegratorConfig(safety=0.5)) == pytest.approx(0.00125)
    fine = problem(Stencil.build(E1, q=1.0), 0.05)
    assert stable_dt(fine) == pytest.approx(stable_dt(heat) / 4)


def test_config_validation():
    with pytest.raises(ValueError):
        TimeIntegratorConfig(safety=0)
    with pytest.raises(ValueError):
        TimeIntegratorConfig(c_shift=-1)
    with pytest.raises(ValueError):
        TimeIntegratorConfig(dt=0)


def test_rk4_exact_for_cubic_in_time():
    # u' = 3 t^2 has u = t^3; RK4 integrates cubics exactly
    states, steps = rk4(lambda t, u: np.full_like(u, 3 * t * t), np.zeros(2), [0.5, 1.0], 0.3)
    np.testing.assert_allclose(states[0], 0.125, rtol=1e-14)
    np.testing.assert_allclose(states[1], 1.0, rtol=1e-14)
    assert steps == 4


def test_rk4_blowup_reported():
    with pytest.raises(IntegrationError):
        with np.errstate(over="ignore"):
            rk4(lambda t, u: u * u * 1e300, np.ones(1), [1.0], 0.5)


def test_freeflow_exact():
    pr = get_preset("freeflow")
    P = pr.parabolic(1 / 16)
    u = solve_parabolic(P, sample_times=[0.25, 0.5])
    for t, ut in zip([0.25, 0.5], u):
        np.testing.assert_allclose(ut.values, pr.exact_field().sample(P.grid, t), atol=1e-14)


def test_decay_matches_exponential():
    pr = get_preset("decay")
    P = pr.parabolic(1 / 16)
    exact = pr.exact_field().sample(P.grid, P.horizon)
    errs = [np.max(np.abs(solve_parabolic(P, TimeIntegratorConfig(dt=dt))[0].values - exact))
            for dt in (0.1, 0.05)]
    assert errs[1] < 1e-6
    assert math.log2(errs[0] / errs[1]) == pytest.approx(4, abs=0.2)


def test_exponential_shift_gives_same_solution():
    P = get_preset("heat1d-sym").parabolic(1 / 16)
    a = solve_parabolic(P)[0].values
    b = solve_parabolic(P, TimeIntegratorConfig(c_shift=2.0))[0].values
    np.testing.assert_allclose(a, b, atol=1e-9)


def test_nonmonotone_rejected_unless_allowed():
    s = Stencil.build(E1, q=0.0, p={(1,): -1.0})
    P = problem(s, 1 / 8)
    with pytest.raises(MonotonicityError):
        solve_parabolic(P)
    solve_parabolic(P, TimeIntegratorConfig(allow_nonmonotone=True, dt=1e-3))


def test_time_resolution_check():
    P = get_preset("heat1d-sym").parabolic(1 / 16)
    change, ok = check_time_resolution(P, None, spatial_tol=1e-3)
    assert ok and change < 1e-5


def test_steps_reported():
    P = get_preset("heat1d-sym").parabolic(1 / 16)
    run = run_parabolic(P)
    assert run.steps == math.ceil(P.horizon / run.dt * (1 - 1e-12))


def test_max_principle_examples():
    for name in ("decay", "heat1d-sym"):
        P = get_preset(name).parabolic(1 / 16).with_data(g=0.0, c=1.0)
        rep = max_principle_bound(P, None, C=0.0, F=1.0)
        assert rep.passed and max(rep.sups) <= 1 + 1e-8
        assert rep.nu == -1.0
    with pytest.raises(ValueError):
        max_principle_bound(get_preset("heat1d-sym").parabolic(1 / 16), None, C=0.0, F=1.0)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.01, 0.3), st.floats(0.0, 1.0), st.floats(0.1, 2.0), st.floats(-2, 2))
def test_comparison_principle(q, p, c, shift_):
    # nonnegative data give a nonnegative solution and constant data stay bounded
    s = Stencil.build(E1, q=q, p={(1,): p}, c=c)
    P = problem(s, 1 / 8, f="1 + cos(2*pi*x1)", g=f"{abs(shift_)} + sin(2*pi*x1)^2", T=0.05)
    u = solve_parabolic(P)[0].values
    assert np.all(u >= 0)
    rep = max_principle_bound(P.with_data(g=abs(shift_)), None, C=0.0, F=2.0, sample_times=[0.05])
    assert rep.passed
