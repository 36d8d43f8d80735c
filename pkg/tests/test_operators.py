import math
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from accelfd.grid import GridFunction, GridSpec
from accelfd.operators import (OperatorContext, Stencil, StencilError, apply_continuum_L, apply_Lh,
                               apply_taylor_L, chi, continuum_coeffs, directional_derivative, fd_weights,
                               remainder_Oj, symmetrize, symmetry_flags, validate_consistency,
                               validate_monotone, verify_flags)
from accelfd.presets import get_preset

E1 = [(1,), (-1,)]
X = sp.Symbol("x1")


def ctx_1d(stencil, h):
    return OperatorContext(stencil, GridSpec.from_period(1.0, h))


def test_Lh_hand_computed():
    s = Stencil.build(E1, q=1.0)
    ctx = OperatorContext(s, GridSpec((4,), 1.0))
    u = GridFunction(ctx.grid, [0.0, 1.0, 0.0, 0.0])
    np.testing.assert_array_equal(apply_Lh(ctx, u, form="difference").values, [1.0, -2.0, 1.0, 0.0])
    # add drift p(e1) = 1 and c = 3: extra (u(x+h) - u)/h - 3u
    s2 = Stencil.build(E1, q=1.0, p={(1,): 1.0}, c=3.0)
    out = apply_Lh(OperatorContext(s2, ctx.grid), u, form="difference").values
    np.testing.assert_array_equal(out, [2.0, -6.0, 1.0, 0.0])


def test_symmetric_form_matches_difference_under_S():
    s = Stencil.build(E1, q="0.2 + 0.1*sin(2*pi*x1)", p={(1,): "cos(2*pi*x1)"}, c=0.5)
    ctx = ctx_1d(s, 1 / 32)
    u = GridFunction.sample(ctx.grid, lambda x: np.exp(np.sin(2 * np.pi * x)))
    a = apply_Lh(ctx, u, form="difference").values
    b = apply_Lh(ctx, u, form="symmetric").values
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-9)


def test_chi_and_monotone_report():
    s = Stencil.build(E1, q={(1,): 0.0, (-1,): 0.0}, p={(1,): -1.0})
    ctx = ctx_1d(s, 0.25)
    np.testing.assert_array_equal(chi(ctx, (1,)).values, -0.25)
    rep = validate_monotone(ctx)
    assert not rep.passed and rep.min_chi == -0.25 and rep.direction == (1,)
    assert validate_monotone(ctx_1d(Stencil.build(E1, q=0.1, p={(1,): -0.2}), 0.25)).passed


def test_consistency_and_symmetry_flags():
    good = ctx_1d(get_preset("heat1d-sym").stencil(), 1 / 8)
    bad = ctx_1d(get_preset("heat1d-biased").stencil(), 1 / 8)
    assert validate_consistency(good).passed
    rep = validate_consistency(bad)
    assert not rep.passed and rep.residual[0] == pytest.approx(0.02) and rep.x_independent
    skew = symmetry_flags(ctx_1d(get_preset("skew").stencil(), 1 / 8))
    assert skew.condition_s and skew.p_antisym
    drift = symmetry_flags(ctx_1d(get_preset("drift-upwind").stencil(), 1 / 8))
    assert drift.condition_s and not drift.p_antisym
    one_sided = symmetry_flags(ctx_1d(Stencil.build([(1,)], q=1.0), 1 / 8))
    assert not one_sided.condition_s
    lines = verify_flags(good).lines()
    assert len(lines) == 4 and lines[0].startswith("monotone: pass")


def test_stencil_validation():
    with pytest.raises(StencilError):
        Stencil.build([(0,)], q=1.0)
    with pytest.raises(StencilError):
        Stencil.build([(1,), (1,)], q=1.0)
    with pytest.raises(StencilError):
        Stencil.build([(1,), (1, 0)], q=1.0)
    with pytest.raises(StencilError):
        Stencil.build([(1,)], q={(2,): 1.0})
    with pytest.raises(StencilError):
        OperatorContext(Stencil.build([(1, 0)], q=1.0), GridSpec((4,), 0.25))


def test_fd_weights_known_values():
    assert fd_weights(2, 4) == tuple(Fraction(v) for v in ("-1/12", "4/3", "-5/2", "4/3", "-1/12"))
    assert fd_weights(1, 2) == (Fraction(-1, 2), Fraction(0), Fraction(1, 2))
    assert fd_weights(0, 2) == (Fraction(1),)


@pytest.mark.parametrize("order", range(1, 7))
@pytest.mark.parametrize("accuracy", [2, 4, 6])
def test_fd_weight_moments(order, accuracy):
    w = fd_weights(order, accuracy)
    K = (len(w) - 1) // 2
    for m in range(order + accuracy):
        moment = sum(wk * Fraction(k) ** m for k, wk in zip(range(-K, K + 1), w))
        assert moment == (math.factorial(order) if m == order else 0)


def test_directional_derivative_antisymmetry_and_accuracy():
    g = GridSpec.from_period(1.0, 1 / 64)
    u = np.sin(2 * np.pi * g.axes()[0])
    for n in (1, 2, 3):
        plus = directional_derivative(u, (1,), n, g.mesh, 6)
        minus = directional_derivative(u, (-1,), n, g.mesh, 6)
        np.testing.assert_array_equal(plus, (-1) ** n * minus)
    d1 = directional_derivative(u, (1,), 1, g.mesh, 6)
    np.testing.assert_allclose(d1, 2 * np.pi * np.cos(2 * np.pi * g.axes()[0]), atol=1e-6)


def _sym_field(src):
    return sp.sympify(src.replace("^", "**"), locals={"x1": X, "pi": sp.pi})


def test_continuum_and_taylor_operators_against_sympy():
    pre = get_preset("drift-upwind")
    s = pre.stencil()
    u = sp.sin(2 * sp.pi * X) + sp.cos(4 * sp.pi * X) / 2
    q = _sym_field(pre.q[(1,)])
    # L u = 1/2 (q + q) u'' + 1 * u'
    L = q * sp.diff(u, X, 2) + sp.diff(u, X)
    # L^(1) u = 1/6 sum q d_l^3 u + 1/2 sum p d_l^2 u; the q terms cancel between +-e1
    L1 = sp.Rational(1, 2) * sp.diff(u, X, 2)
    L2 = q * 2 * sp.diff(u, X, 4) / 12 + sp.diff(u, X, 3) / 3
    ctx = ctx_1d(s, 1 / 16)
    xs = ctx.grid.axes()[0]
    src = "sin(2*pi*x1) + 0.5*cos(4*pi*x1)"
    for op, got in ((L, apply_continuum_L(ctx, src)), (L1, apply_taylor_L(ctx, 1, src, fine_factor=8)),
                    (L2, apply_taylor_L(ctx, 2, src, fine_factor=8))):
        exact = sp.lambdify(X, op, "numpy")(xs)
        np.testing.assert_allclose(got.values, exact, atol=1e-5 * np.max(np.abs(exact)))


def test_continuum_refinement_check():
    ctx = ctx_1d(get_preset("heat1d-sym").stencil(), 1 / 8)
    apply_continuum_L(ctx, "sin(2*pi*x1)", fine_factor=8, tol=1e-4)
    with pytest.raises(StencilError):
        apply_continuum_L(ctx, "sin(2*pi*x1)", fine_factor=1, tol=1e-12)


def test_taylor_cap():
    ctx = ctx_1d(get_preset("heat1d-sym").stencil(), 1 / 8)
    with pytest.raises(StencilError):
        apply_taylor_L(ctx, 5, "sin(2*pi*x1)")


@pytest.mark.parametrize("j", [0, 1])
def test_remainder_order(j):
    st_ = get_preset("drift-upwind").stencil()
    sups = [remainder_Oj(ctx_1d(st_, h), j, "sin(2*pi*x1)").sup() for h in (1 / 32, 1 / 64)]
    assert math.log2(sups[0] / sups[1]) == pytest.approx(j + 1, abs=0.3)


def test_continuum_coeffs_aniso():
    pre = get_preset("aniso2d")
    g = pre.grid()
    a, b, c = continuum_coeffs(pre.stencil(), g, index=(0, 0))
    np.testing.assert_allclose(a, [[0.45, 0.05], [0.05, 0.25]])
    np.testing.assert_allclose(b, [0, 0])
    assert c == 1.0


def test_symmetrize_one_sided_drift():
    s = Stencil.build([(1,)], q={(1,): 0.4}, p={(1,): "cos(2*pi*x1)"}, c=0.5)
    g = GridSpec.from_period(1.0, 1 / 16)
    t = symmetrize(s, m0=1.0, grid=g)
    assert set(t.directions) == {(1,), (-1,)}
    flags = symmetry_flags(OperatorContext(t, g))
    assert flags.condition_s
    for lam in t.directions:
        assert np.all(t.p[lam].sample(g) >= 0)
    for A, B in zip(continuum_coeffs(s, g), continuum_coeffs(t, g)):
        np.testing.assert_allclose(A, B, atol=1e-14)
    with pytest.raises(StencilError):
        symmetrize(s, m0=0.5, grid=g)


_coef = st.floats(-2, 2).map(lambda v: round(v, 3))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(-2, 2), st.integers(-2, 2)).filter(any), min_size=1, max_size=4, unique=True),
       st.data())
def test_symmetrize_preserves_continuum_operator(dirs, data):
    q = {d: abs(data.draw(_coef)) for d in dirs}
    p = {d: data.draw(_coef) for d in dirs}
    s = Stencil.build(dirs, q=q, p=p, c=1.0)
    g = GridSpec((4, 4), 0.25)
    t = symmetrize(s, grid=g)
    for A, B in zip(continuum_coeffs(s, g), continuum_coeffs(t, g)):
        np.testing.assert_allclose(A, B, atol=1e-12)
    assert symmetry_flags(OperatorContext(t, g)).condition_s
    assert all(np.all(t.p[lam].sample(g) >= -1e-15) for lam in t.directions)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=8, max_size=8), st.floats(0, 2), st.floats(0, 2))
def test_Lh_annihilates_constants_without_c(vals, q, p):
    s = Stencil.build(E1, q=q, p={(1,): p})
    ctx = OperatorContext(s, GridSpec((8,), 0.125))
    const = GridFunction(ctx.grid, np.full(8, vals[0]))
    assert np.max(np.abs(apply_Lh(ctx, const, form="difference").values)) == 0.0
