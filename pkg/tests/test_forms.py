import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from singstab.forms import (bilinear_form, dirichlet_form, entropy, identity_check,
                            inequality_residual, local_mass, local_super_beta, mean,
                            variance_and_mean)
from singstab.functions import Bump, Constant, Gaussian, Plateau, TestFunction
from singstab.measure import ProductPolynomial, SpecificationError, VariableOrder


def _rho(pot):
    return lambda t: math.exp(pot.log_density(np.array([[t]]))[0])


def _quad_line(h, cuts):
    pts = [-np.inf, *sorted(cuts), np.inf]
    return sum(integrate.quad(h, a, b, limit=200, epsabs=1e-12, epsrel=1e-10)[0]
               for a, b in zip(pts[:-1], pts[1:]))


def _oracle_form(pot, f1, alpha, lower=0.0):
    # [DERIVED] 1/2 int rho(x) int_{|z|>lower} (f(x+z) - f(x))^2 |z|^{-1-alpha} dz dx
    rho = _rho(pot)

    def inner(x):
        h = lambda z: 0.0 if abs(z) < lower else (f1(x + z) - f1(x)) ** 2 * abs(z) ** (-1 - alpha)
        zs = sorted({-lower, lower, 0.0, -x - 2, -x + 2, -x})
        return _quad_line(h, zs)

    return 0.5 * _quad_line(lambda x: rho(x) * inner(x), [-3, -2, 0, 2, 3])


def _bump(c, w):
    return lambda t: max(0.0, 1 - ((t - c) / w) ** 2) ** 3


@pytest.mark.parametrize("alpha", [0.6, 1.0, 1.5])
def test_form_matches_nested_quadrature(alpha):
    pot = ProductPolynomial([1.5])
    f = TestFunction.tensor(Bump(0.0, 2.0))
    got = dirichlet_form(pot, f, alpha)
    ref = _oracle_form(pot, _bump(0.0, 2.0), alpha)
    assert got.value == pytest.approx(ref, rel=1e-5)


def test_truncated_form_matches_nested_quadrature():
    pot = ProductPolynomial([2.0])
    f = TestFunction.tensor(Bump(0.0, 2.0))
    got = dirichlet_form(pot, f, 1.0, truncation="above_one")
    ref = _oracle_form(pot, _bump(0.0, 2.0), 1.0, lower=1.0)
    assert got.value == pytest.approx(ref, rel=1e-5)


def test_constant_has_zero_energy():
    pot = ProductPolynomial([1.0, 2.0])
    f = TestFunction.constant(3.0, 2)
    assert dirichlet_form(pot, f, 1.0).value == 0.0


def test_form_invariances():
    pot = ProductPolynomial([1.5, 2.0])
    f = TestFunction.tensor(Bump(0.0, 1.5), Gaussian(0.5, 1.0))
    g = TestFunction.tensor(Plateau(0.0, 1.0), Constant(1.0))
    D = dirichlet_form(pot, f, 1.0).value
    # shift by a constant, scale by c
    assert dirichlet_form(pot, f + TestFunction.constant(2.0, 2), 1.0).value == pytest.approx(D, rel=1e-8)
    assert dirichlet_form(pot, 3.0 * f, 1.0).value == pytest.approx(9 * D, rel=1e-10)
    # symmetry and polarisation
    fg = bilinear_form(pot, f, g, 1.0).value
    assert bilinear_form(pot, g, f, 1.0).value == pytest.approx(fg, rel=1e-8)
    Dp = dirichlet_form(pot, f + g, 1.0).value
    Dm = dirichlet_form(pot, f + (-1.0) * g, 1.0).value
    assert (Dp - Dm) / 4 == pytest.approx(fg, rel=1e-6)
    # the truncated form drops the non-negative small-jump part
    assert dirichlet_form(pot, f, 1.0, truncation="above_one").value <= D


def test_factorised_and_direct_routes_agree():
    pot = ProductPolynomial([1.5, 2.0])
    f = TestFunction.tensor(Bump(0.0, 1.5), Gaussian(0.5, 1.0))
    a = dirichlet_form(pot, f, 1.0, method="factor")
    b = dirichlet_form(pot, f, 1.0, method="direct")
    assert a.value == pytest.approx(b.value, rel=1e-4)


def test_variable_order_route_matches_product():
    f = TestFunction.tensor(Bump(0.0, 2.0))
    a = dirichlet_form(ProductPolynomial([1.5]), f, 1.0).value
    b = dirichlet_form(VariableOrder(["1.5"]), f, 1.0).value
    assert b == pytest.approx(a, rel=1e-6)


def test_variance_and_mean_against_quadrature():
    pot = ProductPolynomial([1.2])
    f = TestFunction.tensor(Gaussian(1.0, 0.7))
    rho, g = _rho(pot), lambda t: math.exp(-0.5 * ((t - 1.0) / 0.7) ** 2)
    m = _quad_line(lambda t: rho(t) * g(t), [0, 1])
    m2 = _quad_line(lambda t: rho(t) * g(t) ** 2, [0, 1])
    mu, var = variance_and_mean(pot, f)
    assert mu.value == pytest.approx(m, rel=1e-8)
    assert mean(pot, f).value == pytest.approx(m, rel=1e-8)
    assert var.value == pytest.approx(m2 - m * m, rel=1e-7)


def test_entropy_and_local_mass():
    pot = ProductPolynomial([2.0])
    f = TestFunction.tensor(Constant(1.0)) + 0.5 * TestFunction.tensor(Bump(0.0, 1.0))
    rho = _rho(pot)
    h = lambda t: 1 + 0.5 * _bump(0.0, 1.0)(t)
    m = _quad_line(lambda t: rho(t) * h(t), [-1, 0, 1])
    e = _quad_line(lambda t: rho(t) * h(t) * math.log(h(t)), [-1, 0, 1])
    assert entropy(pot, f).value == pytest.approx(e - m * math.log(m), rel=1e-6)
    loc = integrate.quad(lambda t: rho(t) * h(t) ** 2, -0.5, 0.5, points=[0])[0]
    assert local_mass(pot, f, 0.5).value == pytest.approx(loc, rel=1e-7)
    with pytest.raises(SpecificationError):
        entropy(pot, TestFunction.tensor(Bump(0.0, 1.0)))


def test_identity_check_one_and_two_dimensions():
    for pot, f, g in [
        (ProductPolynomial([1.5]), TestFunction.tensor(Bump(0.2, 1.5)), TestFunction.tensor(Gaussian(0.0, 1.0))),
        (ProductPolynomial([1.5, 2.0]), TestFunction.tensor(Bump(0, 1), Gaussian(0, 2)),
         TestFunction.tensor(Plateau(0.5, 1.0), Bump(0.3, 2.0))),
    ]:
        chk = identity_check(pot, f, g, 1.0)
        assert chk.passed, (chk.difference, chk.tolerance)


def test_poincare_residual_consistent_with_parts():
    pot = ProductPolynomial([2.0])
    f = TestFunction.tensor(Bump(0.0, 1.0))
    res = inequality_residual("poincare", pot, f, 1.0)
    _, var = variance_and_mean(pot, f)
    D = dirichlet_form(pot, f, 1.0)
    assert res.minimal_constant == pytest.approx(var.value / D.value, rel=1e-12)


def test_super_poincare_minimal_beta_is_tight():
    pot = ProductPolynomial([1.5])
    f = TestFunction.tensor(Bump(0.0, 1.0))
    r0 = inequality_residual("super_poincare", pot, f, 1.0, s=0.1)
    b = r0.minimal_constant
    tight = inequality_residual("super_poincare", pot, f, 1.0, s=0.1, beta=b)
    assert tight.lhs == pytest.approx(tight.rhs, rel=1e-10)
    assert inequality_residual("super_poincare", pot, f, 1.0, s=0.1, beta=1.01 * b).satisfied


@settings(max_examples=15)
@given(st.floats(0.5, 20.0), st.floats(1e-4, 10.0), st.floats(1.0, 10.0))
def test_local_super_beta_monotone(r, t, k):
    pot = ProductPolynomial([1.5])
    a = local_super_beta(pot, r, t, 1.0)
    assert a > 0
    assert local_super_beta(pot, r, t * k, 1.0) <= a * (1 + 1e-12)


def test_bad_truncation():
    with pytest.raises(SpecificationError):
        dirichlet_form(ProductPolynomial([1.0]), TestFunction.tensor(Bump(0, 1)), 1.0, truncation="half")
