import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from singstab.functions import Bump, TestFunction
from singstab.lyapunov import (PhiFunction, apply_generator, drift_verify, energy_bound_terms,
                               generator_bound, phi_holder_bound, phi_lyapunov)
from singstab.measure import HypothesisNotMet, ProductPolynomial, SpecificationError


def _oracle_L(pot1, g, x, alpha):
    # [DERIVED] 1/2 int_{|z|>1} (g(x+z) - g(x)) (rho(x+z)/rho(x) + 1) |z|^{-1-alpha} dz
    lr = lambda t: pot1.log_density(np.array([[t]]))[0]
    lx = lr(x)
    h = lambda z: (g(x + z) - g(x)) * (math.exp(lr(x + z) - lx) + 1) * abs(z) ** (-1 - alpha)
    pieces = [(-np.inf, -abs(x) - 10), (-abs(x) - 10, -1), (1, abs(x) + 10), (abs(x) + 10, np.inf)]
    pts = lambda a, b: [p for p in (-x,) if a < p < b and np.isfinite(a) and np.isfinite(b)] or None
    return 0.5 * sum(integrate.quad(h, a, b, limit=400, points=pts(a, b), epsabs=1e-13,
                                    epsrel=1e-11)[0] for a, b in pieces)


@pytest.mark.parametrize("x", [0.0, 0.7, 3.0, 40.0])
def test_generator_on_phi_matches_quadrature(x):
    pot, gamma, alpha = ProductPolynomial([1.5]), 0.4, 1.0
    est = apply_generator(pot, PhiFunction(gamma, 1), np.array([[x]]), alpha)
    ref = _oracle_L(pot, lambda t: abs(t) ** gamma, x, alpha)
    assert est.values[0] == pytest.approx(ref, rel=1e-7, abs=1e-10)


def test_generator_acts_axiswise_on_products():
    pot = ProductPolynomial([1.5, 2.0])
    gamma, alpha = 0.3, 1.2
    x = np.array([[2.0, -5.0]])
    got = apply_generator(pot, PhiFunction(gamma, 2), x, alpha).values[0]
    ref = sum(_oracle_L(ProductPolynomial([e]), lambda t: abs(t) ** gamma, xi, alpha)
              for e, xi in zip((1.5, 2.0), x[0]))
    assert got == pytest.approx(ref, rel=1e-7)


def test_generator_kills_constants_and_is_bounded():
    pot = ProductPolynomial([1.0])
    x = np.array([[0.0], [2.0], [9.0]])
    c = TestFunction.constant(4.0, 1)
    assert np.all(apply_generator(pot, c, x, 1.0).values == 0.0)
    f = TestFunction.tensor(Bump(0.0, 1.0))
    Lf = apply_generator(pot, f, x, 1.0).values
    assert np.all(np.abs(Lf) <= generator_bound(pot, x, 1.0, 1.0))


@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=2),
       st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=2), st.floats(0.05, 0.95))
def test_phi_holder_bound(x, y, gamma):
    x, y = np.array(x), np.array(y)
    if np.linalg.norm(x - y) <= 1:
        return
    diff = abs(phi_lyapunov(x, gamma) - phi_lyapunov(y, gamma))
    assert diff <= phi_holder_bound(x, y, gamma)[0] * (1 + 1e-12)


def test_drift_passes_for_heavy_enough_tails():
    rep = drift_verify(ProductPolynomial([1.5, 2.0]), 0.3, 1.0)
    assert rep.passed
    assert rep.C1 > 0 and math.isfinite(rep.r0)
    assert np.all(rep.ratio[rep.radii >= rep.r0] < 0)


def test_drift_refuses_when_hypothesis_fails():
    with pytest.raises(HypothesisNotMet):
        drift_verify(ProductPolynomial([0.5]), 0.3, 1.0)


def test_gamma_range():
    with pytest.raises(SpecificationError):
        drift_verify(ProductPolynomial([2.0]), 0.9, 0.8)


def test_energy_bound_ordering():
    pot = ProductPolynomial([1.5])
    f = TestFunction.tensor(Bump(0.0, 3.0))
    lhs, rhs = energy_bound_terms(pot, f, 0.4, 1.0)
    assert lhs.value <= rhs.value + lhs.error + rhs.error
