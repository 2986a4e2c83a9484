import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from singstab.measure import (HypothesisNotMet, ProductLogCorrected, ProductPolynomial,
                              SpecificationError, VariableOrder, criteria_profile)
from singstab.rates import (DsMass, HOLDS, FAILS, corollary_beta_log, corollary_beta_poly,
                            decay_envelope, entropy_condition, fitted_slope, logsobolev_iff,
                            poincare_verdict, poly_beta_exponent, poly_beta_rate,
                            super_poincare_beta, variable_order_analyze, weak_eta,
                            weak_eta_closed_form, weak_eta_rate)


# [DERIVED] d/alpha + (2 alpha + d) sum(1 + eps) / (alpha (eps_* - alpha)) by hand
@pytest.mark.parametrize("eps, E", [([1.5, 2.0], 46.0), ([3.0, 3.0], 18.0), ([2.0], 10.0)])
def test_poly_beta_exponent(eps, E):
    assert poly_beta_exponent(1.0, eps) == pytest.approx(E, rel=1e-14)


def test_poly_beta_needs_eps_above_alpha():
    with pytest.raises(HypothesisNotMet):
        poly_beta_exponent(1.0, [1.0, 2.0])
    with pytest.raises(HypothesisNotMet):
        corollary_beta_log(1.0, [0.0], 0.5)


@given(st.floats(1e-6, 1e3))
def test_corollary_beta_poly_value(r):
    val, E = corollary_beta_poly(1.0, [1.5, 2.0], r, c=2.0)
    lv = poly_beta_rate(1.0, [1.5, 2.0], c=2.0).log_value(r)
    assert lv == pytest.approx(math.log(2.0) + math.log1p(r ** -46.0), rel=1e-12)
    if math.isfinite(val):
        assert math.log(val) == pytest.approx(lv, rel=1e-12)


def test_corollary_beta_log_value_and_overflow():
    assert corollary_beta_log(1.0, [1.0, 2.0], 0.5) == pytest.approx(math.exp(3.0))
    assert corollary_beta_log(1.0, [0.5], 1e-6) == math.inf


@pytest.mark.parametrize("eps, expect", [([1.0], True), ([2.0, 1.0], True), ([0.99], False),
                                         ([3.0, 0.5], False), ([1.0, 1.0, 1.0], True),
                                         ([-0.5], False)])
def test_logsobolev_iff(eps, expect):
    assert logsobolev_iff(eps) is expect


@pytest.mark.parametrize("pot, verdict", [
    (ProductPolynomial([1.0, 2.0]), HOLDS), (ProductPolynomial([0.7, 2.0]), FAILS),
    (ProductLogCorrected([0.0], 1.0), HOLDS), (ProductLogCorrected([-0.3, 1.0], 1.0), FAILS)])
def test_poincare_verdict_product_families(pot, verdict):
    assert poincare_verdict(pot, alpha=1.0).verdict == verdict


def test_super_poincare_beta_decreases_in_s():
    pot = ProductPolynomial([1.5, 2.0])
    prof = criteria_profile(pot, 1.0)
    b = [super_poincare_beta(pot, prof, s).log_value for s in (1e-3, 1e-2, 1e-1)]
    assert b[0] > b[1] > b[2]


def test_super_poincare_beta_refuses_bounded_phi():
    pot = ProductPolynomial([1.0])
    with pytest.raises(HypothesisNotMet):
        super_poincare_beta(pot, criteria_profile(pot, 1.0), 0.1)


def test_weak_closed_forms():
    eta, env = weak_eta_closed_form("poly", 1.0, [0.5], 0.01)
    assert eta == pytest.approx(101.0, rel=1e-12)
    assert env.params["exponent"] == 1.0
    _, env = weak_eta_closed_form("poly", 1.0, [0.5, 0.5], 0.01)
    assert env.params["exponent"] == pytest.approx(0.5)
    _, env = weak_eta_closed_form("log", 1.0, [-1.0, -1.0], 0.01)
    assert env.params["exponent"] == pytest.approx(1 / 3)
    with pytest.raises(SpecificationError):
        weak_eta_closed_form("poly", 1.0, [1.5], 0.1)


# [DERIVED] eps = 0.5 vs reference eps = 1: e^{V0 - V} = (1 + |x|)^{1/2} / 2, so
# mu(D_s) = 1 - 1/(2s) and eta(r) = (1 + r) / (2r).
@given(st.floats(0.6, 1e4))
def test_ds_mass_closed_form(s):
    mass = DsMass(ProductPolynomial([0.5]), ProductPolynomial([1.0]))
    assert mass(math.log(s)) == pytest.approx(1 - 1 / (2 * s), abs=1e-9)


@given(st.floats(1e-4, 10.0))
def test_weak_eta_closed_form_d1(r):
    eta = weak_eta(ProductPolynomial([0.5]), ProductPolynomial([1.0]), r, 1.0)
    assert eta == pytest.approx((1 + r) / (2 * r), rel=1e-9)


def test_ds_mass_monte_carlo_d2():
    pot, pot0 = ProductPolynomial([0.5, 0.7]), ProductPolynomial([1.0, 1.0])
    mass = DsMass(pot, pot0)
    x = pot.sample(np.random.default_rng(3), 400_000)
    lr = pot.log_density(x) - pot0.log_density(x)
    for log_s in (0.0, 1.0, 3.0):
        # dual route: generic quadrature of the indicator
        assert mass._generic(log_s) == pytest.approx(mass(log_s), abs=2e-3)
        p = float(np.mean(lr <= log_s))
        se = math.sqrt(p * (1 - p) / x.shape[0])
        assert abs(mass(log_s) - p) < 4 * se + 1e-6


def test_weak_eta_rate_slope_matches_kappa():
    rate = weak_eta_rate(ProductPolynomial([0.5, 2.0]), 1.0)
    assert fitted_slope(rate, 1e-4, 1e-2) == pytest.approx(-1.0, rel=0.05)


def test_entropy_condition_verdicts():
    ok = entropy_condition(ProductLogCorrected([1.0], 1.0), 1.0, n=120)
    bad = entropy_condition(ProductLogCorrected([-0.5], 1.0), 1.0, n=120)
    assert ok.verdict == HOLDS and ok.C[0] > 0 and math.isfinite(ok.constant)
    assert bad.verdict == FAILS and bad.constant == math.inf


def test_variable_order_analysis():
    rep = variable_order_analyze(VariableOrder(["smooth(2, 3, 1, 10)"]), 1.0)
    assert rep.A_star == 2.0 and rep.B == (3.0,)
    assert rep.beta_exponent == pytest.approx(13.0)
    assert rep.poincare == HOLDS
    # constant orders reduce to the polynomial family
    rep = variable_order_analyze(VariableOrder(["1.5", "2"]), 1.0)
    assert rep.beta_exponent == pytest.approx(poly_beta_exponent(1.0, [1.5, 2.0]))
    assert variable_order_analyze(VariableOrder(["0.5"]), 1.0).beta_exponent is None


def test_decay_envelope():
    env = decay_envelope("power", lam=2.0, exponent=0.5)
    assert env(4.0) == pytest.approx(1.0)
    assert decay_envelope("exponential", rate=2.0)(1.0) == pytest.approx(math.exp(-2))
    assert decay_envelope("stretched", lam2=1.0, exponent=0.5)(9.0) == pytest.approx(math.exp(-3))
    with pytest.raises(SpecificationError):
        decay_envelope("linear")
