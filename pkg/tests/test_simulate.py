import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from singstab.functions import Bump, TestFunction
from singstab.measure import NumericalError, ProductPolynomial, SpecificationError, VariableOrder
from singstab.simulate import (ProductSampler, ThinningSampler, decay_batch, decay_estimate,
                               detailed_balance_defect, levy_constant, make_sampler,
                               occupation_ks, sample_axis_jump, sample_stable, time_grid,
                               weighted_ks)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.7])
def test_stable_characteristic_function(alpha):
    x = sample_stable(alpha, 200_000, np.random.default_rng(1))
    for xi in (0.3, 1.0, 2.5):
        emp = np.mean(np.cos(xi * x))
        assert emp == pytest.approx(math.exp(-xi ** alpha), abs=0.01)


# [DERIVED] c_alpha int (1 - cos z) |z|^{-1-alpha} dz = 1
@pytest.mark.parametrize("alpha", [0.3, 1.0, 1.5, 1.9])
def test_levy_constant(alpha):
    near = integrate.quad(lambda z: 2 * math.sin(z / 2) ** 2 * z ** (-1 - alpha), 0, 1, limit=200)[0]
    far = 1 / alpha - integrate.quad(lambda z: z ** (-1 - alpha), 1, np.inf, weight="cos", wvar=1)[0]
    assert levy_constant(alpha) * 2 * (near + far) == pytest.approx(1.0, rel=1e-8)


@given(st.floats(0.3, 1.9), st.floats(0.2, 3.0))
def test_axis_jump_tail(alpha, delta):
    i, z = sample_axis_jump(alpha, delta, np.random.default_rng(0), 3, 20_000)
    assert set(np.unique(i)) <= {0, 1, 2}
    assert np.all(np.abs(z) > delta)
    t = 3 * delta
    p = (t / delta) ** -alpha
    assert np.mean(np.abs(z) > t) == pytest.approx(p, abs=5 * math.sqrt(p * (1 - p) / z.size))


def _exact_move_rate(pot, x, alpha, delta=1.0):
    lr = lambda t: pot.log_density(np.array([[t]]))[0]
    lx = lr(x)
    h = lambda z: 0.5 * (math.exp(lr(x + z) - lx) + 1) * abs(z) ** (-1 - alpha)
    pieces = [(-np.inf, -delta), (delta, np.inf)]
    return sum(integrate.quad(h, a, b, limit=400, points=None)[0] for a, b in pieces)


@pytest.mark.parametrize("x0", [0.5, 5.0])
def test_product_and_thinning_samplers_share_the_jump_law(x0):
    # dual route: exact product construction against envelope thinning
    pot, alpha, n = ProductPolynomial([1.5]), 1.0, 400_000
    x = np.full((n, 1), x0)
    exact = _exact_move_rate(pot, x0, alpha)
    dest = []
    for k, S in enumerate((ProductSampler, ThinningSampler)):
        s = S(pot, alpha)
        y, ok = s.jump(x, np.random.default_rng(10 + k))
        p = ok.mean()
        rate = s.rate(x[:1])[0]
        assert rate * p == pytest.approx(exact, abs=5 * rate * math.sqrt(p * (1 - p) / n))
        dest.append(y[ok, 0])
    assert stats.ks_2samp(*dest).pvalue > 1e-3


def test_detailed_balance():
    pot = VariableOrder(["smooth(1, 2, 1, 5)", "1.5"])
    rng = np.random.default_rng(4)
    x = rng.standard_cauchy((500, 2))
    z = rng.standard_cauchy(500) * 10
    i = rng.integers(0, 2, 500)
    assert detailed_balance_defect(pot, x, z, i).max() < 1e-12


def test_make_sampler_choice():
    assert isinstance(make_sampler(ProductPolynomial([1.0]), 1.0), ProductSampler)
    assert isinstance(make_sampler(VariableOrder(["1.5"]), 1.0), ThinningSampler)
    with pytest.raises(SpecificationError):
        make_sampler(ProductPolynomial([1.0]), 1.0, method="gibbs")
    with pytest.raises(SpecificationError):
        ProductSampler(VariableOrder(["1.5"]), 1.0)


def test_weighted_ks_exact():
    assert weighted_ks(np.array([0.25, 0.5, 0.75]), np.ones(4)) == 0.0
    assert weighted_ks(np.array([0.5]), np.array([3.0, 1.0])) == pytest.approx(0.25)


def test_occupation_small_run_and_stagnation():
    ks, acc, rate = occupation_ks(ProductPolynomial([2.0]), 1.0, 200, 200, seed=1)
    assert acc == 200 * 200 and 0 < rate <= 1 and ks < 0.05
    with pytest.raises(NumericalError):
        occupation_ks(ProductPolynomial([2.0]), 1.0, 50, 10_000, max_proposals=1000)


def test_time_grid():
    t = time_grid(100.0, 0.01, per_decade=4)
    assert t[0] == pytest.approx(0.01) and t[-1] == pytest.approx(100.0)
    np.testing.assert_allclose(np.diff(np.log10(t)), 0.25)


def test_decay_report_merge_is_order_free():
    pot = ProductPolynomial([2.0])
    f = TestFunction.tensor(Bump(0.0, 1.0))
    times = time_grid(10.0, 0.1, 4)
    ss = np.random.SeedSequence(5).spawn(2)
    a = decay_batch(pot, f, times, 200, ss[0], 1.0, batch_id=0)
    b = decay_batch(pot, f, times, 200, ss[1], 1.0, batch_id=1)
    ab, ba = a.merge(b), b.merge(a)
    np.testing.assert_array_equal(ab.rho_hat, ba.rho_hat)
    np.testing.assert_array_equal(ab.stderr, ba.stderr)
    with pytest.raises(SpecificationError):
        a.merge(a)


def test_decay_estimate_deterministic_and_decreasing():
    pot = ProductPolynomial([2.0])
    f = TestFunction.tensor(Bump(0.0, 1.0))
    r1, _ = decay_estimate(pot, f, 10.0, 400, 1.0, seed=3, batch=100, t_min=0.01)
    r2, _ = decay_estimate(pot, f, 10.0, 400, 1.0, seed=3, batch=100, t_min=0.01)
    np.testing.assert_array_equal(r1.rho_hat, r2.rho_hat)
    assert r1.trajectories == 400
    # the autocovariance starts near the variance and decays
    assert r1.rho_hat[0] == pytest.approx(r1.variance, rel=0.1)
    assert r1.rho_hat[-1] < 0.5 * r1.rho_hat[0]
