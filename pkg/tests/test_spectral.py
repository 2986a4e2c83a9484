import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from singstab.forms import dirichlet_form, variance_and_mean
from singstab.functions import Bump, TestFunction
from singstab.measure import ProductPolynomial, SpecificationError
from singstab.spectral import (GridForm, assemble, estimate_gap, gap_sweep, plateau_family,
                               sweep_verdict, witness_family)


# [DERIVED] two sites: lambda = a (1/m1 + 1/m2)
@given(st.floats(0.1, 10), st.floats(0.05, 5), st.floats(0.05, 5))
def test_two_site_gap(a, m1, m2):
    gf = GridForm.from_matrices([[a, -a], [-a, a]], [m1, m2])
    lam, v = estimate_gap(gf)
    assert lam == pytest.approx(a * (1 / m1 + 1 / m2), rel=1e-10)
    assert np.dot(gf.m, v) == pytest.approx(0.0, abs=1e-12)


@pytest.fixture(scope="module")
def line():
    return assemble(ProductPolynomial([1.5]), 1.0, 25.0, 801)


def test_line_form_structure(line):
    A = line.A
    np.testing.assert_allclose(A, A.T, atol=1e-14)
    assert np.max(np.abs(A @ np.ones(line.size))) < 1e-10 * np.abs(A).max()
    assert np.all(line.m > 0)
    # lumped masses plus the attached outer tails make up the whole measure
    assert line.m.sum() == pytest.approx(1.0, abs=1e-6)


def test_grid_energy_matches_quadrature_form(line):
    # dual route: discretised form against the adaptive-quadrature form
    f = TestFunction.tensor(Bump(0.0, 3.0))
    grid = line.energy(line.interpolate(f))
    quad = dirichlet_form(ProductPolynomial([1.5]), f, 1.0).value
    assert grid == pytest.approx(quad, rel=0.015)


@settings(max_examples=20)
@given(st.integers(0, 2**31))
def test_rayleigh_bounds_gap(seed):
    gf = assemble(ProductPolynomial([2.0]), 1.0, 10.0, 64)
    lam, _ = estimate_gap(gf)
    v = np.random.default_rng(seed).normal(size=gf.size)
    assert gf.rayleigh(v) >= lam * (1 - 1e-10)


def test_gap_scale_invariant():
    gf = assemble(ProductPolynomial([2.0]), 1.0, 10.0, 64)
    assert estimate_gap(gf.scaled(3.0))[0] == pytest.approx(estimate_gap(gf)[0], rel=1e-9)


def test_product_gap_is_min_of_axis_gaps():
    R, n = 8.0, 40
    g1 = estimate_gap(assemble(ProductPolynomial([1.5]), 1.0, R, n))[0]
    g2 = estimate_gap(assemble(ProductPolynomial([3.0]), 1.0, R, n))[0]
    g12 = estimate_gap(assemble(ProductPolynomial([1.5, 3.0]), 1.0, R, n))[0]
    assert g12 == pytest.approx(min(g1, g2), rel=1e-7)


def test_gap_sweep_records():
    recs, verdict = gap_sweep(ProductPolynomial([2.0]), 1.0, [10, 20], per_unit=8)
    assert [r.n for r in recs] == [161, 321]
    assert np.isnan(recs[0].ratio) and recs[1].ratio > 0.8
    assert verdict == "stabilized"
    assert all(r.residual <= 1e-8 for r in recs)
    with pytest.raises(SpecificationError):
        gap_sweep(ProductPolynomial([2.0]), 1.0, [10], n=64, per_unit=4)


@pytest.mark.parametrize("ratios, verdict", [
    ([float("nan"), 0.95, 0.9], "stabilized"), ([float("nan"), 0.4, 0.5], "vanishing"),
    ([float("nan"), 0.7, 0.9], "inconclusive"), ([float("nan"), 0.85], "stabilized")])
def test_sweep_verdict(ratios, verdict):
    assert sweep_verdict(ratios) == verdict


def test_witness_family_ratio_grows_when_poincare_fails():
    pot = ProductPolynomial([0.5])
    ratios = []
    for k in (1, 3, 5):
        f = witness_family("poly_subcritical", k, 1.0, 0.5)
        _, var = variance_and_mean(pot, f)
        ratios.append(var.value / dirichlet_form(pot, f, 1.0).value)
    assert ratios[0] < ratios[1] < ratios[2]
    with pytest.raises(SpecificationError):
        witness_family("poly_subcritical", 1, 1.0, 1.5)
    with pytest.raises(SpecificationError):
        witness_family("log_subcritical", 1, 1.0, 0.2)
    assert plateau_family(0)(np.array([[123.0]]))[0] == 1.0


def test_assemble_validation():
    with pytest.raises(SpecificationError):
        assemble(ProductPolynomial([1.0, 1.0, 1.0]), 1.0, 5.0, 16)
    with pytest.raises(SpecificationError):
        assemble(ProductPolynomial([1.0]), 1.0, 5.0, 4)
    with pytest.raises(SpecificationError):
        assemble(ProductPolynomial([1.0]), 1.0, -1.0, 16)
    with pytest.raises(SpecificationError):
        GridForm.from_matrices([[1, -1], [-1, 1]], [1.0, 0.0])
