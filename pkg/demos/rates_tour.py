"""Closed-form and numeric rate functions for the product families."""
import numpy as np

from singstab.measure import ProductLogCorrected, ProductPolynomial, criteria_profile
from singstab.rates import (entropy_condition, fitted_slope, logsobolev_iff, poly_beta_exponent,
                            super_poincare_rate, weak_eta_closed_form, weak_eta_rate)

alpha = 1.0

# super-Poincare: beta(r) ~ r^-E for small r
for eps in ([2.0], [1.5, 2.0], [3.0, 3.0]):
    print(f"poly eps={eps}: E = {poly_beta_exponent(alpha, eps):g}")

pot = ProductPolynomial([1.5, 2.0])
rate = super_poincare_rate(pot, criteria_profile(pot, alpha))
for s in (1e-1, 1e-2, 1e-3):
    print(f"  numeric log beta({s:g}) = {rate.log_value(s):.4g}")

# weak Poincare below alpha
for eps in ([0.5], [0.5, 2.0], [0.5, 0.5]):
    pot = ProductPolynomial(eps)
    slope = fitted_slope(weak_eta_rate(pot, alpha), 1e-4, 1e-2)
    _, env = weak_eta_closed_form("poly", alpha, eps, 0.01)
    print(f"poly eps={eps}: eta slope {slope:.3f}, decay t^-{env.params['exponent']:.3g}")

# log-Sobolev and the entropy condition for the log-corrected family
for eps in ([1.0], [0.5], [-0.5]):
    cond = entropy_condition(ProductLogCorrected(eps, alpha), alpha)
    C = np.round(cond.C, 4).tolist()
    print(f"log eps={eps}: log-Sobolev {logsobolev_iff(eps)}, entropy condition "
          f"{cond.verdict} C={C}")
