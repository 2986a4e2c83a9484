"""Numerical toolkit for Poincare-type inequalities of stable-like Dirichlet
forms whose jumps run only along the coordinate axes.

Modules:

* ``measure``  - reference measures ``e^{-V} dx`` and the criteria functions;
* ``rates``    - verdicts and rate functions (super, weak, log-Sobolev);
* ``forms``    - Dirichlet forms, moments and inequality residuals;
* ``lyapunov`` - the truncated generator and drift verification;
* ``spectral`` - Galerkin discretisation and spectral gaps;
* ``simulate`` - exact simulation of the truncated jump chain;
* ``cli``      - configuration-driven runs writing CSV/JSON artifacts.
"""
from .measure import (HypothesisNotMet, NumericalError, SpecificationError, make_potential,
                      ProductPolynomial, ProductLogCorrected, VariableOrder, Custom,
                      criteria_profile)
from .functions import TestFunction, atom_from_spec
from .quadrature import Estimate, QuadratureSpec

__version__ = "0.1.0"

__all__ = [
    "HypothesisNotMet", "NumericalError", "SpecificationError", "make_potential",
    "ProductPolynomial", "ProductLogCorrected", "VariableOrder", "Custom", "criteria_profile",
    "TestFunction", "atom_from_spec", "Estimate", "QuadratureSpec",
]
