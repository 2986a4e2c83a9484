"""Dirichlet forms, moments and entropies under ``mu_V``, and the residuals
of the Poincare-type inequalities on concrete test functions.

The form is

    D(f, g) = 1/2 sum_i int int (f(x+z e_i) - f(x)) (g(x+z e_i) - g(x))
                                |z|^{-1-alpha} dz mu_V(dx),

with ``D_{>1}`` restricting to ``|z| > 1``.  All values are ``Estimate``
objects (value plus two-level error estimate).
"""
import math
from dataclasses import dataclass

import numpy as np

from . import quadrature as Q
from .functions import TestFunction, log_of
from .measure import SpecificationError, _check_alpha, ball_extrema
from .quadrature import DEFAULT, Estimate, QuadratureSpec, two_level

__all__ = [
    "QuadratureSpec", "Estimate", "dirichlet_form", "bilinear_form", "generator_pairing",
    "mean", "variance_and_mean", "entropy", "local_mass", "inequality_residual",
    "Residual", "identity_check", "local_super_beta", "TRUNCATIONS",
]

TRUNCATIONS = {"full": 0.0, "above_one": 1.0}


def _lower(truncation):
    try:
        return TRUNCATIONS[truncation]
    except KeyError:
        raise SpecificationError(f"truncation must be one of {sorted(TRUNCATIONS)}") from None


def dirichlet_form(pot, f, alpha, quad=DEFAULT, truncation="full", method="auto", tol=None):
    """``D(f, f)`` (or ``D_{>1}(f, f)``) with its quadrature error."""
    alpha = _check_alpha(alpha)
    est = Q.form_estimate(pot, f, f, alpha, quad, _lower(truncation), method, tol)
    # a sum of squares; tiny negative values can only come from cancellation
    return Estimate(max(est.value, 0.0), est.error, est.coarse)


def bilinear_form(pot, f, g, alpha, quad=DEFAULT, truncation="full", method="auto", tol=None):
    """``D(f, g)``; for ``g = log f`` pass ``log_of(f)`` or a log tensor."""
    alpha = _check_alpha(alpha)
    return Q.form_estimate(pot, f, g, alpha, quad, _lower(truncation), method, tol)


def generator_pairing(pot, f, g, alpha, quad=DEFAULT, method="auto", tol=None):
    """``int f L_{>1} g dmu_V``."""
    alpha = _check_alpha(alpha)
    return Q.pairing_estimate(pot, f, g, alpha, quad, method, tol)


@dataclass(frozen=True)
class IdentityCheck:
    form: Estimate       # D_{>1}(f, g)
    pairing: Estimate    # -int f L_{>1} g dmu
    difference: float
    tolerance: float

    @property
    def passed(self):
        return abs(self.difference) <= self.tolerance


def identity_check(pot, f, g, alpha, quad=DEFAULT, floor=1e-12):
    """Compare ``D_{>1}(f, g)`` with ``-int f L_{>1} g dmu``.

    The tolerance is the sum of both two-level error estimates plus a small
    absolute floor for round-off.
    """
    a = bilinear_form(pot, f, g, alpha, quad, "above_one")
    b = generator_pairing(pot, f, g, alpha, quad)
    b = Estimate(-b.value, b.error, -b.coarse)
    tol = a.error + b.error + floor * (1.0 + abs(a.value))
    return IdentityCheck(a, b, a.value - b.value, tol)


# ---------------------------------------------------------------------------
# moments
# ---------------------------------------------------------------------------

def _moment(pot, h, funcs, quad, extra_edges=()):
    def run(level):
        x, w = Q.outer_rule(pot, funcs, quad, level, extra_edges)
        return float(np.dot(w, h(x)))
    return two_level(run)


def mean(pot, f, quad=DEFAULT):
    return _moment(pot, f, (f,), quad)


def variance_and_mean(pot, f, quad=DEFAULT):
    """``(mu(f), mu((f - mu f)^2))``; the variance is computed centred."""
    def run(level):
        x, w = Q.outer_rule(pot, (f,), quad, level)
        fx = f(x)
        m = np.dot(w, fx) / w.sum()
        return float(m), float(np.dot(w, (fx - m) ** 2))
    m0, v0 = run(0)
    m1, v1 = run(1)
    return Estimate(m1, abs(m1 - m0), m0), Estimate(v1, abs(v1 - v0), v0)


def entropy(pot, f, quad=DEFAULT):
    """``Ent(f) = mu(f log f) - mu(f) log mu(f)`` for positive ``f``."""
    if isinstance(f, TestFunction):
        lo, _ = f.bounds()
        if not lo > 0:
            raise SpecificationError("entropy needs a test function with a positive floor")

    def run(level):
        x, w = Q.outer_rule(pot, (f,), quad, level)
        fx = f(x)
        if np.any(fx <= 0):
            raise SpecificationError("entropy: non-positive function value encountered")
        tot = w.sum()
        m = np.dot(w, fx) / tot
        return float(np.dot(w, fx * np.log(fx)) / tot - m * math.log(m))

    est = two_level(run)
    return Estimate(max(est.value, 0.0), est.error, est.coarse)


def local_mass(pot, f, r, quad=DEFAULT):
    """``int_{|x| <= r} f^2 dmu_V``."""
    def h(x):
        inside = np.sum(x * x, axis=1) <= r * r
        return np.where(inside, f(x) ** 2, 0.0)

    edges = (-r, r)
    return _moment(pot, h, (f,), quad, edges)


# ---------------------------------------------------------------------------
# rate of the local inequality
# ---------------------------------------------------------------------------

def local_super_beta(pot, r, t, alpha, C3=1.0):
    """``C3 [t ^ (r^alpha S/I)]^{-d/alpha} S^{2+d/alpha} / I^{1+d/alpha}`` with
    ``S = sup_{|x|<=2 sqrt(d) r} e^V`` and ``I = inf_{|x|<=r} e^V``."""
    alpha = _check_alpha(alpha)
    if not (r > 0 and t > 0):
        raise SpecificationError("r and t must be positive")
    d = pot.dimension
    _, vmax = ball_extrema(pot, 2.0 * math.sqrt(d) * r)
    vmin, _ = ball_extrema(pot, r)
    log_s, log_i = vmax, vmin
    cap = alpha * math.log(r) + log_s - log_i
    lt = min(math.log(t), cap)
    return C3 * math.exp(-d / alpha * lt + (2 + d / alpha) * log_s - (1 + d / alpha) * log_i)


# ---------------------------------------------------------------------------
# residuals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Residual:
    """Both sides of an inequality with the theorem constant factored out.

    ``minimal_constant`` is the smallest value of that constant making the
    inequality hold for this function (None when vacuous: 0/0).
    """

    kind: str
    params: dict
    lhs: float
    rhs: float
    minimal_constant: float | None
    tolerance: float

    @property
    def satisfied(self):
        return self.lhs <= self.rhs + self.tolerance

    def record(self):
        return {"kind": self.kind, **self.params, "lhs": self.lhs, "rhs": self.rhs,
                "minimal_constant": self.minimal_constant, "tolerance": self.tolerance}


def _ratio(num, den, num_err, den_err):
    if abs(den) <= den_err and abs(num) <= num_err:
        return None
    if den <= 0:
        return math.inf
    return max(num, 0.0) / den


def inequality_residual(kind, pot, f, alpha, quad=DEFAULT, log_f=None, **params):
    """Residual of one inequality for the function ``f``.

    kinds and their constants:

    * ``poincare``: ``Var(f) <= C D(f, f)``; rhs is ``D`` (C = 1), minimal C = Var/D.
    * ``super_poincare`` (``s``, ``beta``): ``mu(f^2) <= s D + beta mu(|f|)^2``;
      minimal beta returned.
    * ``local_super`` (``r``, ``t``, ``beta``): same with ``int_{B(0,r)} f^2``.
    * ``entropy`` (``constant``): ``Ent(f) <= constant * D(f, log f)``; minimal
      constant = Ent / D(f, log f).
    * ``weak`` (``r``, ``eta``): ``Var(f) <= eta D(f, f) + r ||f - mu f||_inf^2``;
      minimal eta returned.
    """
    alpha = _check_alpha(alpha)
    if kind == "poincare":
        _, var = variance_and_mean(pot, f, quad)
        D = dirichlet_form(pot, f, alpha, quad)
        tol = var.error + D.error
        const = _ratio(var.value, D.value, var.error, D.error)
        if const == math.inf and var.value > tol:
            raise Q.NumericalError("zero energy with positive variance: quadrature defect")
        return Residual(kind, {}, var.value, D.value, const, tol)
    if kind == "super_poincare":
        s = float(params["s"])
        beta = params.get("beta")
        m2 = _moment(pot, lambda x: f(x) ** 2, (f,), quad)
        m1 = _moment(pot, lambda x: np.abs(f(x)), (f,), quad)
        D = dirichlet_form(pot, f, alpha, quad)
        num = m2.value - s * D.value
        const = _ratio(num, m1.value ** 2, m2.error + s * D.error, 2 * m1.value * m1.error)
        b = 0.0 if beta is None else float(beta(s) if callable(beta) else beta)
        tol = m2.error + s * D.error + b * 2 * m1.value * m1.error
        return Residual(kind, {"s": s}, m2.value, s * D.value + b * m1.value ** 2, const, tol)
    if kind == "local_super":
        r = float(params["r"])
        t = float(params["t"])
        beta = params.get("beta")
        loc = local_mass(pot, f, r, quad)
        m1 = _moment(pot, lambda x: np.abs(f(x)), (f,), quad)
        D = params.get("energy") or dirichlet_form(pot, f, alpha, quad)
        num = loc.value - t * D.value
        const = _ratio(num, m1.value ** 2, loc.error + t * D.error, 2 * m1.value * m1.error)
        b = 0.0 if beta is None else float(beta(t) if callable(beta) else beta)
        tol = loc.error + t * D.error + b * 2 * m1.value * m1.error
        return Residual(kind, {"r": r, "t": t}, loc.value, t * D.value + b * m1.value ** 2,
                        const, tol)
    if kind == "entropy":
        c = float(params.get("constant", 1.0))
        g = log_f if log_f is not None else log_of(f)
        ent = entropy(pot, f, quad)
        D = bilinear_form(pot, f, g, alpha, quad)
        tol = ent.error + c * D.error
        const = _ratio(ent.value, D.value, ent.error, D.error)
        return Residual(kind, {"constant": c}, ent.value, c * D.value, const, tol)
    if kind == "weak":
        r = float(params["r"])
        eta = params.get("eta")
        mu, var = variance_and_mean(pot, f, quad)
        sup = params.get("sup_norm")
        if sup is None:
            if not isinstance(f, TestFunction):
                raise SpecificationError("weak residual needs sup_norm for non-atomic functions")
            lo, hi = f.bounds()
            sup = max(abs(hi - mu.value), abs(lo - mu.value))
        D = dirichlet_form(pot, f, alpha, quad)
        num = var.value - r * sup ** 2
        const = _ratio(num, D.value, var.error, D.error)
        e = 0.0 if eta is None else float(eta(r) if callable(eta) else eta)
        tol = var.error + e * D.error
        return Residual(kind, {"r": r}, var.value, e * D.value + r * sup ** 2, const, tol)
    raise SpecificationError(f"unknown inequality kind {kind!r}")
