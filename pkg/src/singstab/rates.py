"""Verdicts and rate functions for the Poincare, super-Poincare, entropy and
weak-Poincare inequalities of the axis-concentrated stable form.

Closed-form statements for the product families are evaluated directly;
everything else is read off a ``CriteriaProfile`` (tabulated Phi and the
tail diagnostics).  Free constants (C1, C2, c, lambda, ...) are parameters
with default 1: only exponents and shapes carry information.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import _rules
from ._fit import loglog_slope
from .measure import (HypothesisNotMet, ProductLogCorrected, ProductPolynomial,
                      SpecificationError, VariableOrder, _check_alpha, ball_extrema,
                      criteria_profile, direction_grid)

__all__ = [
    "Verdict", "RateFunction", "poincare_verdict", "super_poincare_beta", "BetaValue",
    "super_poincare_rate", "corollary_beta_poly", "poly_beta_exponent", "corollary_beta_log",
    "logsobolev_iff", "VariableOrderReport", "variable_order_analyze", "EntropyFactor",
    "EntropyCondition", "entropy_condition", "entropy_condition_1d", "reference_potential",
    "weak_eta", "weak_eta_rate", "weak_eta_closed_form", "decay_envelope", "DsMass",
]

HOLDS, FAILS, UNKNOWN = "HOLDS", "FAILS", "UNKNOWN"


@dataclass
class Verdict:
    verdict: str
    reason: str
    evidence: dict = field(default_factory=dict)

    def __str__(self):
        return f"{self.verdict} ({self.reason})"


# ---------------------------------------------------------------------------
# rate functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RateFunction:
    """An evaluable rate with its family tag and parameters.

    ``log_fn`` maps a positive argument to the natural log of the rate.
    """

    family: str
    params: dict
    log_fn: object = field(repr=False, compare=False)

    def log_value(self, x):
        return float(self.log_fn(float(x)))

    def __call__(self, x):
        lv = self.log_value(x)
        return math.exp(lv) if lv < 709.0 else math.inf

    def table(self, xs):
        return [(float(x), self(x), self.log_value(x)) for x in xs]


def _log1p_pow(r, e):
    """``log(1 + r^-e)`` without overflow."""
    return float(np.logaddexp(0.0, -e * math.log(r)))


def decay_envelope(kind, **params):
    """Predicted decay of ``||P_t - mu||`` as a RateFunction in ``t``.

    kinds: ``exponential`` (rate), ``power`` (lam, exponent),
    ``stretched`` (lam1, lam2, exponent).
    """
    if kind == "exponential":
        rate = params.get("rate", 1.0)
        return RateFunction("DecayEnvelope", {"law": kind, **params}, lambda t: -rate * t)
    if kind == "power":
        lam, p = params.get("lam", 1.0), params["exponent"]
        return RateFunction("DecayEnvelope", {"law": kind, "lam": lam, "exponent": p},
                            lambda t: math.log(lam) - p * math.log(t))
    if kind == "stretched":
        l1, l2, q = params.get("lam1", 0.0), params.get("lam2", 1.0), params["exponent"]
        return RateFunction("DecayEnvelope", {"law": kind, "lam1": l1, "lam2": l2, "exponent": q},
                            lambda t: l1 - l2 * t ** q)
    raise SpecificationError(f"unknown decay law {kind!r}")


# ---------------------------------------------------------------------------
# Poincare verdict
# ---------------------------------------------------------------------------

def poincare_verdict(pot, profile=None, alpha=None):
    """HOLDS / FAILS / UNKNOWN for the Poincare inequality.

    The product families use their iff conditions.  Variable order and
    custom potentials go through the numerical diagnostics (profile built
    on demand when only ``alpha`` is given).
    """
    if alpha is None:
        if profile is None:
            raise SpecificationError("poincare_verdict needs a profile or alpha")
        alpha = profile.alpha
    alpha = _check_alpha(alpha)
    if isinstance(pot, ProductPolynomial):
        bad = [e for e in pot.epsilons if e < alpha]
        if bad:
            return Verdict(FAILS, f"polynomial tail exponent(s) {bad} below alpha={alpha}")
        return Verdict(HOLDS, f"all polynomial tail exponents >= alpha={alpha}")
    if isinstance(pot, ProductLogCorrected):
        bad = [e for e in pot.epsilons if e < 0]
        if bad:
            return Verdict(FAILS, f"log-correction exponent(s) {bad} negative")
        return Verdict(HOLDS, "all log-correction exponents >= 0")
    evidence = {}
    if isinstance(pot, VariableOrder):
        rep = variable_order_analyze(pot, alpha)
        evidence["variable_order"] = rep.summary()
        if rep.poincare == HOLDS:
            return Verdict(HOLDS, "A(x) >= alpha and M_j >= N_j at large |x|", evidence)
    if profile is None:
        profile = criteria_profile(pot, alpha)
    evidence.update(profile.summary())
    if profile.growth.verdict in ("POSITIVE", "INFINITE") and profile.limsup.passed:
        return Verdict(HOLDS, "Phi has a positive limit and the limsup condition passes",
                       evidence)
    return Verdict(UNKNOWN, "numerical diagnostics inconclusive", evidence)


# ---------------------------------------------------------------------------
# super-Poincare
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BetaValue:
    value: float
    log_value: float
    radius: float       # Phi^{-1}(C2 (1 + 1/s))


def super_poincare_beta(pot, profile, s, C1=1.0, C2=1.0):
    """``C1 (1 + s^{-d/alpha}) S^{2+d/alpha} / I^{1+d/alpha}`` with
    ``S = sup_{|x| <= 2 sqrt(d) R} e^V``, ``I = inf_{|x| <= R} e^V`` and
    ``R = Phi^{-1}(C2 (1 + 1/s))``."""
    if not s > 0:
        raise SpecificationError("s must be positive")
    if profile.growth.verdict != "INFINITE":
        raise HypothesisNotMet(f"Phi does not grow to infinity (diagnostic {profile.growth.verdict})")
    alpha = profile.alpha
    d = pot.dimension
    R = profile.phi.inverse(C2 * (1.0 + 1.0 / s))
    if not math.isfinite(R):
        raise HypothesisNotMet(f"super-Poincare criterion not met at s={s:g}: "
                               "Phi never reaches C2 (1 + 1/s) on the tabulated range")
    _, vmax = ball_extrema(pot, 2.0 * math.sqrt(d) * R)
    vmin, _ = ball_extrema(pot, R)
    k = d / alpha
    lv = (math.log(C1) + _log1p_pow(s, k) + (2 + k) * vmax - (1 + k) * vmin)
    return BetaValue(math.exp(lv) if lv < 700 else math.inf, lv, R)


def super_poincare_rate(pot, profile, C1=1.0, C2=1.0):
    def lf(s):
        return super_poincare_beta(pot, profile, s, C1, C2).log_value
    return RateFunction("SuperPoincareBeta", {"C1": C1, "C2": C2, "alpha": profile.alpha}, lf)


def poly_beta_exponent(alpha, epsilons):
    """``d/alpha + (2 alpha + d) sum(1 + eps_i) / (alpha (eps_* - alpha))``."""
    alpha = _check_alpha(alpha)
    eps = np.atleast_1d(np.asarray(epsilons, dtype=float))
    d = eps.size
    e_star = float(eps.min())
    if not e_star > alpha:
        raise HypothesisNotMet(
            f"super-Poincare inequality fails: min eps = {e_star} is not above alpha = {alpha}")
    return d / alpha + (2 * alpha + d) * float(np.sum(1 + eps)) / (alpha * (e_star - alpha))


def corollary_beta_poly(alpha, epsilons, r, c=1.0):
    """``(c (1 + r^{-E}), E)`` for the polynomial family."""
    E = poly_beta_exponent(alpha, epsilons)
    if not r > 0:
        raise SpecificationError("r must be positive")
    return c * math.exp(_log1p_pow(r, E)), E


def poly_beta_rate(alpha, epsilons, c=1.0):
    E = poly_beta_exponent(alpha, epsilons)
    return RateFunction("PolyBeta", {"c": c, "exponent": E},
                        lambda r: math.log(c) + _log1p_pow(r, E))


def corollary_beta_log(alpha, epsilons, r, c=1.0):
    """``exp(c (1 + r^{-1/eps_*}))`` for the log-corrected family."""
    _check_alpha(alpha)
    eps = np.atleast_1d(np.asarray(epsilons, dtype=float))
    e_star = float(eps.min())
    if not e_star > 0:
        raise HypothesisNotMet(
            f"super-Poincare inequality fails: min eps = {e_star} is not positive")
    if not r > 0:
        raise SpecificationError("r must be positive")
    lv = c * (1.0 + r ** (-1.0 / e_star))
    return math.exp(lv) if lv < 709.0 else math.inf


def log_beta_rate(alpha, epsilons, c=1.0):
    e_star = float(np.min(epsilons))
    corollary_beta_log(alpha, epsilons, 1.0, c)  # validates
    return RateFunction("LogBeta", {"c": c, "inner_exponent": -1.0 / e_star},
                        lambda r: c * (1.0 + r ** (-1.0 / e_star)))


def logsobolev_iff(epsilons):
    """Log-Sobolev holds for the log-corrected family iff every ``eps_i >= 1``."""
    return bool(np.all(np.asarray(epsilons, dtype=float) >= 1.0))


# ---------------------------------------------------------------------------
# variable order
# ---------------------------------------------------------------------------

@dataclass
class VariableOrderReport:
    alpha: float
    radii: np.ndarray
    A_table: np.ndarray            # min over directions of A(x)
    margin_table: np.ndarray       # min over directions and j of M_j - N_j
    condition_m_ge_n: np.ndarray   # per radius
    A_star: float
    stabilized: bool
    eps_slack: float
    B: tuple
    beta_exponent: float | None
    poincare: str
    notes: list = field(default_factory=list)

    def summary(self):
        return {"A_star": self.A_star, "eps_slack": self.eps_slack, "stabilized": self.stabilized,
                "B": list(self.B), "beta_exponent": self.beta_exponent,
                "condition_m_ge_n_large_r": bool(np.all(self.condition_m_ge_n[self.radii.size // 2:])),
                "poincare": self.poincare}


def _replace_axis(x, i, u):
    """(N, K, d) points: ``x`` with coordinate i set to each row of ``u`` (N, K)."""
    pts = np.repeat(x[:, None, :], u.shape[1], axis=1)
    pts[..., i] = u
    return pts


def variable_order_analyze(pot, alpha, eps_slack=None, radii=None, n_dirs=None):
    """Tabulate ``A(x)``, ``M_j(x)``, ``N_j(x)`` and derive the super-Poincare exponent."""
    alpha = _check_alpha(alpha)
    if not isinstance(pot, VariableOrder):
        raise SpecificationError("variable_order_analyze needs a variable-order potential")
    d = pot.dimension
    coeffs = pot.coefficients
    radii = np.geomspace(1.0, 1e6, 31) if radii is None else np.asarray(radii, dtype=float)
    dirs = direction_grid(d, n_dirs or {1: None, 2: 64, 3: 128}[d])
    x = (radii[:, None, None] * dirs[None]).reshape(-1, d)
    n = x.shape[0]
    near = np.linspace(-1.0, 1.0, 65)
    steps = np.concatenate([[0.0], np.geomspace(1e-4, 1e4, 40)])
    r = np.linalg.norm(x, axis=1)
    admissible = np.abs(x) >= r[:, None] / math.sqrt(d) * (1 - 1e-12)

    sup_near = np.empty((d, d, n))   # [i, j]: sup_{|u_i|<=1} a_j(x|u_i)
    inf_far = np.empty((d, d, n))    # [i, j]: inf_{|u_i|>=|x_i|} a_j(x|u_i)
    for i in range(d):
        a = np.abs(x[:, i])[:, None]
        mags = a + steps[None, :] * (1.0 + a)
        p_near = _replace_axis(x, i, np.broadcast_to(near, (n, near.size)))
        p_far = _replace_axis(x, i, np.concatenate([mags, -mags], axis=1))
        for j, c in enumerate(coeffs):
            sup_near[i, j] = c(p_near.reshape(-1, d)).reshape(n, -1).max(axis=1)
            inf_far[i, j] = c(p_far.reshape(-1, d)).reshape(n, -1).min(axis=1)
    adm = admissible.T  # (d, n)
    N = np.where(adm[:, None, :], sup_near, -np.inf).max(axis=0)    # (d, n) over j
    M = inf_far.min(axis=0)
    A = np.where(adm, sup_near[np.arange(d), np.arange(d)], np.inf).min(axis=0)

    shape = (radii.size, dirs.shape[0])
    A_tab = A.reshape(shape).min(axis=1)
    margin = (M - N).min(axis=0).reshape(shape).min(axis=1)
    cond = margin >= -1e-12
    top = radii >= radii[-1] / 10
    A_star = float(A_tab[top].min())
    suffix = np.minimum.accumulate(A_tab[::-1])[::-1]
    half = suffix[radii.size // 2:]
    stabilized = bool(np.ptp(half) <= 1e-9 * max(1.0, abs(half[-1])))
    notes = []
    if eps_slack is None:
        eps_slack = 0.0 if stabilized else 0.05 * max(A_star - alpha, 0.0)
    elif eps_slack < 0:
        raise SpecificationError("eps_slack must be non-negative")
    if stabilized and eps_slack == 0.0:
        notes.append("inf_{|x|>=r} A(x) is constant at large r: slack set to 0")
    B = tuple(float(c.upper) for c in coeffs)
    large = radii.size // 2
    exponent = None
    if A_star - eps_slack > alpha:
        exponent = d / alpha + (2 * alpha + d) * sum(1 + b for b in B) / (
            alpha * (A_star - eps_slack - alpha))
    else:
        notes.append("A* does not exceed alpha + slack: no super-Poincare exponent")
    if not np.all(cond[large:]):
        notes.append("M_j >= N_j fails at large radius")
        verdict = UNKNOWN
    elif np.all(A_tab[large:] >= alpha - 1e-12):
        verdict = HOLDS
    else:
        verdict = UNKNOWN
    return VariableOrderReport(alpha, radii, A_tab, margin, cond, A_star, stabilized,
                               float(eps_slack), B, exponent, verdict, notes)


# ---------------------------------------------------------------------------
# entropy condition
# ---------------------------------------------------------------------------

@dataclass
class EntropyFactor:
    C: float                  # estimate of inf (e^{V(x)} + e^{V(y)}) / |x - y|^{1+alpha}
    minimizer: tuple
    extents: np.ndarray
    minima: np.ndarray        # grid minimum per extent
    refined: float            # same with a doubled grid at the largest extent
    slope: float              # log-log trend of minima in the extent
    verdict: str


def _entropy_grid_min(log_w, alpha, L, n):
    g = np.geomspace(1e-3, L, n)
    t = np.concatenate([-g[::-1], [0.0], g])
    lw = log_w(t)
    X, Y = np.meshgrid(t, t, indexing="ij")
    LX, LY = np.meshgrid(-lw, -lw, indexing="ij")
    with np.errstate(divide="ignore"):
        val = np.logaddexp(LX, LY) - (1 + alpha) * np.log(np.abs(X - Y))
    val[X == Y] = np.inf
    k = np.unravel_index(np.argmin(val), val.shape)
    x0, y0 = float(X[k]), float(Y[k])

    def f(p):
        x, y = np.clip(p, -L, L)
        if x == y:
            return np.inf
        return float(np.logaddexp(-log_w(np.array(x)), -log_w(np.array(y)))
                     - (1 + alpha) * math.log(abs(x - y)))

    res = optimize.minimize(f, [x0, y0], method="Nelder-Mead",
                            options={"xatol": 1e-10 * L, "fatol": 1e-13, "maxiter": 800})
    best = min(float(val[k]), float(res.fun))
    arg = tuple(np.clip(res.x, -L, L)) if res.fun < val[k] else (x0, y0)
    return best, arg


def entropy_condition_1d(log_w, alpha, extents=None, n=200, slope_tol=0.01):
    """Estimate ``C = inf_{x != y} (e^{V(x)} + e^{V(y)}) / |x - y|^{1+alpha}``.

    ``log_w`` is ``-V`` (log density) as a vectorised callable.  The grid
    minimum is taken on growing windows ``[-L, L]``; a clearly decreasing
    trend in ``L`` means the infimum is 0 (verdict FAILS, C = 0).
    """
    alpha = _check_alpha(alpha)
    extents = np.geomspace(1e2, 1e6, 5) if extents is None else np.asarray(extents, dtype=float)
    mins, args = [], []
    for L in extents:
        m, a = _entropy_grid_min(log_w, alpha, L, n)
        mins.append(m)
        args.append(a)
    mins = np.array(mins)
    refined, _ = _entropy_grid_min(log_w, alpha, extents[-1], 2 * n)
    top = extents >= extents[-1] / 100
    slope = float(np.polyfit(np.log(extents[top]), mins[top], 1)[0])
    C = math.exp(min(mins[-1], refined))
    if slope < -slope_tol:
        return EntropyFactor(0.0, args[-1], extents, np.exp(mins), math.exp(refined), slope, FAILS)
    return EntropyFactor(C, args[-1], extents, np.exp(mins), math.exp(refined), slope, HOLDS)


@dataclass
class EntropyCondition:
    C: tuple
    constant: float           # 2 max_i 1/C_i (inf when some C_i = 0)
    factors: list
    verdict: str


def entropy_condition(pot, alpha, **kw):
    """Per-factor constants ``C_i`` and the entropy constant ``2 max_i C_i^{-1}``."""
    if not pot.is_product:
        raise SpecificationError("the entropy condition needs a product measure")
    facs = [entropy_condition_1d(f.log_pdf, alpha, **kw) for f in pot.factors]
    C = tuple(f.C for f in facs)
    ok = all(c > 0 for c in C)
    const = 2.0 * max(1.0 / c for c in C) if ok else math.inf
    return EntropyCondition(C, const, facs, HOLDS if ok else FAILS)


# ---------------------------------------------------------------------------
# weak Poincare
# ---------------------------------------------------------------------------

def reference_potential(pot, alpha):
    """Comparison measure with a Poincare inequality: tail exponents raised
    to ``eps_i v alpha`` (polynomial) or ``eps_i v 0`` (log-corrected)."""
    if isinstance(pot, ProductPolynomial):
        return ProductPolynomial([max(e, alpha) for e in pot.epsilons])
    if isinstance(pot, ProductLogCorrected):
        return ProductLogCorrected([max(e, 0.0) for e in pot.epsilons], pot.alpha)
    raise SpecificationError("no default reference measure for this family; pass pot0")


_T_GRID = np.expm1(np.linspace(0.0, 60.0, 6001))


class DsMass:
    """``mu_V(D_s)`` with ``D_s = {e^{V0 - V} <= s}``."""

    def __init__(self, pot, pot0):
        if pot.dimension != pot0.dimension:
            raise SpecificationError("pot and pot0 must have the same dimension")
        self.pot, self.pot0 = pot, pot0
        self.product = pot.is_product and pot0.is_product
        if self.product:
            self.const = (pot.log_normalizer - pot.offset) - (pot0.log_normalizer - pot0.offset)
            self.h = [f.g(_T_GRID) - f0.g(_T_GRID) for f, f0 in zip(pot.factors, pot0.factors)]
            self.monotone = all(np.all(np.diff(h) >= -1e-13) for h in self.h)
            self.active = [i for i, h in enumerate(self.h) if np.ptp(h) > 1e-12]

    def check_bounded_ratio(self):
        """``sup e^{V - V0} < inf``: ``log e^{V - V0}`` must not grow."""
        if self.product:
            lows = [float(h.min()) for h in self.h]
            return all(math.isfinite(v) for v in lows) and all(
                h[-1] >= h[len(h) // 2] - 1e-9 for h in self.h)
        d = self.pot.dimension
        radii = np.geomspace(1.0, 1e8, 41)
        dirs = direction_grid(d)
        pts = (radii[:, None, None] * dirs[None]).reshape(-1, d)
        lr = (self.pot0.log_density(pts) - self.pot.log_density(pts)).reshape(radii.size, -1).max(axis=1)
        top = radii >= 1e7
        return bool(np.polyfit(np.log(radii[top]), lr[top], 1)[0] <= 0.01)

    def _level(self, i, K):
        """``sup{t : h_i(t) <= K}`` (inf when never exceeded, -1 when empty)."""
        h = self.h[i]
        K = np.asarray(K, dtype=float)
        k = np.searchsorted(h, K, side="right")
        out = np.where(k >= h.size, np.inf, 0.0)
        inner = (k > 0) & (k < h.size)
        kk = np.clip(k, 1, h.size - 1)
        s0 = np.log1p(_T_GRID[kk - 1])
        s1 = np.log1p(_T_GRID[kk])
        h0, h1 = h[kk - 1], h[kk]
        with np.errstate(invalid="ignore", divide="ignore"):
            s = s0 + (s1 - s0) * np.where(h1 > h0, (K - h0) / (h1 - h0), 1.0)
        out = np.where(inner, np.expm1(s), out)
        return np.where(k == 0, -1.0, out)

    def _below(self, i, K):
        """``P(h_i(|X_i|) <= K)``."""
        t = self._level(i, K)
        fac = self.pot.factors[i]
        tail = np.where(np.isfinite(t) & (t >= 0),
                        np.exp(fac.log_tail(np.where(np.isfinite(t) & (t >= 0), t, 0.0))), 0.0)
        return np.where(t < 0, 0.0, np.where(np.isinf(t), 1.0, 1.0 - tail))

    def __call__(self, log_s):
        """``mu_V(D_s)`` at ``log s``."""
        if not self.product or not self.monotone:
            return self._generic(log_s)
        K = log_s - self.const
        act = self.active
        if not act:
            return 1.0 if K >= sum(float(h[0]) for h in self.h) - 1e-12 else 0.0
        base = sum(float(self.h[i][0]) for i in range(len(self.h)) if i not in act)
        K = K - base
        if len(act) == 1:
            return float(self._below(act[0], K))
        # integrate the other active coordinates over their quantiles
        u_edges = np.concatenate([np.geomspace(1e-16, 1.0, 65)])
        uq, wq = _rules.lin_panels(np.log(u_edges), 8)
        u, w = np.exp(uq), wq * np.exp(uq)
        grids = np.meshgrid(*([u] * (len(act) - 1)), indexing="ij")
        wts = np.meshgrid(*([w] * (len(act) - 1)), indexing="ij")
        rest = np.zeros(grids[0].size)
        weight = np.ones(grids[0].size)
        for i, g, wg in zip(act[1:], grids, wts):
            a = self.pot.factors[i].tail_inverse(g.ravel())
            rest += np.interp(np.log1p(a), np.log1p(_T_GRID), self.h[i])
            weight *= wg.ravel()
        return float(np.dot(weight, self._below(act[0], K - rest)))

    def _generic(self, log_s):
        from .quadrature import integrate_mu

        def ind(x):
            return (self.pot.log_density(x) - self.pot0.log_density(x) <= log_s).astype(float)
        return integrate_mu(self.pot, ind)

    def smallest_log_s(self, target, tol=1e-12):
        """``log inf{s : mu_V(D_s) >= target}`` by monotone bisection."""
        if not 0 < target <= 1:
            raise SpecificationError("target mass must lie in (0, 1]")
        lo, hi = -1.0, 1.0
        while self(lo) >= target:
            lo, hi = 2 * lo - 1, lo
        while self(hi) < target:
            lo, hi = hi, 2 * hi + 1
            if hi > 1e4:
                raise SpecificationError("mu_V(D_s) never reaches the target mass")
        while hi - lo > tol * max(1.0, abs(hi)):
            mid = 0.5 * (lo + hi)
            if self(mid) >= target:
                hi = mid
            else:
                lo = mid
        return hi


def weak_eta(pot, pot0, r, alpha, C=1.0, _mass=None):
    """``C inf{s : mu_V(D_s) >= 1/(1+r)}`` with ``D_s = {e^{V0 - V} <= s}``.

    ``pot0=None`` selects ``reference_potential(pot, alpha)``.
    """
    alpha = _check_alpha(alpha)
    if not r > 0:
        raise SpecificationError("r must be positive")
    mass = _mass or _checked_mass(pot, alpha, pot0)
    return C * math.exp(mass.smallest_log_s(1.0 / (1.0 + r)))


def _checked_mass(pot, alpha, pot0):
    pot0 = reference_potential(pot, alpha) if pot0 is None else pot0
    ver = poincare_verdict(pot0, alpha=alpha)
    if ver.verdict != HOLDS:
        raise HypothesisNotMet(f"reference measure has no Poincare inequality: {ver.reason}")
    mass = DsMass(pot, pot0)
    if not mass.check_bounded_ratio():
        raise HypothesisNotMet("sup e^{V - V0} is not finite for the reference measure")
    return mass


def weak_eta_rate(pot, alpha, pot0=None, C=1.0):
    mass = _checked_mass(pot, alpha, pot0)
    return RateFunction("WeakEta", {"C": C, "alpha": alpha},
                        lambda r: math.log(weak_eta(pot, None, r, alpha, C=C, _mass=mass)))


def weak_eta_closed_form(family, alpha, epsilons, r, c=1.0):
    """Closed-form ``eta(r)`` and the matching decay envelope.

    ``poly`` (``0 < eps_* < alpha``): ``c (1 + r^{-kappa})`` with
    ``kappa = sum (alpha - eps_i)^+ / eps_*``, decay ``t^{-1/kappa}``.
    ``log`` (``eps_* < 0``): ``c (1 + log^sigma(1 + 1/r))`` with
    ``sigma = -sum (eps_i ^ 0)``, decay ``exp(l1 - l2 t^{1/(1+sigma)})``.
    """
    alpha = _check_alpha(alpha)
    eps = np.atleast_1d(np.asarray(epsilons, dtype=float))
    e_star = float(eps.min())
    if not r > 0:
        raise SpecificationError("r must be positive")
    if family == "poly":
        if not 0 < e_star < alpha:
            raise SpecificationError("closed-form weak rate needs 0 < min eps < alpha")
        kappa = float(np.sum(np.clip(alpha - eps, 0, None))) / e_star
        eta = RateFunction("WeakEtaPoly", {"c": c, "exponent": kappa},
                           lambda x: math.log(c) + _log1p_pow(x, kappa))
        return eta(r), decay_envelope("power", exponent=1.0 / kappa)
    if family == "log":
        if not e_star < 0:
            raise SpecificationError("closed-form weak rate needs min eps < 0")
        sigma = -float(np.sum(np.minimum(eps, 0.0)))
        eta = RateFunction("WeakEtaLog", {"c": c, "log_power": sigma},
                           lambda x: math.log(c) + math.log1p(math.log1p(1.0 / x) ** sigma))
        return eta(r), decay_envelope("stretched", exponent=1.0 / (1.0 + sigma))
    raise SpecificationError(f"no closed-form weak rate for family {family!r}")


def fitted_slope(rate, lo, hi, n=9):
    """Log-log slope of a RateFunction on ``[lo, hi]``."""
    xs = np.geomspace(lo, hi, n)
    ys = np.array([rate.log_value(x) for x in xs])
    return loglog_slope(xs, np.exp(ys))[0]
