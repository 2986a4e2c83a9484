"""Reference measures ``mu_V(dx) = exp(-V(x)) dx`` and the geometric
quantities that drive the functional-inequality criteria.

All computations are carried out on the log scale.  A potential stores
``V`` up to an additive constant (the *unnormalised* potential ``V_u``);
the probability density is ``C * exp(-V_u)`` with ``C`` the normaliser.

Key objects:

* ``gamma_inf(pot, x)`` - infimum of the density over the "base pieces"
  obtained by moving one dominant coordinate of ``x`` into ``[-1, 1]``;
* ``gamma_sup(pot, x)`` - supremum of the density obtained by pushing one
  coordinate further out;
* ``lambda_fn(pot, x, alpha) = e^{V(x)} Gamma_inf(x) / (1+|x|)^{1+alpha}``;
* ``phi_table`` - the radial infimum ``Phi(r) = inf_{|x|>=r} Lambda`` with a
  monotone generalised inverse.
"""
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import interpolate, optimize

from . import _rules
from .coefficients import Coefficient

LOG_TINY = -745.0  # exp() underflows to zero below this


class SpecificationError(ValueError):
    """Invalid family parameters or an out-of-scope configuration."""


class NumericalError(RuntimeError):
    """A numerical routine could not reach its tolerance."""


class HypothesisNotMet(RuntimeError):
    """A theorem hypothesis failed its numerical check."""


def _as_points(x, d):
    x = np.asarray(x, dtype=float)
    single = x.ndim <= 1
    x = np.atleast_2d(x)
    if x.shape[-1] != d:
        if d == 1 and x.shape[0] == 1:
            x = x.reshape(-1, 1)
        else:
            raise SpecificationError(f"expected points of dimension {d}, got shape {x.shape}")
    return x, single


def _check_alpha(alpha):
    alpha = float(alpha)
    if not 0.0 < alpha < 2.0:
        raise SpecificationError(f"stability index must lie in (0, 2), got {alpha}")
    return alpha


def _check_dimension(d):
    if int(d) != d or not 1 <= d <= 3:
        raise SpecificationError(f"dimension must be 1, 2 or 3, got {d}")
    return int(d)


# ---------------------------------------------------------------------------
# one-dimensional factors of product densities
# ---------------------------------------------------------------------------

class AxisFactor:
    """Unnormalised 1-d weight ``t -> exp(g(|t|))`` of a product density."""

    critical = ()

    def g(self, t):
        raise NotImplementedError

    @property
    def mass(self):
        """Total mass ``int_R exp(g(|t|)) dt``."""
        raise NotImplementedError

    def log_tail(self, a):
        """``log P(|X| > a)`` for the normalised marginal."""
        raise NotImplementedError

    def tail_inverse(self, u):
        """Level ``a >= 0`` with ``P(|X| > a) = u``."""
        raise NotImplementedError

    def log_pdf(self, t):
        return self.g(np.abs(t)) - math.log(self.mass)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        half = 0.5 * np.exp(self.log_tail(np.abs(x)))
        return np.where(x >= 0, 1.0 - half, half)

    def sample(self, rng, size):
        u = rng.random(size)
        s = rng.random(size) < 0.5
        a = self.tail_inverse(np.maximum(u, 1e-300))
        return np.where(s, a, -a)

    def extrema(self, lo, hi):
        """Min and max of ``g`` on ``[lo, hi]`` (``hi`` may be +inf)."""
        lo = np.asarray(lo, dtype=float)
        hi = np.broadcast_to(np.asarray(hi, dtype=float), lo.shape)
        glo = self.g(lo)
        ghi = np.where(np.isfinite(hi), self.g(np.where(np.isfinite(hi), hi, 0.0)), -np.inf)
        gmin = np.minimum(glo, ghi)
        gmax = np.maximum(glo, ghi)
        for c in self.critical:
            inside = (lo < c) & (c < hi)
            gc = float(self.g(np.array(c)))
            gmin = np.where(inside, np.minimum(gmin, gc), gmin)
            gmax = np.where(inside, np.maximum(gmax, gc), gmax)
        return gmin, gmax

    @property
    def log_sup(self):
        _, gmax = self.extrema(np.array(0.0), np.array(np.inf))
        return float(gmax)

    @property
    def is_decreasing(self):
        return not self.critical


class PolyFactor(AxisFactor):
    """``(1 + |t|)^{-(1 + eps)}``."""

    def __init__(self, eps):
        self.eps = float(eps)

    def g(self, t):
        return -(1.0 + self.eps) * np.log1p(t)

    @property
    def mass(self):
        return 2.0 / self.eps

    def log_tail(self, a):
        return -self.eps * np.log1p(a)

    def tail_inverse(self, u):
        return np.expm1(-np.log(u) / self.eps)


class TabulatedFactor(AxisFactor):
    """Factor whose tail is integrated numerically and splined in ``log1p t``."""

    _s_max = 80.0
    _step = 0.01

    def _build(self):
        s = np.arange(0.0, self._s_max + self._step / 2, self._step)
        tq, wq = _rules.gauss_legendre(8)
        a = s[:-1, None]
        sq = a + self._step * tq
        vals = np.exp(self.g(np.expm1(sq)) + sq)
        pieces = (vals * wq).sum(axis=1) * self._step
        t_end = math.expm1(s[-1])
        rem = math.exp(float(self.g(np.array(t_end)))) * t_end / self.tail_decay
        tail = np.concatenate([np.cumsum(pieces[::-1])[::-1], [0.0]]) + rem
        self._mass = 2.0 * tail[0]
        logt = np.log(tail / tail[0])
        self._s = s
        self._logt = logt
        self._fwd = interpolate.CubicSpline(s, logt)
        self._inv = interpolate.CubicSpline(-logt, s)

    tail_decay = 1.0  # power of t in the far tail, used for the remainder

    @property
    def mass(self):
        if not hasattr(self, "_mass"):
            self._build()
        return self._mass

    def log_tail(self, a):
        if not hasattr(self, "_fwd"):
            self._build()
        s = np.log1p(np.asarray(a, dtype=float))
        inside = s <= self._s[-1]
        slope = (self._logt[-1] - self._logt[-2]) / self._step
        far = self._logt[-1] + slope * (s - self._s[-1])
        return np.where(inside, self._fwd(np.minimum(s, self._s[-1])), far)

    def tail_inverse(self, u):
        if not hasattr(self, "_inv"):
            self._build()
        lu = -np.log(np.asarray(u, dtype=float))
        top = -self._logt[-1]
        slope = (self._logt[-2] - self._logt[-1]) / self._step
        s = np.where(lu <= top, self._inv(np.minimum(lu, top)), self._s[-1] + (lu - top) / slope)
        return np.expm1(np.maximum(s, 0.0))


class LogFactor(TabulatedFactor):
    """``(1 + |t|)^{-(1 + alpha)} * log(e + |t|)^{-eps}``."""

    def __init__(self, eps, alpha):
        self.eps = float(eps)
        self.alpha = float(alpha)
        self.tail_decay = self.alpha
        self.critical = self._critical_points()

    def g(self, t):
        return -(1.0 + self.alpha) * np.log1p(t) - self.eps * np.log(np.log(np.e + t))

    def _critical_points(self):
        # g'(t) = 0  <=>  h(t) = (1+alpha)(e+t)log(e+t) - |eps|(1+t) = 0, eps < 0.
        if self.eps >= 0:
            return ()
        k = -self.eps
        a1 = 1.0 + self.alpha

        def h(t):
            return a1 * (np.e + t) * math.log(np.e + t) - k * (1.0 + t)

        t_min = math.exp(k / a1 - 1.0) - np.e
        roots = []
        if t_min <= 0:
            if h(0.0) < 0:
                roots.append(optimize.brentq(h, 0.0, self._bracket(h, 0.0)))
        elif h(t_min) < 0:
            if h(0.0) > 0:
                roots.append(optimize.brentq(h, 0.0, t_min))
            roots.append(optimize.brentq(h, t_min, self._bracket(h, t_min)))
        return tuple(r for r in roots if r > 0)

    @staticmethod
    def _bracket(h, start):
        b = max(1.0, 2 * start)
        while h(b) < 0:
            b *= 2
        return b


# ---------------------------------------------------------------------------
# potentials
# ---------------------------------------------------------------------------

class Potential:
    """Base class.  Subclasses implement ``_log_weight`` (= ``-V_u``)."""

    family = "custom"
    is_product = False

    def __init__(self, dimension, offset=0.0):
        self.dimension = _check_dimension(dimension)
        self.offset = float(offset)

    # evaluation ---------------------------------------------------------
    def _log_weight(self, x):
        raise NotImplementedError

    def log_weight(self, x):
        """``-V_u(x)`` for points of shape (..., d)."""
        x = np.asarray(x, dtype=float)
        return self._log_weight(x) - self.offset

    def V_unnormalized(self, x):
        return -self.log_weight(x)

    @cached_property
    def log_normalizer(self):
        """``log C`` with ``C = 1 / int exp(-V_u)``."""
        return -self._log_mass() + self.offset

    def _log_mass(self):
        raise NotImplementedError

    @property
    def normalizer(self):
        return math.exp(self.log_normalizer)

    def log_density(self, x):
        return self.log_weight(x) + self.log_normalizer

    def V(self, x):
        """Normalised potential: the density is ``exp(-V)``."""
        return -self.log_density(x)

    def along_axis(self, x, i, y):
        """Log density at ``x`` with coordinate ``i`` replaced by ``y``.

        ``x`` is (N, d) and ``y`` is (N, M); returns (N, M).
        """
        n, m = y.shape
        pts = np.repeat(x[:, None, :], m, axis=1)
        pts[..., i] = y
        return self.log_density(pts)

    def shifted(self, c):
        """Same measure with the unnormalised potential moved by ``c``."""
        raise NotImplementedError

    # structural information ---------------------------------------------
    @property
    def log_density_sup(self):
        """``log sup`` of the normalised density."""
        raise NotImplementedError

    def axis_extent(self, i, mass_tol):
        """Half-width outside which coordinate ``i`` carries < mass_tol."""
        raise NotImplementedError

    def axis_support(self, i):
        return -math.inf, math.inf

    def axis_kinks(self, i):
        """Coordinate values where the density is not smooth."""
        return (0.0,)

    def sample(self, rng, size):
        raise NotImplementedError(f"direct sampling not available for {self.family}")

    def describe(self):
        return {"family": self.family, "dimension": self.dimension}


class ProductPotential(Potential):
    """Densities ``C * prod_i exp(g_i(|x_i|))``."""

    is_product = True

    def __init__(self, factors, offset=0.0):
        super().__init__(len(factors), offset)
        self.factors = tuple(factors)

    def _log_weight(self, x):
        out = 0.0
        for i, f in enumerate(self.factors):
            out = out + f.g(np.abs(x[..., i]))
        return out

    def _log_mass(self):
        return sum(math.log(f.mass) for f in self.factors)

    def along_axis(self, x, i, y):
        rest = self.log_density(x) - self.factors[i].g(np.abs(x[:, i]))
        return rest[:, None] + self.factors[i].g(np.abs(y))

    @property
    def log_density_sup(self):
        return self.log_normalizer - self.offset + sum(f.log_sup for f in self.factors)

    def axis_extent(self, i, mass_tol):
        return float(self.factors[i].tail_inverse(np.array(mass_tol)))

    def sample(self, rng, size):
        return np.stack([f.sample(rng, size) for f in self.factors], axis=-1)

    def marginal_cdf(self, i, x):
        return self.factors[i].cdf(x)


class ProductPolynomial(ProductPotential):
    """``e^{-V} = C prod_i (1 + |x_i|)^{-(1 + eps_i)}``, ``eps_i > 0``."""

    family = "poly"

    def __init__(self, epsilons, offset=0.0):
        eps = tuple(float(e) for e in np.atleast_1d(epsilons))
        if not eps or any(not e > 0 or not math.isfinite(e) for e in eps):
            raise SpecificationError(f"polynomial exponents must be positive, got {eps}")
        self.epsilons = eps
        super().__init__([PolyFactor(e) for e in eps], offset)

    def _log_mass(self):
        return sum(math.log(2.0 / e) for e in self.epsilons)

    def shifted(self, c):
        return ProductPolynomial(self.epsilons, self.offset + c)

    def describe(self):
        return {"family": self.family, "dimension": self.dimension,
                "epsilons": list(self.epsilons)}


class ProductLogCorrected(ProductPotential):
    """``e^{-V} = C prod_i (1+|x_i|)^{-(1+alpha)} log(e+|x_i|)^{-eps_i}``."""

    family = "log"

    def __init__(self, epsilons, alpha, offset=0.0):
        eps = tuple(float(e) for e in np.atleast_1d(epsilons))
        if not eps or any(not math.isfinite(e) for e in eps):
            raise SpecificationError(f"log-correction exponents must be finite, got {eps}")
        self.epsilons = eps
        self.alpha = _check_alpha(alpha)
        super().__init__([LogFactor(e, self.alpha) for e in eps], offset)

    def shifted(self, c):
        return ProductLogCorrected(self.epsilons, self.alpha, self.offset + c)

    def describe(self):
        return {"family": self.family, "dimension": self.dimension,
                "epsilons": list(self.epsilons), "alpha": self.alpha}


class _GridNormalized(Potential):
    """Non-product potentials normalised by a tensor quadrature."""

    def _axis_rule(self, i, mass_tol=1e-9):
        lo, hi = self.axis_support(i)
        ext = self.axis_extent(i, mass_tol)
        lo = max(lo, -ext)
        hi = min(hi, ext)
        q = 8 if self.dimension < 3 else 4
        ratio = 2.0 if self.dimension < 3 else 4.0
        edges = [lo, hi]
        for k in self.axis_kinks(i):
            if lo < k < hi:
                edges.append(k)
        step = 0.25
        while step < max(abs(lo), abs(hi)):
            for e in (-step, step):
                if lo < e < hi:
                    edges.append(e)
            step *= ratio if step >= 1 else 2.0
        edges = np.unique(np.array(edges))
        return _rules.lin_panels(edges, q)

    def _log_mass(self):
        rules = [self._axis_rule(i) for i in range(self.dimension)]
        grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
        wgrid = np.ones_like(grids[0])
        for g, r in zip(np.meshgrid(*[r[1] for r in rules], indexing="ij"), rules):
            wgrid = wgrid * g
        pts = np.stack([g.ravel() for g in grids], axis=-1)
        lw = self._log_weight(pts)
        top = lw.max()
        total = float(np.sum(wgrid.ravel() * np.exp(lw - top)))
        return top + math.log(total)


class VariableOrder(_GridNormalized):
    """``e^{-V} = C prod_i (1 + |x_i|)^{-(1 + a_i(x))}``."""

    family = "variable"

    def __init__(self, coefficients, offset=0.0):
        coeffs = list(coefficients)
        d = len(coeffs)
        super().__init__(d, offset)
        self.coefficients = tuple(c if isinstance(c, Coefficient) else Coefficient(c, d)
                                  for c in coeffs)
        for c in self.coefficients:
            if not c.lower > 0:
                raise SpecificationError(
                    f"variable exponent {c.text!r} must be bounded below by a positive number")

    def _log_weight(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, self.dimension)
        out = 0.0
        for i, c in enumerate(self.coefficients):
            out = out - (1.0 + c(flat)) * np.log1p(np.abs(flat[:, i]))
        return np.asarray(out).reshape(x.shape[:-1])

    @property
    def log_density_sup(self):
        # every factor is <= 1 and equals 1 at the origin
        return self.log_normalizer - self.offset

    def axis_kinks(self, i):
        radii = set()
        for c in self.coefficients:
            radii.update(c.radii)
        return tuple(sorted({0.0} | {r for r in radii} | {-r for r in radii}))

    def axis_extent(self, i, mass_tol):
        a = self.coefficients[i].lower
        return float(np.expm1(-math.log(mass_tol) / a))

    def shifted(self, c):
        return VariableOrder(self.coefficients, self.offset + c)

    def describe(self):
        return {"family": self.family, "dimension": self.dimension,
                "coefficients": [c.text for c in self.coefficients]}


class Custom(_GridNormalized):
    """User potential ``V_u`` given as a vectorised callable on (..., d) arrays.

    ``density_bound`` is ``sup exp(-V_u)`` (required); ``support`` an optional
    box ``[(lo, hi), ...]``; ``tail_exponents`` the decay ``eps_i`` of each
    marginal tail, used only to size the integration domain.
    """

    family = "custom"

    def __init__(self, V, dimension, density_bound, support=None, tail_exponents=None,
                 kinks=None, offset=0.0):
        super().__init__(dimension, offset)
        if not density_bound or not density_bound > 0:
            raise SpecificationError("a custom potential needs a positive density bound")
        self.func = V
        self.density_bound = float(density_bound)
        self.support = None if support is None else [tuple(map(float, b)) for b in support]
        if tail_exponents is None:
            tail_exponents = [1.0] * self.dimension
        self.tail_exponents = tuple(float(e) for e in np.broadcast_to(tail_exponents, (self.dimension,)))
        self.kinks = kinks

    def _log_weight(self, x):
        x = np.asarray(x, dtype=float)
        v = -np.asarray(self.func(x), dtype=float)
        if self.support is not None:
            inside = np.ones(x.shape[:-1], dtype=bool)
            for i, (lo, hi) in enumerate(self.support):
                inside &= (x[..., i] >= lo) & (x[..., i] <= hi)
            v = np.where(inside, v, -np.inf)
        return v

    @property
    def log_density_sup(self):
        return self.log_normalizer - self.offset + math.log(self.density_bound)

    def axis_support(self, i):
        if self.support is None:
            return -math.inf, math.inf
        return self.support[i]

    def axis_kinks(self, i):
        return (0.0,) if self.kinks is None else tuple(self.kinks[i])

    def axis_extent(self, i, mass_tol):
        lo, hi = self.axis_support(i)
        if math.isfinite(lo) and math.isfinite(hi):
            return max(abs(lo), abs(hi))
        return float(np.expm1(-math.log(mass_tol) / self.tail_exponents[i]))

    def shifted(self, c):
        return Custom(self.func, self.dimension, self.density_bound, self.support,
                      self.tail_exponents, self.kinks, self.offset + c)


def make_potential(family, dimension=None, epsilons=None, alpha=None, coefficients=None, **kw):
    """Build a potential from plain parameters (as read from a config file)."""
    if family == "poly":
        pot = ProductPolynomial(epsilons)
    elif family == "log":
        if alpha is None:
            raise SpecificationError("the log-corrected family needs the stability index")
        pot = ProductLogCorrected(epsilons, alpha)
    elif family == "variable":
        pot = VariableOrder(coefficients)
    elif family == "custom":
        pot = Custom(dimension=dimension, **kw)
    else:
        raise SpecificationError(f"unknown family {family!r}")
    if dimension is not None and pot.dimension != int(dimension):
        raise SpecificationError(
            f"dimension {dimension} does not match {pot.dimension} parameters")
    return pot


# ---------------------------------------------------------------------------
# point evaluations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DensityValue:
    V: np.ndarray          # unnormalised potential V_u
    density: np.ndarray    # exp(-V_u)
    saturated: np.ndarray  # True where exp(-V_u) underflows


def eval_density(pot, x):
    """Unnormalised potential and density at ``x`` with an underflow flag."""
    pts, single = _as_points(x, pot.dimension)
    lw = pot.log_weight(pts)
    sat = lw < LOG_TINY
    dens = np.where(sat, 0.0, np.exp(np.maximum(lw, LOG_TINY)))
    if single:
        return DensityValue(float(-lw[0]), float(dens[0]), bool(sat[0]))
    return DensityValue(-lw, dens, sat)


def normalize(pot):
    """Normalising constant ``C`` with ``int C exp(-V_u) = 1``."""
    return pot.normalizer


_U_GRID = np.linspace(-1.0, 1.0, 257)


def log_gamma_inf(pot, x):
    """``log Gamma_inf`` at points (N, d) (normalised density)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n, d = x.shape
    r = np.sqrt(np.sum(x * x, axis=1))
    admissible = np.abs(x) >= r[:, None] / math.sqrt(d) * (1 - 1e-12)
    out = np.full(n, np.inf)
    if pot.is_product:
        logc = pot.log_normalizer - pot.offset
        G = np.stack([f.g(np.abs(x[:, i])) for i, f in enumerate(pot.factors)], axis=1)
        total = G.sum(axis=1)
        for i, f in enumerate(pot.factors):
            gmin, _ = f.extrema(np.array(0.0), np.array(1.0))
            val = logc + total - G[:, i] + float(gmin)
            out = np.where(admissible[:, i], np.minimum(out, val), out)
        return out
    for i in range(d):
        y = np.broadcast_to(_U_GRID, (n, _U_GRID.size))
        vals = pot.along_axis(x, i, y).min(axis=1)
        out = np.where(admissible[:, i], np.minimum(out, vals), out)
    return out


def log_gamma_sup(pot, x):
    """``log Gamma_sup`` at points (N, d) (normalised density)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n, d = x.shape
    out = np.full(n, -np.inf)
    if pot.is_product:
        logc = pot.log_normalizer - pot.offset
        G = np.stack([f.g(np.abs(x[:, i])) for i, f in enumerate(pot.factors)], axis=1)
        total = G.sum(axis=1)
        for i, f in enumerate(pot.factors):
            _, gmax = f.extrema(np.abs(x[:, i]), np.inf)
            out = np.maximum(out, logc + total - G[:, i] + gmax)
        return out
    steps = np.concatenate([[0.0], np.geomspace(1e-3, 1e6, 120)])
    for i in range(d):
        a = np.abs(x[:, i])[:, None]
        mags = a + steps * (1.0 + a)
        y = np.concatenate([mags, -mags], axis=1)
        out = np.maximum(out, pot.along_axis(x, i, y).max(axis=1))
    return out


def gamma_inf(pot, x):
    pts, single = _as_points(x, pot.dimension)
    v = np.exp(log_gamma_inf(pot, pts))
    return float(v[0]) if single else v


def gamma_sup(pot, x):
    pts, single = _as_points(x, pot.dimension)
    v = np.exp(log_gamma_sup(pot, pts))
    return float(v[0]) if single else v


def log_lambda(pot, x, alpha):
    """``log Lambda(x)``; the normaliser cancels."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    r = np.sqrt(np.sum(x * x, axis=1))
    return log_gamma_inf(pot, x) - pot.log_density(x) - (1.0 + alpha) * np.log1p(r)


def lambda_fn(pot, x, alpha):
    alpha = _check_alpha(alpha)
    pts, single = _as_points(x, pot.dimension)
    v = np.exp(log_lambda(pot, pts, alpha))
    return float(v[0]) if single else v


# ---------------------------------------------------------------------------
# radial infimum Phi and its inverse
# ---------------------------------------------------------------------------

def direction_grid(d, n=None):
    """Unit directions: +-1 in 1-d, equiangular in 2-d, Fibonacci sphere in 3-d."""
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        n = n or 64
        th = 2 * np.pi * np.arange(n) / n
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    n = n or 256
    k = np.arange(n) + 0.5
    z = 1 - 2 * k / n
    th = np.pi * (1 + 5 ** 0.5) * k
    rho = np.sqrt(1 - z * z)
    pts = np.stack([rho * np.cos(th), rho * np.sin(th), z], axis=1)
    axes = np.concatenate([np.eye(3), -np.eye(3)])
    return np.concatenate([pts, axes])


@dataclass
class PhiTable:
    """Tabulated ``Phi(r) = inf_{|x| >= r} Lambda(x)`` (non-decreasing)."""

    radii: np.ndarray
    log_values: np.ndarray
    alpha: float
    argmin: np.ndarray = field(default=None, repr=False)

    @property
    def values(self):
        return np.exp(self.log_values)

    def __call__(self, r):
        """Phi at ``r`` from the table (step-down to the nearest tabulated radius)."""
        r = np.asarray(r, dtype=float)
        k = np.searchsorted(self.radii, r, side="right") - 1
        k = np.clip(k, 0, len(self.radii) - 1)
        return np.exp(self.log_values[k])

    def limit(self):
        return float(np.exp(self.log_values[-1]))

    def inverse(self, y):
        """``Phi^{-1}(y) = inf{s >= 0 : Phi(s) >= y}``; +inf when never reached.

        Between table radii Phi is interpolated linearly in log-log and the
        crossing found by bisection; ties resolve to the smaller radius.
        """
        y = float(y)
        lv = self.log_values
        if y <= 0 or lv[0] >= math.log(y):
            return 0.0
        ly = math.log(y)
        hit = np.nonzero(lv >= ly)[0]
        if hit.size == 0:
            return math.inf
        k = int(hit[0])
        r0, r1 = self.radii[k - 1], self.radii[k]
        v0, v1 = lv[k - 1], lv[k]
        if r0 <= 0 or v1 == v0:
            return float(r1) if v1 > v0 or r0 <= 0 else float(r0)
        a, b = math.log(r0), math.log(r1)
        lo, hi = a, b
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            val = v0 + (v1 - v0) * (mid - a) / (b - a)
            if val >= ly:
                hi = mid
            else:
                lo = mid
        return math.exp(hi)


def _phi_from_samples(pot, alpha, radii, ladder, dirs):
    pts = (ladder[:, None, None] * dirs[None, :, :]).reshape(-1, pot.dimension)
    ll = log_lambda(pot, pts, alpha).reshape(ladder.size, dirs.shape[0])
    best_dir = ll.argmin(axis=1)
    best = ll[np.arange(ladder.size), best_dir]
    # suffix minimum over the ladder
    suffix = np.minimum.accumulate(best[::-1])[::-1]
    suffix_arg = np.empty(ladder.size, dtype=int)
    cur = ladder.size - 1
    for j in range(ladder.size - 1, -1, -1):
        if best[j] <= best[cur]:
            cur = j
        suffix_arg[j] = cur
    k = np.searchsorted(ladder, radii, side="left")
    k = np.clip(k, 0, ladder.size - 1)
    vals = suffix[k]
    arg = [(ladder[suffix_arg[j]], dirs[best_dir[suffix_arg[j]]]) for j in k]
    return vals, arg


def _local_refine(pot, alpha, r, start_radius, start_dir):
    d = pot.dimension
    lo = math.log(max(r, 1e-12))

    if d == 1:
        def f1(s):
            return float(log_lambda(pot, np.array([[math.exp(max(s, lo)) * start_dir[0]]]), alpha)[0])
        a = max(lo, math.log(start_radius) - 1.0)
        b = math.log(start_radius) + 1.0
        if b <= a:
            return f1(a)
        res = optimize.minimize_scalar(f1, bounds=(a, b), method="bounded",
                                       options={"xatol": 1e-6})
        return min(res.fun, f1(math.log(start_radius)))

    def angles_to_dir(th):
        if d == 2:
            return np.array([math.cos(th[0]), math.sin(th[0])])
        return np.array([math.sin(th[0]) * math.cos(th[1]),
                         math.sin(th[0]) * math.sin(th[1]), math.cos(th[0])])

    if d == 2:
        th0 = [math.atan2(start_dir[1], start_dir[0])]
    else:
        th0 = [math.acos(np.clip(start_dir[2], -1, 1)), math.atan2(start_dir[1], start_dir[0])]

    def f(p):
        s = min(max(p[0], lo), 300.0)  # keep |x|^2 finite
        x = math.exp(s) * angles_to_dir(p[1:])
        return float(log_lambda(pot, x[None, :], alpha)[0])

    p0 = np.array([max(math.log(start_radius), lo)] + th0)
    res = optimize.minimize(f, p0, method="Nelder-Mead",
                            options={"xatol": 1e-7, "fatol": 1e-10, "maxiter": 400,
                                     "initial_simplex": None})
    return min(float(res.fun), f(p0))


def phi_table(pot, alpha, radii=None, r_max=None, tol=1e-3, refine=True, max_rounds=4):
    """Build a ``PhiTable`` on ``radii`` (geometric default, radius 0 included).

    Direction grid and radial ladder are doubled until successive tables
    agree to ``tol`` (relative); each entry is then polished by a local
    search started at its minimiser.
    """
    alpha = _check_alpha(alpha)
    if radii is None:
        top = r_max or 1e8
        radii = np.concatenate([[0.0], np.geomspace(1e-2, top, 8 * int(math.log10(top / 1e-2)) + 1)])
    radii = np.unique(np.asarray(radii, dtype=float))
    if radii[0] < 0:
        raise SpecificationError("radii must be non-negative")
    pos = radii[radii > 0]
    r_lo = pos.min() if pos.size else 1.0
    r_hi = (pos.max() if pos.size else 1.0) * 2.0 ** 20
    d = pot.dimension
    n_dirs = {1: 2, 2: 64, 3: 256}[d]
    per_step = 0.5
    prev = None
    for _ in range(max_rounds):
        steps = int(math.ceil(math.log2(r_hi / r_lo) / per_step))
        ladder = np.unique(np.concatenate([[0.0], r_lo * 2.0 ** (per_step * np.arange(steps + 1)), pos]))
        dirs = direction_grid(d, n_dirs)
        vals, arg = _phi_from_samples(pot, alpha, radii, ladder, dirs)
        if prev is not None:
            fin = np.isfinite(vals) & np.isfinite(prev)
            if np.all(np.abs(np.expm1(vals[fin] - prev[fin])) <= tol):
                break
        prev = vals
        per_step /= 2
        if d > 1:
            n_dirs *= 2
    vals = vals.copy()
    if refine:
        cache = {}
        for j, r in enumerate(radii):
            rad, dr = arg[j]
            if rad <= 0:
                continue
            key = (float(r), float(rad), tuple(np.round(dr, 12)))
            if key not in cache:
                cache[key] = _local_refine(pot, alpha, float(r), float(rad), dr)
            vals[j] = min(vals[j], cache[key])
    # enforce monotonicity: Phi(r) <= Phi(r') for r <= r'
    vals = np.minimum.accumulate(vals[::-1])[::-1]
    return PhiTable(radii=radii, log_values=vals, alpha=alpha,
                    argmin=np.array([a[0] for a in arg]))


def phi_capital(pot, r, alpha, table=None):
    """``Phi(r)`` from a table (built on demand)."""
    if table is None:
        table = phi_table(pot, alpha, radii=np.array([0.0, float(r)]), refine=True)
    return float(table(float(r)))


def phi_inverse(phi, r):
    """Generalised inverse of a tabulated Phi."""
    return phi.inverse(r)


# ---------------------------------------------------------------------------
# hypothesis diagnostics
# ---------------------------------------------------------------------------

@dataclass
class TailDiagnostic:
    """Tabulated ratio along a radial ladder and a PASS/FAIL verdict."""

    name: str
    radii: np.ndarray
    values: np.ndarray
    verdict: str
    slope: float

    @property
    def passed(self):
        return self.verdict == "PASS"

    def rows(self):
        return [(float(r), float(v)) for r, v in zip(self.radii, self.values)]


def _top_decade_slope(radii, logv):
    top = radii >= radii[-1] / 10
    x = np.log(radii[top])
    y = logv[top]
    if not np.all(np.isfinite(y)):
        return math.nan, top
    return float(np.polyfit(x, y, 1)[0]), top


def limsup_condition_report(pot, gamma, alpha, r_max=1e6, n=61, n_dirs=None):
    """Tabulate ``max_dir |x|^{1+alpha-gamma} Gamma_sup / Gamma_inf``.

    PASS when the table decreases over its top decade with negative
    log-log slope, i.e. it is heading to zero.
    """
    alpha = _check_alpha(alpha)
    if not 0 < gamma < min(alpha, 1.0):
        raise SpecificationError(f"gamma must lie in (0, min(alpha, 1)), got {gamma}")
    radii = np.geomspace(1.0, r_max, n)
    dirs = direction_grid(pot.dimension, n_dirs)
    pts = (radii[:, None, None] * dirs[None]).reshape(-1, pot.dimension)
    lr = (log_gamma_sup(pot, pts) - log_gamma_inf(pot, pts)).reshape(n, -1).max(axis=1)
    logv = (1 + alpha - gamma) * np.log(radii) + lr
    slope, top = _top_decade_slope(radii, logv)
    seg = logv[top]
    ok = math.isfinite(slope) and slope < 0 and np.all(np.diff(seg) <= 1e-12)
    return TailDiagnostic("limsup", radii, np.exp(logv), "PASS" if ok else "FAIL", slope)


def liminf_condition_report(pot, alpha, r_max=1e6, n=61, n_dirs=None, slope_tol=0.02):
    """Tabulate ``min_dir e^V Gamma_inf / |x|^{1+alpha}`` (drift hypothesis).

    PASS when the top-decade log-log slope is >= -slope_tol (bounded away
    from zero) and all values are positive.
    """
    alpha = _check_alpha(alpha)
    radii = np.geomspace(1.0, r_max, n)
    dirs = direction_grid(pot.dimension, n_dirs)
    pts = (radii[:, None, None] * dirs[None]).reshape(-1, pot.dimension)
    lv = (log_gamma_inf(pot, pts) - pot.log_density(pts)).reshape(n, -1).min(axis=1)
    logv = lv - (1 + alpha) * np.log(radii)
    slope, _ = _top_decade_slope(radii, logv)
    ok = math.isfinite(slope) and slope >= -slope_tol
    return TailDiagnostic("liminf", radii, np.exp(logv), "PASS" if ok else "FAIL", slope)


def phi_growth_report(pot, alpha, r_max=1e6, n=61, n_dirs=None, slope_tol=0.02):
    """Trend of ``min_dir Lambda`` along a radial ladder.

    Verdict ``INFINITE`` (top-decade log-log slope above ``slope_tol``, so
    Phi grows without bound), ``POSITIVE`` (slope within the band: Phi has
    a positive limit) or ``ZERO`` (Lambda decays along some direction).
    """
    alpha = _check_alpha(alpha)
    radii = np.geomspace(1.0, r_max, n)
    dirs = direction_grid(pot.dimension, n_dirs)
    pts = (radii[:, None, None] * dirs[None]).reshape(-1, pot.dimension)
    logv = log_lambda(pot, pts, alpha).reshape(n, -1).min(axis=1)
    slope, _ = _top_decade_slope(radii, logv)
    if not math.isfinite(slope) or slope < -slope_tol:
        verdict = "ZERO"
    elif slope > slope_tol:
        verdict = "INFINITE"
    else:
        verdict = "POSITIVE"
    return TailDiagnostic("phi_growth", radii, np.exp(logv), verdict, slope)


@dataclass
class CriteriaProfile:
    """Everything the Poincare-type criteria read off the potential."""

    alpha: float
    gamma: float
    phi: PhiTable
    limsup: TailDiagnostic
    liminf: TailDiagnostic
    growth: TailDiagnostic

    @property
    def lambda_table(self):
        return dict(zip(self.phi.radii.tolist(), self.phi.values.tolist()))

    def summary(self):
        return {"alpha": self.alpha, "gamma": self.gamma,
                "limsup_verdict": self.limsup.verdict, "limsup_slope": self.limsup.slope,
                "liminf_verdict": self.liminf.verdict, "liminf_slope": self.liminf.slope,
                "phi_growth": self.growth.verdict, "phi_growth_slope": self.growth.slope,
                "phi_at_top": self.phi.limit()}


def criteria_profile(pot, alpha, gamma=None, r_max=1e12, tol=1e-3):
    """Phi table plus the three tail diagnostics.

    ``gamma`` defaults to ``min(alpha, 1) / 2``.
    """
    alpha = _check_alpha(alpha)
    if gamma is None:
        gamma = min(alpha, 1.0) / 2
    table = phi_table(pot, alpha, r_max=r_max, tol=tol)
    return CriteriaProfile(alpha, float(gamma), table,
                           limsup_condition_report(pot, gamma, alpha),
                           liminf_condition_report(pot, alpha),
                           phi_growth_report(pot, alpha))


# ---------------------------------------------------------------------------
# extrema of V over balls
# ---------------------------------------------------------------------------

def ball_extrema(pot, rho, n_dirs=None):
    """``(min V, max V)`` of the normalised potential over ``|x| <= rho``."""
    rho = float(rho)
    d = pot.dimension
    if rho <= 0:
        v = float(pot.V(np.zeros((1, d)))[0])
        return v, v
    if d == 1 and pot.is_product:
        f = pot.factors[0]
        gmin, gmax = f.extrema(np.array(0.0), np.array(rho))
        c = pot.log_normalizer - pot.offset
        return -(c + float(gmax)), -(c + float(gmin))
    monotone = pot.is_product and all(f.is_decreasing for f in pot.factors)
    if monotone:
        shells = np.array([0.0, rho])
    else:
        shells = np.concatenate([[0.0], rho * np.geomspace(1e-4, 1.0, 60)])
    dirs = direction_grid(d, n_dirs or {1: 2, 2: 1024, 3: 4096}[d])
    pts = (shells[:, None, None] * dirs[None]).reshape(-1, d)
    V = pot.V(pts)
    vmin, vmax = float(V.min()), float(V.max())
    # polish the maximiser on the sphere / ball
    j = int(np.argmax(V))
    x0 = pts[j]
    if np.linalg.norm(x0) > 0:
        def neg(p):
            x = p if np.linalg.norm(p) <= rho else p * rho / np.linalg.norm(p)
            return -float(pot.V(x[None, :])[0])
        res = optimize.minimize(neg, x0, method="Nelder-Mead",
                                options={"xatol": 1e-9 * rho, "fatol": 1e-12, "maxiter": 600})
        vmax = max(vmax, -float(res.fun))
    return vmin, vmax


def tail_mass(pot, i, a):
    """``P(|X_i| > a)`` for a product potential."""
    if not pot.is_product:
        raise SpecificationError("marginal tails are only available for product families")
    return np.exp(pot.factors[i].log_tail(np.asarray(a, dtype=float)))


def sample_stationary(pot, rng, size):
    """Exact draws from ``mu_V`` (product families, by inverse CDF)."""
    return pot.sample(rng, size)


__all__ = [
    "Potential", "ProductPolynomial", "ProductLogCorrected", "VariableOrder", "Custom",
    "make_potential", "eval_density", "normalize", "gamma_inf", "gamma_sup", "lambda_fn",
    "log_gamma_inf", "log_gamma_sup", "log_lambda", "PhiTable", "phi_table", "phi_capital",
    "phi_inverse", "limsup_condition_report", "liminf_condition_report", "ball_extrema",
    "SpecificationError", "NumericalError", "HypothesisNotMet", "tail_mass",
    "sample_stationary", "direction_grid", "phi_growth_report", "CriteriaProfile",
    "criteria_profile",
]
