"""Nested quadrature for the singular jump forms.

Outer integral: tensor product of per-axis composite Gauss-Legendre rules on
panels that are refined geometrically around the breakpoints of the
integrands and stretched geometrically in the tails, truncated where the
marginal mass drops below ``mass_tol``.

Inner integrals along ``x + z e_i``: a Gauss-Jacobi piece absorbing the
``|z|^{1-alpha}`` behaviour at the origin, log-spaced panels graded toward
breakpoints, and either a closed-form tail (when the integrand is constant
far out) or a ``t = 1/z`` rule graded toward infinity.

Every public integral is computed at two resolution levels; the finer value
is returned with ``|fine - coarse|`` as its error estimate.
"""
import math
from dataclasses import dataclass, replace

import numpy as np

from . import _rules
from .measure import NumericalError


@dataclass(frozen=True)
class QuadratureSpec:
    delta_in: float = 1e-3         # size of the singular Gauss-Jacobi piece
    panels_per_decade: int = 4     # inner log-panels
    inner_order: int = 10          # Gauss points per inner panel
    grading: int = 12              # geometric refinement steps at breakpoints
    tail_levels: int = 40          # halvings of the 1/z tail rule
    outer_order: int = 6           # Gauss points per outer panel
    outer_ratio: float = 4.0       # geometric panel ratio far from the origin
    mass_tol: float = 1e-11        # truncation of the outer domain
    chunk: int = 2_000_000         # max inner evaluations per batch

    def coarser(self):
        return replace(self, outer_order=4, outer_ratio=8.0)


DEFAULT = QuadratureSpec()


@dataclass(frozen=True)
class Estimate:
    """A quadrature value with its two-level error estimate."""

    value: float
    error: float
    coarse: float = math.nan

    def __float__(self):
        return float(self.value)

    def __repr__(self):
        return f"Estimate({self.value:.12g} +- {self.error:.3g})"


class QuadratureError(NumericalError):
    def __init__(self, message, coarse, fine):
        super().__init__(f"{message}: coarse={coarse!r} fine={fine!r}")
        self.coarse = coarse
        self.fine = fine


def two_level(fn, tol=None, what="quadrature"):
    """Run ``fn(level)`` at levels 0 and 1 and package the result."""
    c = fn(0)
    f = fn(1)
    err = abs(f - c)
    if tol is not None and err > tol:
        raise QuadratureError(f"{what} did not reach tolerance {tol:g}", c, f)
    return Estimate(float(f), float(err), float(c))


# ---------------------------------------------------------------------------
# outer rule
# ---------------------------------------------------------------------------

def _axis_bounds(pot, i, spec):
    """Outer integration interval on axis i and whether each end is a
    mass truncation (rather than the edge of the support)."""
    ext = pot.axis_extent(i, spec.mass_tol)
    s_lo, s_hi = pot.axis_support(i)
    return max(-ext, s_lo), min(ext, s_hi), -ext > s_lo, ext < s_hi


def _axis_rule(pot, funcs, i, spec, level, extra_edges=()):
    lo, hi, _, _ = _axis_bounds(pot, i, spec)
    edges = [lo, hi, 0.0, *extra_edges]
    for f in funcs:
        edges.extend(f.outer_edges(i))
    edges.extend(pot.axis_kinks(i))
    step = 0.25
    while step < max(abs(lo), abs(hi)):
        edges += [step, -step]
        step *= 2.0 if step < 8 else spec.outer_ratio
    e = np.array([v for v in edges if lo <= v <= hi])
    e = np.unique(e)
    keep = np.concatenate([[True], np.diff(e) > 1e-12 * (1 + np.abs(e[1:]))])
    e = e[keep]
    if level:
        m = 2 ** level
        u = np.arange(m) / m
        e = np.concatenate([(e[:-1, None] + np.diff(e)[:, None] * u).ravel(), e[-1:]])
    return _outer_panels(e, spec.outer_order)


def _outer_panels(e, q):
    # panels away from the origin are mapped through log|x| so that the
    # power-law tails of the densities are integrated to full accuracy
    t, w = _rules.gauss_legendre(q)
    a, b = e[:-1], e[1:]
    logmap = (a * b > 0) & (np.minimum(np.abs(a), np.abs(b)) >= 1.0)
    xs = a[:, None] + (b - a)[:, None] * t
    ws = (b - a)[:, None] * w
    if logmap.any():
        sg = np.sign(a[logmap])[:, None]
        la, lb = np.log(np.abs(a[logmap])), np.log(np.abs(b[logmap]))
        u = la[:, None] + (lb - la)[:, None] * t
        xs[logmap] = sg * np.exp(u)
        ws[logmap] = np.abs(lb - la)[:, None] * w * np.exp(u)
    return xs.ravel(), ws.ravel()


def outer_rule(pot, funcs, spec=DEFAULT, level=0, extra_edges=()):
    """Nodes (N, d) and probability weights (N,) for ``int . dmu_V``.

    ``extra_edges`` are added as panel edges on every axis.
    """
    d = pot.dimension
    if d == 3:
        spec = spec.coarser()
    rules = [_axis_rule(pot, funcs, i, spec, level, extra_edges) for i in range(d)]
    grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    x = np.stack([g.ravel() for g in grids], axis=-1)
    if pot.is_product:
        per_axis = [wts * np.exp(pot.factors[i].log_pdf(nodes))
                    for i, (nodes, wts) in enumerate(rules)]
    else:
        per_axis = [wts for _, wts in rules]
    w = np.ones(x.shape[0])
    for g in np.meshgrid(*per_axis, indexing="ij"):
        w = w * g.ravel()
    if not pot.is_product:
        w = w * np.exp(pot.log_density(x))
    keep = w > 0
    return x[keep], w[keep]


def integrate_mu(pot, h, funcs=(), spec=DEFAULT, level=0):
    """``int h dmu_V`` for a vectorised ``h`` on (N, d)."""
    x, w = outer_rule(pot, funcs, spec, level)
    return float(np.dot(w, h(x)))


# ---------------------------------------------------------------------------
# inner integrals
# ---------------------------------------------------------------------------

def _chunks(n, per_row, spec):
    size = max(1, spec.chunk // max(per_row, 1))
    for s in range(0, n, size):
        yield slice(s, min(n, s + size))


def _relative_breaks(funcs, i, xi, side, kind="breakpoints"):
    pts = sorted({b for f in funcs for b in getattr(f, kind)(i)})
    if not pts:
        return np.zeros((xi.size, 0))
    b = np.asarray(pts)[None, :]
    dist = side * (b - xi[:, None])
    return np.where(dist > 0, dist, np.nan)


def _fill(br, lo):
    # clip invalid breaks to the lower end (a zero-width panel)
    return np.where(np.isnan(br), lo, br)


def form_line(f, g, x, i, alpha, spec, level, lower=0.0):
    """``int_{|z|>lower} (f(x+ze_i)-f(x))(g(x+ze_i)-g(x)) |z|^{-1-alpha} dz``.

    Both functions must become constant outside a bounded interval along
    axis i (``nonflat``); beyond it the integral is done in closed form.
    """
    n = x.shape[0]
    out = np.zeros(n)
    funcs = (f,) if g is f else (f, g)
    nf = [h.nonflat(i) for h in funcs]
    nf = [v for v in nf if v is not None]
    if not nf:
        return out
    a = min(v[0] for v in nf)
    b = max(v[1] for v in nf)
    xi = x[:, i]
    fx = f(x)
    gx = fx if g is f else g(x)
    lowf = lower if lower > 0 else 0.0
    for side in (1.0, -1.0):
        edge = b if side > 0 else a
        zc = side * (edge - xi)
        zc = np.maximum(zc, lowf)
        fill = max(lowf, 1e-300)
        br = _fill(_relative_breaks(funcs, i, xi, side), fill)
        kk = _fill(_relative_breaks(funcs, i, xi, side, "kinks"), fill)
        zq, wq = _rules.half_line_rule(lower, br, zc, alpha, spec, level, kinks=kk)
        fy = f.along_axis(x, i, xi[:, None] + side * zq)
        gy = fy if g is f else g.along_axis(x, i, xi[:, None] + side * zq)
        val = (fy - fx[:, None]) * (gy - gx[:, None]) * zq ** (-1.0 - alpha)
        out += np.sum(wq * val, axis=1)
        far = xi[:, None] + side * (np.abs(edge - xi) + abs(b - a) + 1.0)[:, None]
        ff = f.along_axis(x, i, far)[:, 0]
        gf = ff if g is f else g.along_axis(x, i, far)[:, 0]
        start = np.maximum(zc, lowf) if lowf > 0 else zc
        with np.errstate(divide="ignore", invalid="ignore"):
            tail = np.where(start > 0, (ff - fx) * (gf - gx) * start ** (-alpha) / alpha, 0.0)
        out += tail
    return out


def generator_line(pot, g, x, i, alpha, spec, level, p_tail):
    """``1/2 int_{|z|>1} (g(x+ze_i)-g(x)) (e^{V(x)-V(x+ze_i)} + 1) |z|^{-1-alpha} dz``.

    ``p_tail`` is the exponent with ``F(1/t)/t^2 ~ t^p_tail`` as t -> 0.
    """
    n = x.shape[0]
    xi = x[:, i]
    gx = g(x)
    lp = pot.log_density(x)
    out = np.zeros(n)
    nf = g.nonflat(i)
    # far from the bulk every feature sits at a large distance and needs
    # grading, so breakpoints are graded here as well
    brs = np.zeros(0)
    kinks = np.array(sorted(set(g.breakpoints(i)) | set(g.kinks(i)) | set(pot.axis_kinks(i))))
    for side in (1.0, -1.0):
        zc = 2.0 * np.abs(xi) + 2.0
        if nf is not None:
            edge = nf[1] if side > 0 else nf[0]
            if math.isfinite(edge):
                zc = np.maximum(zc, side * (edge - xi) + 1.0)
        rel = []
        for pts in (brs, kinks):
            if pts.size:
                dist = side * (pts[None, :] - xi[:, None])
                rel.append(np.where(dist > 1.0, dist, 1.0))
            else:
                rel.append(np.zeros((n, 0)))
        z1, w1 = _rules.half_line_rule(1.0, rel[0], zc, alpha, spec, level, kinks=rel[1])
        z2, w2 = _rules.tail_rule(zc, p_tail, spec, level)
        zq = np.concatenate([z1, z2], axis=1)
        wq = np.concatenate([w1, w2], axis=1)
        y = xi[:, None] + side * zq
        gy = g.along_axis(x, i, y)
        ratio = np.exp(pot.along_axis(x, i, y) - lp[:, None])
        val = (gy - gx[:, None]) * (ratio + 1.0) * zq ** (-1.0 - alpha)
        out += 0.5 * np.sum(wq * val, axis=1)
    return out


def apply_generator(pot, g, x, alpha, spec=DEFAULT, level=1, p_tail=None):
    """``L_{>1} g`` at the points ``x`` (N, d) for one resolution level."""
    if p_tail is None:
        p_tail = alpha - 1.0
    x = np.atleast_2d(np.asarray(x, dtype=float))
    out = np.zeros(x.shape[0])
    per_row = 4 * spec.inner_order * (spec.panels_per_decade * 2 ** level * 12 + spec.tail_levels + 40)
    for i in range(pot.dimension):
        for sl in _chunks(x.shape[0], per_row, spec):
            out[sl] += generator_line(pot, g, x[sl], i, alpha, spec, level, p_tail)
    return out


def effective_spec(spec, funcs, d):
    """Shrink the singular piece below a tenth of the smallest feature."""
    sc = min((h.scale(i) for h in funcs for i in range(d)), default=math.inf)
    if math.isfinite(sc) and sc > 0 and spec.delta_in > 0.1 * sc:
        return replace(spec, delta_in=0.1 * sc)
    return spec


def form_value(pot, f, g, alpha, spec=DEFAULT, level=0, lower=0.0):
    """``1/2 sum_i int int (...) dz mu(dx)`` at one resolution level."""
    funcs = (f,) if g is None or g is f else (f, g)
    g = f if g is None else g
    spec = effective_spec(spec, funcs, pot.dimension)
    x, w = outer_rule(pot, funcs, spec, level)
    total = 0.0
    per_row = 4 * spec.inner_order * (spec.panels_per_decade * 2 ** level * 12 + 40)
    for i in range(pot.dimension):
        act = ~(f.line_is_constant(x, i) | g.line_is_constant(x, i))
        xa, wa = x[act], w[act]
        for sl in _chunks(xa.shape[0], per_row, spec):
            total += float(np.dot(wa[sl], form_line(f, g, xa[sl], i, alpha, spec, level, lower)))
    return 0.5 * total


def pairing_value(pot, f, g, alpha, spec=DEFAULT, level=0, p_tail=None):
    """``int f L_{>1} g dmu`` at one resolution level."""
    spec = effective_spec(spec, (f, g), pot.dimension)
    x, w = outer_rule(pot, (f, g), spec, level)
    fx = f(x)
    act = fx != 0
    x, w, fx = x[act], w[act], fx[act]
    lg = apply_generator(pot, g, x, alpha, spec, level, p_tail)
    return float(np.dot(w * fx, lg)) + _pairing_far_field(pot, f, g, alpha, spec, level)


def _pairing_far_field(pot, f, g, alpha, spec, level):
    """Base points beyond the truncated outer domain.

    For |x_i| > ext the functions are flat, and the jumps back into the
    bulk contribute ``1/2 f_far (g(y) - g_far) (ext - |y_i|)^{-alpha}/alpha``
    integrated over ``mu(dy)``.  This decays only like ``ext^{-alpha}``, far
    slower than the truncated mass, so it is added in closed form.
    """
    x, w = outer_rule(pot, (f, g), spec, level)
    gx = g(x)
    total = 0.0
    for i in range(pot.dimension):
        lo, hi, cut_lo, cut_hi = _axis_bounds(pot, i, spec)
        for side, end, cut in ((1.0, hi, cut_hi), (-1.0, lo, cut_lo)):
            if not cut:
                continue
            far = np.full((x.shape[0], 1), end * 4.0)
            ff = f.along_axis(x, i, far)[:, 0]
            gf = g.along_axis(x, i, far)[:, 0]
            dist = side * end - side * x[:, i]
            total += 0.5 * float(np.dot(w, ff * (gx - gf) * dist ** (-alpha))) / alpha
    return total


# ---------------------------------------------------------------------------
# product measures and tensor test functions
# ---------------------------------------------------------------------------
#
# For mu = prod_j mu_j and f = sum_k c_k prod_j a_kj(x_j) a jump along axis i
# only moves x_i, so every double integral splits into 1-d pieces:
#   D(f, g)      = 1/2 sum_i sum_{k,l} c_k c_l prod_{j!=i} mu_j(a_kj b_lj) D_i(a_ki, b_li)
#   int f L g dmu = sum_i sum_{k,l} c_k c_l prod_{j!=i} mu_j(a_kj b_lj) mu_i(a_ki L_i b_li)
# where D_i and L_i are the one-dimensional form and generator for mu_i.

def _separable(pot, *funcs):
    from .functions import TestFunction
    return pot.is_product and pot.dimension > 1 and all(isinstance(h, TestFunction) for h in funcs)


class _Factorized:
    def __init__(self, pot, alpha, spec, level):
        from .measure import ProductPotential
        self.subs = [ProductPotential((fac,)) for fac in pot.factors]
        self.alpha = alpha
        self.spec = spec
        self.level = level
        self._cache = {}

    def _tf(self, atom):
        from .functions import TestFunction
        return TestFunction.tensor(atom)

    def moment(self, j, a, b):
        key = ("m", j, a, b)
        if key not in self._cache:
            fa, fb = self._tf(a), self._tf(b)
            x, w = outer_rule(self.subs[j], (fa, fb), self.spec, self.level)
            self._cache[key] = float(np.dot(w, fa(x) * fb(x)))
        return self._cache[key]

    def form(self, i, a, b, lower):
        key = ("d", i, a, b, lower)
        if key not in self._cache:
            if a.support() is None or b.support() is None:
                self._cache[key] = 0.0
            else:
                fa, fb = self._tf(a), self._tf(b)
                self._cache[key] = 2.0 * form_value(self.subs[i], fa, fb if b != a else fa,
                                                    self.alpha, self.spec, self.level, lower)
        return self._cache[key]

    def pairing(self, i, a, b):
        key = ("p", i, a, b)
        if key not in self._cache:
            if b.support() is None:
                self._cache[key] = 0.0
            else:
                self._cache[key] = pairing_value(self.subs[i], self._tf(a), self._tf(b),
                                                 self.alpha, self.spec, self.level)
        return self._cache[key]

    def _cross(self, f, g, i):
        d = len(self.subs)
        for cf, af in f.terms:
            for cg, ag in g.terms:
                m = 1.0
                for j in range(d):
                    if j != i:
                        m *= self.moment(j, af[j], ag[j])
                if m != 0.0:
                    yield cf * cg * m, af[i], ag[i]

    def form_value(self, f, g, lower):
        total = 0.0
        for i in range(len(self.subs)):
            for c, a, b in self._cross(f, g, i):
                total += c * self.form(i, a, b, lower)
        return 0.5 * total

    def pairing_value(self, f, g):
        total = 0.0
        for i in range(len(self.subs)):
            for c, a, b in self._cross(f, g, i):
                total += c * self.pairing(i, a, b)
        return total


def form_estimate(pot, f, g, alpha, spec=DEFAULT, lower=0.0, method="auto", tol=None):
    """Two-level estimate of ``1/2 sum_i int int (...)``; see ``form_value``."""
    g = f if g is None else g
    fact = method == "factor" or (method == "auto" and _separable(pot, f, g))

    def run(level):
        if fact:
            return _Factorized(pot, alpha, spec, level).form_value(f, g, lower)
        return form_value(pot, f, g, alpha, spec, level, lower)

    return two_level(run, tol, "jump form")


def pairing_estimate(pot, f, g, alpha, spec=DEFAULT, method="auto", tol=None):
    """Two-level estimate of ``int f L_{>1} g dmu``."""
    fact = method == "factor" or (method == "auto" and _separable(pot, f, g))

    def run(level):
        if fact:
            return _Factorized(pot, alpha, spec, level).pairing_value(f, g)
        return pairing_value(pot, f, g, alpha, spec, level)

    return two_level(run, tol, "generator pairing")
