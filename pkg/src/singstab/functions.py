"""Bounded test functions built from one-dimensional atoms.

A ``TestFunction`` is a finite sum ``sum_k c_k prod_i a_{k,i}(x_i)``.  Each
atom knows where it is not smooth, where it becomes constant and a
characteristic length, which is what the quadrature needs to place panels
and to integrate the far part of a jump kernel in closed form.
"""
import math

import numpy as np

from .measure import SpecificationError


class Atom:
    """One-dimensional building block."""

    kind = "atom"

    def __call__(self, t):
        raise NotImplementedError

    def breakpoints(self):
        """Feature points (panel edges for inner integrals)."""
        return ()

    def kinks(self):
        """Points where the atom is not smooth (graded panels)."""
        return ()

    def support(self):
        """Interval outside which the atom is constant, or None if constant."""
        return None

    scale = math.inf
    bounds = (0.0, 1.0)

    def outer_edges(self):
        """Panel edges for integrating over this coordinate against a
        smooth weight: true kinks plus a few multiples of the scale."""
        return ()

    def __repr__(self):
        params = ", ".join(f"{k}={v!r}" for k, v in self.__dict__.items())
        return f"{type(self).__name__}({params})"

    def __eq__(self, other):
        return type(self) is type(other) and self.__dict__ == other.__dict__

    def __hash__(self):
        return hash((type(self).__name__, tuple(sorted(self.__dict__.items()))))


class Bump(Atom):
    """``(1 - ((t - c)/R)^2)^3`` on ``|t - c| < R``, zero outside (C^2)."""

    kind = "bump"

    def __init__(self, center=0.0, radius=1.0):
        if not radius > 0:
            raise SpecificationError("bump radius must be positive")
        self.center = float(center)
        self.radius = float(radius)

    def __call__(self, t):
        u = (np.asarray(t, dtype=float) - self.center) / self.radius
        v = np.maximum(1.0 - u * u, 0.0)
        return v * v * v

    def breakpoints(self):
        c, r = self.center, self.radius
        return (c - r, c, c + r)

    def kinks(self):
        return (self.center - self.radius, self.center + self.radius)

    def support(self):
        return self.center - self.radius, self.center + self.radius

    def outer_edges(self):
        c, r = self.center, self.radius
        k = 2.0 ** np.arange(0, 4)
        return (c, c - r / 2, c + r / 2, *(c + r + r * k), *(c - r - r * k), c - r, c + r)

    @property
    def scale(self):
        return self.radius


class Gaussian(Atom):
    kind = "gaussian"

    def __init__(self, center=0.0, width=1.0):
        if not width > 0:
            raise SpecificationError("gaussian width must be positive")
        self.center = float(center)
        self.width = float(width)

    def __call__(self, t):
        u = (np.asarray(t, dtype=float) - self.center) / self.width
        # exp(-800) underflows to exactly 0, so the atom is flat past 40 widths
        return np.exp(-0.5 * np.minimum(u * u, 1600.0))

    def breakpoints(self):
        c, w = self.center, self.width
        return (c - 3 * w, c, c + 3 * w)

    def support(self):
        return self.center - 40 * self.width, self.center + 40 * self.width

    def outer_edges(self):
        u = np.array([0.0, 1, 2, 4, 6, 8, 16, 32])
        return tuple(self.center + self.width * np.concatenate([u, -u[1:]]))

    @property
    def scale(self):
        return self.width


class Tent(Atom):
    kind = "tent"

    def __init__(self, center=0.0, half_width=1.0):
        if not half_width > 0:
            raise SpecificationError("tent half-width must be positive")
        self.center = float(center)
        self.half_width = float(half_width)

    def __call__(self, t):
        u = np.abs(np.asarray(t, dtype=float) - self.center) / self.half_width
        return np.maximum(0.0, 1.0 - u)

    def breakpoints(self):
        c, h = self.center, self.half_width
        return (c - h, c, c + h)

    def kinks(self):
        return self.breakpoints()

    def support(self):
        return self.center - self.half_width, self.center + self.half_width

    def outer_edges(self):
        c, h = self.center, self.half_width
        fine = h * 2.0 ** -np.arange(1, 7)
        out = [c, c - h, c + h]
        for b in (c - h, c, c + h):
            out += list(b + fine) + list(b - fine)
        out += list(c + h + h * 2.0 ** np.arange(4)) + list(c - h - h * 2.0 ** np.arange(4))
        return tuple(out)

    @property
    def scale(self):
        return self.half_width


class Plateau(Atom):
    """1 on ``|t - c| <= R``, quintic smoothstep down to 0 at ``|t - c| = 2R`` (C^2)."""

    kind = "plateau"

    def __init__(self, center=0.0, radius=1.0):
        if not radius > 0:
            raise SpecificationError("plateau radius must be positive")
        self.center = float(center)
        self.radius = float(radius)

    def __call__(self, t):
        u = np.clip((np.abs(np.asarray(t, dtype=float) - self.center) - self.radius)
                    / self.radius, 0.0, 1.0)
        return 1.0 - u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)

    def breakpoints(self):
        c, r = self.center, self.radius
        return (c - 2 * r, c - r, c, c + r, c + 2 * r)

    def kinks(self):
        c, r = self.center, self.radius
        return (c - 2 * r, c - r, c + r, c + 2 * r)

    def support(self):
        return self.center - 2 * self.radius, self.center + 2 * self.radius

    def outer_edges(self):
        c, r = self.center, self.radius
        k = 2.0 ** np.arange(0, 4)
        return (c, c - r, c + r, c - 1.5 * r, c + 1.5 * r, *(c + 2 * r + r * k),
                *(c - 2 * r - r * k), c - 2 * r, c + 2 * r)

    @property
    def scale(self):
        return self.radius


class Constant(Atom):
    kind = "constant"

    def __init__(self, value=1.0):
        self.value = float(value)

    def __call__(self, t):
        return np.full(np.shape(t), self.value)

    @property
    def bounds(self):
        return (self.value, self.value)


class Sign(Atom):
    """``+1`` for ``t >= c`` and ``-1`` otherwise (infinite energy for alpha >= 1)."""

    kind = "sign"
    bounds = (-1.0, 1.0)

    def __init__(self, center=0.0):
        self.center = float(center)

    def __call__(self, t):
        return np.where(np.asarray(t, dtype=float) >= self.center, 1.0, -1.0)

    def breakpoints(self):
        return (self.center,)

    def kinks(self):
        return (self.center,)

    def support(self):
        return self.center, self.center

    def outer_edges(self):
        k = 2.0 ** -np.arange(-3, 12)
        return (self.center, *(self.center + k), *(self.center - k))

    scale = 0.0


class Step(Atom):
    """Smoothed sign ``tanh((t - c)/w)``; constant to machine precision past 20w."""

    kind = "step"
    bounds = (-1.0, 1.0)

    def __init__(self, center=0.0, width=1.0):
        if not width > 0:
            raise SpecificationError("step width must be positive")
        self.center = float(center)
        self.width = float(width)

    def __call__(self, t):
        u = (np.asarray(t, dtype=float) - self.center) / self.width
        # tanh(20) rounds to 1.0 in double precision
        return np.tanh(np.clip(u, -20.0, 20.0))

    def breakpoints(self):
        c, w = self.center, self.width
        return (c - 2 * w, c, c + 2 * w)

    def support(self):
        return self.center - 20 * self.width, self.center + 20 * self.width

    def outer_edges(self):
        u = np.array([0.0, 1, 2, 4, 8, 16, 20, 40])
        return tuple(self.center + self.width * np.concatenate([u, -u[1:]]))

    @property
    def scale(self):
        return self.width


class Composite(Atom):
    """A one-dimensional function used as a tensor factor, optionally
    composed with ``np.log`` (so ``log prod_i h_i = sum_i log h_i`` stays a
    sum of tensor products)."""

    kind = "composite"

    def __init__(self, base, log=False):
        if base.dimension != 1:
            raise SpecificationError("composite atoms wrap one-dimensional functions")
        self.base = base
        self.log = bool(log)
        if self.log and not base.bounds()[0] > 0:
            raise SpecificationError("log of a function that is not bounded below by a positive floor")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        v = self.base(t[..., None])
        return np.log(v) if self.log else v

    def breakpoints(self):
        return self.base.breakpoints(0)

    def kinks(self):
        return self.base.kinks(0)

    def support(self):
        return self.base.nonflat(0)

    def outer_edges(self):
        return self.base.outer_edges(0)

    @property
    def scale(self):
        return self.base.scale(0)

    @property
    def bounds(self):
        lo, hi = self.base.bounds()
        return (math.log(lo), math.log(hi)) if self.log else (lo, hi)

    def __eq__(self, other):
        return type(other) is Composite and other.base is self.base and other.log == self.log

    def __hash__(self):
        return hash((id(self.base), self.log))


def _mul_bounds(a, b):
    c = [a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]]
    return min(c), max(c)


class Function:
    """Protocol shared by test functions, mapped functions and Lyapunov weights."""

    dimension = 1

    def __call__(self, x):
        raise NotImplementedError

    def along_axis(self, x, i, y):
        """Values at ``x`` (N, d) with coordinate ``i`` replaced by ``y`` (N, M)."""
        n, m = y.shape
        pts = np.repeat(x[:, None, :], m, axis=1)
        pts[..., i] = y
        return self(pts.reshape(-1, x.shape[1])).reshape(n, m)

    def line_is_constant(self, x, i):
        return np.zeros(x.shape[0], dtype=bool)

    def breakpoints(self, i):
        return ()

    def kinks(self, i):
        return ()

    def nonflat(self, i):
        """Interval along axis i outside which the function is constant
        (for every choice of the other coordinates).  None means constant
        along the whole axis; ``(-inf, inf)`` means it never flattens."""
        return None

    def scale(self, i):
        return math.inf

    def outer_edges(self, i):
        return ()


class TestFunction(Function):
    """``sum_k c_k prod_i atom_{k,i}(x_i)``."""

    __test__ = False  # not a pytest class

    def __init__(self, terms):
        terms = [(float(c), tuple(a)) for c, a in terms]
        if not terms:
            raise SpecificationError("a test function needs at least one term")
        d = len(terms[0][1])
        if any(len(a) != d for _, a in terms):
            raise SpecificationError("all terms must have the same dimension")
        self.terms = terms
        self.dimension = d

    @classmethod
    def tensor(cls, *atoms, coef=1.0):
        return cls([(coef, atoms)])

    @classmethod
    def constant(cls, value, dimension):
        return cls([(value, (Constant(1.0),) * dimension)])

    def __add__(self, other):
        if not isinstance(other, TestFunction):
            return NotImplemented
        return TestFunction(self.terms + other.terms)

    def __mul__(self, s):
        return TestFunction([(c * float(s), a) for c, a in self.terms])

    __rmul__ = __mul__

    def __repr__(self):
        return f"TestFunction({self.terms!r})"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        x2 = x.reshape(-1, self.dimension)
        out = np.zeros(x2.shape[0])
        for c, atoms in self.terms:
            v = np.full(x2.shape[0], c)
            for i, a in enumerate(atoms):
                v = v * a(x2[:, i])
            out += v
        return out.reshape(x.shape[:-1])

    def _rest(self, x, i):
        rest = []
        for c, atoms in self.terms:
            v = np.full(x.shape[0], c)
            for j, a in enumerate(atoms):
                if j != i:
                    v = v * a(x[:, j])
            rest.append(v)
        return rest

    def along_axis(self, x, i, y):
        out = np.zeros(y.shape)
        for (c, atoms), r in zip(self.terms, self._rest(x, i)):
            out += r[:, None] * atoms[i](y)
        return out

    def line_is_constant(self, x, i):
        const = np.ones(x.shape[0], dtype=bool)
        for (c, atoms), r in zip(self.terms, self._rest(x, i)):
            if atoms[i].support() is not None:
                const &= r == 0
        return const

    def breakpoints(self, i):
        pts = []
        for _, atoms in self.terms:
            pts.extend(atoms[i].breakpoints())
        return tuple(sorted(set(pts)))

    def kinks(self, i):
        return tuple(sorted({k for _, atoms in self.terms for k in atoms[i].kinks()}))

    def nonflat(self, i):
        sup = [atoms[i].support() for _, atoms in self.terms]
        sup = [s for s in sup if s is not None]
        if not sup:
            return None
        return min(s[0] for s in sup), max(s[1] for s in sup)

    def scale(self, i):
        return min((atoms[i].scale for _, atoms in self.terms), default=math.inf)

    def outer_edges(self, i):
        return tuple(sorted({e for _, atoms in self.terms for e in atoms[i].outer_edges()}))

    def bounds(self):
        """Interval-arithmetic enclosure ``(lo, hi)`` of the function values."""
        lo = hi = 0.0
        for c, atoms in self.terms:
            b = (c, c)
            for a in atoms:
                b = _mul_bounds(b, a.bounds)
            lo += b[0]
            hi += b[1]
        return lo, hi


class MappedFunction(Function):
    """``fn(base(x))`` sharing the geometry of ``base`` (e.g. ``log f``)."""

    def __init__(self, base, fn, name="mapped"):
        self.base = base
        self.fn = fn
        self.name = name
        self.dimension = base.dimension

    def __call__(self, x):
        return self.fn(self.base(x))

    def along_axis(self, x, i, y):
        return self.fn(self.base.along_axis(x, i, y))

    def line_is_constant(self, x, i):
        return self.base.line_is_constant(x, i)

    def breakpoints(self, i):
        return self.base.breakpoints(i)

    def kinks(self, i):
        return self.base.kinks(i)

    def nonflat(self, i):
        return self.base.nonflat(i)

    def scale(self, i):
        return self.base.scale(i)

    def outer_edges(self, i):
        return self.base.outer_edges(i)


def log_of(f):
    return MappedFunction(f, np.log, "log")


def product_function(factors):
    """``prod_i h_i(x_i)`` from one-dimensional functions ``h_i``."""
    return TestFunction.tensor(*[Composite(h) for h in factors])


def log_product_function(factors):
    """``log prod_i h_i(x_i) = sum_i log h_i(x_i)`` as a sum of tensor terms."""
    d = len(factors)
    terms = []
    for i, h in enumerate(factors):
        atoms = [Constant(1.0)] * d
        atoms[i] = Composite(h, log=True)
        terms.append((1.0, tuple(atoms)))
    return TestFunction(terms)


def lift(atom, dimension, axis=0):
    """Tensor with ``atom`` on one axis and constants elsewhere."""
    atoms = [Constant(1.0)] * dimension
    atoms[axis] = atom
    return TestFunction.tensor(*atoms)


_ATOM_KINDS = {"bump": Bump, "gaussian": Gaussian, "tent": Tent, "plateau": Plateau,
               "constant": Constant, "sign": Sign, "step": Step}


def atom_from_spec(kind, *params):
    try:
        return _ATOM_KINDS[kind](*params)
    except KeyError:
        raise SpecificationError(f"unknown atom kind {kind!r}") from None


def random_test_function(rng, dimension, n_terms=2, positive=False, smooth=True,
                         max_center=3.0, scale_range=(0.5, 3.0)):
    """Random bounded function from smooth atoms.

    ``positive=True`` adds a constant floor so that the result is bounded
    below by a positive number (needed for entropies and ``log f``).
    """
    kinds = ["bump", "gaussian", "step"] if smooth else ["bump", "gaussian", "tent", "step"]
    terms = []
    for _ in range(n_terms):
        atoms = []
        for _ in range(dimension):
            k = kinds[rng.integers(len(kinds))]
            c = rng.uniform(-max_center, max_center)
            s = math.exp(rng.uniform(math.log(scale_range[0]), math.log(scale_range[1])))
            atoms.append(atom_from_spec(k, c, s))
        coef = rng.uniform(0.2, 1.0) if positive else rng.uniform(-1.0, 1.0)
        terms.append((coef, tuple(atoms)))
    f = TestFunction(terms)
    if positive:
        lo, _ = f.bounds()
        floor = max(0.0, -lo) + rng.uniform(0.1, 1.0)
        f = f + TestFunction.constant(floor, dimension)
    return f


def random_positive_product(rng, dimension, n_terms=2):
    """Random ``prod_i h_i(x_i)`` with each ``h_i`` a positive 1-d test function.

    Returns ``(f, log f)``; both are sums of tensor products, which lets the
    forms on product measures split into one-dimensional integrals.
    """
    hs = [random_test_function(rng, 1, n_terms=n_terms, positive=True) for _ in range(dimension)]
    return product_function(hs), log_product_function(hs)
