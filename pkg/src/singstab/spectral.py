"""Grid estimates of the spectral gap of the axis-concentrated stable form.

Functions are approximated by continuous piecewise-linear interpolants on a
uniform grid over the box ``[-R, R]^d`` and extended by their boundary
values outside it, so the discrete quadratic form is the restriction of the
form to that finite-dimensional space.  Along each axis the density is
frozen per element and the kernel ``|x - y|^{-1-alpha}`` is integrated
against the hat functions:

* same element and neighbouring elements in closed form (the singular part);
* farther element pairs by tensor Gauss-Legendre;
* jumps leaving the box through one-dimensional integrals in the jump length.

In two dimensions the axis families are assembled line by line; product
measures factor as ``A1 (x) M2 + M1 (x) A2``.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import linalg as splinalg

from . import _rules
from .functions import Constant, Plateau, TestFunction
from .measure import NumericalError, SpecificationError, _check_alpha

__all__ = [
    "GridForm", "assemble", "estimate_gap", "gap_residual", "gap_sweep", "GapRecord",
    "sweep_verdict", "witness_family", "plateau_family", "MAX_ENTRIES",
]

MAX_ENTRIES = 1.2e8      # stored couplings allowed in d = 2
_MAX_LINE = 8192         # dense nodes per axis in d = 1


# ---------------------------------------------------------------------------
# unit-spacing kernel tables
# ---------------------------------------------------------------------------

def _jacobi_moment(j, alpha, q=24):
    """``int_0^1 w^j (1 + w)^{-1-alpha} dw``."""
    t, w = _rules.gauss_legendre(q)
    return float(np.dot(w, t ** j * (1.0 + t) ** (-1.0 - alpha)))


def _unit_tables(alpha, n_delta, q=10):
    """Kernel moments of hat functions on unit elements.

    Returns ``(S0, I1, P, X, Q)``: ``S0`` for a single element, the 2x2
    matrix ``I1`` in the increments of two neighbouring elements, and for
    element distances ``delta = 0..n_delta`` (only >= 2 used) the 2x2 blocks
    ``P_ab = int int phi_a(s) phi_b(s) K``, ``X_ab = int int phi_a(s) phi_b(t) K``,
    ``Q_ab = int int phi_a(t) phi_b(t) K`` with ``K = (delta + t - s)^{-1-alpha}``.
    """
    S0 = 2.0 / ((2.0 - alpha) * (3.0 - alpha))
    J = [_jacobi_moment(j, alpha) for j in range(3)]
    # I_ij = int int a^i t^j (a + t)^{-1-alpha} over the unit square (i + j = 2)
    I20 = (J[0] + J[2]) / (3.0 - alpha)
    I11 = (J[1] + J[1]) / (3.0 - alpha)
    I1 = np.array([[I20, I11], [I11, I20]])
    u, w = _rules.gauss_legendre(q)
    phi = np.stack([1.0 - u, u])                       # (2, q)
    delta = np.arange(n_delta + 1, dtype=float)
    dist = delta[:, None, None] + u[None, None, :] - u[None, :, None]   # [delta, s, t]
    with np.errstate(divide="ignore"):
        K = np.where(delta[:, None, None] >= 2, np.abs(dist) ** (-1.0 - alpha), 0.0)
    K = K * w[None, :, None] * w[None, None, :]
    P = np.einsum("as,bs,dst->dab", phi, phi, K)
    X = np.einsum("as,bt,dst->dab", phi, phi, K)
    Q = np.einsum("at,bt,dst->dab", phi, phi, K)
    return S0, I1, P, X, Q


def _w_rule():
    """Nodes and weights for ``int_0^inf h(w) dw`` with polynomially decaying ``h``."""
    t, wt = _rules.gauss_legendre(16)
    edges = np.geomspace(1.0, 1e20, 41)[None, :]
    z, wz = _rules.log_panels(edges, 6)
    return np.concatenate([t, z[0]]), np.concatenate([wt, wz[0]])


_W_NODES, _W_WEIGHTS = _w_rule()


def _right_tail_moment(rho, start, scale, power, alpha):
    """``int_0^inf rho(start + scale w) (c + w)^{-power} dw`` for arrays ``start``, ``scale``.

    ``power`` is a pair ``(c, p)``.
    """
    c, p = power
    pts = start[..., None] + scale[..., None] * _W_NODES
    return np.sum(rho(pts) * (c + _W_NODES) ** (-p) * _W_WEIGHTS, axis=-1)


# ---------------------------------------------------------------------------
# one-dimensional line form
# ---------------------------------------------------------------------------

def _line_form(rho, R, n, alpha, tables, tails=None):
    """Dense matrix and lumped masses of the form along one line.

    ``rho`` evaluates the (line) density at arbitrary real points; ``tails``
    are the masses beyond ``-R`` and ``R`` (computed by quadrature if None).
    """
    S0, I1, P, X, Q = tables
    x = np.linspace(-R, R, n)
    h = x[1] - x[0]
    ne = n - 1
    g3, w3 = _rules.gauss_legendre(3)
    rho_e = (rho(x[:-1, None] + h * g3) * w3).sum(axis=1)
    if tails is None:
        one = np.ones(1)
        right = float(R * _right_tail_moment(rho, R * one, R * one, (1.0, 0.0), alpha)[0])
        left = float(R * _right_tail_moment(lambda y: rho(-y), R * one, R * one, (1.0, 0.0),
                                            alpha)[0])
        tails = (left, right)
    m = np.zeros(n)
    m[:-1] += 0.5 * h * rho_e
    m[1:] += 0.5 * h * rho_e
    m[0] += tails[0]
    m[-1] += tails[1]

    A = np.zeros((n, n))
    hs = h ** (1.0 - alpha)
    # same element
    c = 0.5 * rho_e * hs * S0
    k = np.arange(ne)
    A[k, k] += c
    A[k + 1, k + 1] += c
    A[k, k + 1] -= c
    A[k + 1, k] -= c
    # neighbouring elements: nodes (k, k+1, k+2), form in the two increments
    if ne >= 2:
        T = np.array([[-1.0, 1.0, 0.0], [0.0, -1.0, 1.0]])
        loc = T.T @ I1 @ T
        wk = 0.5 * (rho_e[:-1] + rho_e[1:]) * hs
        k = np.arange(ne - 1)
        for a in range(3):
            for b in range(3):
                A[k + a, k + b] += wk * loc[a, b]
    # element pairs at distance >= 2, accumulated by row blocks
    U = np.zeros((n, n))
    block = max(1, int(4e6 // max(ne, 1)))
    cols = np.arange(ne)
    for k0 in range(0, ne, block):
        rows = np.arange(k0, min(ne, k0 + block))
        D = cols[None, :] - rows[:, None]
        mask = D >= 2
        if not mask.any():
            continue
        Dc = np.where(mask, D, 0)
        W = np.where(mask, 0.5 * (rho_e[rows, None] + rho_e[None, :]) * hs, 0.0)
        for a in range(2):
            for b in range(2):
                rs = (W * P[Dc, a, b]).sum(axis=1)
                A[rows + a, rows + b] += rs
                cs = (W * Q[Dc, a, b]).sum(axis=0)
                A[cols + a, cols + b] += cs
                U[k0 + a:k0 + a + rows.size, b:b + ne] += W * X[Dc, a, b]
    A -= U + U.T

    # jumps from inside the box to beyond its edges
    g8, w8 = _rules.gauss_legendre(8)
    xg = x[:-1, None] + h * g8                     # (ne, 8)
    for side in (1.0, -1.0):
        edge = n - 1 if side > 0 else 0
        dist = R - side * xg
        r_here = rho(xg)
        out = _right_tail_moment(lambda y: rho(side * y), np.full_like(dist, R), dist,
                                 (1.0, 1.0 + alpha), alpha)
        G = 0.5 * (r_here * dist ** (-alpha) / alpha + dist ** (-alpha) * out)
        wg = h * w8 * G                              # (ne, 8)
        cvec = np.stack([1.0 - g8, g8, -np.ones_like(g8)])   # (3, 8)
        loc = np.einsum("ag,bg,kg->kab", cvec, cvec, wg)
        nodes = np.stack([np.arange(ne), np.arange(ne) + 1, np.full(ne, edge)], axis=1)
        for a in range(3):
            for b in range(3):
                np.add.at(A, (nodes[:, a], nodes[:, b]), loc[:, a, b])
    # one side of the box to the other
    one = np.ones(1)
    cr = _right_tail_moment(rho, R * one, R * one, (2.0, alpha), alpha)[0] * R ** (1 - alpha)
    cl = _right_tail_moment(lambda y: rho(-y), R * one, R * one, (2.0, alpha),
                            alpha)[0] * R ** (1 - alpha)
    c_lr = 0.5 * (cr + cl) / alpha
    A[0, 0] += c_lr
    A[-1, -1] += c_lr
    A[0, -1] -= c_lr
    A[-1, 0] -= c_lr
    A = 0.5 * (A + A.T)
    # constants are in the kernel; remove accumulated round-off from the diagonal
    np.fill_diagonal(A, 0.0)
    np.fill_diagonal(A, -A.sum(axis=1))
    return A, m


# ---------------------------------------------------------------------------
# grid form
# ---------------------------------------------------------------------------

@dataclass
class GridForm:
    dimension: int
    R: float
    n: int
    alpha: float
    nodes: np.ndarray         # axis nodes (n,)
    A: object                 # dense ndarray (d = 1) or sparse matrix
    m: np.ndarray             # lumped masses, flattened row-major over the grid

    @classmethod
    def from_matrices(cls, A, m, alpha=1.0):
        m = np.asarray(m, dtype=float)
        if np.any(m <= 0):
            raise SpecificationError("masses must be positive")
        return cls(1, math.nan, m.size, float(alpha), np.arange(m.size, dtype=float),
                   np.asarray(A, dtype=float), m)

    @property
    def size(self):
        return self.m.size

    def points(self):
        if self.dimension == 1:
            return self.nodes[:, None]
        X, Y = np.meshgrid(self.nodes, self.nodes, indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel()])

    def interpolate(self, f):
        """Nodal values of a function on the grid."""
        return np.asarray(f(self.points()), dtype=float)

    def energy(self, v):
        v = np.asarray(v, dtype=float)
        return float(v @ (self.A @ v))

    def variance(self, v):
        v = np.asarray(v, dtype=float)
        tot = self.m.sum()
        mu = np.dot(self.m, v) / tot
        return float(np.dot(self.m, (v - mu) ** 2) / tot)

    def rayleigh(self, v):
        """Energy over variance (the quantity minimised by the gap)."""
        return self.energy(v) / (self.variance(v) * self.m.sum())

    def scaled(self, c):
        return GridForm(self.dimension, self.R, self.n, self.alpha, self.nodes, self.A * c,
                        self.m * c)


def _factor_density(pot, i):
    fac = pot.factors[i]
    log_mass = math.log(fac.mass)

    def rho(t):
        return np.exp(fac.g(np.abs(t)) - log_mass)
    return rho, fac


def assemble(pot, alpha, R, n):
    """``GridForm`` of ``pot`` on ``[-R, R]^d`` with ``n`` nodes per axis."""
    alpha = _check_alpha(alpha)
    d = pot.dimension
    if d not in (1, 2):
        raise SpecificationError("grid assembly supports dimension 1 or 2 only")
    n = int(n)
    if n < 8:
        raise SpecificationError("need at least 8 nodes per axis")
    if not R > 0:
        raise SpecificationError("box radius must be positive")
    if d == 1 and n > _MAX_LINE:
        raise SpecificationError(f"n = {n} too large for a dense 1-d form; use n <= {_MAX_LINE}")
    if d == 2 and 2.0 * n ** 3 > MAX_ENTRIES:
        raise SpecificationError(f"n = {n} needs {2 * n ** 3:.3g} couplings in d = 2; "
                                 f"use n <= {int((MAX_ENTRIES / 2) ** (1 / 3))}")
    tables = _unit_tables(alpha, n)
    nodes = np.linspace(-R, R, n)

    if pot.is_product:
        lines = []
        for i in range(d):
            rho, fac = _factor_density(pot, i)
            half = 0.5 * math.exp(float(fac.log_tail(R)))
            lines.append(_line_form(rho, R, n, alpha, tables, (half, half)))
        if d == 1:
            A, m = lines[0]
            return GridForm(1, float(R), n, alpha, nodes, A, m)
        (A1, m1), (A2, m2) = lines
        A = (sparse.kron(sparse.csr_matrix(A1), sparse.diags(m2))
             + sparse.kron(sparse.diags(m1), sparse.csr_matrix(A2))).tocsr()
        return GridForm(2, float(R), n, alpha, nodes, A, np.kron(m1, m2))

    if d == 1:
        def rho(t):
            t = np.asarray(t, dtype=float)
            return np.exp(pot.log_density(t.reshape(-1, 1))).reshape(t.shape)
        A, m = _line_form(rho, R, n, alpha, tables)
        return GridForm(1, float(R), n, alpha, nodes, A, m)

    # non-product d = 2: one line form per grid line; the line density is the
    # hat-weighted transverse integral (mass beyond the box edges transversally
    # is not attached)
    h = nodes[1] - nodes[0]
    g3, w3 = _rules.gauss_legendre(3)
    rows, cols, vals = [], [], []
    m = np.zeros(n * n)
    idx = np.arange(n * n).reshape(n, n)
    for axis in range(2):
        for j in range(n):
            s_pts, s_wts = [], []
            if j > 0:
                s_pts.append(nodes[j - 1] + h * g3)
                s_wts.append(h * w3 * g3)
            if j < n - 1:
                s_pts.append(nodes[j] + h * g3)
                s_wts.append(h * w3 * (1.0 - g3))
            s_pts = np.concatenate(s_pts)
            s_wts = np.concatenate(s_wts)

            def rho(t, axis=axis, s_pts=s_pts, s_wts=s_wts):
                t = np.asarray(t, dtype=float)
                pts = np.empty(t.shape + (s_pts.size, 2))
                pts[..., axis] = t[..., None]
                pts[..., 1 - axis] = s_pts
                dens = np.exp(pot.log_density(pts.reshape(-1, 2))).reshape(pts.shape[:-1])
                return dens @ s_wts
            Aj, mj = _line_form(rho, R, n, alpha, tables)
            ids = idx[:, j] if axis == 0 else idx[j, :]
            I, J = np.meshgrid(ids, ids, indexing="ij")
            rows.append(I.ravel())
            cols.append(J.ravel())
            vals.append(Aj.ravel())
            if axis == 0:
                m[ids] = mj
    A = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(n * n, n * n))
    return GridForm(2, float(R), n, alpha, nodes, A, m)


# ---------------------------------------------------------------------------
# gap
# ---------------------------------------------------------------------------

def gap_residual(gf, lam, v):
    """``||A v - lam M v|| / (||A||_inf ||v||)``."""
    r = gf.A @ v - lam * gf.m * v
    scale = float(np.abs(gf.A).sum(axis=1).max()) * float(np.linalg.norm(v))
    return float(np.linalg.norm(r)) / scale


def estimate_gap(gf, tol=1e-8, maxiter=None):
    """Smallest non-zero generalised eigenvalue of ``(A, diag(m))``.

    The constant mode is deflated with the rank-one term ``c m m^T / sum m``
    (``c`` above the whole spectrum by Gershgorin), which moves it out of
    the way without touching eigenvectors with ``m``-mean zero.  Returns
    ``(lambda1, v)`` with ``v`` M-normalised and centred.
    """
    A, m = gf.A, gf.m
    N = m.size
    S = m.sum()
    rowabs = np.asarray(abs(A).sum(axis=1)).ravel()
    c = 2.0 * float(np.max(rowabs / m)) + 1.0
    history = []
    if N <= 600:
        Ad = A.toarray() if sparse.issparse(A) else A
        Ap = Ad + c * np.outer(m, m) / S
        vals, vecs = linalg.eigh(Ap, np.diag(m), subset_by_index=[0, 0])
        lam, v = float(vals[0]), vecs[:, 0]
        history.append(gap_residual(gf, lam, v))
    else:
        tau = 1e-6 * float(np.median(np.asarray(A.diagonal()) / m))
        u = m * math.sqrt(c / S)
        if sparse.issparse(A):
            lu = splinalg.splu((A + tau * sparse.diags(m)).tocsc())
            solve = lu.solve
        else:
            K = A.copy()
            K[np.diag_indices(N)] += tau * m
            cf = linalg.cho_factor(K)
            solve = lambda b: linalg.cho_solve(cf, b)      # noqa: E731
        Ku = solve(u)
        denom = 1.0 + float(u @ Ku)

        def opinv(b):
            y = solve(b)
            return y - Ku * (float(u @ y) / denom)

        Aop = splinalg.LinearOperator((N, N), matvec=lambda x: A @ x + u * float(u @ x),
                                      dtype=float)
        Op = splinalg.LinearOperator((N, N), matvec=opinv, dtype=float)
        Mop = sparse.diags(m)
        lam = v = None
        for attempt_tol in (0.0, 0.0):
            try:
                vals, vecs = splinalg.eigsh(Aop, k=1, M=Mop, sigma=-tau, which="LM", OPinv=Op,
                                            tol=attempt_tol, maxiter=maxiter or 20 * N,
                                            v0=np.cos(np.arange(N) + 0.5))
            except splinalg.ArpackNoConvergence as exc:
                history.append(f"arpack: {exc}")
                continue
            lam, v = float(vals[0]), vecs[:, 0]
            history.append(gap_residual(gf, lam, v))
            if history[-1] <= tol:
                break
        if lam is None:
            raise NumericalError(f"eigensolver did not converge; history {history}")
    v = v - np.dot(m, v) / S
    v = v / math.sqrt(float(np.dot(m, v * v)))
    if sparse.issparse(A):
        lam = float(v @ (A @ v))
    res = gap_residual(gf, lam, v)
    history.append(res)
    if not res <= tol:
        raise NumericalError(f"gap eigenpair residual {res:.3g} above {tol:g}; history {history}")
    if lam <= 0:
        raise NumericalError(f"non-positive gap {lam:.3g}: grid not connected?")
    return lam, v


@dataclass(frozen=True)
class GapRecord:
    R: float
    n: int
    lambda1: float
    ratio: float        # lambda1(R) / lambda1(previous R); nan for the first
    verdict: str
    residual: float = math.nan   # relative eigen-residual of lambda1

    def row(self):
        return (self.R, self.n, self.lambda1, self.ratio, self.verdict)


def sweep_verdict(ratios, stable=0.8, drop=0.5):
    """``stabilized`` when the last two ratios are >= ``stable``, ``vanishing``
    when every ratio is <= ``drop``, else ``inconclusive``."""
    r = [x for x in ratios if math.isfinite(x)]
    if len(r) >= 2 and all(x >= stable for x in r[-2:]):
        return "stabilized"
    if len(r) == 1 and r[0] >= stable:
        return "stabilized"
    if r and all(x <= drop for x in r):
        return "vanishing"
    return "inconclusive"


def gap_sweep(pot, alpha, radii, n=None, per_unit=None, tol=1e-8):
    """``lambda1`` over growing boxes.

    Either a fixed ``n`` or a fixed resolution ``per_unit`` (nodes per unit
    length) must be given.  Returns ``(records, verdict)``.
    """
    if (n is None) == (per_unit is None):
        raise SpecificationError("give exactly one of n and per_unit")
    out, prev = [], None
    for R in radii:
        nn = int(n) if n is not None else int(round(2 * R * per_unit)) + 1
        gf = assemble(pot, alpha, R, nn)
        lam, v = estimate_gap(gf, tol=tol)
        ratio = lam / prev if prev else math.nan
        tag = "first" if prev is None else ("stable" if ratio >= 0.8 else
                                            ("drop" if ratio <= 0.5 else "decrease"))
        out.append(GapRecord(float(R), nn, lam, ratio, tag, gap_residual(gf, lam, v)))
        prev = lam
    return out, sweep_verdict([r.ratio for r in out])


# ---------------------------------------------------------------------------
# witnesses
# ---------------------------------------------------------------------------

def plateau_family(index, dimension=1, axis=0):
    """``g_n(x_axis)``: 1 on ``|t| <= 2^n`` falling smoothly to 0 at ``2^{n+1}``;
    ``n = 0`` is the constant 1."""
    index = int(index)
    if index < 0:
        raise SpecificationError("family index must be non-negative")
    atoms = [Constant(1.0)] * dimension
    if index > 0:
        atoms[axis] = Plateau(0.0, 2.0 ** index)
    return TestFunction.tensor(*atoms)


def witness_family(case, index, alpha, eps, dimension=1, axis=0):
    """Member ``index`` of a family with ``Var / D -> inf`` in a failing regime.

    ``case`` is ``poly_subcritical`` (needs ``eps < alpha``) or
    ``log_subcritical`` (needs ``eps < 0``).
    """
    alpha = _check_alpha(alpha)
    if case == "poly_subcritical":
        ok = eps < alpha
    elif case == "log_subcritical":
        ok = eps < 0
    else:
        raise SpecificationError(f"unknown witness case {case!r}")
    if not ok:
        raise SpecificationError("no witness exists in this regime")
    return plateau_family(index, dimension, axis)
