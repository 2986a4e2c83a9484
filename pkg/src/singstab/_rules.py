"""Low-level quadrature rules shared by the form, generator and measure code.

Everything here works on batches: a row of an ``(N, M)`` array is the rule
for one outer node, so the singular inner integrals for thousands of base
points are evaluated with a handful of numpy calls.
"""
from functools import lru_cache

import numpy as np
from scipy import special


@lru_cache(maxsize=None)
def gauss_legendre(q):
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = special.roots_legendre(q)
    return (x + 1.0) / 2.0, w / 2.0


@lru_cache(maxsize=None)
def gauss_jacobi_left(q, p):
    """Nodes/weights with ``sum w h(t) ~ int_0^1 t**p h(t) dt``."""
    x, w = special.roots_jacobi(q, 0.0, p)
    return (x + 1.0) / 2.0, w / 2.0 ** (1.0 + p)


def log_panels(edges, q):
    """Composite Gauss-Legendre in log-space over sorted positive edges.

    ``edges`` has shape (N, P+1).  Zero-width panels get zero weight.
    Returns nodes and weights of shape (N, P*q) for ``int h(z) dz``.
    """
    t, w = gauss_legendre(q)
    le = np.log(edges)
    a = le[:, :-1, None]
    b = le[:, 1:, None]
    s = a + (b - a) * t
    z = np.exp(s)
    wz = (b - a) * w * z
    n = edges.shape[0]
    return z.reshape(n, -1), wz.reshape(n, -1)


def lin_panels(edges, q):
    """Composite Gauss-Legendre over sorted 1-d edges."""
    t, w = gauss_legendre(q)
    a = edges[:-1, None]
    b = edges[1:, None]
    return (a + (b - a) * t).ravel(), ((b - a) * w).ravel()


def graded_breaks(breaks, grading):
    """Add geometric grading ``b +- o_k`` around each break distance ``b``.

    The offsets run geometrically from ``b/2`` down to ``min(b, 1) 2**-grading``,
    so features of unit size stay resolved even when the break is far from
    the base point.
    """
    if breaks.shape[1] == 0 or grading <= 0:
        return breaks
    k = grading + 6
    u = np.linspace(0.0, 1.0, k)
    top = breaks / 2.0
    floor = np.minimum(breaks, 1.0) * 2.0 ** -grading
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(top > 0, floor / top, 1.0)
    off = top[:, :, None] * ratio[:, :, None] ** u
    up = breaks[:, :, None] + off
    dn = breaks[:, :, None] - off
    n = breaks.shape[0]
    return np.concatenate([breaks, up.reshape(n, -1), dn.reshape(n, -1)], axis=1)


def half_line_rule(lower, breaks, z_cut, alpha, spec, level, p_origin=None, kinks=None):
    """Rule for ``int_lower^{z_cut} F(z) dz`` along one side of a base point.

    ``lower`` is either 0 (then the first piece ``[0, min(delta, z_cut)]``
    uses a Gauss-Jacobi rule absorbing ``z**p_origin``) or a positive scalar.
    ``breaks`` (N, K) holds extra panel edges and ``kinks`` (N, J) the
    distances at which F is not smooth (graded geometrically);
    ``z_cut`` (N,) is where the finite part ends.  Rows with
    ``z_cut <= lower`` get all-zero weights.
    """
    z_cut = np.asarray(z_cut, dtype=float)
    n = z_cut.shape[0]
    delta = spec.delta_in * 2.0 ** -level
    ppd = spec.panels_per_decade * 2 ** level
    q = spec.inner_order
    parts_z, parts_w = [], []
    if lower == 0:
        p = (1.0 - alpha) if p_origin is None else p_origin
        t, w = gauss_jacobi_left(q, p)
        dj = np.clip(z_cut, 0.0, delta)
        live = dj > 0
        dj = np.where(live, dj, delta)
        parts_z.append(dj[:, None] * t)
        parts_w.append(np.where(live[:, None], dj[:, None] * w * t ** -p, 0.0))
        lo = dj
    else:
        lo = np.full(n, float(lower))
    hi = np.maximum(z_cut, lo)
    ratio = hi / lo
    decades = float(np.log10(ratio.max())) if ratio.max() > 1 else 0.0
    nb = max(1, int(np.ceil(ppd * decades)))
    u = np.linspace(0.0, 1.0, nb + 1)
    base = lo[:, None] * ratio[:, None] ** u
    extra = []
    if breaks is not None and breaks.shape[1]:
        extra.append(np.asarray(breaks, dtype=float))
    if kinks is not None and kinks.shape[1]:
        extra.append(graded_breaks(np.asarray(kinks, dtype=float), spec.grading))
    if extra:
        br = np.clip(np.concatenate(extra, axis=1), lo[:, None], hi[:, None])
        base = np.concatenate([base, br], axis=1)
    base.sort(axis=1)
    zp, wp = log_panels(base, q)
    parts_z.append(zp)
    parts_w.append(wp)
    return np.concatenate(parts_z, axis=1), np.concatenate(parts_w, axis=1)


def tail_rule(z_cut, p, spec, level):
    """Rule for ``int_{z_cut}^inf F(z) dz`` through ``t = 1/z``.

    ``F(1/t)/t**2`` is assumed to behave like ``t**p`` (p > -1) as t -> 0;
    panels are graded geometrically toward t = 0 and the last panel uses a
    Gauss-Jacobi rule with that weight.
    """
    z_cut = np.asarray(z_cut, dtype=float)
    q = spec.inner_order
    levels = spec.tail_levels + 4 * level
    tau = 1.0 / z_cut
    ratio = 2.0 ** -np.arange(levels + 1)
    edges = tau[:, None] * ratio[::-1]
    tp, wp = log_panels(edges, q)
    zp = 1.0 / tp
    wz = wp / tp ** 2
    tj, wj = gauss_jacobi_left(q, p)
    t_last = tau * ratio[-1]
    tt = t_last[:, None] * tj
    wt = t_last[:, None] * wj * tj ** -p
    return (np.concatenate([zp, 1.0 / tt], axis=1),
            np.concatenate([wz, wt / tt ** 2], axis=1))
