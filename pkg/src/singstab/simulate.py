"""Sampling the cylindrical stable process and the reversible jump chain of
``L_{>1}``, and empirical decay of stationary autocovariances.

The chain jumps from ``x`` to ``x + z e_i`` (``|z| > delta``) with rate
density ``(e^{V(x) - V(x + z e_i)} + 1) / (2 |z|^{1+alpha})``; for
``delta = 1`` this is the generator ``L_{>1}``.  Two exact samplers are
provided:

* ``ThinningSampler``: uniform proposal rate ``d (M(x) + 1) delta^-alpha / alpha``
  with ``M(x) = e^{V(x)} sup e^{-V}``; works for any potential.
* ``ProductSampler``: for product densities with factors decreasing in
  ``|t|``.  The kernel is split into the free part, the part landing in
  ``|y_i| < |x_i| / 2`` and the rest, each with its own envelope, so the
  acceptance rate stays bounded below far out in the tails (the single
  thinning envelope has infinite expected cost under the stationary law).
"""
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special

from ._fit import linear_fit
from .measure import NumericalError, SpecificationError, _check_alpha

__all__ = [
    "StableSamplerSpec", "sample_stable", "sample_stable_increment", "levy_constant",
    "sample_axis_jump", "JumpChainState", "envelope_constant", "initial_state",
    "thinning_step", "detailed_balance_defect", "ThinningSampler", "ProductSampler",
    "make_sampler", "occupation_ks", "weighted_ks", "DecayReport", "DecayFit",
    "decay_batch", "decay_estimate", "time_grid", "InvariantViolation",
]


class InvariantViolation(NumericalError):
    """An acceptance probability above one: the envelope is wrong."""


# ---------------------------------------------------------------------------
# stable increments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StableSamplerSpec:
    alpha: float
    t: float = 1.0
    seed: int = 0


def sample_stable(alpha, size, rng, t=1.0):
    """Chambers-Mallows-Stuck draws with characteristic function ``exp(-t |xi|^alpha)``."""
    alpha = _check_alpha(alpha)
    U = rng.uniform(-math.pi / 2, math.pi / 2, size)
    if alpha == 1.0:
        S = np.tan(U)
    else:
        E = rng.exponential(1.0, size)
        S = (np.sin(alpha * U) / np.cos(U) ** (1.0 / alpha)
             * (np.cos((1.0 - alpha) * U) / E) ** ((1.0 - alpha) / alpha))
    return t ** (1.0 / alpha) * S


def sample_stable_increment(spec, rng=None):
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    return float(sample_stable(spec.alpha, None, rng, spec.t))


def levy_constant(alpha):
    """``c_alpha`` with ``|xi|^alpha = c_alpha int (1 - cos(xi z)) |z|^{-1-alpha} dz``."""
    alpha = _check_alpha(alpha)
    return (alpha * 2.0 ** (alpha - 1) * special.gamma((1 + alpha) / 2)
            / (math.sqrt(math.pi) * special.gamma(1 - alpha / 2)))


def sample_axis_jump(alpha, delta, rng, dimension=1, size=None):
    """Coordinate uniform on ``0..d-1`` and ``z`` with density
    ``alpha delta^alpha / (2 |z|^{1+alpha})`` on ``|z| > delta``."""
    if not delta > 0:
        raise SpecificationError("delta must be positive")
    i = rng.integers(0, dimension, size)
    u = 1.0 - rng.random(size)                # in (0, 1]
    sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
    z = sign * delta * u ** (-1.0 / alpha)
    return i, z


# ---------------------------------------------------------------------------
# thinning chain
# ---------------------------------------------------------------------------

def envelope_constant(pot, x):
    """``M(x) = e^{V(x)} sup e^{-V}`` (``>= 1``)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return np.exp(pot.log_density_sup - pot.log_density(x))


@dataclass(frozen=True)
class JumpChainState:
    position: np.ndarray
    clock: float
    envelope: float
    delta: float
    alpha: float
    proposals: int = 0
    accepted: int = 0

    @property
    def rate(self):
        """Total proposal rate ``d (M + 1) delta^-alpha / alpha``."""
        return self.position.size * (self.envelope + 1.0) * self.delta ** -self.alpha / self.alpha


def initial_state(pot, x0, alpha, delta=1.0):
    x0 = np.asarray(x0, dtype=float).reshape(pot.dimension)
    return JumpChainState(x0.copy(), 0.0, float(envelope_constant(pot, x0)[0]), float(delta),
                          _check_alpha(alpha))


def _acceptance(pot, x, y, M):
    """``(e^{V(x) - V(y)} + 1) / (M + 1)``."""
    return (np.exp(pot.log_density(y) - pot.log_density(x)) + 1.0) / (M + 1.0)


def thinning_step(pot, state, rng):
    """One proposal event of the thinning construction."""
    tau = rng.exponential(1.0 / state.rate)
    i, z = sample_axis_jump(state.alpha, state.delta, rng, pot.dimension)
    x = state.position
    y = x.copy()
    y[i] += z
    acc = float(_acceptance(pot, x[None], y[None], state.envelope)[0])
    if acc > 1.0 + 1e-12:
        raise InvariantViolation(f"acceptance probability {acc!r} > 1 at {x.tolist()}")
    if rng.random() < acc:
        return JumpChainState(y, state.clock + tau, float(envelope_constant(pot, y)[0]),
                              state.delta, state.alpha, state.proposals + 1, state.accepted + 1)
    return replace(state, clock=state.clock + tau, proposals=state.proposals + 1)


def detailed_balance_defect(pot, x, z, i):
    """``|e^{-V(x)} k(x, y) - e^{-V(y)} k(y, x)|`` relative, ``y = x + z e_i``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = x.copy()
    y[np.arange(x.shape[0]), i] += z
    lx, ly = pot.log_density(x), pot.log_density(y)
    left = np.exp(lx) * (np.exp(ly - lx) + 1.0)
    right = np.exp(ly) * (np.exp(lx - ly) + 1.0)
    return np.abs(left - right) / np.maximum(np.abs(left), 1e-300)


class ThinningSampler:
    """Vectorised thinning over many independent chains."""

    def __init__(self, pot, alpha, delta=1.0):
        self.pot = pot
        self.alpha = _check_alpha(alpha)
        self.delta = float(delta)
        self.d = pot.dimension
        self.unit = self.delta ** -self.alpha / self.alpha

    def rate(self, x):
        return self.d * (envelope_constant(self.pot, x) + 1.0) * self.unit

    def jump(self, x, rng):
        """Propose and accept/reject for every row; returns (new x, accepted mask)."""
        n = x.shape[0]
        i, z = sample_axis_jump(self.alpha, self.delta, rng, self.d, n)
        y = x.copy()
        y[np.arange(n), i] += z
        acc = _acceptance(self.pot, x, y, envelope_constant(self.pot, x))
        if np.any(acc > 1.0 + 1e-12):
            raise InvariantViolation(f"acceptance probability {acc.max()!r} > 1")
        ok = rng.random(n) < acc
        x = np.where(ok[:, None], y, x)
        return x, ok


class ProductSampler:
    """Exact sampler for product densities with factors decreasing in ``|t|``.

    Along axis ``i`` with ``b = |x_i| / 2`` the jump kernel splits into

    * free part ``1 / (2 |z|^{1+alpha})``: Pareto proposal, always accepted;
    * landing in ``|y| < b``: ``y`` from the marginal conditioned on ``|y| < b``,
      accepted with ``|y - x_i|^{-1-alpha} / K`` where ``K = max(b, delta)^{-1-alpha}``;
    * landing in ``|y| >= b``: Pareto proposal, accepted with ``rho(y) / rho(b)``.
    """

    def __init__(self, pot, alpha, delta=1.0):
        if not pot.is_product or not all(f.is_decreasing for f in pot.factors):
            raise SpecificationError("ProductSampler needs a product density with "
                                     "factors decreasing in |t|")
        self.pot = pot
        self.alpha = _check_alpha(alpha)
        self.delta = float(delta)
        self.d = pot.dimension
        self.unit = self.delta ** -self.alpha / self.alpha

    def _axis_rates(self, xi, fac):
        a = np.abs(xi)
        b = 0.5 * a
        lp_x = fac.log_pdf(xi)
        K = np.maximum(b, self.delta) ** (-1.0 - self.alpha)
        with np.errstate(divide="ignore"):
            p_in = -np.expm1(fac.log_tail(b))
            r_in = np.where(b > 0, K * p_in * 0.5 * np.exp(-lp_x), 0.0)
        r_out = np.exp(fac.log_pdf(b) - lp_x) * self.unit
        return r_in, r_out, K

    def _rates(self, x):
        r = np.empty((x.shape[0], self.d, 3))
        r[:, :, 0] = self.unit
        for i, fac in enumerate(self.pot.factors):
            r[:, i, 1], r[:, i, 2], _ = self._axis_rates(x[:, i], fac)
        return r

    def rate(self, x):
        return self._rates(x).reshape(x.shape[0], -1).sum(axis=1)

    def jump(self, x, rng):
        n = x.shape[0]
        r = self._rates(x).reshape(n, -1)
        cum = np.cumsum(r, axis=1)
        pick = (rng.random(n)[:, None] * cum[:, -1:] >= cum).sum(axis=1)
        pick = np.minimum(pick, 3 * self.d - 1)
        axis, comp = pick // 3, pick % 3
        u_acc = rng.random(n)
        _, z = sample_axis_jump(self.alpha, self.delta, rng, 1, n)
        u_y = rng.random(n)
        sgn = np.where(rng.random(n) < 0.5, -1.0, 1.0)
        xi = x[np.arange(n), axis]
        new = xi.copy()
        ok = np.zeros(n, dtype=bool)
        for i, fac in enumerate(self.pot.factors):
            sel = axis == i
            if not sel.any():
                continue
            c = comp[sel]
            xs = xi[sel]
            b = 0.5 * np.abs(xs)
            out = xs.copy()
            acc = np.zeros(xs.size, dtype=bool)
            # free part
            f0 = c == 0
            out[f0] = xs[f0] + z[sel][f0]
            acc[f0] = True
            # land inside |y| < b
            f1 = c == 1
            if f1.any():
                tb = np.exp(fac.log_tail(b[f1]))
                u = tb + (1.0 - tb) * u_y[sel][f1]
                y = sgn[sel][f1] * fac.tail_inverse(np.minimum(u, 1.0))
                dist = np.abs(y - xs[f1])
                K = np.maximum(b[f1], self.delta) ** (-1.0 - self.alpha)
                with np.errstate(divide="ignore"):
                    p = np.where(dist > self.delta, dist ** (-1.0 - self.alpha) / K, 0.0)
                if np.any(p > 1.0 + 1e-12):
                    raise InvariantViolation(f"inner acceptance {p.max()!r} > 1")
                out[f1] = y
                acc[f1] = u_acc[sel][f1] < p
            # land outside
            f2 = c == 2
            if f2.any():
                y = xs[f2] + z[sel][f2]
                p = np.where(np.abs(y) >= b[f2], np.exp(fac.log_pdf(y) - fac.log_pdf(b[f2])), 0.0)
                if np.any(p > 1.0 + 1e-12):
                    raise InvariantViolation(f"outer acceptance {p.max()!r} > 1")
                out[f2] = y
                acc[f2] = u_acc[sel][f2] < p
            new[sel] = np.where(acc, out, xs)
            ok[sel] = acc
        x = x.copy()
        x[np.arange(n), axis] = new
        return x, ok


def make_sampler(pot, alpha, delta=1.0, method="auto"):
    """``product`` when available, else ``thinning``."""
    if method == "thinning":
        return ThinningSampler(pot, alpha, delta)
    if method == "product":
        return ProductSampler(pot, alpha, delta)
    if method != "auto":
        raise SpecificationError(f"unknown sampler {method!r}")
    if pot.is_product and all(f.is_decreasing for f in pot.factors):
        return ProductSampler(pot, alpha, delta)
    return ThinningSampler(pot, alpha, delta)


# ---------------------------------------------------------------------------
# occupation measure
# ---------------------------------------------------------------------------

def weighted_ks(edges_cdf, weights):
    """Kolmogorov-Smirnov distance from bin weights on edges with known CDF values.

    ``weights[k]`` is the mass in ``[edge_{k-1}, edge_k)`` (first and last bins
    unbounded), so the empirical CDF is exact at every edge.
    """
    emp = np.cumsum(weights)[:-1] / weights.sum()
    return float(np.max(np.abs(emp - edges_cdf)))


def _stagnation(proposals, accepted):
    rate = accepted / proposals if proposals else 0.0
    return NumericalError(f"chain stagnated: {accepted} accepted out of {proposals} proposals "
                          f"(acceptance rate {rate:.3g}); the envelope is too loose here")


def occupation_ks(pot, alpha, n_chains, n_jumps, seed=0, delta=1.0, x0=None, axis=0,
                  n_bins=4000, method="auto", max_proposals=5e8):
    """KS distance between the time-weighted occupation marginal of axis
    ``axis`` and its stationary CDF, pooled over ``n_chains`` chains run until
    each has made ``n_jumps`` accepted jumps.

    Returns ``(ks, total_accepted, acceptance_rate)``.
    """
    if not pot.is_product:
        raise SpecificationError("occupation_ks needs a product density (closed-form marginal)")
    sampler = make_sampler(pot, alpha, delta, method)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    fac = pot.factors[axis]
    u = (np.arange(1, n_bins) / n_bins)
    edges = np.where(u < 0.5, -fac.tail_inverse(2 * u), fac.tail_inverse(2 * (1 - u)))
    edges_cdf = fac.cdf(edges)
    x = np.zeros((n_chains, pot.dimension)) if x0 is None else np.tile(
        np.asarray(x0, dtype=float), (n_chains, 1))
    weights = np.zeros(n_bins)
    jumps = np.zeros(n_chains, dtype=np.int64)
    proposals = 0
    active = np.ones(n_chains, dtype=bool)
    while active.any():
        idx = np.flatnonzero(active)
        xa = x[idx]
        tau = rng.exponential(1.0 / sampler.rate(xa))
        weights += np.bincount(np.searchsorted(edges, xa[:, axis], side="right"),
                               weights=tau, minlength=n_bins)
        xa, ok = sampler.jump(xa, rng)
        x[idx] = xa
        jumps[idx] += ok
        proposals += idx.size
        active = jumps < n_jumps
        if proposals > max_proposals and active.any():
            raise _stagnation(proposals, int(jumps.sum()))
    return weighted_ks(edges_cdf, weights), int(jumps.sum()), float(jumps.sum() / proposals)


# ---------------------------------------------------------------------------
# stationary autocovariance
# ---------------------------------------------------------------------------

def time_grid(horizon, t_min=None, per_decade=12):
    """Geometric grid with ``per_decade`` points per decade up to ``horizon``."""
    t_min = horizon * 1e-4 if t_min is None else t_min
    lo = math.floor(math.log10(t_min) * per_decade + 1e-9)
    hi = math.ceil(math.log10(horizon) * per_decade - 1e-9)
    return 10.0 ** (np.arange(lo, hi + 1) / per_decade)


@dataclass(frozen=True)
class DecayFit:
    law: str             # exponential | power
    slope: float         # decay rate (exponential) or exponent (power)
    stderr: float
    ci_low: float
    ci_high: float
    rss_exponential: float
    rss_power: float
    n_points: int

    def record(self):
        return {"fit_tag": self.law, "slope_or_rate": self.slope, "stderr": self.stderr,
                "ci_low": self.ci_low, "ci_high": self.ci_high,
                "rss_exponential": self.rss_exponential, "rss_power": self.rss_power,
                "n_points": self.n_points}


@dataclass
class DecayReport:
    """Batch-level sufficient statistics; merging concatenates batches.

    ``rho_hat(t) = mean(f(X_0) f(X_t)) - mean(f(X_0)) mean(f(X_t))``; the
    standard error comes from the spread of the per-batch estimates.
    """

    times: np.ndarray
    batch_ids: np.ndarray        # (B,)
    counts: np.ndarray           # (B,)
    sum_f0: np.ndarray           # (B,)
    sum_f0sq: np.ndarray         # (B,)
    sum_ft: np.ndarray           # (B, T)
    sum_f0ft: np.ndarray         # (B, T)
    proposals: int = 0
    accepted: int = 0
    notes: list = field(default_factory=list)

    def merge(self, other):
        if not np.array_equal(self.times, other.times):
            raise SpecificationError("cannot merge reports on different time grids")
        ids = np.concatenate([self.batch_ids, other.batch_ids])
        if np.unique(ids).size != ids.size:
            raise SpecificationError("reports share batch ids")
        order = np.argsort(ids, kind="stable")

        def cat(a, b):
            return np.concatenate([a, b])[order]
        return DecayReport(self.times, ids[order], cat(self.counts, other.counts),
                           cat(self.sum_f0, other.sum_f0), cat(self.sum_f0sq, other.sum_f0sq),
                           cat(self.sum_ft, other.sum_ft),
                           cat(self.sum_f0ft, other.sum_f0ft), self.proposals + other.proposals,
                           self.accepted + other.accepted, self.notes + other.notes)

    @property
    def trajectories(self):
        return int(self.counts.sum())

    @property
    def acceptance_rate(self):
        return self.accepted / self.proposals if self.proposals else math.nan

    def _estimate(self, n, s0, st, s0t):
        n = n[..., None] if np.ndim(n) else n
        s0 = s0[..., None] if np.ndim(s0) else s0
        return s0t / n - (s0 / n) * (st / n)

    @property
    def rho_hat(self):
        return self._estimate(self.counts.sum(), self.sum_f0.sum(), self.sum_ft.sum(axis=0),
                              self.sum_f0ft.sum(axis=0))

    @property
    def stderr(self):
        B = self.counts.size
        if B < 2:
            return np.full(self.times.size, math.nan)
        per = self._estimate(self.counts, self.sum_f0, self.sum_ft, self.sum_f0ft)
        w = self.counts / self.counts.sum()
        mean = w @ per
        var = (w[:, None] * (per - mean) ** 2).sum(axis=0) * B / (B - 1)
        return np.sqrt(var / B)

    @property
    def variance(self):
        """``rho_hat(0)``: empirical variance of ``f`` under the initial law."""
        n = self.counts.sum()
        m = self.sum_f0.sum() / n
        return float(self.sum_f0sq.sum() / n - m * m)

    def rows(self):
        return list(zip(self.times.tolist(), self.rho_hat.tolist(), self.stderr.tolist()))

    def fit(self, skip_decades=1.0, min_snr=2.0):
        """Weighted log-linear (exponential) and log-log (power) fits.

        Points in the first ``skip_decades`` of the grid and points with
        ``rho_hat < min_snr * stderr`` are excluded.
        """
        t, rho, se = self.times, self.rho_hat, self.stderr
        keep = (t >= t[0] * 10 ** skip_decades) & (rho > min_snr * se) & (se > 0)
        # stop at the first point that falls into the noise
        first_bad = np.flatnonzero((t >= t[0] * 10 ** skip_decades) & ~keep)
        if first_bad.size:
            keep &= t < t[first_bad[0]]
        if keep.sum() < 4:
            raise NumericalError(f"only {int(keep.sum())} usable points for the decay fit")
        tt, lr = t[keep], np.log(rho[keep])
        w = (rho[keep] / se[keep]) ** 2
        se_, _, se_e, rss_e = linear_fit(tt, lr, w)
        sp_, _, se_p, rss_p = linear_fit(np.log(tt), lr, w)
        if rss_e <= rss_p:
            law, slope, s = "exponential", -se_, se_e
        else:
            law, slope, s = "power", -sp_, se_p
        return DecayFit(law, slope, s, slope - 1.96 * s, slope + 1.96 * s, rss_e, rss_p,
                        int(keep.sum()))


def decay_batch(pot, f, times, size, seed_seq, alpha, delta=1.0, method="auto", batch_id=0,
                max_proposals=5e8):
    """One batch of stationary trajectories recorded at ``times``."""
    sampler = make_sampler(pot, alpha, delta, method)
    rng = np.random.Generator(np.random.Philox(seed_seq))
    x = pot.sample(rng, size)
    f0 = f(x)
    G = times.size
    ft = np.empty((size, G))
    k = np.zeros(size, dtype=np.int64)
    clock = np.zeros(size)
    proposals = accepted = 0
    active = np.arange(size)
    while active.size:
        xa = x[active]
        rate = sampler.rate(xa)
        tau = rng.exponential(1.0 / rate)
        t_next = times[k[active]]
        stop = clock[active] + tau >= t_next
        # memoryless holding times: stop at the grid time and redraw afterwards
        s_idx = active[stop]
        ft[s_idx, k[s_idx]] = f(x[s_idx])
        clock[s_idx] = times[k[s_idx]]
        k[s_idx] += 1
        m_idx = active[~stop]
        if m_idx.size:
            clock[m_idx] += tau[~stop]
            x[m_idx], ok = sampler.jump(x[m_idx], rng)
            proposals += m_idx.size
            accepted += int(ok.sum())
        active = active[k[active] < G]
        if proposals > max_proposals and active.size:
            raise _stagnation(proposals, accepted)
    return DecayReport(times, np.array([batch_id]), np.array([size]), np.array([f0.sum()]),
                       np.array([(f0 * f0).sum()]), ft.sum(axis=0)[None], (f0[:, None] * ft).sum(axis=0)[None],
                       proposals, accepted)


def decay_estimate(pot, f, horizon, trajectories, alpha, delta=1.0, seed=0, batch=500,
                   t_min=None, method="auto"):
    """Stationary autocovariance of ``f`` along the chain, with fits.

    Trajectories are split into batches of ``batch`` with independent
    streams ``SeedSequence(seed).spawn``; results do not depend on how
    batches are distributed.  Returns ``(DecayReport, DecayFit or None)``.
    """
    if trajectories < 2 * batch:
        batch = max(1, trajectories // 2)
    n_batches = int(math.ceil(trajectories / batch))
    times = time_grid(horizon, t_min)
    children = np.random.SeedSequence(seed).spawn(n_batches)
    report = None
    for b, ss in enumerate(children):
        size = min(batch, trajectories - b * batch)
        part = decay_batch(pot, f, times, size, ss, alpha, delta, method, b)
        report = part if report is None else report.merge(part)
    if report.accepted == 0 or report.acceptance_rate < 1e-3:
        msg = (f"chain nearly stagnant: acceptance rate {report.acceptance_rate:.3g} "
               f"over {report.proposals} proposals")
        warnings.warn(msg)
        report.notes.append(msg)
    try:
        fit = report.fit()
    except NumericalError as exc:
        report.notes.append(str(exc))
        fit = None
    return report, fit
