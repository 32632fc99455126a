"""Symmetric equilibrium bids of the delta-mixed auction.

A winner pays delta * (own bid) + (1 - delta) * (first rejected bid). The
equilibrium bid solves (V - beta) g = delta beta' G, so

    beta(s) = int_0^s V(y) g(y) G(y)^(1/delta - 1) dy / (delta G(s)^(1/delta))   (ratio form)
            = V(s) - int_0^s V'(y) (G(y) / G(s))^(1/delta) dy                   (by parts)

Everything is evaluated in quantile space u = F(s), where G is a Beta cdf. The
kernel rho(w) = (G(w) / G(u))^(1/delta) is handled through log G, and panels on
which rho decays by many e-folds are integrated in the variable x = -log rho.

Bid values come from the ratio form, a weighted average of V with no
cancellation at either end of the support. The by-parts shading V - beta is
used for slopes, where it avoids the cancellation in V - beta near zero.
"""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import optimize
from scipy.interpolate import CubicHermiteSpline

from .distributions import gauss_legendre
from .valuation import V, Market, V_prime, v_tilde, value_in_quantiles

NODES = 1024
FLOOR = 1e-14
_ORDER = 16
_DIRECT_EFOLDS = 4.0
_MAX_EFOLDS = 40.0
_X_EDGES = np.array([0.0, 2.0, 4.0, 8.0, 16.0, 24.0, 32.0, 40.0])


class NoSolution(ValueError):
    pass


def quantile_nodes(market, nodes=NODES, floor=FLOOR):
    """Chebyshev nodes on (0, 1) plus geometric refinement at both ends and breakpoints."""
    j = np.arange(nodes)
    cheb = 0.5 * (1.0 - np.cos(np.pi * (j + 0.5) / nodes))
    edge = cheb[0]
    levels = int(np.ceil(np.log2(edge / floor)))
    geo = edge * 2.0 ** -np.arange(1, levels + 1)
    pts = [cheb, geo, 1.0 - geo]
    for bp in market.dist.breakpoints:
        side = min(bp, 1 - bp) * 2.0 ** -np.arange(1, levels + 1)
        pts += [np.array([bp, np.nextafter(bp, 0.0)]), bp - side, bp + side]
    u = np.unique(np.concatenate(pts))
    return u[(u > 0) & (u < 1)]


def _panel_integrals(market, delta, a, b, order=_ORDER):
    """Kernel integrals over panels [a, b] ending at the evaluation point b.

    Returns (ratio, ibp, sens, logr) with rho(w) = (G(w)/G(b))^(1/delta):
        ratio = int V (g / (delta G)) rho dw
        ibp   = int V_u rho dw
        sens  = int V_u log(rho) rho dw
        logr  = log rho(a)
    """
    piv = market.pivot
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    lgb = piv.logcdf(b)
    with np.errstate(divide="ignore"):
        logr = (piv.logcdf(a) - lgb) / delta
    ratio = np.zeros_like(b)
    ibp = np.zeros_like(b)
    sens = np.zeros_like(b)
    xg, wg = gauss_legendre(order)

    direct = -logr <= _DIRECT_EFOLDS
    if np.any(direct):
        ad, bd = a[direct], b[direct]
        half = 0.5 * (bd - ad)[:, None]
        w = ad[:, None] + half * (xg + 1.0)
        _, v, vu = value_in_quantiles(market, w)
        lg = piv.logcdf(w)
        logrho = (lg - lgb[direct][:, None]) / delta
        rho = np.exp(logrho)
        kern = piv.pdf(w) / np.exp(lg) / delta * rho
        mass = -np.expm1(logr[direct])
        kq = np.sum(kern * wg, axis=1) * half[:, 0]
        vk = np.sum(v * kern * wg, axis=1) * half[:, 0]
        # renormalise so a constant V is integrated exactly
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio[direct] = np.where(kq > 0, vk * mass / kq, 0.0)
        ibp[direct] = np.sum(vu * rho * wg, axis=1) * half[:, 0]
        with np.errstate(invalid="ignore"):
            slog = np.where(rho > 0, vu * logrho * rho, 0.0)
        sens[direct] = np.sum(slog * wg, axis=1) * half[:, 0]

    far = ~direct
    if np.any(far):
        X = np.minimum(-logr[far], _MAX_EFOLDS)
        lo = np.minimum(_X_EDGES[:-1][None, :], X[:, None])
        hi = np.minimum(_X_EDGES[1:][None, :], X[:, None])
        half = 0.5 * (hi - lo)[..., None]
        x = lo[..., None] + half * (xg + 1.0)
        wts = (half * wg) * np.exp(-x)
        lgw = lgb[far][:, None, None] - delta * x
        w = piv.ppf_log(lgw)
        _, v, vu = value_in_quantiles(market, w)
        dw = delta * np.exp(lgw - np.log(piv.pdf(w)))  # delta G/g = -dw/dx
        ratio[far] = np.sum(v * wts, axis=(1, 2))
        ibp[far] = np.sum(vu * dw * wts, axis=(1, 2))
        sens[far] = np.sum(-x * vu * dw * wts, axis=(1, 2))
    return ratio, ibp, sens, logr


def _accumulate(ratio, ibp, sens, logr):
    n = ratio.size
    beta = np.empty(n)
    D = np.empty(n)
    S = np.empty(n)
    b_prev = d_prev = s_prev = 0.0
    r = np.exp(logr)
    for j in range(n):
        if r[j] > 0.0:
            s_prev = r[j] * (s_prev + logr[j] * d_prev)
            b_prev = r[j] * b_prev
            d_prev = r[j] * d_prev
        else:
            b_prev = d_prev = s_prev = 0.0
        b_prev += ratio[j]
        d_prev += ibp[j]
        s_prev += sens[j]
        beta[j], D[j], S[j] = b_prev, d_prev, s_prev
    return beta, D, S


@lru_cache(maxsize=256)
def _tabulate(market, delta, nodes=NODES):
    u = quantile_nodes(market, nodes)
    a = np.concatenate([[0.0], u[:-1]])
    beta, D, S = _accumulate(*_panel_integrals(market, delta, a, u))
    for arr in (u, beta, D, S):
        arr.setflags(write=False)
    return u, beta, D, S


def _at_quantiles(market, delta, q, nodes=NODES):
    """Ratio-form bid, by-parts shading D and sensitivity at quantiles q in (0, 1]."""
    u, beta, D, S = _tabulate(market, delta, nodes)
    q = np.asarray(q, dtype=float)
    j = np.searchsorted(u, q, side="left")  # u[j-1] < q <= u[j]
    left = np.where(j > 0, u[np.maximum(j - 1, 0)], 0.0)
    ratio, ibp, sens, logr = _panel_integrals(market, delta, left, q)
    r = np.exp(logr)
    prev = j > 0
    jb = np.maximum(j - 1, 0)
    b0 = np.where(prev, beta[jb], 0.0)
    d0 = np.where(prev, D[jb], 0.0)
    s0 = np.where(prev, S[jb], 0.0)
    with np.errstate(invalid="ignore"):
        sens_carry = np.where(r > 0, r * (s0 + logr * d0), 0.0)
    return r * b0 + ratio, r * d0 + ibp, sens_carry + sens


def _evaluate(market, delta, q, form="auto", nodes=NODES):
    """Bid, quantile-space slope and sensitivity at quantiles q in (0, 1]."""
    q = np.asarray(q, dtype=float)
    s, v, vu = value_in_quantiles(market, q)
    if delta == 0:
        return v, vu, np.zeros_like(q)
    b_ratio, D_ibp, sens = _at_quantiles(market, delta, q, nodes)
    piv = market.pivot
    G = piv.cdf(q)
    if form not in ("auto", "ratio", "parts"):
        raise ValueError(f"unknown form {form!r}")
    use_ratio = market.dist.singular or form != "parts"
    bid = np.where(use_ratio, b_ratio, v - D_ibp)
    # the by-parts shading avoids cancellation in V - beta near zero
    D = (v - b_ratio) if market.dist.singular else D_ibp
    with np.errstate(invalid="ignore", divide="ignore"):
        slope_u = np.where(q < 1, piv.pdf(q) / (delta * G) * D, 0.0)
    return bid, slope_u, sens


def _check_delta(delta, allow_zero=True):
    delta = float(delta)
    if not (0.0 <= delta <= 1.0) or (delta == 0 and not allow_zero):
        raise ValueError(f"delta={delta} outside the admissible range")
    return delta


def _signal_query(market, s):
    s = np.asarray(s, dtype=float)
    if np.any(s < 0) or np.any(s > market.dist.support_hi):
        raise ValueError("signal outside the support")
    flat = np.atleast_1d(s).ravel()
    return flat, np.atleast_1d(np.asarray(market.dist.cdf(flat)))


def _reshape(out, like):
    like = np.asarray(like)
    return float(out[0]) if like.ndim == 0 else out.reshape(like.shape)


def _scalar(x, like):
    return float(x) if np.ndim(like) == 0 else x


def bid_uniform(market, s):
    """Uniform-price equilibrium bid: beta0 = V."""
    return V(market, s)


def bid_mixed(market, delta, s, form="auto"):
    """Equilibrium bid of the delta-mixed auction at signal(s) s."""
    delta = _check_delta(delta)
    if delta == 0:
        return bid_uniform(market, s)
    flat, u = _signal_query(market, s)
    out = np.full(u.shape, float(V(market, 0.0)))
    pos = u > 0
    if np.any(pos):
        out[pos] = _evaluate(market, delta, u[pos], form)[0]
    return _reshape(out, s)


def bid_slope(market, delta, s):
    """d beta / d s at interior signals."""
    delta = _check_delta(delta)
    if delta == 0:
        return V_prime(market, s)
    flat, u = _signal_query(market, s)
    uq = np.clip(u, FLOOR, 1.0)
    out = _evaluate(market, delta, uq)[1] * np.asarray(market.dist.pdf(flat))
    return _reshape(out, s)


def bid_delta_sensitivity(market, delta, s):
    """delta * d beta / d delta (nonpositive)."""
    delta = _check_delta(delta)
    flat, u = _signal_query(market, s)
    out = np.zeros_like(u)
    pos = u > 0
    if delta > 0 and np.any(pos):
        out[pos] = _evaluate(market, delta, u[pos])[2]
    return _reshape(out, s)


@dataclass(frozen=True, eq=False)
class BidCurve:
    """Tabulated equilibrium bid, interpolated in quantile space with analytic slopes.

    ``grid`` holds signals, ``values`` bids and ``slope_values`` d beta/ds.
    """

    market: Market
    delta: float
    quantiles: np.ndarray
    grid: np.ndarray
    values: np.ndarray
    slope_values: np.ndarray
    quantile_slopes: np.ndarray = field(repr=False)
    _pieces: tuple = field(repr=False, default=())

    def at_quantile(self, u):
        u = np.asarray(u, dtype=float)
        out = np.empty_like(u)
        for lo, hi, spline in self._pieces:
            mask = (u >= lo) & (u <= hi)
            if np.any(mask):
                out[mask] = spline(u[mask])
        return _scalar(out, u)

    def __call__(self, s):
        return self.at_quantile(self.market.dist.cdf(s))


def bid_curve(market, delta, nodes=NODES):
    delta = _check_delta(delta)
    u = np.concatenate([[0.0], quantile_nodes(market, nodes), [1.0]])
    s = np.asarray(market.dist.quantile(u))
    bid, slope_u, _ = _evaluate(market, delta, u[1:])
    v0 = V(market, 0.0)
    bid = np.concatenate([[v0], bid])
    slope_u = np.concatenate([[slope_u[0]], slope_u])
    f = np.asarray(market.dist.pdf(s))
    if delta == 0:
        slope = np.asarray(V_prime(market, s), dtype=float)
    else:
        with np.errstate(invalid="ignore"):
            slope = np.where(slope_u == 0, 0.0, slope_u * f)
    # dV/du diverges where the density vanishes at an end of the support;
    # the spline takes the one-sided secant there instead
    bad = ~np.isfinite(slope_u)
    if np.any(bad):
        secant = np.diff(bid) / np.diff(u)
        idx = np.flatnonzero(bad)
        slope_u = slope_u.copy()
        slope_u[idx] = secant[np.clip(np.where(idx > 0, idx - 1, 0), 0, secant.size - 1)]
    # split at breakpoints: node pairs (nextafter(bp), bp) end and start pieces
    cuts = [0]
    for bp in market.dist.breakpoints:
        cuts.append(int(np.searchsorted(u, bp)))
    cuts.append(u.size)
    pieces = []
    for i0, i1 in zip(cuts[:-1], cuts[1:]):
        sl = slice(i0, i1)
        spline = CubicHermiteSpline(u[sl], bid[sl], slope_u[sl])
        hi = u[i1] if i1 < u.size else 1.0
        pieces.append((u[i0], hi, spline))
    return BidCurve(market, delta, u, s, bid, slope, slope_u, tuple(pieces))


# -- reserve prices -----------------------------------------------------------

def _mean_below(market, fun, v, order=_ORDER):
    """E[fun(W) | W <= v] for W ~ G (quantile space), via t = G(W)/G(v) = exp(-x)."""
    piv = market.pivot
    xg, wg = gauss_legendre(order)
    lo, hi = _X_EDGES[:-1], _X_EDGES[1:]
    half = 0.5 * (hi - lo)[:, None]
    x = lo[:, None] + half * (xg + 1.0)
    w = piv.ppf_log(piv.logcdf(v) - x)
    return float(np.sum(fun(w) * half * wg * np.exp(-x)))


def reserve_participation_value(market, x):
    """E[V~(x, Y) | Y <= x], the expected value of just winning at signal x."""
    if x <= 0:
        return float(V(market, 0.0))
    v = float(market.dist.cdf(x))
    q = market.dist.quantile
    return _mean_below(market, lambda w: v_tilde(market, np.full_like(w, x), q(w)), v)


def reserve_threshold(market, r):
    """Participation threshold s_r solving int_0^s_r V~(s_r, y) g dy = r G(s_r).

    Returns 0 when r does not exceed V(0), since then every signal participates.
    """
    r = float(r)
    if not r > 0:
        raise ValueError("reserve price must be positive")
    hi = market.dist.support_hi
    if r <= float(V(market, 0.0)):
        return 0.0
    top = reserve_participation_value(market, hi)
    if r >= top:
        raise NoSolution(f"reserve {r} exceeds the largest attainable value {top:.6g}")
    return optimize.brentq(lambda x: reserve_participation_value(market, x) - r,
                           0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)


def _payasbid_parts(market, s):
    s = np.asarray(s, dtype=float)
    u = np.asarray(market.dist.cdf(s))
    v = np.asarray(V(market, s))
    b1, slope_u, _ = _evaluate(market, 1.0, np.maximum(u, FLOOR))
    D = v - b1
    return u, v, D, slope_u


def bid_payasbid_reserve(market, r, s, s_r=None):
    """Pay-as-bid bid with reserve r; 0 (abstain) below the threshold s_r.

    beta_r(s) = V(s) + (r - V(s_r)) G(s_r)/G(s) - int_{s_r}^s V' G dy / G(s)
    """
    if s_r is None:
        s_r = reserve_threshold(market, r)
    s0 = s
    s = np.atleast_1d(np.asarray(s, dtype=float))
    out = np.zeros_like(s)
    act = s >= s_r
    if np.any(act):
        piv = market.pivot
        u, v, D, _ = _payasbid_parts(market, s[act])
        if s_r > 0:
            ur, vr, Dr, _ = _payasbid_parts(market, s_r)
            ratio = piv.cdf(ur) / piv.cdf(u)
            # int_{s_r}^s V'G / G(s) = D(s) - D(s_r) G(s_r)/G(s)
            out[act] = v + (r - vr) * ratio - (D - Dr * ratio)
        else:
            out[act] = v - D
    return _scalar(out if np.ndim(s0) else out[0], s0)


def bid_payasbid_reserve_slope(market, r, s, s_r=None):
    if s_r is None:
        s_r = reserve_threshold(market, r)
    s0 = s
    s = np.atleast_1d(np.asarray(s, dtype=float))
    out = np.zeros_like(s)
    act = s >= s_r
    if np.any(act):
        piv = market.pivot
        u, v, D, slope_u = _payasbid_parts(market, s[act])
        f = np.asarray(market.dist.pdf(s[act]))
        if s_r > 0:
            ur, vr, Dr, _ = _payasbid_parts(market, s_r)
            corr = (vr - r - Dr) * piv.cdf(ur) * piv.pdf(u) / piv.cdf(u) ** 2
            out[act] = (slope_u + corr) * f
        else:
            out[act] = slope_u * f
    return _scalar(out if np.ndim(s0) else out[0], s0)
