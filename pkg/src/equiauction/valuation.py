"""Market environment and the conditional value functions.

Values interpolate between private and common:

    v_i = (1 - c) s_i + (c / n) sum_j s_j

Conditioning on being pivotal (own signal x, k-th highest opposing signal y)
gives V~(x, y); V(s) = V~(s, s) is the expected value at the margin.
"""
from dataclasses import dataclass

import numpy as np

from .distributions import QuantileOrderStat, SignalDistribution, from_config


@dataclass(frozen=True)
class Market:
    n: int
    k: int
    c: float
    dist: SignalDistribution

    def __post_init__(self):
        if int(self.n) != self.n or int(self.k) != self.k:
            raise ValueError("n and k must be integers")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "c", float(self.c))
        if not 2 <= self.k < self.n:
            raise ValueError(f"need 2 <= k < n, got n={self.n}, k={self.k}")
        if not 0.0 <= self.c <= 1.0:
            raise ValueError(f"common-value share c={self.c} outside [0, 1]")
        if isinstance(self.dist, dict):
            object.__setattr__(self, "dist", from_config(self.dist))

    @property
    def pivot(self):
        """Law of the k-th highest of the n - 1 opposing quantiles (G in quantile space)."""
        return QuantileOrderStat(self.k, self.n - 1)

    @property
    def pivot_pair(self):
        """Law of the (k-1)-th highest of n - 2 quantiles (H in quantile space)."""
        return QuantileOrderStat(self.k - 1, self.n - 2)

    def with_c(self, c):
        return Market(self.n, self.k, c, self.dist)

    def to_config(self):
        return {"n": self.n, "k": self.k, "c": self.c, "dist": self.dist.to_config()}


def value_ex_post(market, signals, i):
    s = np.asarray(signals, dtype=float)
    if s.shape[-1] != market.n:
        raise ValueError(f"expected {market.n} signals, got {s.shape[-1]}")
    c = market.c
    return (1 - c) * s[..., i] + c * s.mean(axis=-1)


def _moments(market, y):
    # E[s|s<=y], E[s|s>=y] with the endpoint limits filled in
    d = market.dist
    y = np.asarray(y, dtype=float)
    F = np.asarray(d.cdf(y))
    S = np.asarray(d.sf(y))
    with np.errstate(divide="ignore", invalid="ignore"):
        below = np.where(F > 0, y - np.asarray(d.int_cdf(y)) / F, 0.0)
        above = np.where(S > 0, y + np.asarray(d.int_sf(y)) / S, d.support_hi)
    return below, above


def _check_support(market, s):
    s = np.asarray(s, dtype=float)
    if np.any(s < 0) or np.any(s > market.dist.support_hi):
        raise ValueError("signal outside the support")
    return s


def _scalar(x, like):
    return float(x) if np.ndim(like) == 0 else x


def v_tilde(market, x, y):
    """Expected value given own signal x and k-th highest opposing signal y."""
    x0 = x
    x = _check_support(market, x)
    y = _check_support(market, y)
    n, k, c = market.n, market.k, market.c
    below, above = _moments(market, y)
    common = x / n + y / n + (n - k - 1) / n * below + (k - 1) / n * above
    return _scalar((1 - c) * x + c * common, np.broadcast(x0, y))


def V(market, s):
    """V(s) = V~(s, s)."""
    s0 = s
    s = _check_support(market, s)
    n, k, c = market.n, market.k, market.c
    below, above = _moments(market, s)
    common = 2 * s / n + (n - k - 1) / n * below + (k - 1) / n * above
    return _scalar((1 - c) * s + c * common, s0)


def _dmoment_terms(market, s):
    # int F / F^2 and int(1-F) / (1-F)^2; multiplied by f these are the
    # derivatives of the truncated means
    d = market.dist
    F = np.asarray(d.cdf(s))
    S = np.asarray(d.sf(s))
    with np.errstate(divide="ignore", invalid="ignore"):
        edge = 0.5 / np.asarray(d.pdf(s))  # limit at either endpoint for a smooth f
        lo = np.where(F > 0, np.asarray(d.int_cdf(s)) / F**2, edge)
        hi = np.where(S > 0, np.asarray(d.int_sf(s)) / S**2, edge)
    return lo, hi


def V_prime(market, s):
    """Analytic derivative of V. Endpoints are replaced by nearby one-sided values."""
    s0 = s
    s = _check_support(market, s)
    hi = market.dist.support_hi
    s = np.clip(s, 1e-9 * hi, hi * (1 - 1e-9))
    n, k, c = market.n, market.k, market.c
    f = np.asarray(market.dist.pdf(s))
    lo, up = _dmoment_terms(market, s)
    out = (1 - c) + c * (2 / n + f * ((n - k - 1) / n * lo + (k - 1) / n * up))
    return _scalar(out, s0)


def value_in_quantiles(market, u):
    """Signal, V and dV/du at quantile levels u in (0, 1).

    dV/du = V'(s) / f(s); the truncated-moment part does not involve f, which keeps
    it finite where the density is tiny.
    """
    u = np.asarray(u, dtype=float)
    d = market.dist
    n, k, c = market.n, market.k, market.c
    s = np.asarray(d.quantile(u))
    below, above = _moments(market, s)
    v = (1 - c) * s + c * (2 * s / n + (n - k - 1) / n * below + (k - 1) / n * above)
    lo, up = _dmoment_terms(market, s)
    with np.errstate(divide="ignore"):
        inv_f = 1.0 / np.asarray(d.pdf(s))
    vw = (1 - c + 2 * c / n) * inv_f
    if c > 0:
        vw = vw + c * ((n - k - 1) / n * lo + (k - 1) / n * up)
    return s, v, vw
