"""Monte Carlo oracle for delta-mixed auctions and the surplus-equitable mechanism.

Draws are generated in fixed blocks of BLOCK profiles. Block b is produced by a
Philox generator keyed by the seed with counter word 1 set to b, so every draw
is a function of (seed, draw index) alone. Blocks may run on several threads;
their moment summaries are merged in block order, which makes estimates
bit-identical for any worker count.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import logging
import os

import numpy as np

from .equilibrium import _check_delta, bid_curve
from .mechanism import equitable_payment

log = logging.getLogger(__name__)

BLOCK = 65536
THREADS_ENV = "EQUI_AUCTION_THREADS"


class NormalizationError(ValueError):
    """Raised when a ratio metric is normalised by a quantity indistinguishable from 0."""


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    draws: int
    seed: int

    def to_dict(self):
        return {"mean": self.mean, "se": self.std_error, "draws": self.draws, "seed": self.seed}


@dataclass(frozen=True)
class AuctionResult:
    winners: np.ndarray
    prices: np.ndarray  # aligned with winners
    revenue: float
    utilities: np.ndarray
    clearing_bid: float


def default_workers():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def block_uniforms(seed, block, size, n):
    """Quantile draws (size, n) for one block of the stream keyed by seed."""
    bitgen = np.random.Philox(key=int(seed), counter=[0, int(block), 0, 0])
    return np.random.Generator(bitgen).random((size, n))


# -- moment accumulation ------------------------------------------------------

def _summary(z):
    m = z.mean(axis=0)
    d = z - m
    return z.shape[0], m, d.T @ d


def _merge(a, b):
    # pairwise update of (count, mean, centred cross-products)
    na, ma, Ca = a
    nb, mb, Cb = b
    n = na + nb
    d = mb - ma
    return n, ma + d * (nb / n), Ca + Cb + np.outer(d, d) * (na * nb / n)


def _run_blocks(stat, n_bidders, draws, seed, workers=None):
    """Mean vector and covariance of per-profile statistics over `draws` profiles."""
    draws = int(draws)
    if draws < 2:
        raise ValueError("need at least two draws")
    sizes = [min(BLOCK, draws - i) for i in range(0, draws, BLOCK)]
    workers = default_workers() if workers is None else max(1, int(workers))

    def one(b):
        return _summary(np.asarray(stat(block_uniforms(seed, b, sizes[b], n_bidders)), dtype=float))

    if workers == 1 or len(sizes) == 1:
        parts = [one(b) for b in range(len(sizes))]
    else:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(one, range(len(sizes))))
    acc = parts[0]
    for p in parts[1:]:
        acc = _merge(acc, p)
    n, mean, C = acc
    return mean, C / (n - 1), n


def _delta_se(fun, mean, cov, n):
    """Delta-method standard error of fun(mean) with a numerical gradient."""
    mean = np.asarray(mean, dtype=float)
    grad = np.empty_like(mean)
    for i in range(mean.size):
        h = 1e-6 * max(1.0, abs(mean[i]))
        up, dn = mean.copy(), mean.copy()
        up[i] += h
        dn[i] -= h
        grad[i] = (fun(up) - fun(dn)) / (2 * h)
    var = float(grad @ cov @ grad) / n
    return float(np.sqrt(max(var, 0.0)))


def _estimate(fun, mean, cov, n, seed):
    return McEstimate(float(fun(mean)), _delta_se(fun, mean, cov, n), int(n), int(seed))


# -- auction play -------------------------------------------------------------

def _play(market, delta, curve, u):
    """Vectorised outcome of profiles u (m, n) given as signal quantiles."""
    n, k, c = market.n, market.k, market.c
    s = np.asarray(market.dist.quantile(u))
    bids = np.asarray(curve.at_quantile(u))
    order = np.argsort(-bids, axis=1, kind="stable")  # ties go to the lower index
    rows = np.arange(u.shape[0])[:, None]
    winners = order[:, :k]
    rejected = order[:, k]
    clearing = bids[rows[:, 0], rejected]
    ties = np.count_nonzero(bids[rows, winners[:, -1:]][:, 0] == clearing)
    if ties:
        log.warning("%d profile(s) with a bid tie at the margin, broken by index", ties)
    wb = bids[rows, winners]
    values = (1 - c) * s[rows, winners] + c * s.mean(axis=1, keepdims=True)
    prices = delta * wb + (1 - delta) * clearing[:, None]
    util = np.zeros_like(s)
    util[rows, winners] = values - prices
    return {"s": s, "winners": winners, "prices": prices, "clearing": clearing,
            "winner_utils": values - prices, "utils": util}


def run_auction(market, delta, signals, curve=None):
    delta = _check_delta(delta)
    s = np.asarray(signals, dtype=float)
    if s.shape != (market.n,):
        raise ValueError(f"expected {market.n} signals, got shape {s.shape}")
    curve = bid_curve(market, delta) if curve is None else curve
    if curve.market != market or curve.delta != delta:
        raise ValueError("bid curve was built for a different market or delta")
    out = _play(market, delta, curve, np.atleast_2d(np.asarray(market.dist.cdf(s))))
    w = out["winners"][0]
    order = np.argsort(w)
    prices = out["prices"][0][order]
    return AuctionResult(w[order], prices, float(prices.sum()), out["utils"][0],
                         float(out["clearing"][0]))


def _curve_for(market, delta, curve):
    delta = _check_delta(delta)
    return delta, (bid_curve(market, delta) if curve is None else curve)


def _pair_stats(wu):
    # per profile: sum of squared pairwise gaps / 2 over ordered pairs, and sum of |gaps|
    k = wu.shape[1]
    d = wu[:, :, None] - wu[:, None, :]
    return (d**2).sum(axis=(1, 2)) / 2, np.abs(d).sum(axis=(1, 2)), k


# -- estimators ---------------------------------------------------------------

def estimate_wev(market, delta, draws=10**6, seed=0, curve=None, workers=None):
    """Mean over profiles of the winners' sample variance (ddof = 1)."""
    delta, curve = _curve_for(market, delta, curve)
    k = market.k

    def stat(u):
        wu = _play(market, delta, curve, u)["winner_utils"]
        return np.var(wu, axis=1, ddof=1)[:, None]

    mean, cov, n = _run_blocks(stat, market.n, draws, seed, workers)
    return _estimate(lambda m: m[0], mean, cov, n, seed)


def estimate_revenue(market, delta, draws=10**6, seed=0, curve=None, workers=None):
    delta, curve = _curve_for(market, delta, curve)

    def stat(u):
        return _play(market, delta, curve, u)["prices"].sum(axis=1)[:, None]

    mean, cov, n = _run_blocks(stat, market.n, draws, seed, workers)
    return _estimate(lambda m: m[0], mean, cov, n, seed)


def estimate_equitable_revenue(market, draws=10**6, seed=0, workers=None):
    """Expected seller revenue of the surplus-equitable mechanism (subsidies count negative).

    The subsidy G/g grows like (1 - F)^(1 - k) near the top of the support, so the
    per-profile revenue has finite variance only for k = 2.
    """
    k = market.k
    if k > 2:
        log.warning("equitable revenue has infinite variance for k > 2; the SE is unreliable")

    def stat(u):
        s = np.asarray(market.dist.quantile(u))
        top = -np.sort(-s, axis=1)
        y = np.broadcast_to(top[:, k:k + 1], (s.shape[0], k))
        return np.asarray(equitable_payment(market, top[:, :k], y)).sum(axis=1)[:, None]

    mean, cov, n = _run_blocks(stat, market.n, draws, seed, workers)
    return _estimate(lambda m: m[0], mean, cov, n, seed)


def default_deviation_grid(market):
    """Four types times four misreports, in quantiles mapped to signals."""
    types = np.array([0.2, 0.4, 0.6, 0.8])
    shifts = np.array([-0.1, -0.03, 0.03, 0.1])
    ut, ud = np.meshgrid(types, shifts, indexing="ij")
    q = market.dist.quantile
    return np.column_stack([np.asarray(q(ut.ravel())), np.asarray(q((ut + ud).ravel()))])


def regret_audit(market, delta, grid=None, draws=10**6, seed=0, curve=None, workers=None, tol=1e-4):
    """Interim gain from bidding as type z instead of s, with common opponent draws.

    Both the equilibrium and the deviating bid are read from the same curve, so
    the audit isolates the strategic deviation from interpolation error.
    """
    delta, curve = _curve_for(market, delta, curve)
    grid = default_deviation_grid(market) if grid is None else np.asarray(grid, dtype=float)
    n, k, c = market.n, market.k, market.c
    dist = market.dist
    s_true, s_dev = grid[:, 0], grid[:, 1]
    b_true = np.asarray(curve(s_true))
    b_dev = np.asarray(curve(s_dev))

    def stat(u):
        opp_s = np.asarray(dist.quantile(u))
        opp_b = np.asarray(curve.at_quantile(u))
        # k-th highest opposing bid is the price-setting bid when i wins
        kth = -np.partition(-opp_b, k - 1, axis=1)[:, k - 1][:, None]
        value = (1 - c) * s_true + c * (s_true + opp_s.sum(axis=1, keepdims=True)) / n

        def util(b):
            win = b > kth
            return np.where(win, value - delta * b - (1 - delta) * kth, 0.0)

        return util(b_dev) - util(b_true)

    mean, cov, m = _run_blocks(stat, n - 1, draws, seed, workers)
    se = np.sqrt(np.maximum(np.diag(cov), 0.0) / m)
    slack = mean - (3 * se + tol)
    return {"regret": mean, "se": se, "grid": grid, "max_regret": float(mean.max()),
            "worst": int(np.argmax(slack)), "passes": bool(np.all(slack <= 0)),
            "draws": int(m), "seed": int(seed)}


def estimate_variance_suite(market, delta, draws=10**6, seed=0, curve=None, workers=None):
    """Var, WV, EV and WEV together with residuals of their decomposition identities.

    E[u_1] and E[u_1^2] are read from bidder 0 alone so the identities are tested
    against independently formed estimates rather than holding by construction.
    """
    delta, curve = _curve_for(market, delta, curve)
    n, k = market.n, market.k

    def stat(u):
        out = _play(market, delta, curve, u)
        wu, ut = out["winner_utils"], out["utils"]
        q = (ut**2).sum(axis=1)
        lsum = ut.sum(axis=1)
        ev = (n * q - lsum**2) / (n * (n - 1))
        return np.column_stack([ut[:, 0], ut[:, 0] ** 2, wu.mean(axis=1), (wu**2).mean(axis=1),
                                np.var(wu, axis=1, ddof=1), ev])

    mean, cov, m = _run_blocks(stat, n, draws, seed, workers)
    a, b = k * (k - 1) / (n * (n - 1)), 1 - (k - 1) / (n - 1)
    funs = {
        "E_u1": lambda z: z[0],
        "E_u1_sq": lambda z: z[1],
        "Var": lambda z: z[1] - z[0] ** 2,
        "WV": lambda z: z[3] - z[2] ** 2,
        "WEV": lambda z: z[4],
        "EV": lambda z: z[5],
        "E_u1_given_win": lambda z: z[2],
        "ev_identity_residual": lambda z: z[5] - (a * z[4] + b * z[1]),
        "var_identity_residual": lambda z: (z[1] - z[0] ** 2) - (k / n * (z[3] - z[2] ** 2)
                                                                 + (n / k - 1) * z[0] ** 2),
        "conditional_mean_residual": lambda z: z[2] - n / k * z[0],
    }
    return {name: _estimate(f, mean, cov, m, seed) for name, f in funs.items()}


def gini_winners(winner_utils, n):
    """Plug-in Gini among winners from a sample of winner-utility rows (profiles x k)."""
    wu = np.atleast_2d(np.asarray(winner_utils, dtype=float))
    _, absum, _ = _pair_stats(wu)
    num = absum.mean()
    if num == 0:
        return 0.0
    den = wu.mean()
    if den == 0:
        raise NormalizationError("expected winner surplus is zero")
    return float(num / (2 * n**2 * den))


def estimate_gini_winners(market, delta, draws=10**6, seed=0, curve=None, workers=None):
    """E[sum_ij |u_i - u_j| over winners] / (2 n^2 E[u_1 | 1 wins]) with a delta-method SE."""
    delta, curve = _curve_for(market, delta, curve)
    n = market.n

    def stat(u):
        wu = _play(market, delta, curve, u)["winner_utils"]
        return np.column_stack([_pair_stats(wu)[1], wu.mean(axis=1)])

    mean, cov, m = _run_blocks(stat, n, draws, seed, workers)
    if mean[0] == 0 and cov[0, 0] == 0:
        return McEstimate(0.0, 0.0, int(m), int(seed))
    den_se = np.sqrt(cov[1, 1] / m)
    if abs(mean[1]) <= max(3 * den_se, 1e-12):
        raise NormalizationError(f"expected winner surplus {mean[1]:.3g} is not distinguishable "
                                 f"from zero (SE {den_se:.2g})")
    return _estimate(lambda z: z[0] / (2 * n**2 * z[1]), mean, cov, m, seed)
