"""Equity of winner surpluses: utilities, WEV, monotone ex-post utility, dominance.

For two winners of a delta-mixed auction the utility gap is phi(s_i) - phi(s_j)
with phi(s) = (1 - c) s - delta beta(s), because the clearing price and the
common-value term cancel. The winners' empirical variance (WEV) is

    WEV = E[phi(s_1)^2 | 1 wins] - E[phi(s_1) phi(s_2) | 1, 2 win] = A - B

and both terms reduce to one-dimensional integrals over quantiles.
"""
from dataclasses import dataclass
from functools import lru_cache
import warnings

import numpy as np

from .distributions import gauss_legendre
from .equilibrium import NODES, _check_delta, _evaluate, bid_curve, bid_mixed, quantile_nodes
from .valuation import value_ex_post

WEV_PANELS = 128
WEV_ORDER = 16
MEU_TOL = 1e-9
DOMINANCE_TOL = 1e-8


class QuadratureWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Outcome:
    utilities: np.ndarray
    winners: np.ndarray
    clearing_bid: float


@dataclass(frozen=True)
class EquityReport:
    delta: float
    c: float
    meu_holds: bool
    meu_margin: float
    max_slope: float
    wev: float = None

    def to_dict(self):
        return {"c": self.c, "delta": self.delta, "wev": self.wev, "meu_holds": self.meu_holds,
                "meu_margin": self.meu_margin, "max_slope": self.max_slope}


def surplus_phi(market, delta, s):
    """phi(s) = (1 - c) s - delta beta(s)."""
    delta = _check_delta(delta)
    s_arr = np.asarray(s, dtype=float)
    out = (1 - market.c) * s_arr
    if delta > 0:
        out = out - delta * np.asarray(bid_mixed(market, delta, s_arr))
    return float(out) if np.ndim(s) == 0 else out


def rank_winners(signals, k):
    """Indices of the k highest signals (ties to the lower index) and of the first rejected."""
    s = np.asarray(signals, dtype=float)
    order = np.lexsort((np.arange(s.size), -s))
    return order[:k], order[k]


def ex_post_utilities(market, delta, signals, bids=None):
    """Realised surpluses for one signal profile.

    ``bids`` may be a callable signal -> bid (e.g. a BidCurve) to share bid values
    with another code path; by default equilibrium bids are computed directly.
    """
    delta = _check_delta(delta)
    s = np.asarray(signals, dtype=float)
    if s.shape != (market.n,):
        raise ValueError(f"expected {market.n} signals, got shape {s.shape}")
    b = np.asarray(bids(s) if bids is not None else bid_mixed(market, delta, s), dtype=float)
    winners, rejected = rank_winners(s, market.k)
    clearing = float(b[rejected])
    u = np.zeros(market.n)
    for i in winners:
        u[i] = value_ex_post(market, s, i) - delta * b[i] - (1 - delta) * clearing
    return Outcome(u, np.sort(winners), clearing)


def empirical_variance(utilities):
    """Unbiased sample variance of a vector of winner surpluses."""
    u = np.asarray(utilities, dtype=float)
    return float(np.var(u, ddof=1))


@lru_cache(maxsize=None)
def _integration_matrix(m):
    # maps values at Gauss nodes to int_{x_i}^{1} of their interpolant
    x, _ = gauss_legendre(m)
    vand = np.polynomial.legendre.legvander(x, m - 1)
    W = np.empty((m, m))
    for l in range(m):
        coef = np.zeros(m)
        coef[l] = 1.0
        anti = np.polynomial.legendre.legint(coef)
        W[:, l] = np.polynomial.legendre.legval(1.0, anti) - np.polynomial.legendre.legval(x, anti)
    return W @ np.linalg.inv(vand), np.linalg.inv(vand)


def wev_components(market, delta, panels=WEV_PANELS, order=WEV_ORDER):
    """A, B, WEV = A - B and a per-panel interpolation error estimate."""
    delta = _check_delta(delta)
    n, k, c = market.n, market.k, market.c
    edges = np.concatenate([[0.0], quantile_nodes(market, panels), [1.0]])
    a, b = edges[:-1], edges[1:]
    keep = b > a
    a, b = a[keep], b[keep]
    x, w = gauss_legendre(order)
    half = 0.5 * (b - a)[:, None]
    u = a[:, None] + half * (x + 1.0)
    s = np.asarray(market.dist.quantile(u))
    phi = (1 - c) * s
    if delta > 0:
        bid = _evaluate(market, delta, u.ravel())[0].reshape(u.shape)
        phi = phi - delta * bid
    piv, pair = market.pivot, market.pivot_pair
    A = n / k * np.sum(half * w * phi**2 * piv.cdf(u))
    M, inv_vand = _integration_matrix(order)
    inner = half * (phi @ M.T)  # int from node to panel end
    full = np.sum(half * w * phi, axis=1)
    after = np.concatenate([np.cumsum(full[::-1])[::-1][1:], [0.0]])
    Phi = inner + after[:, None]
    B = n * (n - 1) / (k * (k - 1)) * np.sum(half * w * Phi**2 * pair.pdf(u))
    tail = float(np.sum(np.abs(phi @ inv_vand.T)[:, -1] * 2 * half[:, 0]))
    return {"A": float(A), "B": float(B), "wev": float(A - B), "tail": tail}


def wev(market, delta, panels=WEV_PANELS, order=WEV_ORDER, rtol=1e-6):
    """Winners' empirical variance by quadrature; warns if the error estimate exceeds rtol."""
    comp = wev_components(market, delta, panels, order)
    scale = max(comp["A"], 1e-300)
    if comp["tail"] > rtol * scale and comp["tail"] > 1e-12:
        warnings.warn(f"WEV quadrature error estimate {comp['tail']:.2e} "
                      f"(relative {comp['tail'] / scale:.2e})", QuadratureWarning, stacklevel=2)
    w = comp["wev"]
    return 0.0 if -1e-12 < w < 0 else w


def meu_verdict(market, delta, tol=MEU_TOL, nodes=NODES):
    """Monotone ex-post utility holds iff beta' <= (1 - c) / delta everywhere.

    The supremum is taken over the bid-curve nodes; ``meu_holds`` allows ``tol``.
    """
    delta = _check_delta(delta)
    c = market.c
    if delta == 0:
        return EquityReport(delta, c, True, float("inf"), float("nan"))
    curve = bid_curve(market, delta, nodes)
    slopes = curve.slope_values[np.isfinite(curve.slope_values)]
    max_slope = float(slopes.max())
    bound = (1 - c) / delta
    return EquityReport(delta, c, bool(max_slope <= bound + tol), bound - max_slope, max_slope)


def equity_report(market, delta, tol=MEU_TOL):
    r = meu_verdict(market, delta, tol)
    return EquityReport(r.delta, r.c, r.meu_holds, r.meu_margin, r.max_slope, wev(market, delta))


def default_pairs(market, grid=64, random_pairs=1000, seed=0):
    """Signal pairs: a grid x grid tensor of quantile midpoints plus random pairs."""
    q = (np.arange(grid) + 0.5) / grid
    qi, qj = np.meshgrid(q, q, indexing="ij")
    rng = np.random.default_rng(seed)
    r = rng.random((random_pairs, 2))
    ui = np.concatenate([qi.ravel(), r[:, 0]])
    uj = np.concatenate([qj.ravel(), r[:, 1]])
    dist = market.dist
    return np.asarray(dist.quantile(ui)), np.asarray(dist.quantile(uj))


def pairwise_dominance(market, delta_a, delta_b, pairs=None, tol=DOMINANCE_TOL):
    """Compare winner-utility gaps |phi(s_i) - phi(s_j)| under two pricing rules.

    Returns a dict with ``verdict`` in {"DOMINATES", "DOMINATED", "INCOMPARABLE"}
    (from the point of view of delta_a), the largest gap difference each way and
    the pair that witnesses strictness.
    """
    si, sj = default_pairs(market) if pairs is None else (np.asarray(p, dtype=float) for p in pairs)
    if si.size == 0:
        raise ValueError("empty pair grid")
    pts, inv = np.unique(np.concatenate([si, sj]), return_inverse=True)
    pa = np.asarray(surplus_phi(market, delta_a, pts))[inv]
    pb = np.asarray(surplus_phi(market, delta_b, pts))[inv]
    m = si.size
    da = np.abs(pa[:m] - pa[m:])
    db = np.abs(pb[:m] - pb[m:])
    diff = db - da  # positive where delta_a has the smaller gap
    a_weak = bool(np.all(diff >= -tol))
    b_weak = bool(np.all(diff <= tol))
    if a_weak and np.any(diff > tol):
        verdict, idx = "DOMINATES", int(np.argmax(diff))
    elif b_weak and np.any(diff < -tol):
        verdict, idx = "DOMINATED", int(np.argmin(diff))
    else:
        verdict, idx = "INCOMPARABLE", None
    witness = None if idx is None else (float(si[idx]), float(sj[idx]))
    return {"verdict": verdict, "max_gain": float(diff.max()), "max_loss": float(-diff.min()),
            "witness": witness, "pairs": int(m)}


def theory_bounds(market):
    """Lower bounds on the WEV-minimising delta and the range that dominates uniform pricing."""
    n, k, c = market.n, market.k, market.c
    out = {"lb_logconcave": 1 - c, "dominating_range_hi": min(1.0, 2 * (1 - c))}
    kind = market.dist.kind
    if kind == "uniform":
        out["lb_distribution"] = 2 * n * (1 - c) / (2 * n - c * (n - 2))
    elif kind == "truncated-exponential":
        out["lb_distribution"] = 2 * n * (1 - c) / (2 * n - c * (n - (k + 1)))
    return out
