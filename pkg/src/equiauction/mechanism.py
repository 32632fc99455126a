"""Surplus-equitable direct mechanism.

A winner reporting s_i when the first rejected signal is y pays

    p(s_i, y) = (1 - c) (s_i - y - G(y)/g(y)) + V(y)

so value minus payment no longer depends on the winner's own signal. The
(1 - c) part has zero interim mean, hence the interim payment equals that of
every standard winners-pay auction. Payments may be negative (subsidies).
"""
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .distributions import gauss_legendre
from .equity import rank_winners
from .valuation import V, v_tilde, value_ex_post

CLAMP = 1e-9  # first rejected signals are capped at quantile 1 - CLAMP
_PANELS = 8
_GRADE = 4.0
_GRADE_STEPS = 20
_CHUNK = 256
_ORDER = 16


@dataclass(frozen=True)
class MechanismResult:
    winners: np.ndarray
    payments: np.ndarray
    utilities: np.ndarray
    first_rejected: float

    @property
    def budget(self):
        """Sum of transfers to the seller; negative when subsidies dominate."""
        return float(self.payments.sum())

    def to_dict(self):
        return {"winners": [int(i) for i in self.winners],
                "payments": [float(p) for p in self.payments],
                "utilities": [float(u) for u in self.utilities],
                "first_rejected": self.first_rejected, "budget": self.budget}


def _g_ratio(market, y):
    # G(y)/g(y) for the k-th highest of the n - 1 opposing signals
    d = market.dist
    y = np.minimum(np.asarray(y, dtype=float), d.quantile(1 - CLAMP))
    u = np.asarray(d.cdf(y))
    f = np.asarray(d.pdf(y))
    interior = (y > 0) & (y < d.support_hi)
    if np.any(interior & (f <= 0)):
        raise ValueError("signal density vanishes inside the support")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(u > 0, market.pivot.cdf_over_pdf(u) / f, 0.0)
    return y, out


def equitable_payment(market, s_i, y):
    """Payment of a winner with signal s_i facing first rejected signal y (0 if s_i <= y)."""
    s0 = np.broadcast(np.asarray(s_i), np.asarray(y))
    s_i = np.asarray(s_i, dtype=float)
    y = np.asarray(y, dtype=float)
    hi = market.dist.support_hi
    if np.any((s_i < 0) | (s_i > hi) | (y < 0) | (y > hi)):
        raise ValueError("signal outside the support")
    yc, ratio = _g_ratio(market, y)
    c = market.c
    pay = (1 - c) * (s_i - yc - ratio) + np.asarray(V(market, yc))
    out = np.where(s_i > y, pay, 0.0)
    return float(out) if s0.ndim == 0 else out


def equitable_outcome(market, signals):
    s = np.asarray(signals, dtype=float)
    if s.shape != (market.n,):
        raise ValueError(f"expected {market.n} signals, got shape {s.shape}")
    winners, rejected = rank_winners(s, market.k)
    y = float(s[rejected])
    payments = np.zeros(market.n)
    utilities = np.zeros(market.n)
    for i in winners:
        payments[i] = equitable_payment(market, s[i], y)
        utilities[i] = value_ex_post(market, s, i) - payments[i]
    return MechanismResult(np.sort(winners), payments, utilities, y)


def _quantile_rule(market, upper, cuts=()):
    """Composite Gauss-Legendre nodes/weights on [0, upper] in quantile space.

    Panels are graded geometrically toward 0 and toward 1 - upper, where 1/f
    grows like 1/(1 - u) for thin-tailed densities. Extra cut points (quantiles,
    one per row) are honoured when inside. Returns u (m, p) and w (m, p).
    """
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    scale = _GRADE ** -np.arange(1, _GRADE_STEPS + 1)
    gap = (1.0 - upper)[:, None]
    edges = [upper[:, None] * np.linspace(0.0, 1.0, _PANELS + 1)[None, :],
             np.minimum(scale[None, :], upper[:, None]),
             np.clip(1.0 - gap / scale[None, :], 0.0, upper[:, None])]
    for cq in cuts:
        cq = np.broadcast_to(np.asarray(cq, dtype=float), upper.shape)
        edges.append(np.minimum(cq, upper)[:, None])
    for b in market.dist.breakpoints:
        edges.append(np.minimum(float(market.dist.cdf(b)), upper)[:, None])
    edges = np.sort(np.concatenate(edges, axis=1), axis=1)
    a, b = edges[:, :-1], edges[:, 1:]
    x, w = gauss_legendre(_ORDER)
    half = 0.5 * (b - a)
    u = a[..., None] + half[..., None] * (x + 1.0)
    wt = half[..., None] * w
    m = upper.size
    return u.reshape(m, -1), wt.reshape(m, -1)


def interim_expected_payment(market, s):
    """P(s) = int_0^s V(y) g(y) dy, the interim payment of every winners-pay format."""
    s0 = s
    s = np.atleast_1d(np.asarray(s, dtype=float))
    d = market.dist
    u, w = _quantile_rule(market, np.asarray(d.cdf(s)))
    vals = np.asarray(V(market, np.asarray(d.quantile(u)))) * market.pivot.pdf(u)
    out = np.sum(vals * w, axis=1)
    return float(out[0]) if np.ndim(s0) == 0 else out.reshape(np.shape(s0))


def expected_payment_direct(market, s):
    """E_y[p(s, y)] by quadrature of the payment rule itself."""
    s0 = s
    s = np.atleast_1d(np.asarray(s, dtype=float))
    d = market.dist
    u, w = _quantile_rule(market, np.asarray(d.cdf(s)))
    y = np.asarray(d.quantile(u))
    # the indicator is handled by the integration limit; s > y inside it
    yc, ratio = _g_ratio(market, y)
    c = market.c
    pay = (1 - c) * (s[:, None] - yc - ratio) + np.asarray(V(market, yc))
    out = np.sum(pay * market.pivot.pdf(u) * w, axis=1)
    return float(out[0]) if np.ndim(s0) == 0 else out.reshape(np.shape(s0))


def _utility_rows(market, sf, hf):
    d = market.dist
    u, w = _quantile_rule(market, np.asarray(d.cdf(hf)), cuts=(np.asarray(d.cdf(sf)),))
    y = np.asarray(d.quantile(u))
    value = np.asarray(v_tilde(market, np.broadcast_to(sf[:, None], y.shape), y))
    yc, ratio = _g_ratio(market, y)
    c = market.c
    pay = (1 - c) * (hf[:, None] - yc - ratio) + np.asarray(V(market, yc))
    return np.sum((value - pay) * market.pivot.pdf(u) * w, axis=1)


def interim_utility(market, s, s_hat):
    """U(s, s_hat): expected surplus of type s reporting s_hat."""
    s_b, h_b = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(s_hat, dtype=float))
    sf, hf = s_b.ravel(), h_b.ravel()
    out = np.concatenate([_utility_rows(market, sf[i:i + _CHUNK], hf[i:i + _CHUNK])
                          for i in range(0, max(sf.size, 1), _CHUNK)])
    return float(out[0]) if s_b.ndim == 0 else out.reshape(s_b.shape)


def ic_audit(market, s_grid, report_grid=None):
    """Largest gain from misreporting over a grid of (true type, report) pairs."""
    s_grid = np.asarray(s_grid, dtype=float)
    report_grid = s_grid if report_grid is None else np.asarray(report_grid, dtype=float)
    hi = market.dist.support_hi
    for g in (s_grid, report_grid):
        if g.size == 0 or np.any(g <= 0) or np.any(g >= hi):
            raise ValueError("audit grid must lie inside the support")
    S, R = np.meshgrid(s_grid, report_grid, indexing="ij")
    U = interim_utility(market, S, R)
    truth = interim_utility(market, s_grid, s_grid)
    regret = U - truth[:, None]
    i, j = np.unravel_index(int(np.argmax(regret)), regret.shape)
    return {"max_regret": float(regret[i, j]), "s": float(s_grid[i]),
            "report": float(report_grid[j]), "grid": regret}


def payment_slice_maximum(market, s, grid=512):
    """Maximiser of y -> p(s, y) on (0, s): scan, then bounded refinement."""
    s = float(s)
    ys = np.linspace(0.0, s, grid + 1)[1:-1]
    p = equitable_payment(market, s, ys)
    j = int(np.argmax(p))
    lo, hi = ys[max(j - 1, 0)], ys[min(j + 1, ys.size - 1)]
    res = optimize.minimize_scalar(lambda y: -equitable_payment(market, s, y),
                                   bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    y_star = float(res.x)
    interior = 0 < j < ys.size - 1
    return {"y": y_star, "payment": float(-res.fun), "interior": bool(interior),
            "endpoint_payments": (float(equitable_payment(market, s, 0.0)),
                                  float(equitable_payment(market, s, np.nextafter(s, 0))))}
