import numpy as np
import pytest
from scipy import integrate

from equiauction.distributions import Uniform, order_stat_cdf, order_stat_pdf
from equiauction.equilibrium import bid_mixed
from equiauction.equity import (EquityReport, empirical_variance, ex_post_utilities, meu_verdict,
                                pairwise_dominance, surplus_phi, theory_bounds, wev, wev_components)
from equiauction.valuation import Market

from conftest import LOG_CONCAVE, SHIPPED


def test_surplus_phi_examples():
    m = Market(3, 2, 0.3, Uniform())
    s = np.linspace(0, 1, 7)
    assert np.allclose(surplus_phi(m, 0.0, s), 0.7 * s)
    assert np.all(surplus_phi(Market(3, 2, 1.0, Uniform()), 0.0, s) == 0)
    assert surplus_phi(Market(3, 2, 0.0, Uniform()), 1.0, 1.0) == pytest.approx(2 / 3, abs=1e-12)


def test_ex_post_utilities_examples():
    out = ex_post_utilities(Market(3, 2, 0.0, Uniform()), 0.0, [0.9, 0.5, 0.2])
    assert np.allclose(out.utilities, [0.7, 0.3, 0.0])
    assert list(out.winners) == [0, 1] and out.clearing_bid == pytest.approx(0.2)
    rng = np.random.default_rng(3)
    m1 = Market(5, 3, 1.0, SHIPPED["truncated-normal"])
    for _ in range(20):
        u = ex_post_utilities(m1, 0.0, m1.dist.quantile(rng.random(5))).utilities
        w = u[u != 0]
        assert np.ptp(w) < 1e-12
    m = Market(5, 3, 0.4, SHIPPED["beta22"])
    for _ in range(20):
        s = m.dist.quantile(rng.random(5))
        out = ex_post_utilities(m, 0.6, s)
        i, j = out.winners[:2]
        gap = surplus_phi(m, 0.6, s[i]) - surplus_phi(m, 0.6, s[j])
        assert out.utilities[i] - out.utilities[j] == pytest.approx(gap, abs=1e-12)
        assert np.count_nonzero(out.utilities[np.setdiff1d(np.arange(5), out.winners)]) == 0
    with pytest.raises(ValueError):
        ex_post_utilities(m, 0.5, [0.1, 0.2])


def test_wev_examples():
    assert wev(Market(3, 2, 1.0, Uniform()), 0.0) <= 1e-10
    m = Market(3, 2, 0.0, Uniform())
    assert wev(m, 1.0) < wev(m, 0.0)
    assert wev(m, 0.0) == pytest.approx(0.05, abs=1e-14)


def test_wev_against_double_quadrature():
    # A - B with nested scipy quadrature in signal space
    m = Market(4, 2, 0.3, SHIPPED["truncated-normal"])
    d, hi = m.dist, m.dist.support_hi
    phi = lambda s: surplus_phi(m, 0.7, s)
    A, _ = integrate.quad(lambda s: phi(s) ** 2 * order_stat_cdf(2, 3, d, s) * d.pdf(s), 0, hi,
                          limit=200, epsabs=1e-13)
    A *= 4 / 2
    grid = np.linspace(0, hi, 4001)
    inner_vals = phi(grid) * d.pdf(grid)
    tail = integrate.cumulative_simpson(inner_vals[::-1], x=-grid[::-1], initial=0)[::-1]
    B_int = tail**2 * order_stat_pdf(1, 2, d, grid)
    B = 4 * 3 / 2 * integrate.simpson(B_int, x=grid)
    assert wev(m, 0.7) == pytest.approx(A - B, abs=1e-8)


def test_wev_components_and_nonnegativity():
    for name in SHIPPED:
        for c in (0.0, 0.8):
            comp = wev_components(Market(6, 3, c, SHIPPED[name]), 0.5)
            assert comp["wev"] >= -1e-14 and comp["A"] >= comp["B"]


def test_meu_examples():
    for name in LOG_CONCAVE:
        for d in (0.2, 0.6, 1.0):
            assert meu_verdict(Market(5, 2, 0.0, SHIPPED[name]), d).meu_holds
    rep = meu_verdict(Market(3, 2, 1.0, Uniform()), 0.5)
    assert not rep.meu_holds and rep.meu_margin < 0
    r0 = meu_verdict(Market(3, 2, 0.5, Uniform()), 0.0)
    assert r0.meu_holds and r0.meu_margin == float("inf")
    rep = meu_verdict(Market(3, 2, 0.8, Uniform()), 0.3)
    assert 0.665 <= rep.max_slope <= 0.70


def test_report_invariant():
    r = meu_verdict(Market(3, 2, 0.8, Uniform()), 0.5)
    assert isinstance(r, EquityReport)
    assert r.meu_holds == (r.meu_margin >= 0)


def test_pairwise_dominance_examples():
    for name in LOG_CONCAVE:
        m = Market(5, 2, 0.4, SHIPPED[name])
        assert pairwise_dominance(m, 0.6, 0.3)["verdict"] == "DOMINATES"
        assert pairwise_dominance(m, 0.3, 0.6)["verdict"] == "DOMINATED"
        assert pairwise_dominance(m, 1.0, 0.0)["verdict"] == "DOMINATES"
        same = pairwise_dominance(m, 0.5, 0.5)
        assert same["verdict"] == "INCOMPARABLE" and same["witness"] is None
    with pytest.raises(ValueError):
        pairwise_dominance(Market(3, 2, 0.4, Uniform()), 0.5, 0.2, pairs=(np.array([]), np.array([])))


def test_theory_bounds_examples():
    b = theory_bounds(Market(3, 2, 1.0, Uniform()))
    assert b == {"lb_logconcave": 0.0, "dominating_range_hi": 0.0, "lb_distribution": 0.0}
    assert theory_bounds(Market(3, 2, 0.5, Uniform()))["lb_distribution"] == pytest.approx(3 / 5.5)
    big = Market(1000, 2, 0.5, Uniform())
    assert theory_bounds(big)["lb_distribution"] == pytest.approx(0.5 / 0.75, abs=1e-3)
    big_e = Market(1000, 2, 0.5, SHIPPED["truncated-exponential"])
    assert theory_bounds(big_e)["lb_distribution"] == pytest.approx(0.5 / 0.75, abs=1e-3)
    assert "lb_distribution" not in theory_bounds(Market(3, 2, 0.5, SHIPPED["beta22"]))


def test_pigou_dalton_transfers():
    rng = np.random.default_rng(11)
    for _ in range(200):
        u = np.sort(rng.normal(size=6))
        gap = u[-1] - u[0]
        t = rng.uniform(0, gap / 2)
        v = u.copy()
        v[-1] -= t
        v[0] += t
        assert empirical_variance(v) < empirical_variance(u)


def test_wev_matches_expected_pairwise_gap():
    # E[(u1 - u2)^2 / 2 | both win] equals the quadrature on a direct 2-d integral
    m = Market(3, 2, 0.0, Uniform())
    b = lambda s: bid_mixed(m, 1.0, s)
    # three uniforms, two winners: integrate over the ordered top pair (x > y > z)
    f = lambda z, y, x: 0.5 * ((x - b(x)) - (y - b(y))) ** 2 * 6
    val, _ = integrate.tplquad(f, 0, 1, 0, lambda x: x, 0, lambda x, y: y, epsabs=1e-10)
    assert wev(m, 1.0) == pytest.approx(val, abs=1e-8)
