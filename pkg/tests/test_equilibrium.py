import numpy as np
import pytest

from equiauction.distributions import Uniform, make_counterexample
from equiauction.equilibrium import (NoSolution, bid_curve, bid_delta_sensitivity, bid_mixed,
                                     bid_payasbid_reserve, bid_payasbid_reserve_slope, bid_slope,
                                     bid_uniform, reserve_participation_value, reserve_threshold)
from equiauction.valuation import Market, V, v_tilde

from conftest import LOG_CONCAVE, SHIPPED, interior_signals


def closed_form_b1(c, s):
    return (1 - c / 6) * (s - 2 * s**2 / 3) / (2 - s) + c / 6


def test_uniform_price_bid_examples():
    m0 = Market(3, 2, 0.0, Uniform())
    s = np.linspace(0, 1, 11)
    assert np.allclose(bid_uniform(m0, s), s)
    assert bid_uniform(Market(3, 2, 1.0, Uniform()), 0.0) == pytest.approx(1 / 6)
    assert bid_uniform(Market(3, 2, 0.5, Uniform()), 1.0) == pytest.approx(1.0)
    assert np.allclose(bid_mixed(Market(3, 2, 0.3, Uniform()), 0.0, s), V(Market(3, 2, 0.3, Uniform()), s))


def test_pay_as_bid_examples():
    assert bid_mixed(Market(3, 2, 0.0, Uniform()), 1.0, 1.0) == pytest.approx(1 / 3, abs=1e-12)
    assert bid_mixed(Market(3, 2, 1.0, Uniform()), 1.0, 0.0) == pytest.approx(1 / 6, abs=1e-12)


@pytest.mark.parametrize("c", [0.0, 0.5, 0.8, 1.0])
def test_pay_as_bid_closed_form(c):
    m = Market(3, 2, c, Uniform())
    s = np.linspace(0, 1, 100)
    assert np.max(np.abs(bid_mixed(m, 1.0, s) - closed_form_b1(c, s))) < 1e-12


@pytest.mark.parametrize("name", list(SHIPPED))
def test_small_delta_recovers_uniform_price(name):
    m = Market(6, 3, 0.5, SHIPPED[name])
    s = interior_signals(m.dist, 50, 0.01, 0.9)
    assert np.max(np.abs(bid_mixed(m, 1e-6, s) - bid_uniform(m, s))) < 1e-4


@pytest.mark.parametrize("name", list(SHIPPED))
@pytest.mark.parametrize("c", [0.0, 0.5, 1.0])
def test_first_order_condition(name, c):
    m = Market(6, 3, c, SHIPPED[name])
    s = interior_signals(m.dist, 80, 0.02, 0.98)
    from equiauction.distributions import order_stat_cdf, order_stat_pdf
    G = order_stat_cdf(3, 5, m.dist, s)
    g = order_stat_pdf(3, 5, m.dist, s)
    for delta in (0.3, 1.0):
        res = (V(m, s) - bid_mixed(m, delta, s)) * g - delta * bid_slope(m, delta, s) * G
        assert np.max(np.abs(res)) < 1e-6


@pytest.mark.parametrize("name", list(SHIPPED))
def test_ratio_and_parts_forms_agree(name):
    m = Market(10, 4, 0.6, SHIPPED[name])
    s = interior_signals(m.dist, 60, 0.05, 0.99)
    for delta in (0.2, 0.7, 1.0):
        a = bid_mixed(m, delta, s, form="ratio")
        b = bid_mixed(m, delta, s, form="parts")
        assert np.max(np.abs(a - b)) < 1e-8


@pytest.mark.parametrize("name", ["uniform", "truncated-exponential", "truncated-normal", "beta22"])
def test_slope_matches_finite_differences(name):
    m = Market(5, 2, 0.5, SHIPPED[name])
    s = interior_signals(m.dist, 40, 0.05, 0.95)
    h = 1e-6 * m.dist.support_hi
    for delta in (0.25, 1.0):
        fd = (bid_mixed(m, delta, s + h) - bid_mixed(m, delta, s - h)) / (2 * h)
        assert np.max(np.abs(fd - bid_slope(m, delta, s))) < 1e-5


@pytest.mark.parametrize("name", list(SHIPPED))
def test_monotonicity_suite(name):
    deltas = np.linspace(0.1, 1.0, 10)
    for c in (0.0, 0.5, 0.8, 1.0):
        m = Market(6, 3, c, SHIPPED[name])
        s = interior_signals(m.dist, 40, 0.02, 0.98)
        B = np.array([bid_mixed(m, d, s) for d in deltas])
        S = np.array([bid_slope(m, d, s) for d in deltas])
        assert np.all(np.diff(B, axis=1) > 0)                        # increasing in s
        assert np.all(np.diff(B, axis=0) < 0)                        # decreasing in delta
        assert np.all(np.diff(deltas[:, None] * B, axis=0) > 0)      # delta*beta increasing in delta
        assert np.all(np.diff(deltas[:, None] * S, axis=0) > -1e-9)  # its slope too
        assert np.all(B <= V(m, s)[None, :] + 1e-12)


def test_delta_sensitivity():
    m = Market(5, 3, 0.4, SHIPPED["truncated-normal"])
    s = interior_signals(m.dist, 30)
    d, h = 0.6, 1e-5
    fd = d * (bid_mixed(m, d + h, s) - bid_mixed(m, d - h, s)) / (2 * h)
    sens = bid_delta_sensitivity(m, d, s)
    assert np.all(sens <= 0)
    assert np.max(np.abs(fd - sens)) < 1e-6
    # delta*beta increasing in delta: beta + sensitivity >= 0
    assert np.all(bid_mixed(m, d, s) + sens >= 0)
    # leading order for small delta: -delta V' G / g, vanishing linearly; the
    # limit is pointwise and slow where G/g is large, so stay below quantile 0.9
    s = interior_signals(m.dist, 30, 0.01, 0.9)
    from equiauction.distributions import order_stat_cdf, order_stat_pdf
    from equiauction.valuation import V_prime
    lead = -1e-6 * V_prime(m, s) * order_stat_cdf(3, 4, m.dist, s) / order_stat_pdf(3, 4, m.dist, s)
    assert np.allclose(bid_delta_sensitivity(m, 1e-6, s), lead, rtol=1e-3)
    assert bid_delta_sensitivity(m, d, 0.0) == 0.0


def test_bid_curve_invariants():
    for name in ("uniform", "truncated-normal", "beta-half"):
        m = Market(6, 3, 0.5, SHIPPED[name])
        curve = bid_curve(m, 0.5)
        # nondecreasing up to one ulp; strictly increasing where increments exceed rounding
        assert np.all(np.diff(curve.values) >= -np.spacing(curve.values[1:]))
        inner = (curve.quantiles > 1e-6) & (curve.quantiles < 1 - 1e-6)
        assert np.all(np.diff(curve.values[inner]) > 0)
        assert np.all(curve.values <= V(m, curve.grid) + 1e-12)
        s = interior_signals(m.dist, 333, 0.001, 0.999)
        assert np.max(np.abs(curve(s) - bid_mixed(m, 0.5, s))) < 1e-9
        c0 = bid_curve(m, 0.0)
        assert np.allclose(c0.values, V(m, c0.grid), atol=1e-15)


def test_counterexample_curve_is_finite_and_monotone():
    m = Market(5, 4, 0.0, make_counterexample(0.02, 1e-3))
    curve = bid_curve(m, 1.0)
    assert np.all(np.isfinite(curve.values))
    assert np.all(np.diff(curve.values) >= -1e-12)


def test_reserve_threshold():
    m0 = Market(3, 2, 0.0, Uniform())
    for r in (0.1, 0.4, 0.9):
        assert reserve_threshold(m0, r) == pytest.approx(r, abs=1e-14)
    m1 = Market(3, 2, 1.0, Uniform())
    sr = reserve_threshold(m1, 0.4)
    from scipy import integrate
    from equiauction.distributions import order_stat_cdf, order_stat_pdf
    lhs, _ = integrate.quad(lambda y: v_tilde(m1, sr, y) * order_stat_pdf(2, 2, m1.dist, y), 0, sr,
                            epsabs=1e-14)
    assert abs(lhs - 0.4 * order_stat_cdf(2, 2, m1.dist, sr)) < 1e-9
    assert reserve_threshold(m1, 0.1) == 0.0  # below V(0) everyone participates
    mh = Market(3, 2, 0.5, Uniform())
    rs = [reserve_threshold(mh, r) for r in (0.2, 0.3, 0.5, 0.7)]
    assert np.all(np.diff(rs) > 0)
    assert reserve_threshold(m0, 1e-9) == pytest.approx(1e-9)
    with pytest.raises(NoSolution):
        reserve_threshold(mh, reserve_participation_value(mh, 1.0) + 0.01)
    with pytest.raises(ValueError):
        reserve_threshold(mh, -0.1)


def test_reserve_bid():
    for c in (0.0, 0.5):
        m = Market(4, 2, c, SHIPPED["truncated-normal"])
        r = 0.5
        sr = reserve_threshold(m, r)
        assert bid_payasbid_reserve(m, r, sr, sr) == pytest.approx(r, abs=1e-12)
        s = np.linspace(sr, m.dist.quantile(0.99), 50)
        assert np.all(bid_payasbid_reserve_slope(m, r, s, sr) <= bid_slope(m, 1.0, s) + 1e-8)
        assert np.all(bid_payasbid_reserve(m, r, s, sr) >= bid_mixed(m, 1.0, s) - 1e-12)
        assert bid_payasbid_reserve(m, r, 0.5 * sr, sr) == 0.0
    m = Market(4, 2, 0.0, Uniform())
    s = np.linspace(0.01, 0.99, 30)
    assert np.allclose(bid_payasbid_reserve(m, 1e-12, s), bid_mixed(m, 1.0, s), atol=1e-9)


def test_uniform_price_curve_with_vanishing_density():
    # dV/du is unbounded at the top of a beta(2, 2) support
    m = Market(10, 4, 0.3, SHIPPED["beta22"])
    curve = bid_curve(m, 0.0)
    assert np.all(np.isfinite(curve.slope_values))
    s = interior_signals(m.dist, m=500, lo=1e-3, hi=1 - 1e-3)
    assert np.max(np.abs(curve(s) - V(m, s))) < 1e-8
