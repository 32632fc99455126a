import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from equiauction.distributions import (Beta, QuantileOrderStat, TruncatedExponential,
                                       TruncatedNormal, Uniform, from_config, log_concavity_report,
                                       make_counterexample, order_stat_cdf, order_stat_pdf)

from conftest import SHIPPED


def test_uniform_basics():
    u = Uniform()
    assert u.cdf(0.5) == 0.5
    assert u.cdf(0.0) == 0.0
    assert u.quantile(0.25) == 0.25
    assert u.truncated_mean_below(0.5) == pytest.approx(0.25, abs=1e-15)
    assert u.truncated_mean_above(0.5) == pytest.approx(0.75, abs=1e-15)


def test_rejects_bad_arguments():
    u = Uniform()
    with pytest.raises(ValueError):
        u.cdf(-0.1)
    with pytest.raises(ValueError):
        u.quantile(1.5)
    with pytest.raises(ValueError):
        u.truncated_mean_below(0.0)
    with pytest.raises(ValueError):
        u.truncated_mean_above(1.0)
    with pytest.raises(ValueError):
        from_config({"kind": "pareto", "params": {}})


def test_truncated_exponential_mean_below_against_quadrature():
    d = TruncatedExponential(rate=1.0, hi=5.0)
    num, _ = integrate.quad(lambda t: t * d.pdf(t), 0, 1, epsabs=1e-14, epsrel=1e-14)
    assert d.truncated_mean_below(1.0) == pytest.approx(num / d.cdf(1.0), abs=1e-8)


def test_truncation_mass_below_threshold():
    assert TruncatedExponential().sf(0.0) == 1.0
    # the cut-offs leave less than 1e-10 of the untruncated mass beyond the support
    d = TruncatedExponential()
    assert np.exp(-d.rate * d.support_hi) <= 1e-10 + 1e-16
    n = TruncatedNormal()
    from scipy.stats import norm
    assert norm.sf((n.support_hi - n.mu) / n.sigma) < 1e-10


@pytest.mark.parametrize("name", list(SHIPPED))
def test_round_trip_and_monotone(name):
    d = SHIPPED[name]
    x = np.linspace(1e-6, 1 - 1e-6, 400)
    s = d.quantile(x)
    assert np.all(np.diff(s) > 0)
    assert np.max(np.abs(d.cdf(s) - x)) < 1e-8
    assert d.quantile(0.0) == 0.0 and d.quantile(1.0) == d.support_hi
    assert d.cdf(d.support_hi) == pytest.approx(1.0, abs=1e-15)
    assert np.all(d.pdf(s) > 0)


@pytest.mark.parametrize("name", list(SHIPPED))
def test_truncated_means_against_quadrature(name):
    d = SHIPPED[name]
    for y in d.quantile(np.array([0.05, 0.3, 0.7, 0.95])):
        lo, _ = integrate.quad(lambda t: t * d.pdf(t), 0, y, epsabs=1e-13, epsrel=1e-12, limit=200)
        hi, _ = integrate.quad(lambda t: t * d.pdf(t), y, d.support_hi, epsabs=1e-13, epsrel=1e-12,
                               limit=200)
        assert d.truncated_mean_below(y) == pytest.approx(lo / d.cdf(y), rel=1e-8)
        assert d.truncated_mean_above(y) == pytest.approx(hi / d.sf(y), rel=1e-8)
        assert 0 < d.truncated_mean_below(y) <= y <= d.truncated_mean_above(y) < d.support_hi


def test_order_statistic_examples():
    u = Uniform()
    assert order_stat_cdf(1, 3, u, 0.5) == pytest.approx(0.125)
    assert order_stat_cdf(2, 2, u, 0.5) == pytest.approx(0.75)
    assert order_stat_pdf(2, 2, u, 0.5) == pytest.approx(1.0)
    d = TruncatedNormal()
    y = d.quantile(np.linspace(0.01, 0.99, 9))
    assert np.allclose(order_stat_pdf(1, 1, d, y), d.pdf(y))
    with pytest.raises(ValueError):
        order_stat_cdf(0, 3, u, 0.5)
    with pytest.raises(ValueError):
        order_stat_pdf(4, 3, u, 0.5)


@pytest.mark.parametrize("name", ["uniform", "truncated-exponential", "beta22"])
def test_order_statistic_consistency(name):
    d = SHIPPED[name]
    ys = d.quantile(np.linspace(0.02, 0.98, 50))
    for n in range(1, 11):
        for m in range(1, n + 1):
            total, _ = integrate.quad(lambda t: order_stat_pdf(m, n, d, t), 0, d.support_hi,
                                      limit=200, points=[d.quantile(0.5)])
            assert total == pytest.approx(1.0, abs=1e-8)
            if n in (3, 10):
                G = order_stat_cdf(m, n, d, ys)
                assert np.all(np.diff(G) >= 0)
                for y, Gy in zip(ys[::7], G[::7]):
                    val, _ = integrate.quad(lambda t: order_stat_pdf(m, n, d, t), 0, y, limit=200)
                    assert abs(val - Gy) < 1e-7
                if m > 1:
                    # the m-th highest shrinks as m grows, so G_m^n grows with m
                    assert np.all(order_stat_cdf(m, n, d, ys) >= order_stat_cdf(m - 1, n, d, ys) - 1e-15)


def test_quantile_order_stat_stable_forms():
    q = QuantileOrderStat(4, 9)
    u = np.linspace(1e-6, 1 - 1e-6, 101)
    assert np.allclose(np.exp(q.logcdf(u)), q.cdf(u), rtol=1e-12, atol=0)
    back = q.ppf_log(q.logcdf(u))
    assert np.allclose(back, u, rtol=1e-9, atol=1e-12)
    h = 1e-6
    fd = (q.cdf(u[1:-1] + h) - q.cdf(u[1:-1] - h)) / (2 * h)
    assert np.allclose(fd, q.pdf(u[1:-1]), rtol=1e-5)


def test_log_concavity_verdicts():
    assert log_concavity_report(Uniform())["log_concave"]
    assert log_concavity_report(TruncatedExponential())["log_concave"]
    assert log_concavity_report(TruncatedNormal())["log_concave"]
    assert log_concavity_report(Beta(2.0, 2.0))["log_concave"]
    rep = log_concavity_report(Beta(0.5, 0.5))
    assert not rep["log_concave"] and rep["max_second_difference"] > 0
    assert rep["grid_points"] == 512
    with pytest.raises(ValueError):
        log_concavity_report(Uniform(), grid=np.array([0.0, 0.5, 0.9]))


def test_counterexample_closed_forms():
    d = make_counterexample(0.02, 0.5)
    assert d.cdf(1.0) == pytest.approx(0.02, abs=1e-15)
    e = make_counterexample(0.02, 0.01)
    assert e.support_hi == 2.0
    assert e.quantile(0.02) == 1.0
    # the left limit is 1; with eta = 0.5 the approach (1 - x/eps)^eta is visible in floats
    assert d.quantile(0.02 * (1 - 1e-12)) == pytest.approx(1.0, abs=2e-6)
    assert d.quantile(0.02) == 1.0
    assert e.quantile(1.0) == 2.0
    x = np.linspace(0.001, 0.999, 100)
    assert np.max(np.abs(e.cdf(e.quantile(x)) - x)) < 1e-10
    # the quantile is the indicator of x >= eps plus the perturbation gamma
    eps, eta = 0.02, 0.01
    lo = x[x < eps]
    hi = x[x >= eps]
    gam_lo = 1 - (1 - lo / eps) ** eta
    gam_hi = 1 - (1 - (hi - eps) / (1 - eps)) ** eta
    assert np.allclose(e.quantile(lo), gam_lo, atol=1e-12)
    assert np.allclose(e.quantile(hi), 1 + gam_hi, atol=1e-12)
    with pytest.raises(ValueError):
        make_counterexample(1.5, 0.1)
    with pytest.raises(ValueError):
        make_counterexample(0.1, 0.0)


def test_config_round_trip():
    for d in list(SHIPPED.values()) + [make_counterexample(0.02, 0.01)]:
        assert from_config(d.to_config()) == d


@settings(max_examples=60, deadline=None)
@given(st.floats(0.2, 5.0), st.floats(0.001, 0.999))
def test_truncated_exponential_round_trip_property(rate, x):
    d = TruncatedExponential(rate=rate)
    assert d.cdf(d.quantile(x)) == pytest.approx(x, abs=1e-12)
