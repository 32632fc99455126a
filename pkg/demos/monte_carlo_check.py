"""Cross-check quadrature WEV against simulation and audit equilibrium regret."""
from equiauction import Market, TruncatedNormal, estimate_revenue, estimate_wev, regret_audit, wev

m = Market(10, 4, 0.5, TruncatedNormal())
for d in (0.0, 0.5, 1.0):
    est = estimate_wev(m, d, draws=10**6, seed=1)
    exact = wev(m, d)
    print(f"delta={d}: quadrature {exact:.6f}  MC {est.mean:.6f} +- {est.std_error:.1e}  "
          f"z={(est.mean - exact) / est.std_error:+.2f}")

for d in (0.0, 0.5, 1.0):
    r = estimate_revenue(m, d, draws=10**6, seed=2)
    print(f"revenue delta={d}: {r.mean:.5f} +- {r.std_error:.1e}")

a = regret_audit(m, 1.0, draws=200_000, seed=3)
print(f"pay-as-bid regret audit: max regret {a['max_regret']:.2e}, passes={a['passes']}")
