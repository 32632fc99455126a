"""Three bidders, two units, uniform signals: bids, WEV across pricing rules, delta*(c)."""
import numpy as np

from equiauction import Market, Uniform, bid_mixed, delta_star, meu_frontier, theory_bounds, wev

base = Market(3, 2, 0.0, Uniform())
s = np.linspace(0, 1, 6)

for c in (0.0, 0.5, 0.8, 1.0):
    m = base.with_c(c)
    print(f"c={c}")
    for d in (0.0, 0.5, 1.0):
        print(f"  delta={d}: bids {np.round(bid_mixed(m, d, s), 4)}  WEV {wev(m, d):.6f}")

print("\n   c  delta*   WEV(delta*)  bound   MEU frontier")
for c in np.linspace(0, 1, 11):
    m = base.with_c(c)
    res = delta_star(m)
    lb = theory_bounds(m)["lb_distribution"]
    print(f"{c:4.1f}  {res['delta_star']:.4f}  {res['wev_min']:.6f}  {lb:.4f}  {meu_frontier(m):.4f}")
