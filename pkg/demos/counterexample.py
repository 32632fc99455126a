"""Private values where uniform pricing beats pay-as-bid on winner inequality."""
from equiauction import Market, make_counterexample, wev

n = 5
for eta in (1e-2, 1e-3, 1e-4):
    m = Market(n, n - 1, 0.0, make_counterexample(0.02, eta))
    print(f"eta={eta:g}: WEV uniform {wev(m, 0.0):.6f}  pay-as-bid {wev(m, 1.0):.6f}  "
          f"(brackets {0.005 / n:.4f} / {0.01 / n:.4f})")
