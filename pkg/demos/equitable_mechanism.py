"""Equal ex-post surplus for winners, and the payment slice with its interior maximum."""
import numpy as np

from equiauction import Market, Uniform, equitable_outcome, ic_audit
from equiauction.mechanism import payment_slice_maximum

m = Market(3, 2, 0.8, Uniform())
res = equitable_outcome(m, [0.9, 0.6, 0.3])
print("winners", res.winners, "payments", np.round(res.payments, 4),
      "utilities", np.round(res.utilities, 6))

for s in (0.8, 0.9, 0.95):
    sl = payment_slice_maximum(m, s)
    print(f"s={s}: payment peaks at y={sl['y']:.3f} with {sl['payment']:.4f}")

grid = np.linspace(0.02, 0.98, 32)
print("IC audit max regret:", ic_audit(m, grid)["max_regret"])
