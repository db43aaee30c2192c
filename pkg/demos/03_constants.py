"""
The Hessian-bound constants
===========================

gamma(n) comes from the oscillation budget, and the constant is large but
explicit. Substituting alpha = 1.6n and K = 1 into the general bound gives
C_hb; the stated closed form C_paper is smaller by exactly e^(2n-1).
"""

import math

from lagflow.estimates import KorevaarParams, hessian_bound_constant, main_constant

print(" n   gamma(n)   0.61/n     C_hb         C_paper      ratio / e^(2n-1)")
for n in range(1, 6):
    mc = main_constant(n)
    ratio = mc.C_hb / mc.C_paper / math.exp(2 * n - 1)
    print(f"{n:2d}  {mc.gamma:.6f}  {0.61 / n:.6f}  {mc.C_hb:.4e}  {mc.C_paper:.4e}  {ratio:.15f}")

# %%
# The general constant for other choices; alpha must exceed 3n/2 and
# alpha * gamma must stay below 1.
for alpha in (1.6, 2.0, 3.0):
    for gamma in (0.01, 0.3):
        if alpha * gamma < 1:
            c = hessian_bound_constant(1, KorevaarParams(alpha, gamma, 1.0))
            print(f"n=1 alpha={alpha} gamma={gamma}: {c:.4g}")
# With gamma = 0.3 the constant grows with alpha: the denominator shrinks
# faster than the alpha factor falls.
