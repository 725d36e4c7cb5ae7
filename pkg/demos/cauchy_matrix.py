"""
The transition factor of the linear impulsive part
==================================================

H(t, s) solves y' = -a(t) y with the multiplicative jumps, started from 1
at s.  It is squeezed between B exp(-a_M (t-s)) and A exp(-a_L (t-s)).
"""

# %%
import numpy as np

from hemap import cases, cauchy_H, gamma_extrema, load_model
from hemap.cauchy import H_bounds

model = load_model(cases.config("example56"))
g = gamma_extrema(model.schedule)
print(f"Gamma_M={g.Gamma_M} Gamma_L={g.Gamma_L} A={g.A} B={g.B}")

# %%
s = 0.5
for t in np.arange(0.5, 4.01, 0.5):
    H = cauchy_H(model, t, s)
    lo, hi = H_bounds(5.0, 6.0, g, t, s)
    print(f"t={t:3.1f}  {lo:.3e} <= H={H:.3e} <= {hi:.3e}")

# %%
# Composition over an intermediate time reproduces the direct value.
print(cauchy_H(model, 3.3, 1.7) * cauchy_H(model, 1.7, 0.2), cauchy_H(model, 3.3, 0.2))
