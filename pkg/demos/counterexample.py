"""
A scalar equation with no positive almost periodic solution
===========================================================

x' = -x with x dropping by 1 at every integer.  Whatever the start value,
the solution ends up oscillating below zero, and the analyzer refuses
to certify existence.
"""

# %%
import numpy as np

from hemap import analyze, cases, integrate, load_model
from hemap.model import InitialHistory

model = load_model(cases.config("example1"))

# %%
# Solutions from a few starting values, sampled just before each jump.
for x0 in (0.5, 1.0, 5.0, 50.0):
    traj = integrate(model, InitialHistory(0.0, x0), 10.0, 1e-3)
    before = [traj.evaluate_at(float(n)) for n in range(1, 11)]
    print(f"x0={x0:5g}  x(n-) = " + " ".join(f"{v:8.4f}" for v in before))

# every row settles on the same periodic orbit
print("limit of x(n-):", -np.exp(-1) / (1 - np.exp(-1)))

# %%
rep = analyze(model)
print("M2 =", rep.M2, " existence certified:", rep.existence_ok)
