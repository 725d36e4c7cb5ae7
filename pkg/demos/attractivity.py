"""
Trajectories forget their history
=================================

Four constant initial functions, one model.  The gaps collapse at an
exponential rate well above the certified one, and never leave the
certified envelope.
"""

# %%
import itertools

import numpy as np

from hemap import analyze, cases, integrate, load_model, pairwise_gap, solve_rate
from hemap.halanay import envelope_margin, fit_empirical_rate, from_report
from hemap.model import InitialHistory

model = load_model(cases.config("example56"))
rep = analyze(model)
trajs = {x0: integrate(model, InitialHistory(0.0, x0), 30.0, 0.01) for x0 in (0.3, 0.8, 1.5, 2.5)}

# %%
for t in (0.0, 1.0, 2.0, 5.0, 10.0, 30.0):
    print(f"t={t:4g}  " + "  ".join(f"{tr.evaluate_at(t):.6f}" for tr in trajs.values()))

# %%
# Certified rate from the delayed Halanay inequality, against fitted rates.
p = from_report(rep)
lam = solve_rate(p)
print(f"certified rate {lam:.4f}")
for xa, xb in itertools.combinations(trajs, 2):
    a, b = trajs[xa], trajs[xb]
    t, gap = pairwise_gap(a, b)
    fit = fit_empirical_rate(t, gap, width=rep.sigma_bar)
    margin = envelope_margin(p, model.schedule, abs(xa - xb), 0.0, a.times,
                             np.abs(a.x_left - b.x_left), np.abs(a.x_right - b.x_right))
    print(f"{xa} vs {xb}: fitted rate {fit.rate:.3f}, envelope margin {margin:.2e}")
