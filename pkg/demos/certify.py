"""
Certification constants for the hematopoiesis model
====================================================

The analyzer turns coefficient bounds into the invariant band [M2, M1],
the contraction constant and the two verdicts.
"""

# %%
from hemap import analyze, cases, load_model

cfg = cases.config("example56")
model = load_model(cfg)
rep = analyze(model)

# %%
# Band and contraction constant.
print(f"a in [{rep.a_L}, {rep.a_M}]   A={rep.A}  B={rep.B}")
print(f"M1 = {rep.M1:.6f}")
print(f"M2 = {rep.M2:.6f}   (harvest sup over [0, M1])")
print(f"M2 = {rep.M2_global:.6f}   (harvest sup over all x >= 0)")
print(f"K* = G* = {rep.K_star[0]:.6f}")
print(f"contraction constant {rep.existence_lhs:.6f}")

# %%
# The lower bound is fragile: measured over every x >= 0 the harvest sup
# pushes M2 below zero.  Both are reported and the report flags the split.
for w in rep.warnings:
    print("warning:", w)

# %%
print("existence:", rep.existence_ok, " attractivity:", rep.attractivity_ok)

# %%
# Stronger feedback breaks the contraction.
cfg["terms"][0]["b"] = "0.3*(1 + abs(sin(sqrt(3)*t)))"
cfg["declared_bounds"]["b1"] = [0.3, 0.6]
strong = analyze(load_model(cfg))
print(f"b tripled: contraction constant {strong.existence_lhs:.3f}, existence {strong.existence_ok}")
