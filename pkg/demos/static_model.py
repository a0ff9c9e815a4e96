"""
Who works when a parent falls ill
=================================

A one-period household: two spouses each choose to work or care, and a
parent's health shock raises care utility and adds a medical bill.
"""

from dataclasses import replace

import numpy as np

from carelab import (
    ShockDistribution,
    classify_types,
    expected_maximum,
    gradient_sweep,
    income_effect_params,
    return_to_work,
    work_probability,
)

# the income-effect calibration: a costly shock can push the wife into work
p = income_effect_params()
for z in (0, 1):
    print(f"z={z}: wife's return to work {return_to_work(p, z):+.4f}, "
          f"work probability {work_probability(p, z):.4f}")

# worker types from the two thresholds
part = classify_types(p)
for lo, hi, kind in part.intervals():
    print(f"  shock in ({lo:+.3f}, {hi:+.3f}]: {kind.name.lower()}")

# without the medical bill only substitution is left
q = replace(p, medical_cost=0.0)
print(f"no bill: return falls from {return_to_work(q, 0):+.4f} to {return_to_work(q, 1):+.4f}")

# response over wealth (rows) and wage (columns)
res = gradient_sweep(p, wealth_grid=np.linspace(0, 1, 5), wage_grid=np.linspace(0, 1, 5))
np.set_printoptions(precision=3, suppress=True)
print("change in work probability after the shock:")
print(res.delta)
print("positive at low wealth and high wage, most negative at high wealth and low wage")

# correlated shocks change the joint choice, not the wife's own threshold
v = np.array([0.6, 0.2, 0.3, 0.0])
for rho in (0.0, 0.6):
    emax, probs = expected_maximum(v, ShockDistribution(scale=0.5, corr=rho))
    print(f"corr {rho}: E max {emax:.4f}, P(both work) {probs[0]:.3f}, P(neither) {probs[3]:.3f}")
