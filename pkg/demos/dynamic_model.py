"""
Care, savings and lost experience
=================================

Backward induction over assets, both spouses' experience and the parent's
health, then a simulated panel of households.
"""

import numpy as np

from carelab import DgpSpec, default_dynamic_params, generate_structural, solve_bellman
from carelab.dynamic_program import simulate_health_path

params = default_dynamic_params()
vf = solve_bellman(params)
print("value function shape (t, z, assets, exp_i, exp_j):", vf.value.shape)

# choice probabilities for a mid-grid household at the start
a, x = len(params.asset_grid) // 2, 0
for z in (0, 1):
    p = vf.policy[0, z, a, x, x]
    print(f"z={z}: P(both work, husband only, wife only, neither) = {np.round(p, 3)}")

# parental health over twenty two-year periods
stats = simulate_health_path(params.health, 0.5, T=20, rng_seed=1, n_paths=50_000)
for age, u, c in stats.rows():
    if age % 10 == 0:
        print(f"age {age}: P(hospitalized) {u:.3f}, given last period {c if c is None else round(c, 3)}")

# households drawn from the solved model; true_y0 replays the same draws without the shock
panel, truth = generate_structural(DgpSpec(n_individuals=1000, mode="structural", rng_seed=2),
                                   params, vf)
eff = truth.effects.merge(panel[["id", "wave", "gender"]], on=["id", "wave"])
print("mean employment effect, women:", round(eff.loc[eff.gender == 0, "effect"].mean(), 4))
print("mean employment effect, men:  ", round(eff.loc[eff.gender == 1, "effect"].mean(), 4))
