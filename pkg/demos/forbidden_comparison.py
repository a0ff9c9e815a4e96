"""
Static TWFE under staggered timing
==================================

When the effect grows with time since the event, static two-way fixed
effects compares late cohorts against already-treated units and is pulled
toward zero.  Group-time cells with clean controls are not.
"""

import numpy as np

from dataclasses import replace

from carelab import DgpSpec, fit_group_time, fit_twfe, generate_reduced_form

spec = DgpSpec(n_individuals=2000, effect_profile=(-0.02, -0.04, -0.06, -0.08))
twfe, gt, truth = [], [], []
for r in range(50):
    panel, t = generate_reduced_form(replace(spec, rng_seed=r))
    twfe.append(fit_twfe(panel)["d_it"])
    gt.append(fit_group_time(panel, se_method="none").overall.att)
    truth.append(t.att)

print(f"true ATT            {np.mean(truth):+.4f}")
print(f"static TWFE         {np.mean(twfe):+.4f}  (MC SE {np.std(twfe, ddof=1) / np.sqrt(50):.4f})")
print(f"group-time ATT      {np.mean(gt):+.4f}")

# cells for one draw
res = fit_group_time(panel, se_method="influence")
print(" g     t    e     att      se")
for g, t, e, att, se, w in res.rows():
    print(f"{g} {t} {e:+3d} {att:+.4f} {se:.4f}")
