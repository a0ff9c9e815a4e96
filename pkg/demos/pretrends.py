"""
Testing for pre-trends
======================

Event-study coefficients before the event should be zero under parallel
trends.  A joint Wald test keeps its size; rejecting when any single
coefficient is significant does not.
"""

from carelab import DgpSpec, RegressionSpec, fit_event_study, generate_reduced_form, pretrend_test

spec = RegressionSpec(treatment="event")
for slope in (0.0, 0.01):
    joint = anyone = 0
    for r in range(100):
        panel, _ = generate_reduced_form(
            DgpSpec(n_individuals=10_000, n_waves=7, pretrend_slope=slope, rng_seed=r)
        )
        test = pretrend_test(fit_event_study(panel, spec))
        joint += test.reject(0.05)
        anyone += test.any_individual_reject(0.05)
    print(f"slope {slope}: joint Wald rejects {joint}%, any single coefficient {anyone}%")

# coefficients of the last draw, which has the trend
res = fit_event_study(panel, spec)
print(res.summary().round(4))
print("absent bins:", res.absent)
