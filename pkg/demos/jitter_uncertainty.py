"""
Sampling-time jitter and the uncertainty region
===============================================

A threshold of ``MT`` bits is only sharp for an ideal circuit. With random
jitter on the sampling instant, distances near ``MT`` match in some trials
and not in others. The band of distances that neither always match nor
never match is the uncertainty region.
"""

from hdcam import (MatchlineParams, VariationSpec, match_probability_curve, nominal_mt,
                   uncertainty_region)

p = MatchlineParams(v_eval=0.60, v_evalth=0.45 * 1.2)
print("nominal MT:", nominal_mt(p))

for sigma_ps in (0, 30, 50, 75, 100):
    spec = VariationSpec(sigma_g=0.1, sigma_t=sigma_ps * 1e-12, seed=1, trials=1000)
    curve = match_probability_curve(p, spec, range(10, 161), threads=4)
    r = uncertainty_region(curve)
    print(f"sigma_t={sigma_ps:>3} ps: always match up to {r.k_bound}, "
          f"never match from {r.l_bound}, width {r.width}")

###############################################################################
# A coarse text rendering of the 100 ps curve.

spec = VariationSpec(sigma_t=100e-12, seed=1)
curve = match_probability_curve(p, spec, range(40, 111))
for d, prob in list(zip(curve.d_values, curve.probabilities))[::5]:
    print(f"{d:>4} {'#' * int(round(prob * 40))}")
