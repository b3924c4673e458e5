"""
Fitting the matchline discharge law
===================================

The behavioral model turns "how many cells mismatch" into a matchline
voltage at the sampling instant. Its two free constants are fitted to a
table of (threshold voltage, mismatch threshold) pairs characterized at
v_eval = 0.60 V on a 256-bit word.
"""

import numpy as np

from hdcam import PUBLISHED_MT_TABLE, DischargeLaw, MatchlineParams, calibrate, continuous_mt, nominal_mt

# start from a skeleton: everything but the law constants is fixed
skeleton = MatchlineParams(v_eval=0.60, v_evalth=0.72)
fit = calibrate(PUBLISHED_MT_TABLE, skeleton)
print(f"tau_ref = {fit.law.tau_ref * 1e9:.2f} ns, beta = {fit.law.beta:.4f}")
print(f"largest relative residual: {fit.max_abs_residual:.1%}")

###############################################################################
# Compare the integer mismatch threshold of the fitted model with the table.

fitted = skeleton.replace(law=fit.law)
print(f"{'v_evalth':>9} {'table':>6} {'model':>6}")
for frac, mt in PUBLISHED_MT_TABLE:
    print(f"{frac:>8.0%} {mt:>6g} {nominal_mt(fitted.with_threshold_fraction(frac)):>6d}")

###############################################################################
# The fit is a log-log least-squares problem, so two exact points pin it down.

true = DischargeLaw(tau_ref=70e-9, beta=0.9)
p = skeleton.replace(law=true)
pts = [(x, continuous_mt(p.with_threshold_fraction(x))) for x in (0.3, 0.8)]
back = calibrate(pts, skeleton).law
print("recovered:", np.round(back.tau_ref * 1e9, 6), "ns,", np.round(back.beta, 6))
