"""
Corners, word size and energy
=============================

Three design knobs of the analog CAM, evaluated with the behavioral model.
"""

import numpy as np

from hdcam import FF, SS, TT, MatchlineParams, corner_compensation, energy_per_bit, nominal_mt
from hdcam.variation import corner_params

VDD = 1.2

###############################################################################
# Process corners speed up (FF) or slow down (SS) the discharge. Holding the
# sense threshold fixed, v_eval can be re-tuned to restore the TT threshold.

base = MatchlineParams(v_eval=0.55, v_evalth=0.55 * VDD)
target = nominal_mt(base)
grid = np.round(np.arange(0.40, 0.7001, 0.01), 2)
for c in (FF, TT, SS):
    uncompensated = nominal_mt(corner_params(base, c))
    comp = corner_compensation(target, c, base, grid, [base.v_evalth])
    print(f"{c.name}: MT {uncompensated:>3} -> v_eval {comp.v_eval:.2f} V gives MT {comp.achieved_mt} "
          f"(target {target})")

###############################################################################
# Wider words have more matchline capacitance and discharge more slowly,
# so the same voltages tolerate more mismatching bits.

for w in (128, 256, 512):
    print(f"{w:>4}-bit word: MT = {nominal_mt(MatchlineParams(v_eval=0.60, v_evalth=0.72, word_bits=w))}")

###############################################################################
# Energy per bit per search, interpolated from the characterized grid.

print("exact-match mode:", energy_per_bit(VDD, 64), "fJ")
for v in (0.4, 0.5, 0.6):
    row = [energy_per_bit(v, b) for b in (1, 16, 48, 128)]
    print(f"v_eval {v} V:", ", ".join(f"{e:.3f}" for e in row), "fJ at 1/16/48/128 bits")
