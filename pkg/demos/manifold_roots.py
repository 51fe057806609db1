"""Parametrising the three-wave resonance surface.

For a momentum p and a fraction gamma the surface point is found by
bisection on H0(p, gamma, q) = 0.  At gamma = 1/2 the root has a closed
form, which makes a handy sanity check.
"""

import numpy as np

from qbkinetic import PhysicalParams
from qbkinetic.manifolds import q_half_closed_form, solve_q_gamma_s0

unit = PhysicalParams(kappa1_override=1.0, kappa2_override=1.0)
for p in (0.1, 1.0, 2.0, 10.0):
    qs = [solve_q_gamma_s0(p, g, unit) for g in np.linspace(0.1, 0.9, 5)]
    half = q_half_closed_form(p, unit)
    print(f"p = {p:5.1f}  q(gamma) = " + " ".join(f"{q:8.4f}" for q in qs) + f"   closed form q(1/2) = {half:.6f}")
