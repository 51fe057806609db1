"""Bose-Einstein states as discrete fixed points.

Detailed balance holds node by node, so the collision residual of
1/(exp(c E) - 1) is limited only by quadrature error and shrinks quickly
with grid refinement.
"""

import numpy as np

from qbkinetic import PhysicalParams, make_grid
from qbkinetic.collision import q_apply
from qbkinetic.grid import bose_einstein

params = PhysicalParams(kappa3=0.05)
for refine in (1, 2):
    grid = make_grid(refine=refine, params=params)
    vw = grid.volume_weights()
    for c in (0.5, 1.0, 2.0):
        r = q_apply(bose_einstein(c, grid, params), params)
        res = np.sum(vw * np.abs(r.q)) / np.sum(vw * np.abs(r.gain))
        print(f"refine {refine}  c = {c:3.1f}  |Q|/|gain| = {res:.3e}")
