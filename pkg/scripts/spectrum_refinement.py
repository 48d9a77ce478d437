"""Symmetry, kernel residuals and coercivity of the linearised operator under lattice refinement.

usage: python scripts/spectrum_refinement.py 12 16 24
"""
import sys
import time

import numpy as np

from mixhilbert.grids import VelocityGrid, lebedev_like_rule
from mixhilbert.linearized import assemble_L, coercivity, kernel_basis, kernel_residuals
from mixhilbert.species import SpeciesPair, shared_params

sp = SpeciesPair()
p = shared_params(1.0, 1.0)
for N in [int(a) for a in sys.argv[1:]] or [12, 16]:
    t0 = time.perf_counter()
    g = VelocityGrid(6.0, N)
    op = assemble_L(p, sp, g, lebedev_like_rule(6))
    b = kernel_basis(p, sp, g)
    c0, _ = coercivity(op, b)
    print(f"N={N:3d} dof={op.L.shape[0]:5d} sym={op.symmetry_defect():.1e} LX={kernel_residuals(op, b).max():.4f}"
          f" gram={np.abs(b.gram() - np.eye(6)).max():.1e} c0={c0:.4f} ({time.perf_counter() - t0:.0f} s)")
