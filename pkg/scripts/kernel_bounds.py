"""All kernel BoundReports for a few potentials; one JSON document per line.

usage: python scripts/kernel_bounds.py 1 -1
"""
import sys

from mixhilbert import kernel_estimates as ke
from mixhilbert.species import SpeciesPair

spec = ke.CutoffSpec(0.2)
for gamma in [float(a) for a in sys.argv[1:]] or [1.0, -1.0]:
    sp = SpeciesPair(1.0, 2.0, gamma)
    fr = ke.default_frame(sp)
    for rep in (ke.verify_k1(fr, spec), ke.verify_typical(fr, spec), ke.verify_hybrid_cross(fr, spec),
                ke.verify_hybrid_equal(fr, spec), ke.verify_integrated_decay(fr, spec),
                ke.verify_singular_scaling(fr), ke.verify_jacobian(sp)):
        print(rep.to_json())
