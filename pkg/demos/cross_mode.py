"""Check the two evolution modes against each other.

A Cartesian run is sampled onto the hyperboloids s = 2 and s = 4. A native
hyperboloidal run starts from the s = 2 sample. The two s = 4 slices should
differ only by truncation error, shrinking about 4x per halving of dr.
"""

import math

from wkglab.evolution import SchemeConfig, SliceRecorder, run
from wkglab.models import InitialData, WKGModel
from wkglab.stencils import trapezoid_radial

model, scheme = WKGModel(), SchemeConfig()
data = InitialData.bumps(2e-2, u=0.5)
previous = None
for dr in (0.04, 0.02, 0.01):
    rec = SliceRecorder([2.0, 4.0], r_max=10.0)
    run(data, model, scheme, (2.0, 11.0), dr=dr, r_max=20.0, observers=[rec])
    slices = rec.finish()
    native = run(slices[2.0], model, scheme, (2.0, 4.0), mode="hyperboloidal",
                 record_every=2.0, keep_states=True).states[-1]
    r = native.chart.r
    inside = r <= 8.0
    diff = math.sqrt(sum(trapezoid_radial((native.values[n] - slices[4.0].values[n])[inside] ** 2, r[inside])
                         for n in model.unknowns))
    order = "" if previous is None else f"  order {math.log2(previous / diff):.2f}"
    print(f"dr = {dr:<5g} L2 difference {diff:.3e}{order}")
    previous = diff
