"""The subcritical existence threshold lambda0 = sup_k min(k, y1(k)), built
from the sharp GN constant and the mu = 0 minimum m0."""

import math

from bnlslab.functionals import ModelParams
from bnlslab.grid import make_grid
from bnlslab.groundstate import solve_constrained, solve_profile
from bnlslab.thresholds import fk_analysis, gn_constants

grid = make_grid(1, 512, 32 * math.pi)
for p in (3.0, 5.0):
    gn = gn_constants(solve_profile("qp", ModelParams(1, p), grid))
    m0 = solve_constrained(ModelParams(1, p), grid).energy
    fk = fk_analysis(gn, m0)
    print(f"p = {p:g}: m0 = {m0:.10e}, lambda0 = {fk.lambda0:.10f} at k* = {fk.k_star:.10f}")
    for k, y1, y2 in list(zip(fk.k_grid, fk.y1, fk.y2))[::8]:
        print(f"   k = {k:9.4f}  y1 = {y1:.6e}  y2 = {y2:.6e}")
