"""Perturb a ground state by delta times H^2-orthogonal noise, evolve, and
record how far the solution strays from the orbit of the ground state."""

import math

from bnlslab.dynamics import EvolutionConfig, stability_experiment
from bnlslab.functionals import ModelParams
from bnlslab.grid import make_grid
from bnlslab.groundstate import solve_constrained, solve_profile
from bnlslab.thresholds import fk_analysis, gn_constants

grid = make_grid(1, 256, 32 * math.pi)
fine = make_grid(1, 512, 32 * math.pi)
gn = gn_constants(solve_profile("qp", ModelParams(1, 3.0), fine))
lam0 = fk_analysis(gn, solve_constrained(ModelParams(1, 3.0), fine).energy).lambda0

params = ModelParams(1, 3.0, -0.5 * lam0)
ground = solve_constrained(params, grid)
cfg = EvolutionConfig(dt=1e-3, t_final=5.0, record_every=100)
rep = stability_experiment(ground, [1e-3, 3e-3, 1e-2, 3e-2], params, cfg)

print(f"mu = -lambda0/2 = {params.mu:.6f}; unperturbed baseline {rep.baseline:.2e}")
for d, s in zip(rep.deltas, rep.sup_distance):
    print(f"delta = {d:6.3f}: sup_t distance {s:.4e}  ({s / d:.3f} delta)")
print(f"log-log slope {rep.loglog_slope:.3f}, monotone: {rep.monotone}")
