"""Split-step evolution: exact plane waves, conservation, and second-order
convergence of the Strang splitting."""

import math

import numpy as np

from bnlslab.dynamics import EvolutionConfig, evolve
from bnlslab.functionals import ModelParams
from bnlslab.grid import Field, make_grid

grid = make_grid(1, 256, 32 * math.pi)
params = ModelParams(1, 3.0, 0.5)
k = grid.wavenumbers[3]
amp = 0.7
omega = k**4 + params.mu * k**2 - amp ** (params.p - 1)

wave = Field(grid, amp * np.exp(1j * k * grid.axis))
tr = evolve(wave, params, EvolutionConfig(dt=0.05, t_final=10.0))
exact = amp * np.exp(1j * (k * grid.axis - omega * 10.0))
print("plane wave, max error vs the exact solution:", np.abs(tr.final.physical() - exact).max())

# a sideband makes the dynamics nontrivial; compare against a much finer step
side = wave + Field(grid, 0.1 * np.exp(1j * grid.wavenumbers[19] * grid.axis))
ref = evolve(side, params, EvolutionConfig(dt=0.01 / 32, t_final=10.0, record_every=1000)).final.spectral()[3]
prev = None
for dt in (0.04, 0.02, 0.01):
    tr = evolve(side, params, EvolutionConfig(dt=dt, t_final=10.0))
    err = abs(np.angle(tr.final.spectral()[3] / ref))
    ratio = "" if prev is None else f"  ratio {prev / err:.3f}"
    print(f"dt = {dt:5.3f}: phase error {err:.3e}, energy drift {tr.energy_drift:.3e}, "
          f"mass drift {tr.mass_drift:.1e}{ratio}")
    prev = err
