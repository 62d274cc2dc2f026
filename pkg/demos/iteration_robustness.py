"""Iteration counts under mesh refinement and parameter variation (desk scale).

Time-steps the coupled model on a ladder of meshes and across interface
parameters, recording the worse per-step MINRES iteration count of the two
species.  The counts stay in a narrow band: that flatness is the point of
the block preconditioner.  The full-size protocol lives in the acceptance
suite and the `chmorph bench-mesh` / `chmorph bench-params` commands.
"""

import numpy as np
from dataclasses import replace

from chmorph import RunConfig, bench_mesh_sweep, bench_param_sweep, fit_loglog_slope

cfg = RunConfig()
cfg.bench = replace(cfg.bench, steps=10)

print("mesh refinement (10 steps each, tau=1e-4, eps=1e-3):")
entries = bench_mesh_sweep(cfg, mesh_list=[(50, 25), (100, 50), (141, 71)])
for e in entries:
    print(f"  {e.label:>8}: unknowns {e.unknowns:>6}, worst iterations "
          f"{e.max_iterations():>3}, median solve {np.median(e.solve_seconds):.3f}s")
slope = fit_loglog_slope([e.unknowns for e in entries],
                         [float(np.median(e.solve_seconds)) for e in entries])
print(f"  runtime scaling slope: {slope:.2f} (1.0 = linear in unknowns)")

print("\ninterface parameter sweep on 100x50 (10 steps each, tau=1e-4):")
cfg.mesh = replace(cfg.mesh, counts=(100, 50))
eps_entries, tau_entries = bench_param_sweep(
    cfg, eps_list=[1e-3, 1e-1, 10.0], tau_list=[1e-6, 1e-4],
)
for e in eps_entries + tau_entries:
    status = "diverged" if e.diverged else f"worst iterations {e.max_iterations()}"
    print(f"  {e.label:>10}: {status}")
