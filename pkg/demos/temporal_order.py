"""Experimental order of convergence of the semi-implicit scheme.

Two studies: a linear-flow control (bulk potential off) where the scheme is
plain implicit Euler and must show order one, and the full nonlinear model
at a reduced desk scale.  The explicit treatment of the potential and
boundary terms typically drags the fitted order somewhat below one.

The full-scale protocol (100x50 mesh, steps from 2e-4 to 3.2e-3 against a
1e-5 reference) runs in the acceptance suite and via `chmorph eoc`.
"""

from chmorph import ModelParams, build_mesh, eoc_study

print("control: linear decay flow (potential off), implicit Euler")
mesh = build_mesh(2, (1.0, 1.0), (8, 6))
linear = ModelParams(potential="none", g_p=0.0, g_nfa=0.0, k_evap=0.0,
                     eps_p=1e-2, eps_nfa=1e-2, init_ampl=0.05)
result = eoc_study(linear, mesh, tau_list=(2e-3, 4e-3, 8e-3),
                   tau_ref=2.5e-4, final_time=0.04, outer_tol=1e-11)
for tau, err in zip(result.tau_values, result.errors_p):
    print(f"  tau={tau:7.1e}: error {err:.3e}")
print(f"  fitted order: {result.order_p:.3f} (expected 1.0)")

print("\nfull model at desk scale (polynomial potential, boundary fluxes on)")
mesh = build_mesh(2, (10.0, 2.5), (50, 25))
full = ModelParams()
result = eoc_study(full, mesh, tau_list=(2e-4, 4e-4, 8e-4, 1.6e-3),
                   tau_ref=2e-5, final_time=8e-3)
for tau, ep, en in zip(result.tau_values, result.errors_p, result.errors_nfa):
    print(f"  tau={tau:7.1e}: errors p {ep:.3e}, acceptor {en:.3e}")
print(f"  fitted orders: polymer {result.order_p:.3f}, "
      f"acceptor {result.order_nfa:.3f}")
