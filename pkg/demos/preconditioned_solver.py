"""One saddle-point solve, with and without the matching preconditioner.

Sets up a single implicit step of the polymer equation and solves it by
MINRES three ways: unpreconditioned, with the multigrid-backed matching
preconditioner in its benchmark tolerance mode, and with exact inner
solves.  The iteration counts tell the whole story.
"""

import numpy as np
import scipy.linalg

from chmorph import (
    MatchingPreconditioner,
    ModelParams,
    assemble_step_rhs,
    build_mesh,
    initialize,
    minres,
    setup_operators,
    species_operator,
)

mesh = build_mesh(2, (10.0, 2.5), (60, 30))
params = ModelParams()
ops = setup_operators(mesh)
state = initialize(mesh, params)

op = species_operator(ops, params, "p")
rhs = assemble_step_rhs(state, ops, params, "p")
print(f"saddle system: {op.shape[0]} unknowns, tau={params.tau:g}, "
      f"eps={params.eps_p:g}, MINRES tolerance 1e-7")

x_plain, rep = minres(op, rhs, tol=1e-7, maxit=20000)
print(f"  unpreconditioned:        {rep.iterations:5d} iterations "
      f"(converged: {rep.converged})")

prec = MatchingPreconditioner(ops.mass, ops.stiffness,
                              tau=params.tau, eps=params.eps_p,
                              inner_tol=1e-4)
x_amg, rep = minres(op, rhs, prec=prec.apply, tol=1e-7)
print(f"  multigrid inner (1e-4):  {rep.iterations:5d} iterations")

# exact inner solves approximate the ideal block-diagonal preconditioner
n = mesh.num_nodes
Md = ops.mass.toarray()
Ld = prec.L.toarray()


def exact_apply(v):
    w = np.empty_like(v)
    w[:n] = scipy.linalg.solve(Md, v[:n], assume_a="pos")
    w[n:] = scipy.linalg.solve(
        Ld, Md @ scipy.linalg.solve(Ld, v[n:], assume_a="pos"), assume_a="pos"
    )
    return w


x_exact, rep = minres(op, rhs, prec=exact_apply, tol=1e-7)
print(f"  exact inner solves:      {rep.iterations:5d} iterations")
print(f"\nsolutions agree to {np.max(np.abs(x_amg - x_exact)):.2e}")
