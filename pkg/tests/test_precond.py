import numpy as np
import pytest
import scipy.sparse as sp

from chmorph.assembly import assemble_mass, assemble_stiffness
from chmorph.krylov import BlockOperator2x2, minres
from chmorph.mesh import build_mesh
from chmorph.precond import MatchingPreconditioner, eigen_bounds_check


def mesh_matrices(counts, extents=(10.0, 2.5)):
    mesh = build_mesh(2, extents, counts)
    return assemble_mass(mesh), assemble_stiffness(mesh)


def test_identity_blocks():
    identity = sp.eye(6, format="csr")
    zero = sp.csr_matrix((6, 6))
    p = MatchingPreconditioner(identity, zero, tau=1.0, eps=1.0)
    v = np.arange(12, dtype=float)
    w = p.apply(v)
    assert np.allclose(w, v, atol=1e-12)


def test_scalar_schur_application():
    # M = I, K = I, tau = eps = 1: L = 2I and L^{-1} M L^{-1} = I/4
    identity = sp.eye(5, format="csr")
    p = MatchingPreconditioner(identity, identity, tau=1.0, eps=1.0)
    v = np.concatenate([np.zeros(5), np.full(5, 4.0)])
    w = p.apply(v)
    assert np.allclose(w[5:], 1.0, atol=1e-10)
    assert np.allclose(w[:5], 0.0, atol=1e-12)


def test_zero_in_zero_out():
    M, K = mesh_matrices((8, 5))
    p = MatchingPreconditioner(M, K, tau=1e-4, eps=1e-3)
    w = p.apply(np.zeros(2 * M.shape[0]))
    assert np.all(w == 0.0)


def test_linearity_fixed_cycle_mode():
    M, K = mesh_matrices((10, 6))
    p = MatchingPreconditioner(M, K, tau=1e-4, eps=1e-3,
                               inner_mode="fixed", fixed_cycles=2)
    rng = np.random.default_rng(0)
    v = rng.standard_normal(2 * M.shape[0])
    w1 = p.apply(3.0 * v)
    w2 = 3.0 * p.apply(v)
    assert np.allclose(w1, w2, rtol=1e-12, atol=1e-13)


def test_fixed_cycle_mode_symmetric_positive_definite():
    M, K = mesh_matrices((9, 5))
    p = MatchingPreconditioner(M, K, tau=1e-4, eps=1e-3,
                               inner_mode="fixed", fixed_cycles=2)
    rng = np.random.default_rng(1)
    n2 = 2 * M.shape[0]
    for _ in range(5):
        u = rng.standard_normal(n2)
        v = rng.standard_normal(n2)
        assert np.isclose(u @ p.apply(v), v @ p.apply(u), rtol=1e-10, atol=1e-12)
    for _ in range(3):
        u = rng.standard_normal(n2)
        assert u @ p.apply(u) > 0.0


def test_build_validation():
    M, K = mesh_matrices((4, 3))
    with pytest.raises(ValueError):
        MatchingPreconditioner(M, K, tau=-1.0, eps=1e-3)
    with pytest.raises(ValueError):
        MatchingPreconditioner(M, K, tau=1e-4, eps=0.0)
    with pytest.raises(ValueError):
        MatchingPreconditioner(M, sp.eye(7, format="csr"), tau=1e-4, eps=1e-3)


def test_eigen_bounds_scalar_cases():
    identity = sp.eye(4, format="csr")
    zero = sp.csr_matrix((4, 4))
    lo, hi = eigen_bounds_check(identity, identity, tau=1.0, eps=1.0)
    assert np.isclose(lo, 0.5, atol=1e-12)
    assert np.isclose(hi, 0.5, atol=1e-12)
    # K = 0 makes the approximation exact: every eigenvalue is 1
    lo, hi = eigen_bounds_check(identity, zero, tau=1.0, eps=1.0)
    assert np.isclose(lo, 1.0, atol=1e-12)
    assert np.isclose(hi, 1.0, atol=1e-12)
    lo, hi = eigen_bounds_check(identity, sp.diags([0.0, 1.0, 0.0, 1.0]).tocsr(),
                                tau=1.0, eps=1.0)
    assert np.isclose(lo, 0.5, atol=1e-12)
    assert np.isclose(hi, 1.0, atol=1e-12)


def test_eigen_bounds_on_mesh():
    M, K = mesh_matrices((10, 5))
    for tau, eps in [(1e-4, 1e-3), (1e-7, 10.0)]:
        lo, hi = eigen_bounds_check(M, K, tau=tau, eps=eps)
        assert lo >= 0.5 - 1e-10
        assert hi <= 1.0 + 1e-10


def test_eigen_bounds_parameter_sweep():
    M, K = mesh_matrices((12, 6))
    for tau in (1e-7, 1e-4, 1e-1, 1.0, 10.0):
        for eps in (1e-7, 1e-4, 1e-1, 1.0, 10.0):
            lo, hi = eigen_bounds_check(M, K, tau=tau, eps=eps)
            assert lo >= 0.5 - 1e-10, (tau, eps, lo)
            assert hi <= 1.0 + 1e-10, (tau, eps, hi)


def test_eigen_bounds_cap():
    M, K = mesh_matrices((40, 40))
    with pytest.raises(ValueError):
        eigen_bounds_check(M, K, tau=1e-4, eps=1e-3, mesh_cap=100)


def test_ideal_preconditioner_clusters_minres():
    # exact inner solves: MINRES on the saddle system converges fast
    M, K = mesh_matrices((12, 6))
    tau, eps = 1e-4, 1e-3
    op = BlockOperator2x2(((M, K), (K, M)), ((1.0, tau), (tau, -tau / eps)))
    Md = M.toarray()
    Ld = (tau * K + np.sqrt(tau / eps) * M).toarray()
    n = M.shape[0]

    def exact_apply(v):
        w = np.empty_like(v)
        w[:n] = np.linalg.solve(Md, v[:n])
        w[n:] = np.linalg.solve(Ld, Md @ np.linalg.solve(Ld, v[n:]))
        return w

    rng = np.random.default_rng(2)
    b = rng.standard_normal(2 * n)
    x, report = minres(op, b, prec=exact_apply, tol=1e-7, maxit=200)
    assert report.converged
    assert report.iterations <= 40
    x_ref = np.linalg.solve(op.toarray(), b)
    assert np.allclose(x, x_ref, atol=1e-5 * np.linalg.norm(x_ref))


def test_amg_preconditioner_close_to_exact():
    M, K = mesh_matrices((16, 8))
    tau, eps = 1e-4, 1e-3
    p = MatchingPreconditioner(M, K, tau=tau, eps=eps, inner_tol=1e-10)
    Md = M.toarray()
    Ld = p.L.toarray()
    n = M.shape[0]
    rng = np.random.default_rng(3)
    v = rng.standard_normal(2 * n)
    w = p.apply(v)
    w_ref = np.empty_like(v)
    w_ref[:n] = np.linalg.solve(Md, v[:n])
    w_ref[n:] = np.linalg.solve(Ld, Md @ np.linalg.solve(Ld, v[n:]))
    assert np.allclose(w, w_ref, rtol=1e-6, atol=1e-8 * np.linalg.norm(w_ref))
