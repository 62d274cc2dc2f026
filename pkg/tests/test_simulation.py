import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from dataclasses import replace

from chmorph.mesh import build_mesh
from chmorph.physics import ModelParams, poly_potential_derivs
from chmorph.simulation import (
    DirectStepper,
    ModelDivergence,
    PhaseState,
    assemble_step_rhs,
    build_preconditioners,
    eoc_study,
    initialize,
    run,
    setup_operators,
    species_operator,
    step,
    tau_effective,
)


@pytest.fixture(scope="module")
def small_problem():
    mesh = build_mesh(2, (10.0, 2.5), (16, 8))
    params = ModelParams()
    ops = setup_operators(mesh)
    precond = build_preconditioners(ops, params)
    return mesh, params, ops, precond


def test_initialize_constant_when_no_amplitude():
    mesh = build_mesh(2, (1.0, 1.0), (4, 3))
    params = ModelParams(init_mean=0.4, init_ampl=1e-300)
    state = initialize(mesh, params)
    assert np.allclose(state.phi_p, 0.4, atol=1e-12)
    assert np.all(state.mu_p == 0.0)
    assert state.t == 0.0 and state.step == 0


def test_initialize_range_and_determinism():
    mesh = build_mesh(2, (10.0, 2.5), (20, 10))
    params = ModelParams(seed=7)
    a = initialize(mesh, params)
    b = initialize(mesh, params)
    assert np.all(a.phi_p >= 0.34) and np.all(a.phi_p <= 0.36)
    assert np.all(a.phi_nfa >= 0.34) and np.all(a.phi_nfa <= 0.36)
    assert np.array_equal(a.phi_p, b.phi_p)
    assert np.array_equal(a.phi_nfa, b.phi_nfa)
    c = initialize(mesh, params, seed=8)
    assert not np.array_equal(a.phi_p, c.phi_p)


def test_step_rhs_constant_state_no_boundary_terms(small_problem):
    mesh, _, ops, _ = small_problem
    params = ModelParams(g_p=0.0, g_nfa=0.0, k_evap=0.0)
    n = mesh.num_nodes
    state = PhaseState(
        phi_p=np.full(n, 0.35), phi_nfa=np.full(n, 0.35),
        mu_p=np.zeros(n), mu_nfa=np.zeros(n),
    )
    rhs = assemble_step_rhs(state, ops, params, "p")
    assert np.allclose(rhs[:n], ops.mass @ state.phi_p, atol=1e-15)
    # second block carries the bulk term: M times the nodal derivative value
    value = 7.0 * 0.35**3 - 0.2 * 0.30
    t = tau_effective(params, "p")
    expected = -(t / params.eps_p) * (ops.mass @ np.full(n, value))
    assert np.allclose(rhs[n:], expected, rtol=1e-13)


def test_scaled_and_unscaled_systems_agree(small_problem):
    mesh, params, ops, precond = small_problem
    state = initialize(mesh, params)
    n = mesh.num_nodes
    new_state, _ = step(state, ops, precond, params, outer_tol=1e-11)

    # the raw semi-implicit system, no symmetrizing row scaling
    df_dp, _ = poly_potential_derivs(state.phi_p, state.phi_nfa)
    rhs_scaled = assemble_step_rhs(state, ops, params, "p")
    t = tau_effective(params, "p")
    unscaled = sp.bmat(
        [[ops.mass, t * ops.stiffness],
         [-params.eps_p * ops.stiffness, ops.mass]], format="csc",
    )
    rhs = np.concatenate([rhs_scaled[:n], ops.mass @ df_dp])
    x = spla.spsolve(unscaled, rhs)
    assert np.allclose(new_state.phi_p, x[:n], atol=1e-8)
    assert np.allclose(new_state.mu_p, x[n:], atol=1e-7)


def test_constant_state_is_equilibrium(small_problem):
    mesh, _, ops, _ = small_problem
    params = ModelParams(g_p=0.0, g_nfa=0.0, k_evap=0.0, potential="none")
    precond = build_preconditioners(ops, params)
    n = mesh.num_nodes
    state = PhaseState(
        phi_p=np.full(n, 0.35), phi_nfa=np.full(n, 0.35),
        mu_p=np.zeros(n), mu_nfa=np.zeros(n),
    )
    new_state, _ = step(state, ops, precond, params, outer_tol=1e-12)
    assert np.allclose(new_state.phi_p, 0.35, atol=1e-9)
    assert np.allclose(new_state.mu_p, 0.0, atol=1e-9)


def test_mass_conservation_zero_boundary_data(small_problem):
    mesh, _, ops, _ = small_problem
    params = ModelParams(g_p=0.0, g_nfa=0.0, k_evap=0.0)
    precond = build_preconditioners(ops, params)
    state = initialize(mesh, params)
    ones = np.ones(mesh.num_nodes)
    m0 = ones @ (ops.mass @ state.phi_p)
    for k in range(1, 101):
        state, _ = step(state, ops, precond, params)
        m = ones @ (ops.mass @ state.phi_p)
        assert abs(m - m0) <= k * 1e-8 * abs(m0)


def test_trajectory_determinism(small_problem):
    mesh, params, ops, _ = small_problem

    def trajectory():
        precond = build_preconditioners(ops, params)
        state = initialize(mesh, params)
        for _ in range(5):
            state, _ = step(state, ops, precond, params)
        return state

    a = trajectory()
    b = trajectory()
    assert np.array_equal(a.phi_p, b.phi_p)
    assert np.array_equal(a.mu_nfa, b.mu_nfa)


def test_species_swap_symmetry(small_problem):
    mesh, params, ops, precond = small_problem
    state = initialize(mesh, params)
    swapped = PhaseState(
        phi_p=state.phi_nfa.copy(), phi_nfa=state.phi_p.copy(),
        mu_p=state.mu_nfa.copy(), mu_nfa=state.mu_p.copy(),
    )
    for _ in range(3):
        state, _ = step(state, ops, precond, params)
        swapped, _ = step(swapped, ops, precond, params)
    assert np.array_equal(state.phi_p, swapped.phi_nfa)
    assert np.array_equal(state.phi_nfa, swapped.phi_p)
    assert np.array_equal(state.mu_p, swapped.mu_nfa)


def test_block_operator_exactly_symmetric(small_problem):
    _, params, ops, _ = small_problem
    op = species_operator(ops, params, "p")
    dense = op.toarray()
    assert np.max(np.abs(dense - dense.T)) == 0.0


def test_step_detects_nonfinite_state(small_problem):
    mesh, params, ops, precond = small_problem
    state = initialize(mesh, params)
    state.phi_p[3] = np.nan
    with pytest.raises(ModelDivergence):
        step(state, ops, precond, params)


def test_run_executes_exact_step_count():
    mesh = build_mesh(2, (1.0, 1.0), (6, 4))
    params = ModelParams(tau=1e-4, final_time=5e-4)
    result = run(params, mesh)
    assert len(result.reports) == 5
    assert np.isclose(result.final_state.t, 5e-4)


def test_run_fires_snapshots_at_configured_times():
    mesh = build_mesh(2, (1.0, 1.0), (6, 4))
    params = ModelParams(tau=1e-4, final_time=1e-3)
    seen = []
    result = run(
        params, mesh, callbacks=[lambda k, t, s: seen.append((k, t))],
        snapshot_times=(0.0, 3e-4, 1e-3), keep_snapshots=True,
    )
    assert len(seen) == 3
    assert seen[0][0] == 0
    assert seen[1][0] == 3
    assert seen[2][0] == 10
    assert len(result.snapshots) == 3


def test_direct_stepper_matches_minres(small_problem):
    mesh, params, ops, precond = small_problem
    state = initialize(mesh, params)
    direct = DirectStepper(ops, params)
    s1, s2 = state.copy(), state.copy()
    for _ in range(5):
        s1, _ = step(s1, ops, precond, params)
        s2, _ = direct.step(s2)
    assert np.allclose(s1.phi_p, s2.phi_p, atol=1e-7)
    assert np.allclose(s1.phi_nfa, s2.phi_nfa, atol=1e-7)


def test_solve_order_independence(small_problem):
    # both species read only the incoming state, so solving them in either
    # order yields the same advanced state
    mesh, params, ops, precond = small_problem
    state = initialize(mesh, params)
    import chmorph.simulation as sim

    forward, _ = step(state, ops, precond, params)
    original = sim.SPECIES
    sim.SPECIES = ("nfa", "p")
    try:
        reverse, _ = step(state, ops, precond, params)
    finally:
        sim.SPECIES = original
    assert np.array_equal(forward.phi_p, reverse.phi_p)
    assert np.array_equal(forward.phi_nfa, reverse.phi_nfa)


def test_eoc_linear_flow_first_order():
    # with the bulk potential off and no boundary driving, the scheme is
    # plain implicit Euler on a linear flow: order one in the step size
    mesh = build_mesh(2, (1.0, 1.0), (8, 6))
    params = ModelParams(
        potential="none", g_p=0.0, g_nfa=0.0, k_evap=0.0,
        eps_p=1e-2, eps_nfa=1e-2, init_ampl=0.05,
    )
    result = eoc_study(
        params, mesh, tau_list=(2e-3, 4e-3, 8e-3), tau_ref=2.5e-4,
        final_time=0.04, outer_tol=1e-11,
    )
    assert abs(result.order_p - 1.0) <= 0.1
    assert abs(result.order_nfa - 1.0) <= 0.1


def test_three_dimensional_run():
    mesh = build_mesh(3, (10.0, 2.5, 10.0), (6, 4, 6))
    params = ModelParams(tau=1e-4, final_time=3e-4)
    result = run(params, mesh)
    assert len(result.reports) == 3
    state = result.final_state
    assert np.all(np.isfinite(state.phi_p))
    assert state.phi_p.shape == (mesh.num_nodes,)
    # conservative transport: without boundary terms the budget is closed
    zero_bc = ModelParams(tau=1e-4, final_time=3e-4, g_p=0.0, g_nfa=0.0,
                          k_evap=0.0)
    ops = setup_operators(mesh)
    ones = np.ones(mesh.num_nodes)
    r = run(zero_bc, mesh, ops=ops, outer_tol=1e-10)
    m0 = ones @ (ops.mass @ initialize(mesh, zero_bc).phi_p)
    m3 = ones @ (ops.mass @ r.final_state.phi_p)
    assert abs(m3 - m0) <= 3e-8 * abs(m0)


def test_eoc_rejects_degenerate_ladder():
    mesh = build_mesh(2, (1.0, 1.0), (4, 3))
    params = ModelParams()
    with pytest.raises(ValueError):
        eoc_study(params, mesh, tau_list=(1e-3, 1e-3), tau_ref=1e-4,
                  final_time=1e-2)
    with pytest.raises(ValueError):
        eoc_study(params, mesh, tau_list=(1e-3, 1.5e-4), tau_ref=1e-4,
                  final_time=1e-2)
