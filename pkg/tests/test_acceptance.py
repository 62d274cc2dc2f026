"""Acceptance suite: one test per acceptance criterion, at stated tolerances.

Each test prints a single ``[ACCEPTANCE n] PASS/FAIL`` line (run pytest with
``-s`` to see them live).  The heavy runs are shared between criteria where
the protocols coincide (the mesh sweep feeds both the iteration-robustness
and the runtime-scaling checks).
"""

import time

import numpy as np
import pytest
from dataclasses import replace

from chmorph.bench import bench_mesh_sweep, bench_param_sweep, fit_loglog_slope
from chmorph.config import RunConfig
from chmorph.krylov import minres
from chmorph.mesh import build_mesh
from chmorph.physics import (
    ModelParams,
    log_potential_derivs,
    poly_potential_derivs,
)
from chmorph.precond import MatchingPreconditioner, eigen_bounds_check
from chmorph.assembly import assemble_mass, assemble_stiffness
from chmorph.simulation import (
    DirectStepper,
    ModelDivergence,
    PhaseState,
    build_preconditioners,
    eoc_study,
    initialize,
    run,
    setup_operators,
    species_operator,
    step,
)

from test_assembly import dense_oracle


def _report(num: int, ok: bool, detail: str):
    print(f"\n[ACCEPTANCE {num}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"criterion {num}: {detail}"


# --- criterion 1: Schur approximation eigenvalue interval --------------------


def test_criterion_1_eigenvalue_interval():
    lo_all, hi_all = np.inf, -np.inf
    cases = 0
    for counts in ((4, 3), (8, 4), (12, 6)):
        mesh = build_mesh(2, (10.0, 2.5), counts)
        M = assemble_mass(mesh)
        K = assemble_stiffness(mesh)
        for tau in (1e-7, 1e-4, 1e-1, 1.0, 10.0):
            for eps in (1e-7, 1e-4, 1e-1, 1.0, 10.0):
                lo, hi = eigen_bounds_check(M, K, tau=tau, eps=eps)
                lo_all = min(lo_all, lo)
                hi_all = max(hi_all, hi)
                cases += 1
    ok = lo_all >= 0.5 - 1e-10 and hi_all <= 1.0 + 1e-10
    _report(1, ok,
            f"eigenvalues in [{lo_all:.12f}, {hi_all:.12f}] over {cases} "
            f"(mesh, tau, eps) cases; required [0.5 - 1e-10, 1 + 1e-10]")


# --- criteria 2 and 4: mesh sweep (shared protocol) ---------------------------


@pytest.fixture(scope="module")
def mesh_sweep():
    cfg = RunConfig()  # benchmark defaults: tau 1e-4, eps 1e-3, tols 1e-7/1e-4
    assert cfg.model.tau == 1e-4 and cfg.model.eps_p == 1e-3
    assert cfg.solver.outer_tol == 1e-7 and cfg.solver.inner_tol == 1e-4
    entries = bench_mesh_sweep(cfg, mesh_list=[(100, 50), (200, 100), (400, 200)])
    return entries


def test_criterion_2_mesh_robust_iterations(mesh_sweep):
    assert all(e.ok for e in mesh_sweep), [e.failed for e in mesh_sweep]
    worst = {e.label: e.max_iterations() for e in mesh_sweep}
    spread = max(worst.values()) - min(worst.values())
    ok = max(worst.values()) <= 25 and spread <= 8
    _report(2, ok,
            f"worst per-step MINRES iterations over first 20 steps: {worst} "
            f"(cap 25), spread {spread} (cap 8)")


def test_criterion_4_runtime_scaling(mesh_sweep):
    unknowns = [e.unknowns for e in mesh_sweep]
    solve_time = [float(np.median(e.solve_seconds)) for e in mesh_sweep]
    slope = fit_loglog_slope(unknowns, solve_time)
    ok = abs(slope - 1.0) <= 0.25
    _report(4, ok,
            f"log-log slope of per-step solve time vs unknowns = {slope:.3f} "
            f"over {unknowns} unknowns (required 1.0 +- 0.25); "
            f"medians {[f'{t:.3g}s' for t in solve_time]}")


# --- criterion 3: parameter robustness ----------------------------------------


def test_criterion_3_parameter_robustness():
    cfg = RunConfig()
    cfg.mesh = replace(cfg.mesh, counts=(200, 100))
    cfg.bench = replace(cfg.bench, steps=20)
    eps_entries, tau_entries = bench_param_sweep(
        cfg, eps_list=[1e-3, 1e-2, 1e-1, 1.0, 10.0],
        tau_list=[1e-7, 1e-6, 1e-5, 1e-4],
    )
    entries = eps_entries + tau_entries
    assert all(e.ok for e in entries), [e.failed for e in entries if not e.ok]
    worst = {e.label: e.max_iterations() for e in entries}
    iter_ok = max(worst.values()) <= 25

    # the unstable interface parameter must be reported as divergence, not
    # crash; on this mesh (coarser than the reference study) the blow-up
    # sets in around step 70, so the sweep horizon is extended for this case
    cfg_div = RunConfig()
    cfg_div.mesh = replace(cfg_div.mesh, counts=(200, 100))
    cfg_div.bench = replace(cfg_div.bench, steps=150)
    div_entries, _ = bench_param_sweep(cfg_div, eps_list=[1e-4], tau_list=[])
    div_ok = div_entries[0].diverged and not div_entries[0].ok

    ok = iter_ok and div_ok
    _report(3, ok,
            f"iterations <= 25 across eps/tau sweeps on 200x100: {worst}; "
            f"eps=1e-4 reported as divergence: {div_entries[0].diverged} "
            f"({div_entries[0].failed})")


# --- criterion 5: experimental order of convergence ---------------------------


def test_criterion_5_eoc():
    # Protocol as stated: 100x50 mesh, step ladder 2e-4..3.2e-3 against a
    # 1e-5 reference, common final time (0.016, i.e. five steps of the
    # coarsest rung; larger final times make the coarse runs diverge
    # outright, which would invalidate the study).
    #
    # Known-red analysis: on this mesh the two coarsest rungs sit beyond
    # the stability threshold of the semi-implicit scheme (tau = 1.6e-3
    # blows up at t ~ 0.029, tau = 3.2e-3 sooner); their pre-blow-up error
    # growth inflates the full-ladder fit to ~1.25-1.3 for every admissible
    # final time and seed, outside the required [0.6, 1.0] band.  The
    # stable sub-ladder (three finest rungs) fits to ~0.78 for both
    # species, matching the reference values 0.789/0.788.  The full-ladder
    # band therefore appears unattainable at this mesh resolution; the
    # sub-ladder order is printed alongside as diagnostic context.
    ladder = (2e-4, 4e-4, 8e-4, 1.6e-3, 3.2e-3)
    mesh = build_mesh(2, (10.0, 2.5), (100, 50))
    params = ModelParams()
    result = eoc_study(params, mesh, tau_list=ladder, tau_ref=1e-5,
                       final_time=1.6e-2)
    stable_p = fit_loglog_slope(ladder[:3], result.errors_p[:3])
    stable_nfa = fit_loglog_slope(ladder[:3], result.errors_nfa[:3])
    ok = 0.6 <= result.order_p <= 1.0 and 0.6 <= result.order_nfa <= 1.0
    _report(5, ok,
            f"full-ladder fitted orders: polymer {result.order_p:.3f}, "
            f"acceptor {result.order_nfa:.3f} (required within [0.6, 1.0]); "
            f"stable sub-ladder (3 finest steps) orders: {stable_p:.3f} / "
            f"{stable_nfa:.3f}; errors_p {result.errors_p}")


# --- criterion 6: property suites ---------------------------------------------


def test_criterion_6_property_suites():
    checks = {}

    # P1 assembly against the dense quadrature oracle
    worst = 0.0
    for counts in ((3, 3), (5, 5), (4, 2)):
        mesh = build_mesh(2, (10.0, 2.5), counts)
        M_ref, K_ref = dense_oracle(mesh)
        worst = max(
            worst,
            float(np.max(np.abs(assemble_mass(mesh).toarray() - M_ref))),
            float(np.max(np.abs(assemble_stiffness(mesh).toarray() - K_ref))),
        )
    checks["assembly_vs_oracle<=1e-13"] = worst <= 1e-13

    # potential derivatives against central differences
    params = ModelParams()
    rng = np.random.default_rng(12)
    fd_ok = True
    h = 1e-6

    def poly_energy(a, b):
        return 3.5 * a**2 * b**2 + 0.1 * (1 - a - b) ** 2

    def log_energy(a, b):
        s = 1 - a - b
        return (a / 20 * np.log(a) + b / 20 * np.log(b) + s * np.log(s)
                + a * b + 0.3 * a * s + 0.3 * b * s)

    count = 0
    while count < 100:
        a, b = rng.uniform(0.05, 0.95, size=2)
        if a + b >= 0.95:
            continue
        count += 1
        dp, dn = poly_potential_derivs(a, b)
        fd = (poly_energy(a + h, b) - poly_energy(a - h, b)) / (2 * h)
        fd_ok &= abs(dp - fd) <= 1e-6 * max(1.0, abs(fd))
        lp, ln, _ = log_potential_derivs(a, b, params)
        fd = (log_energy(a + h, b) - log_energy(a - h, b)) / (2 * h)
        fd_ok &= abs(lp - fd) <= 1e-6 * max(1.0, abs(fd))
    checks["potential_vs_fd<=1e-6"] = bool(fd_ok)

    # discrete mass conservation without boundary driving
    mesh = build_mesh(2, (10.0, 2.5), (16, 8))
    cons_params = ModelParams(g_p=0.0, g_nfa=0.0, k_evap=0.0)
    ops = setup_operators(mesh)
    precond = build_preconditioners(ops, cons_params)
    state = initialize(mesh, cons_params)
    ones = np.ones(mesh.num_nodes)
    m0 = ones @ (ops.mass @ state.phi_p)
    cons_ok = True
    for k in range(1, 101):
        state, _ = step(state, ops, precond, cons_params)
        m = ones @ (ops.mass @ state.phi_p)
        cons_ok &= abs(m - m0) <= k * 1e-8 * abs(m0)
    checks["mass_conservation_100_steps"] = bool(cons_ok)

    # MINRES preconditioned-residual monotonicity (stationary inner solver)
    op = species_operator(ops, cons_params, "p")
    fixed = MatchingPreconditioner(
        ops.mass, ops.stiffness, tau=cons_params.tau, eps=cons_params.eps_p,
        inner_mode="fixed", fixed_cycles=2,
    )
    rng = np.random.default_rng(3)
    mono_ok = True
    for _ in range(3):
        b = rng.standard_normal(2 * mesh.num_nodes)
        _, report = minres(op, b, prec=fixed.apply, tol=1e-10, maxit=400)
        hist = report.residual_history
        mono_ok &= bool(np.all(np.diff(hist) <= 1e-12 * hist[0]))
    checks["minres_monotone_residuals"] = bool(mono_ok)

    # determinism: bit-identical reruns under a fixed seed
    def five_steps():
        p = build_preconditioners(ops, cons_params)
        s = initialize(mesh, cons_params)
        for _ in range(5):
            s, _ = step(s, ops, p, cons_params)
        return s

    s1, s2 = five_steps(), five_steps()
    checks["determinism_bit_identical"] = bool(
        np.array_equal(s1.phi_p, s2.phi_p)
        and np.array_equal(s1.mu_nfa, s2.mu_nfa)
    )

    # species-swap symmetry (symmetric parameters)
    base = initialize(mesh, cons_params)
    swapped = PhaseState(
        phi_p=base.phi_nfa.copy(), phi_nfa=base.phi_p.copy(),
        mu_p=base.mu_nfa.copy(), mu_nfa=base.mu_p.copy(),
    )
    a, b = base, swapped
    for _ in range(3):
        a, _ = step(a, ops, precond, cons_params)
        b, _ = step(b, ops, precond, cons_params)
    checks["species_swap_exact"] = bool(
        np.array_equal(a.phi_p, b.phi_nfa) and np.array_equal(a.phi_nfa, b.phi_p)
    )

    ok = all(checks.values())
    _report(6, ok, f"property suite: {checks}")


# --- criterion 7: qualitative morphology ---------------------------------------


def test_criterion_7_morphology_run():
    mesh = build_mesh(2, (10.0, 2.5), (200, 100))
    params = ModelParams(tau=2e-4, final_time=10.0)
    state0 = initialize(mesh, params)
    std0 = float(np.std(state0.phi_p))

    # the saddle matrices are constant across the 50000 steps, so the run
    # uses the cached-factorization stepper; first establish on a prefix
    # that it advances the same trajectory as the MINRES protocol
    ops = setup_operators(mesh)
    precond = build_preconditioners(ops, params)
    direct = DirectStepper(ops, params)
    sm, sd = state0.copy(), state0.copy()
    for _ in range(25):
        sm, _ = step(sm, ops, precond, params)
        sd, _ = direct.step(sd)
    agree = float(np.max(np.abs(sm.phi_p - sd.phi_p)))
    assert agree <= 1e-5, f"direct and MINRES trajectories differ by {agree:.2e}"

    t0 = time.perf_counter()
    snap_stds = []

    def watch(step_idx, t, s):
        snap_stds.append((t, float(np.std(s.phi_p))))

    try:
        result = run(
            params, mesh, state=state0, ops=ops, callbacks=[watch],
            snapshot_times=(0.02, 0.06, 0.4, 2.0, 10.0), solver="direct",
        )
    except ModelDivergence as exc:
        _report(7, False, f"diverged at step {exc.step_index}")
        return
    stdT = float(np.std(result.final_state.phi_p))
    elapsed = time.perf_counter() - t0
    ok = (
        len(result.reports) == 50000
        and len(snap_stds) == 5
        and np.isclose(result.final_state.t, 10.0)
        and stdT > 5.0 * std0
    )
    _report(7, ok,
            f"50000 steps to t=10 in {elapsed:.0f}s without divergence "
            f"(MINRES prefix agreement {agree:.1e}); "
            f"std(phi_p): t=0 {std0:.5f} -> t=10 {stdT:.5f} "
            f"(ratio {stdT / std0:.1f}, required > 5); "
            f"snapshot stds {[(f'{t:g}', f'{s:.4f}') for t, s in snap_stds]}")
