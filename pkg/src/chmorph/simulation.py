"""Semi-implicit time stepping of the coupled phase-field system.

Each step solves, for the polymer and the acceptor species independently,
one symmetric saddle-point system

    [[M, t K], [t K, -(t/e) M]] [phi; mu] = [M phi_old + tau b; -(t/e) f]

with t = tau * mobility, where f is the bulk-potential load evaluated at the
previous step and b collects the substrate and evaporation surface loads,
both treated explicitly.  The two species couple only through those explicit
terms, so within a step their solves are order-independent.

Divergence of the concentrations (typically for very small interface
parameters) is detected through non-finite values and raised as
:class:`ModelDivergence`; solver failures abort the step with the offending
report attached.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .assembly import (
    assemble_boundary_mass,
    assemble_mass,
    assemble_stiffness,
)
from .krylov import BlockOperator2x2, SolveReport, minres
from .mesh import MeshGrid
from .physics import (
    ModelParams,
    evaporation_flux_top,
    potential_derivs,
    surface_flux_bottom,
)
from .precond import MatchingPreconditioner

__all__ = [
    "PhaseState",
    "ProblemOperators",
    "SimulationResult",
    "SolverFailure",
    "ModelDivergence",
    "setup_operators",
    "initialize",
    "build_preconditioners",
    "assemble_step_rhs",
    "species_operator",
    "step",
    "run",
    "eoc_study",
    "EocResult",
]

log = logging.getLogger(__name__)

SPECIES = ("p", "nfa")

# nodal phi_p + phi_nfa may exceed 1 near the driven boundaries; beyond this
# slack the excess is logged as a diagnostic (never fatal)
SUM_DRIFT_TOL = 0.05

# volume fractions live in [0, 1]; fields beyond this magnitude are a model
# blow-up, flagged before the arithmetic overflows into NaN
BLOWUP_LIMIT = 1e3


class SolverFailure(RuntimeError):
    def __init__(self, message, step_index=None, species=None, report=None):
        super().__init__(message)
        self.step_index = step_index
        self.species = species
        self.report = report


class ModelDivergence(RuntimeError):
    def __init__(self, message, step_index=None):
        super().__init__(message)
        self.step_index = step_index


@dataclass
class PhaseState:
    """Nodal coefficient vectors of both transported fields at one time level."""

    phi_p: np.ndarray
    phi_nfa: np.ndarray
    mu_p: np.ndarray
    mu_nfa: np.ndarray
    t: float = 0.0
    step: int = 0

    def phi(self, species: str) -> np.ndarray:
        return self.phi_p if species == "p" else self.phi_nfa

    def mu(self, species: str) -> np.ndarray:
        return self.mu_p if species == "p" else self.mu_nfa

    @property
    def phi_solvent(self) -> np.ndarray:
        return 1.0 - (self.phi_p + self.phi_nfa)

    def copy(self) -> "PhaseState":
        return PhaseState(
            self.phi_p.copy(), self.phi_nfa.copy(),
            self.mu_p.copy(), self.mu_nfa.copy(), self.t, self.step,
        )


@dataclass
class ProblemOperators:
    """Mesh-bound matrices shared by every time step."""

    mesh: MeshGrid
    mass: sp.csr_matrix
    stiffness: sp.csr_matrix
    bmass_top: sp.csr_matrix
    bmass_bottom: sp.csr_matrix
    top_nodes: np.ndarray
    bottom_nodes: np.ndarray

    @property
    def num_nodes(self) -> int:
        return self.mesh.num_nodes


@dataclass
class SimulationResult:
    final_state: PhaseState
    reports: list  # one (report_p, report_nfa) pair per executed step
    step_seconds: list
    snapshots: list = field(default_factory=list)

    def worst_iterations(self) -> np.ndarray:
        """Per-step maximum of the two species' iteration counts."""
        return np.array([max(rp.iterations, rn.iterations)
                         for rp, rn in self.reports])

    def solve_seconds(self) -> np.ndarray:
        """Per-step maximum of the two species' solver wall times."""
        return np.array([max(rp.wall_time, rn.wall_time)
                         for rp, rn in self.reports])


def _check_state_bounded(state: PhaseState):
    worst = max(
        float(np.max(np.abs(state.phi_p)), ),
        float(np.max(np.abs(state.phi_nfa))),
    ) if state.phi_p.size else 0.0
    if not np.isfinite(worst) or worst > BLOWUP_LIMIT:
        raise ModelDivergence(
            f"concentrations diverged (max magnitude {worst:.3e}) "
            f"entering step {state.step + 1}",
            step_index=state.step + 1,
        )


def setup_operators(mesh: MeshGrid) -> ProblemOperators:
    return ProblemOperators(
        mesh=mesh,
        mass=assemble_mass(mesh),
        stiffness=assemble_stiffness(mesh),
        bmass_top=assemble_boundary_mass(mesh, "top"),
        bmass_bottom=assemble_boundary_mass(mesh, "bottom"),
        top_nodes=np.unique(mesh.facets_top),
        bottom_nodes=np.unique(mesh.facets_bottom),
    )


def initialize(mesh: MeshGrid, params: ModelParams, seed: int | None = None) -> PhaseState:
    """Uniformly perturbed homogeneous fields, zero chemical potentials.

    Both fields are drawn from one seeded generator (polymer first), so a
    fixed seed reproduces the state bit for bit.
    """
    rng = np.random.default_rng(params.seed if seed is None else seed)
    n = mesh.num_nodes
    a = params.init_ampl
    phi_p = params.init_mean + rng.uniform(-a, a, size=n)
    phi_nfa = params.init_mean + rng.uniform(-a, a, size=n)
    return PhaseState(
        phi_p=phi_p, phi_nfa=phi_nfa,
        mu_p=np.zeros(n), mu_nfa=np.zeros(n), t=0.0, step=0,
    )


def tau_effective(params: ModelParams, species: str) -> float:
    """Time step times mobility; the scalar that scales the stiffness blocks."""
    return params.tau * params.species(species)["mob"]


def species_operator(ops: ProblemOperators, params: ModelParams,
                     species: str) -> BlockOperator2x2:
    """The scaled symmetric saddle operator for one species."""
    t = tau_effective(params, species)
    eps = params.species(species)["eps"]
    return BlockOperator2x2(
        ((ops.mass, ops.stiffness), (ops.stiffness, ops.mass)),
        ((1.0, t), (t, -t / eps)),
    )


def build_preconditioners(ops: ProblemOperators, params: ModelParams,
                          inner_tol: float = 1e-4, inner_mode: str = "tolerance",
                          fixed_cycles: int = 2) -> dict:
    """One matching preconditioner per species, shared when the scalars agree.

    Hierarchies depend only on (tau * mobility, eps, mesh), so symmetric
    parameter choices build a single hierarchy pair for both species.
    """
    built: dict[tuple, MatchingPreconditioner] = {}
    out = {}
    for species in SPECIES:
        key = (tau_effective(params, species), params.species(species)["eps"])
        if key not in built:
            built[key] = MatchingPreconditioner(
                ops.mass, ops.stiffness, tau=key[0], eps=key[1],
                inner_tol=inner_tol, inner_mode=inner_mode,
                fixed_cycles=fixed_cycles,
            )
        out[species] = built[key]
    return out


def assemble_step_rhs(state: PhaseState, ops: ProblemOperators,
                      params: ModelParams, species: str) -> np.ndarray:
    """Right-hand side block vector [M phi + tau b_flux; -(t/e) M df].

    The bulk-potential derivative and both boundary fluxes are evaluated at
    the current (old) state, keeping every nonlinearity explicit.
    """
    n = ops.num_nodes
    phi = state.phi(species)
    df_dp, df_dnfa = potential_derivs(state.phi_p, state.phi_nfa, params)
    df = df_dp if species == "p" else df_dnfa

    flux = np.zeros(n)
    bot = ops.bottom_nodes
    x_bot = ops.mesh.nodes[bot, 0]
    flux[bot] = surface_flux_bottom(
        phi[bot], species, params, x_bot, ops.mesh.extents[0]
    )
    b_flux = ops.bmass_bottom @ flux

    flux[:] = 0.0
    top = ops.top_nodes
    phi_s = state.phi_solvent
    flux[top] = evaporation_flux_top(phi[top], phi_s[top], params)
    b_flux += ops.bmass_top @ flux

    t = tau_effective(params, species)
    eps = params.species(species)["eps"]
    rhs = np.empty(2 * n)
    rhs[:n] = ops.mass @ phi + params.tau * b_flux
    rhs[n:] = -(t / eps) * (ops.mass @ df)
    return rhs


def step(state: PhaseState, ops: ProblemOperators, precond: dict,
         params: ModelParams, outer_tol: float = 1e-7,
         maxit: int = 1000, warm_start: bool = False):
    """Advance one time step; returns the new state and both solve reports.

    The species are solved in the fixed order (polymer, acceptor) for
    reproducibility; both systems read only the incoming state, so the
    order does not affect the result.
    """
    n = ops.num_nodes
    _check_state_bounded(state)
    new_fields = {}
    reports = {}
    for species in SPECIES:
        rhs = assemble_step_rhs(state, ops, params, species)
        if not np.all(np.isfinite(rhs)):
            raise ModelDivergence(
                f"non-finite right-hand side for species {species!r} "
                f"at step {state.step + 1}",
                step_index=state.step + 1,
            )
        op = species_operator(ops, params, species)
        x0 = None
        if warm_start:
            x0 = np.concatenate([state.phi(species), state.mu(species)])
        x, report = minres(
            op, rhs, prec=precond[species].apply, tol=outer_tol,
            maxit=maxit, x0=x0,
        )
        reports[species] = report
        if not report.converged:
            raise SolverFailure(
                f"MINRES did not converge for species {species!r} at step "
                f"{state.step + 1}: residual {report.residual_norm:.3e} "
                f"after {report.iterations} iterations",
                step_index=state.step + 1, species=species, report=report,
            )
        if not np.all(np.isfinite(x)):
            raise ModelDivergence(
                f"non-finite fields for species {species!r} at step "
                f"{state.step + 1}",
                step_index=state.step + 1,
            )
        new_fields[species] = (x[:n], x[n:])

    new_state = PhaseState(
        phi_p=new_fields["p"][0], phi_nfa=new_fields["nfa"][0],
        mu_p=new_fields["p"][1], mu_nfa=new_fields["nfa"][1],
        t=state.t + params.tau, step=state.step + 1,
    )
    excess = float(np.max(new_state.phi_p + new_state.phi_nfa)) - 1.0
    if excess > SUM_DRIFT_TOL:
        log.debug(
            "step %d: nodal phi_p + phi_nfa exceeds 1 by %.3e",
            new_state.step, excess,
        )
    return new_state, (reports["p"], reports["nfa"])


def run(params: ModelParams, mesh: MeshGrid, callbacks=None,
        snapshot_times=None, n_steps: int | None = None,
        state: PhaseState | None = None, ops: ProblemOperators | None = None,
        precond: dict | None = None, outer_tol: float = 1e-7,
        inner_tol: float = 1e-4, maxit: int = 1000,
        warm_start: bool = False, keep_snapshots: bool = False,
        solver: str = "minres") -> SimulationResult:
    """Time loop: ceil(final_time / tau) steps with snapshot callbacks.

    ``callbacks`` receive ``(step, t, state)`` with read-only intent whenever
    the time passes one of ``snapshot_times``; with ``keep_snapshots`` the
    states are also copied into the result.  Solver and divergence errors
    propagate with their step index attached.

    ``solver`` selects between the preconditioned MINRES step (the benchmark
    protocol) and the cached-factorization :class:`DirectStepper`, whose
    per-step cost makes very long production runs practical; both advance
    the identical discrete system.
    """
    if solver not in ("minres", "direct"):
        raise ValueError(f"solver must be 'minres' or 'direct', got {solver!r}")
    if ops is None:
        ops = setup_operators(mesh)
    if state is None:
        state = initialize(mesh, params)
    if n_steps is None:
        n_steps = max(int(math.ceil(params.final_time / params.tau - 1e-9)), 0)
    callbacks = list(callbacks) if callbacks else []
    pending = sorted(snapshot_times) if snapshot_times else []

    direct = None
    if solver == "direct":
        direct = DirectStepper(ops, params)
    elif precond is None:
        precond = build_preconditioners(ops, params, inner_tol=inner_tol)

    result = SimulationResult(final_state=state, reports=[], step_seconds=[])

    def fire_snapshots(current: PhaseState):
        while pending and current.t >= pending[0] - 0.5 * params.tau:
            t_snap = pending.pop(0)
            for cb in callbacks:
                cb(current.step, current.t, current)
            if keep_snapshots:
                result.snapshots.append((t_snap, current.copy()))

    fire_snapshots(state)
    for _ in range(n_steps):
        t0 = time.perf_counter()
        if direct is not None:
            state, reports = direct.step(state)
        else:
            state, reports = step(
                state, ops, precond, params,
                outer_tol=outer_tol, maxit=maxit, warm_start=warm_start,
            )
        result.step_seconds.append(time.perf_counter() - t0)
        result.reports.append(reports)
        fire_snapshots(state)
    result.final_state = state
    return result


class DirectStepper:
    """Cached sparse LU factorization of the per-species saddle matrices.

    The saddle operator is constant while (tau, mobility, eps, mesh) are
    fixed, so long production runs can replace the iterative solve with one
    factorization and two triangular solves per step.  Species with
    identical scalars share a factorization.  This is an optimization for
    ``run(solver="direct")``; the benchmark protocols always use the
    preconditioned iterative path.
    """

    def __init__(self, ops: ProblemOperators, params: ModelParams):
        import scipy.sparse.linalg as spla

        self.ops = ops
        self.params = params
        self._lu = {}
        self._op = {}
        factored = {}
        for species in SPECIES:
            t = tau_effective(params, species)
            eps = params.species(species)["eps"]
            key = (t, eps)
            if key not in factored:
                saddle = sp.bmat(
                    [[ops.mass, t * ops.stiffness],
                     [t * ops.stiffness, -(t / eps) * ops.mass]],
                    format="csc",
                )
                factored[key] = spla.splu(saddle)
            self._lu[species] = factored[key]
            self._op[species] = species_operator(ops, params, species)

    def step(self, state: PhaseState):
        n = self.ops.num_nodes
        _check_state_bounded(state)
        new_fields = {}
        reports = {}
        for species in SPECIES:
            rhs = assemble_step_rhs(state, self.ops, self.params, species)
            if not np.all(np.isfinite(rhs)):
                raise ModelDivergence(
                    f"non-finite right-hand side for species {species!r} "
                    f"at step {state.step + 1}",
                    step_index=state.step + 1,
                )
            t0 = time.perf_counter()
            x = self._lu[species].solve(rhs)
            if not np.all(np.isfinite(x)):
                raise ModelDivergence(
                    f"non-finite fields for species {species!r} at step "
                    f"{state.step + 1}",
                    step_index=state.step + 1,
                )
            resid = float(np.linalg.norm(rhs - self._op[species].matvec(x)))
            reports[species] = SolveReport(
                iterations=1, residual_norm=resid, converged=True,
                wall_time=time.perf_counter() - t0, true_residual_norm=resid,
            )
            new_fields[species] = (x[:n], x[n:])
        return PhaseState(
            phi_p=new_fields["p"][0], phi_nfa=new_fields["nfa"][0],
            mu_p=new_fields["p"][1], mu_nfa=new_fields["nfa"][1],
            t=state.t + self.params.tau, step=state.step + 1,
        ), (reports["p"], reports["nfa"])


@dataclass
class EocResult:
    order_p: float
    order_nfa: float
    tau_values: np.ndarray
    errors_p: np.ndarray
    errors_nfa: np.ndarray


def eoc_study(params: ModelParams, mesh: MeshGrid, tau_list, tau_ref: float,
              final_time: float | None = None, outer_tol: float = 1e-7,
              inner_tol: float = 1e-4) -> EocResult:
    """Experimental order of convergence against a fine-step reference run.

    All runs start from the same seeded initial state and share the final
    time, which must be an integer multiple of every step size; errors are
    measured in the mass-matrix-weighted nodal norm and the order is the
    least-squares slope of log(error) against log(tau).
    """
    tau_list = [float(t) for t in tau_list]
    if len(set(tau_list)) < 2:
        raise ValueError("need at least two distinct step sizes for a fit")
    if final_time is None:
        final_time = params.final_time
    for t in tau_list + [tau_ref]:
        ratio = t / tau_ref
        if abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ValueError(f"step size {t} is not a multiple of {tau_ref}")
        steps = final_time / t
        if abs(steps - round(steps)) > 1e-9 * steps:
            raise ValueError(
                f"final time {final_time} is not a multiple of step size {t}"
            )

    ops = setup_operators(mesh)
    initial = initialize(mesh, params)
    M = ops.mass

    def terminal_state(tau_value):
        p = _with_tau(params, tau_value, final_time)
        precond = build_preconditioners(ops, p, inner_tol=inner_tol)
        result = run(
            p, mesh, state=initial.copy(), ops=ops, precond=precond,
            outer_tol=outer_tol,
        )
        return result.final_state

    reference = terminal_state(tau_ref)

    def weighted_norm(d):
        return math.sqrt(float(d @ (M @ d)))

    errors_p, errors_nfa = [], []
    for t in tau_list:
        final = terminal_state(t)
        errors_p.append(weighted_norm(final.phi_p - reference.phi_p))
        errors_nfa.append(weighted_norm(final.phi_nfa - reference.phi_nfa))

    logs_tau = np.log(np.asarray(tau_list))
    order_p = float(np.polyfit(logs_tau, np.log(errors_p), 1)[0])
    order_nfa = float(np.polyfit(logs_tau, np.log(errors_nfa), 1)[0])
    return EocResult(
        order_p=order_p, order_nfa=order_nfa,
        tau_values=np.asarray(tau_list),
        errors_p=np.asarray(errors_p), errors_nfa=np.asarray(errors_nfa),
    )


def _with_tau(params: ModelParams, tau_value: float, final_time: float) -> ModelParams:
    from dataclasses import replace

    return replace(params, tau=tau_value, final_time=final_time)
