"""Benchmark harness: iteration/runtime studies, eigenvalue checks, stats output.

Every study mirrors one of the standard robustness protocols: iteration
counts across mesh refinements (cold start, or warm after a configurable
number of untimed steps), across interface-parameter and step-size sweeps,
the dense eigenvalue verification of the Schur approximation, the
order-of-convergence ladder, and morphology binarization.  Reported
iteration counts are always the worse of the two species, and runtimes
separate solver time from total step time because assembly overhead is not
part of the solver claim.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .config import RunConfig
from .mesh import build_mesh
from .physics import ModelParams
from .precond import eigen_bounds_check
from .simulation import (
    ModelDivergence,
    SolverFailure,
    build_preconditioners,
    eoc_study,
    initialize,
    run,
    setup_operators,
)

__all__ = [
    "BenchEntry",
    "write_stats",
    "bench_mesh_sweep",
    "bench_param_sweep",
    "eigen_check_grid",
    "binarize_morphology",
    "fit_loglog_slope",
]


@dataclass
class BenchEntry:
    """Result of one benchmark run (one mesh or one parameter value)."""

    label: str
    unknowns: int
    worst_iterations: np.ndarray = field(default_factory=lambda: np.empty(0, int))
    solve_seconds: np.ndarray = field(default_factory=lambda: np.empty(0))
    step_seconds: np.ndarray = field(default_factory=lambda: np.empty(0))
    reports: list = field(default_factory=list)
    diverged: bool = False
    failed: str | None = None

    @property
    def ok(self) -> bool:
        return not self.diverged and self.failed is None

    def max_iterations(self) -> int:
        return int(self.worst_iterations.max()) if self.worst_iterations.size else -1


def write_stats(reports, path):
    """Per-step, per-species solver statistics as CSV.

    ``reports`` is a sequence of (polymer, acceptor) SolveReport pairs.
    """
    try:
        with open(path, "w", newline="", encoding="ascii") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "species", "iterations", "residual", "seconds"])
            for k, (rep_p, rep_nfa) in enumerate(reports, start=1):
                for species, rep in (("p", rep_p), ("nfa", rep_nfa)):
                    writer.writerow([
                        k, species, rep.iterations,
                        format(rep.residual_norm, ".17g"),
                        format(rep.wall_time, ".17g"),
                    ])
    except OSError as exc:
        raise OSError(f"cannot write stats file {path}: {exc}") from exc


def _run_entry(cfg: RunConfig, params: ModelParams, counts, label: str) -> BenchEntry:
    """Run warmup + timed steps on one mesh, capturing failures per entry."""
    dim = len(counts)
    extents = cfg.mesh.extents if len(cfg.mesh.extents) == dim else (
        (10.0, 2.5) if dim == 2 else (10.0, 2.5, 10.0)
    )
    mesh = build_mesh(dim, extents, counts)
    entry = BenchEntry(label=label, unknowns=2 * mesh.num_nodes)
    try:
        ops = setup_operators(mesh)
        precond = build_preconditioners(ops, params, inner_tol=cfg.solver.inner_tol)
        state = initialize(mesh, params)
        if cfg.bench.warmup_steps > 0:
            warm = run(
                params, mesh, state=state, ops=ops, precond=precond,
                n_steps=cfg.bench.warmup_steps, outer_tol=cfg.solver.outer_tol,
                maxit=cfg.solver.max_iterations,
            )
            state = warm.final_state
        result = run(
            params, mesh, state=state, ops=ops, precond=precond,
            n_steps=cfg.bench.steps, outer_tol=cfg.solver.outer_tol,
            maxit=cfg.solver.max_iterations,
        )
    except ModelDivergence as exc:
        entry.diverged = True
        entry.failed = str(exc)
        return entry
    except SolverFailure as exc:
        entry.failed = str(exc)
        return entry
    entry.worst_iterations = result.worst_iterations()
    entry.solve_seconds = result.solve_seconds()
    entry.step_seconds = np.asarray(result.step_seconds)
    entry.reports = result.reports
    return entry


def bench_mesh_sweep(cfg: RunConfig, mesh_list=None) -> list[BenchEntry]:
    """Iteration counts and runtimes across mesh refinements.

    With ``cfg.bench.warmup_steps`` > 0 the timed window starts only after
    that many completed steps (the warm protocol); otherwise the first
    ``cfg.bench.steps`` steps are measured directly (cold).
    """
    meshes = mesh_list if mesh_list is not None else cfg.bench.meshes
    entries = []
    for counts in meshes:
        label = "x".join(str(c) for c in counts)
        entries.append(_run_entry(cfg, cfg.model, tuple(counts), label))
    return entries


def bench_param_sweep(cfg: RunConfig, eps_list=None, tau_list=None):
    """Robustness sweeps: one over the interface parameter, one over the step.

    The interface sweep holds the configured step size; the step sweep holds
    the configured interface parameter.  Divergent entries are marked, not
    raised, so the sweep always completes.
    """
    eps_list = cfg.bench.eps_values if eps_list is None else eps_list
    tau_list = cfg.bench.tau_values if tau_list is None else tau_list
    counts = tuple(cfg.mesh.counts)

    eps_entries = []
    for eps in eps_list:
        params = replace(cfg.model, eps_p=float(eps), eps_nfa=float(eps))
        eps_entries.append(_run_entry(cfg, params, counts, f"eps={eps:g}"))
    tau_entries = []
    for tau in tau_list:
        params = replace(cfg.model, tau=float(tau))
        tau_entries.append(_run_entry(cfg, params, counts, f"tau={tau:g}"))
    return eps_entries, tau_entries


def eigen_check_grid(cfg: RunConfig):
    """Dense verification of the Schur-approximation eigenvalue interval.

    Returns (rows, lam_min, lam_max) where rows hold one
    (mesh label, tau, eps, lam_min, lam_max) tuple per grid point.
    """
    from .assembly import assemble_mass, assemble_stiffness

    rows = []
    overall_lo, overall_hi = np.inf, -np.inf
    for counts in cfg.bench.eig_meshes:
        dim = len(counts)
        extents = (10.0, 2.5) if dim == 2 else (10.0, 2.5, 10.0)
        mesh = build_mesh(dim, extents, counts)
        M = assemble_mass(mesh)
        K = assemble_stiffness(mesh)
        label = "x".join(str(c) for c in counts)
        for tau in cfg.bench.eig_tau_values:
            for eps in cfg.bench.eig_eps_values:
                lo, hi = eigen_bounds_check(M, K, tau=tau, eps=eps)
                rows.append((label, tau, eps, lo, hi))
                overall_lo = min(overall_lo, lo)
                overall_hi = max(overall_hi, hi)
    return rows, overall_lo, overall_hi


def binarize_morphology(phi_p, phi_nfa, rule: str = "majority",
                        threshold: float = 0.5) -> np.ndarray:
    """Binary mask separating polymer-rich from acceptor-rich regions.

    ``majority`` marks nodes where the polymer fraction strictly exceeds the
    acceptor fraction (ties map to 0); ``absolute`` thresholds the polymer
    fraction alone.
    """
    phi_p = np.asarray(phi_p, dtype=float)
    phi_nfa = np.asarray(phi_nfa, dtype=float)
    if phi_p.shape != phi_nfa.shape:
        raise ValueError(f"field shapes differ: {phi_p.shape} vs {phi_nfa.shape}")
    if rule == "majority":
        return (phi_p > phi_nfa).astype(np.uint8)
    if rule == "absolute":
        return (phi_p > threshold).astype(np.uint8)
    raise ValueError(f"rule must be 'majority' or 'absolute', got {rule!r}")


def fit_loglog_slope(x, y) -> float:
    """Least-squares slope of log(y) against log(x)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two points for a slope")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])
