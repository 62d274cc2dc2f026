"""Command-line entry points for simulation runs and benchmark studies.

Exit codes: 0 success, 2 configuration error, 3 solver failure,
4 model divergence.  Every command re-emits the fully resolved
configuration into the output directory so a study can be rerun from its
own artifacts.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .bench import (
    bench_mesh_sweep,
    bench_param_sweep,
    binarize_morphology,
    eigen_check_grid,
    fit_loglog_slope,
    write_stats,
)
from .config import ConfigError, RunConfig, emit_config, parse_config
from .mesh import build_mesh
from .simulation import ModelDivergence, SolverFailure, eoc_study, run
from .vtkio import read_field_vtk, write_field_vtk, write_pgm

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_DIVERGED = 4


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ModelDivergence as exc:
        print(f"model divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chmorph",
        description="Ternary phase-field morphology solver and benchmark harness",
    )
    sub = parser.add_subparsers(required=True)

    def add_common(p):
        p.add_argument("--config", type=Path, default=None,
                       help="configuration file (defaults apply when omitted)")
        p.add_argument("--out", type=Path, default=None,
                       help="output directory (overrides the config)")
        p.add_argument("--seed", type=int, default=None,
                       help="random seed (overrides the config)")
        p.add_argument("--deterministic", action="store_true",
                       help="force sequential, bit-reproducible execution")

    p_run = sub.add_parser("run", help="time-step the model and write snapshots")
    add_common(p_run)
    p_run.set_defaults(handler=cmd_run)

    p_mesh = sub.add_parser("bench-mesh", help="iteration counts across meshes")
    add_common(p_mesh)
    p_mesh.add_argument("--warmup", type=int, default=None,
                        help="untimed steps before the measured window")
    p_mesh.set_defaults(handler=cmd_bench_mesh)

    p_par = sub.add_parser("bench-params", help="eps and tau robustness sweeps")
    add_common(p_par)
    p_par.set_defaults(handler=cmd_bench_params)

    p_eoc = sub.add_parser("eoc", help="experimental order of convergence study")
    add_common(p_eoc)
    p_eoc.set_defaults(handler=cmd_eoc)

    p_eig = sub.add_parser("eig-check", help="dense Schur eigenvalue bound check")
    add_common(p_eig)
    p_eig.set_defaults(handler=cmd_eig_check)

    p_bin = sub.add_parser("binarize", help="threshold morphology fields to a mask")
    add_common(p_bin)
    p_bin.add_argument("--phi-p", type=Path, required=True,
                       help="VTK file with the polymer fraction")
    p_bin.add_argument("--phi-nfa", type=Path, required=True,
                       help="VTK file with the acceptor fraction")
    p_bin.add_argument("--rule", choices=("majority", "absolute"),
                       default="majority")
    p_bin.add_argument("--threshold", type=float, default=0.5)
    p_bin.set_defaults(handler=cmd_binarize)
    return parser


def load_config(args) -> RunConfig:
    if args.config is not None:
        try:
            text = args.config.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read {args.config}: {exc}")
        cfg = parse_config(text)
    else:
        cfg = RunConfig()
    if args.out is not None:
        cfg.output = replace(cfg.output, directory=str(args.out))
    if args.seed is not None:
        cfg.model = replace(cfg.model, seed=args.seed)
    if args.deterministic:
        cfg.solver = replace(cfg.solver, deterministic=True)
    return cfg


def prepare_outdir(cfg: RunConfig) -> Path:
    outdir = Path(cfg.output.directory)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "config.cfg").write_text(emit_config(cfg), encoding="utf-8")
    return outdir


def cmd_run(args) -> int:
    cfg = load_config(args)
    outdir = prepare_outdir(cfg)
    mesh = build_mesh(cfg.mesh.dim, cfg.mesh.extents, cfg.mesh.counts)

    written = []

    def snapshot(step, t, state):
        if not cfg.output.write_vtk:
            return
        tag = f"{step:08d}"
        for name, data in (("phi_p", state.phi_p), ("phi_nfa", state.phi_nfa)):
            path = outdir / f"{name}_{tag}.vtk"
            write_field_vtk(mesh, data, name, path)
            written.append(path.name)

    result = run(
        cfg.model, mesh,
        callbacks=[snapshot], snapshot_times=cfg.output.snapshot_times,
        outer_tol=cfg.solver.outer_tol, inner_tol=cfg.solver.inner_tol,
        maxit=cfg.solver.max_iterations, warm_start=cfg.solver.warm_start,
    )
    write_stats(result.reports, outdir / "stats.csv")
    if cfg.output.write_vtk:
        final = result.final_state
        write_field_vtk(mesh, final.phi_p, "phi_p", outdir / "phi_p_final.vtk")
        write_field_vtk(mesh, final.phi_nfa, "phi_nfa", outdir / "phi_nfa_final.vtk")
    iters = result.worst_iterations()
    if iters.size:
        print(f"completed {len(result.reports)} steps "
              f"(worst iterations {iters.min()}..{iters.max()}), "
              f"output in {outdir}")
    else:
        print(f"completed 0 steps, output in {outdir}")
    return EXIT_OK


def _write_entries(entries, path):
    import csv

    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "label", "unknowns", "max_iterations", "max_solve_seconds",
            "max_step_seconds", "diverged", "error",
        ])
        for e in entries:
            writer.writerow([
                e.label, e.unknowns, e.max_iterations(),
                format(e.solve_seconds.max(), ".17g") if e.solve_seconds.size else "",
                format(e.step_seconds.max(), ".17g") if e.step_seconds.size else "",
                int(e.diverged), e.failed or "",
            ])


def cmd_bench_mesh(args) -> int:
    cfg = load_config(args)
    if args.warmup is not None:
        cfg.bench = replace(cfg.bench, warmup_steps=args.warmup)
    outdir = prepare_outdir(cfg)
    entries = bench_mesh_sweep(cfg)
    _write_entries(entries, outdir / "bench_mesh.csv")
    for e in entries:
        write_stats(e.reports, outdir / f"stats_{e.label}.csv")
        status = "diverged" if e.diverged else (e.failed or "ok")
        print(f"{e.label:>14}  unknowns={e.unknowns:<9} "
              f"max_iters={e.max_iterations():<4} {status}")
    ok = [e for e in entries if e.ok]
    if len(ok) >= 2:
        slope = fit_loglog_slope(
            [e.unknowns for e in ok],
            [float(np.median(e.solve_seconds)) for e in ok],
        )
        print(f"runtime scaling slope (log-log): {slope:.3f}")
    if any(e.failed and not e.diverged for e in entries):
        return EXIT_SOLVER
    return EXIT_OK


def cmd_bench_params(args) -> int:
    cfg = load_config(args)
    outdir = prepare_outdir(cfg)
    eps_entries, tau_entries = bench_param_sweep(cfg)
    _write_entries(eps_entries, outdir / "bench_eps.csv")
    _write_entries(tau_entries, outdir / "bench_tau.csv")
    for name, entries in (("eps", eps_entries), ("tau", tau_entries)):
        for e in entries:
            status = "diverged" if e.diverged else (e.failed or "ok")
            print(f"{name} sweep {e.label:>12}  max_iters={e.max_iterations():<4} {status}")
    if any(e.failed and not e.diverged for e in eps_entries + tau_entries):
        return EXIT_SOLVER
    return EXIT_OK


def cmd_eoc(args) -> int:
    cfg = load_config(args)
    outdir = prepare_outdir(cfg)
    mesh = build_mesh(cfg.mesh.dim, cfg.mesh.extents, cfg.mesh.counts)
    result = eoc_study(
        cfg.model, mesh,
        tau_list=cfg.bench.eoc_tau_values, tau_ref=cfg.bench.eoc_tau_ref,
        final_time=cfg.bench.eoc_final_time,
        outer_tol=cfg.solver.outer_tol, inner_tol=cfg.solver.inner_tol,
    )
    import csv

    with open(outdir / "eoc.csv", "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tau", "error_p", "error_nfa"])
        for tau, ep, en in zip(result.tau_values, result.errors_p, result.errors_nfa):
            writer.writerow([format(v, ".17g") for v in (tau, ep, en)])
        writer.writerow(["order", format(result.order_p, ".17g"),
                         format(result.order_nfa, ".17g")])
    print(f"fitted order: polymer {result.order_p:.3f}, "
          f"acceptor {result.order_nfa:.3f}")
    return EXIT_OK


def cmd_eig_check(args) -> int:
    cfg = load_config(args)
    outdir = prepare_outdir(cfg)
    rows, lo, hi = eigen_check_grid(cfg)
    import csv

    with open(outdir / "eig_check.csv", "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mesh", "tau", "eps", "lambda_min", "lambda_max"])
        for label, tau, eps, lmin, lmax in rows:
            writer.writerow([label, format(tau, ".17g"), format(eps, ".17g"),
                             format(lmin, ".17g"), format(lmax, ".17g")])
    in_bounds = lo >= 0.5 - 1e-10 and hi <= 1.0 + 1e-10
    print(f"eigenvalues of the Schur approximation lie in "
          f"[{lo:.12f}, {hi:.12f}] over {len(rows)} cases: "
          f"{'within [1/2, 1]' if in_bounds else 'BOUND VIOLATED'}")
    return EXIT_OK if in_bounds else EXIT_SOLVER


def cmd_binarize(args) -> int:
    cfg = load_config(args)
    outdir = prepare_outdir(cfg)
    pts_p, cells, _, phi_p = read_field_vtk(args.phi_p)
    pts_n, _, _, phi_nfa = read_field_vtk(args.phi_nfa)
    if phi_p.shape != phi_nfa.shape or pts_p.shape != pts_n.shape:
        raise ConfigError(
            f"field files do not match: {phi_p.shape} nodes vs {phi_nfa.shape}"
        )
    mask = binarize_morphology(phi_p, phi_nfa, rule=args.rule,
                               threshold=args.threshold)
    mesh = build_mesh(cfg.mesh.dim, cfg.mesh.extents, cfg.mesh.counts)
    if mesh.num_nodes != mask.shape[0]:
        raise ConfigError(
            f"mesh in config has {mesh.num_nodes} nodes but fields have "
            f"{mask.shape[0]}; adjust [mesh] counts"
        )
    write_field_vtk(mesh, mask.astype(float), "phase_mask", outdir / "mask.vtk")
    if mesh.dim == 2:
        nx, ny = mesh.counts
        write_pgm(mask.reshape(ny, nx), outdir / "mask.pgm")
    print(f"binarized {mask.size} nodes "
          f"({int(mask.sum())} polymer-rich), output in {outdir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
