"""Ternary phase-field solver for thin-film blend morphologies.

The package couples a structured P1 finite element discretization of two
Cahn-Hilliard-type transport equations with a block-diagonal
Schur-complement preconditioner whose inner solves run on an in-house
classical algebraic multigrid.  A benchmark harness reproduces the standard
robustness studies (mesh, interface parameter, and step-size sweeps, the
eigenvalue interval of the Schur approximation, and a temporal order study).
"""

from .amg import AmgHierarchy, amg_setup, amg_solve, apply_cycles
from .assembly import (
    assemble_boundary_load,
    assemble_boundary_mass,
    assemble_mass,
    assemble_stiffness,
)
from .bench import (
    BenchEntry,
    bench_mesh_sweep,
    bench_param_sweep,
    binarize_morphology,
    eigen_check_grid,
    fit_loglog_slope,
    write_stats,
)
from .config import (
    BenchSpec,
    ConfigError,
    MeshSpec,
    OutputSpec,
    RunConfig,
    SolverSpec,
    emit_config,
    parse_config,
)
from .krylov import BlockOperator2x2, SolveReport, minres
from .mesh import MeshGrid, boundary_facets, build_mesh, element_volumes
from .physics import (
    ModelParams,
    evaporation_flux_top,
    log_potential_derivs,
    poly_potential_derivs,
    substrate_pattern,
    surface_flux_bottom,
)
from .precond import MatchingPreconditioner, eigen_bounds_check
from .simulation import (
    DirectStepper,
    EocResult,
    ModelDivergence,
    PhaseState,
    ProblemOperators,
    SimulationResult,
    SolverFailure,
    assemble_step_rhs,
    build_preconditioners,
    eoc_study,
    initialize,
    run,
    setup_operators,
    species_operator,
    step,
)
from .vtkio import read_field_vtk, write_field_vtk, write_pgm

__version__ = "0.1.0"
