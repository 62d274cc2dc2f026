"""Plain-text run configuration: parsing, validation, and canonical emission.

The format is a flat INI-style document with the four sections ``[mesh]``,
``[model]``, ``[solver]``, ``[output]`` plus ``[bench]`` for the benchmark
harness.  Every key is validated: unknown sections or keys are hard errors
with their line and column, as are type mismatches and constraint
violations, so typos cannot silently fall back to defaults.  Omitted keys
take the benchmark defaults.  ``emit_config`` writes every value back at
full precision, which makes parse -> emit -> parse lossless.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

from .physics import ModelParams

__all__ = [
    "ConfigError",
    "MeshSpec",
    "SolverSpec",
    "OutputSpec",
    "BenchSpec",
    "RunConfig",
    "parse_config",
    "emit_config",
]


class ConfigError(ValueError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col


@dataclass
class MeshSpec:
    dim: int = 2
    extents: tuple = (10.0, 2.5)
    counts: tuple = (100, 50)


@dataclass
class SolverSpec:
    outer_tol: float = 1e-7
    inner_tol: float = 1e-4
    max_iterations: int = 1000
    warm_start: bool = False
    deterministic: bool = False


@dataclass
class OutputSpec:
    directory: str = "out"
    snapshot_times: tuple = ()
    write_vtk: bool = True


@dataclass
class BenchSpec:
    mode: str = "run"
    steps: int = 20
    warmup_steps: int = 0
    meshes: tuple = ((100, 50), (200, 100), (400, 200))
    eps_values: tuple = (1e-3, 1e-2, 1e-1, 1.0, 10.0)
    tau_values: tuple = (1e-7, 1e-6, 1e-5, 1e-4)
    eoc_tau_values: tuple = (2e-4, 4e-4, 8e-4, 1.6e-3, 3.2e-3)
    eoc_tau_ref: float = 1e-5
    eoc_final_time: float = 1.6e-2
    eig_meshes: tuple = ((4, 3), (8, 4), (12, 6))
    eig_tau_values: tuple = (1e-7, 1e-4, 1e-1, 1.0, 10.0)
    eig_eps_values: tuple = (1e-7, 1e-4, 1e-1, 1.0, 10.0)


@dataclass
class RunConfig:
    mesh: MeshSpec = field(default_factory=MeshSpec)
    model: ModelParams = field(default_factory=ModelParams)
    solver: SolverSpec = field(default_factory=SolverSpec)
    output: OutputSpec = field(default_factory=OutputSpec)
    bench: BenchSpec = field(default_factory=BenchSpec)


_BENCH_MODES = ("run", "bench-mesh", "bench-params", "eoc", "eig-check", "binarize")


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_float_tuple(text: str) -> tuple:
    text = text.strip()
    if not text:
        return ()
    return tuple(float(part) for part in text.split(","))


def _parse_int_tuple(text: str) -> tuple:
    text = text.strip()
    if not text:
        return ()
    return tuple(int(part) for part in text.split(","))


def _parse_mesh_tuple(text: str) -> tuple:
    """Mesh size lists like ``100x50, 200x100`` or ``30x15x30``."""
    text = text.strip()
    if not text:
        return ()
    out = []
    for part in text.split(","):
        dims = tuple(int(p) for p in part.strip().lower().split("x"))
        if len(dims) not in (2, 3):
            raise ValueError(f"mesh size must be NxM or NxMxL, got {part.strip()!r}")
        out.append(dims)
    return tuple(out)


def _parse_potential(text: str) -> str:
    value = text.strip()
    if value not in ("polynomial", "logarithmic", "none"):
        raise ValueError(
            f"potential must be polynomial, logarithmic, or none, got {value!r}"
        )
    return value


def _parse_mode(text: str) -> str:
    value = text.strip()
    if value not in _BENCH_MODES:
        raise ValueError(f"mode must be one of {_BENCH_MODES}, got {value!r}")
    return value


# (section, key) -> (target dataclass attribute, converter)
_SCHEMA = {
    "mesh": {
        "dim": int,
        "extents": _parse_float_tuple,
        "counts": _parse_int_tuple,
    },
    "model": {
        "eps_p": float, "eps_nfa": float, "mob_p": float, "mob_nfa": float,
        "tau": float, "chi_p_nfa": float, "chi_p_s": float, "chi_nfa_s": float,
        "N_p": float, "N_nfa": float, "N_s": float, "k_evap": float,
        "g_p": float, "g_nfa": float, "h_p": float, "h_nfa": float,
        "patterning": _parse_bool, "potential": _parse_potential,
        "final_time": float, "seed": int,
        "init_mean": float, "init_ampl": float,
    },
    "solver": {
        "outer_tol": float, "inner_tol": float, "max_iterations": int,
        "warm_start": _parse_bool, "deterministic": _parse_bool,
    },
    "output": {
        "directory": str.strip, "snapshot_times": _parse_float_tuple,
        "write_vtk": _parse_bool,
    },
    "bench": {
        "mode": _parse_mode, "steps": int, "warmup_steps": int,
        "meshes": _parse_mesh_tuple,
        "eps_values": _parse_float_tuple, "tau_values": _parse_float_tuple,
        "eoc_tau_values": _parse_float_tuple, "eoc_tau_ref": float,
        "eoc_final_time": float,
        "eig_meshes": _parse_mesh_tuple,
        "eig_tau_values": _parse_float_tuple,
        "eig_eps_values": _parse_float_tuple,
    },
}


def parse_config(text: str) -> RunConfig:
    """Parse and fully validate a configuration document."""
    values: dict[str, dict] = {section: {} for section in _SCHEMA}
    lines_of: dict[tuple, tuple] = {}
    section = None
    section_line = 0

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        stripped = line.strip()
        indent = len(line) - len(line.lstrip()) + 1
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ConfigError("unterminated section header", lineno, indent)
            name = stripped[1:-1].strip()
            if name not in _SCHEMA:
                raise ConfigError(f"unknown section [{name}]", lineno, indent)
            section = name
            section_line = lineno
            continue
        if "=" not in stripped:
            raise ConfigError("expected 'key = value'", lineno, indent)
        if section is None:
            raise ConfigError("key outside of any section", lineno, indent)
        key, _, value = line.partition("=")
        key_col = len(line) - len(line.lstrip()) + 1
        value_col = len(key) + 2 + (len(value) - len(value.lstrip()))
        key = key.strip()
        if key not in _SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} in [{section}]", lineno, key_col)
        if key in values[section]:
            raise ConfigError(f"duplicate key {key!r} in [{section}]", lineno, key_col)
        converter = _SCHEMA[section][key]
        try:
            parsed = converter(value.strip())
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc), lineno, value_col) from None
        values[section][key] = parsed
        lines_of[(section, key)] = (lineno, value_col)

    def build(section_name, factory):
        try:
            return factory(**values[section_name])
        except (ValueError, TypeError) as exc:
            line, col = _locate(str(exc), section_name, lines_of)
            raise ConfigError(str(exc), line, col) from None

    cfg = RunConfig(
        mesh=build("mesh", MeshSpec),
        model=build("model", ModelParams),
        solver=build("solver", SolverSpec),
        output=build("output", OutputSpec),
        bench=build("bench", BenchSpec),
    )
    _validate_mesh(cfg.mesh, lines_of)
    return cfg


def _locate(message: str, section: str, lines_of: dict) -> tuple:
    for (sec, key), (line, col) in lines_of.items():
        if sec == section and key in message:
            return line, col
    return 0, 0


def _validate_mesh(mesh: MeshSpec, lines_of: dict):
    def err(msg, key):
        line, col = lines_of.get(("mesh", key), (0, 0))
        raise ConfigError(msg, line, col)

    if mesh.dim not in (2, 3):
        err(f"dim must be 2 or 3, got {mesh.dim}", "dim")
    if len(mesh.extents) != mesh.dim:
        err(f"extents needs {mesh.dim} entries, got {len(mesh.extents)}", "extents")
    if len(mesh.counts) != mesh.dim:
        err(f"counts needs {mesh.dim} entries, got {len(mesh.counts)}", "counts")
    if any(e <= 0 for e in mesh.extents):
        err(f"extents must be positive, got {mesh.extents}", "extents")
    if any(c < 2 for c in mesh.counts):
        err(f"counts must be >= 2, got {mesh.counts}", "counts")


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return ", ".join("x".join(str(int(c)) for c in m) for m in value)
        return ", ".join(_format_value(v) for v in value)
    return str(value)


def emit_config(cfg: RunConfig) -> str:
    """Canonical full-precision text form; parses back to an equal config."""
    sections = {
        "mesh": cfg.mesh,
        "model": cfg.model,
        "solver": cfg.solver,
        "output": cfg.output,
        "bench": cfg.bench,
    }
    out = []
    for name, obj in sections.items():
        out.append(f"[{name}]")
        for key in _SCHEMA[name]:
            out.append(f"{key} = {_format_value(getattr(obj, key))}")
        out.append("")
    return "\n".join(out)
