"""Legacy ASCII VTK output for nodal scalar fields, plus a minimal reader.

Files are written with 17 significant digits and a fixed layout, so a given
mesh/field pair always produces byte-identical output.  The bundled reader
understands exactly the subset this writer emits and exists for round-trip
verification and downstream tooling tests.
"""

from __future__ import annotations

import numpy as np

from .mesh import MeshGrid

__all__ = ["write_field_vtk", "read_field_vtk", "write_pgm"]

_CELL_TYPE = {2: 5, 3: 10}  # VTK_TRIANGLE, VTK_TETRA


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_field_vtk(mesh: MeshGrid, field, name: str, path):
    """Write one nodal scalar field on an unstructured simplicial grid."""
    field = np.asarray(field, dtype=float)
    if field.shape != (mesh.num_nodes,):
        raise ValueError(
            f"field must have one value per node ({mesh.num_nodes}), got {field.shape}"
        )
    lines = [
        "# vtk DataFile Version 2.0",
        name,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.num_nodes} double",
    ]
    for node in mesh.nodes:
        coords = list(node) + [0.0] * (3 - mesh.dim)
        lines.append(" ".join(_fmt(c) for c in coords))
    nloc = mesh.dim + 1
    lines.append(f"CELLS {mesh.num_elements} {mesh.num_elements * (nloc + 1)}")
    for elem in mesh.elements:
        lines.append(f"{nloc} " + " ".join(str(int(v)) for v in elem))
    lines.append(f"CELL_TYPES {mesh.num_elements}")
    lines.extend([str(_CELL_TYPE[mesh.dim])] * mesh.num_elements)
    lines.append(f"POINT_DATA {mesh.num_nodes}")
    lines.append(f"SCALARS {name} double 1")
    lines.append("LOOKUP_TABLE default")
    lines.extend(_fmt(v) for v in field)
    text = "\n".join(lines) + "\n"
    try:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write VTK file {path}: {exc}") from exc


def read_field_vtk(path):
    """Read a file produced by :func:`write_field_vtk`.

    Returns ``(points, cells, name, values)`` with points as (n, 3).
    """
    try:
        with open(path, encoding="ascii") as fh:
            tokens_by_line = [line.split() for line in fh]
    except OSError as exc:
        raise OSError(f"cannot read VTK file {path}: {exc}") from exc

    flat = [tok for line in tokens_by_line for tok in line]
    pos = flat.index("POINTS")
    n_points = int(flat[pos + 1])
    data = flat[pos + 3: pos + 3 + 3 * n_points]
    points = np.array(data, dtype=float).reshape(n_points, 3)

    pos = flat.index("CELLS")
    n_cells = int(flat[pos + 1])
    total = int(flat[pos + 2])
    cell_tokens = flat[pos + 3: pos + 3 + total]
    nloc = int(cell_tokens[0])
    cells = np.array(cell_tokens, dtype=np.int64).reshape(n_cells, nloc + 1)[:, 1:]

    pos = flat.index("SCALARS")
    name = flat[pos + 1]
    pos = flat.index("LOOKUP_TABLE")
    values = np.array(flat[pos + 2: pos + 2 + n_points], dtype=float)
    return points, cells, name, values


def write_pgm(mask2d: np.ndarray, path):
    """Portable graymap (P2) of a structured 2D node mask, 1 -> white.

    Rows are written top to bottom, matching image conventions, so the film
    surface appears at the top of the image.
    """
    mask2d = np.asarray(mask2d)
    if mask2d.ndim != 2:
        raise ValueError(f"expected a 2D array, got shape {mask2d.shape}")
    ny, nx = mask2d.shape
    lines = ["P2", f"{nx} {ny}", "255"]
    for row in mask2d[::-1]:
        lines.append(" ".join("255" if v else "0" for v in row))
    try:
        with open(path, "w", encoding="ascii") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write PGM file {path}: {exc}") from exc
