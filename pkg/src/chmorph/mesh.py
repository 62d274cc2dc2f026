"""Uniform simplicial meshes of rectangular 2D/3D boxes with tagged top/bottom facets.

The film geometry convention is that the y axis (axis index 1) is the height
direction: the bottom face ``y = 0`` is the substrate and the top face
``y = L_y`` is the free surface where solvent evaporates.  Lateral faces carry
no tag and therefore receive the natural zero-flux condition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["MeshGrid", "build_mesh", "boundary_facets", "element_volumes"]

# Kuhn decomposition of the unit cube: six tetrahedra, one per permutation of
# the coordinate axes, all sharing the main diagonal (0,0,0)-(1,1,1).
_KUHN_PERMUTATIONS = (
    (0, 1, 2),
    (0, 2, 1),
    (1, 0, 2),
    (1, 2, 0),
    (2, 0, 1),
    (2, 1, 0),
)


@dataclass(frozen=True)
class MeshGrid:
    """Structured simplicial mesh of a box.

    Attributes
    ----------
    dim : int
        Spatial dimension, 2 or 3.
    extents : ndarray
        Box side lengths (L_x, L_y[, L_z]).
    counts : ndarray
        Grid points per axis (n_x, n_y[, n_z]).
    nodes : ndarray, shape (num_nodes, dim)
        Node coordinates in lexicographic order, x index running fastest.
    elements : ndarray, shape (num_elements, dim + 1)
        Simplex connectivity (triangles in 2D, tetrahedra in 3D), all with
        positive signed volume.
    facets_top, facets_bottom : ndarray, shape (num_facets, dim)
        Boundary facets on y = L_y and y = 0 as node-id tuples.
    """

    dim: int
    extents: np.ndarray
    counts: np.ndarray
    nodes: np.ndarray
    elements: np.ndarray
    facets_top: np.ndarray
    facets_bottom: np.ndarray

    @property
    def num_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def num_elements(self) -> int:
        return self.elements.shape[0]

    def node_index_grid(self) -> np.ndarray:
        """Node ids arranged on the structured grid (x index first)."""
        return np.arange(self.num_nodes).reshape(tuple(self.counts[::-1])).T


def build_mesh(dim: int, extents, counts) -> MeshGrid:
    """Triangulate the box [0, L_x] x [0, L_y] (x [0, L_z]) on a uniform grid.

    Rectangles are split into two triangles along the fixed lower-left to
    upper-right diagonal; cuboids are split into six tetrahedra by the Kuhn
    decomposition.  Identical inputs produce bit-identical meshes.

    Parameters
    ----------
    dim : int
        2 or 3.
    extents : sequence of float
        Positive box side lengths, one per axis.
    counts : sequence of int
        Number of grid points per axis, each at least 2.
    """
    if dim not in (2, 3):
        raise ValueError(f"dim must be 2 or 3, got {dim}")
    extents = np.asarray(extents, dtype=float)
    counts = np.asarray(counts, dtype=int)
    if extents.shape != (dim,) or counts.shape != (dim,):
        raise ValueError(f"extents and counts must have length {dim}")
    if np.any(extents <= 0.0):
        raise ValueError(f"extents must be positive, got {extents}")
    if np.any(counts < 2):
        raise ValueError(f"counts must be >= 2 along every axis, got {counts}")

    axes = [np.linspace(0.0, extents[a], counts[a]) for a in range(dim)]
    if dim == 2:
        nx, ny = counts
        xg, yg = np.meshgrid(axes[0], axes[1], indexing="xy")
        nodes = np.column_stack([xg.ravel(), yg.ravel()])
        elements = _triangulate_2d(nx, ny)
    else:
        nx, ny, nz = counts
        # lexicographic with x fastest, then y, then z
        zg, yg, xg = np.meshgrid(axes[2], axes[1], axes[0], indexing="ij")
        nodes = np.column_stack([xg.ravel(), yg.ravel(), zg.ravel()])
        elements = _tetrahedralize_3d(nx, ny, nz)

    facets_bottom = _face_facets(elements, nodes, counts, dim, top=False)
    facets_top = _face_facets(elements, nodes, counts, dim, top=True)

    mesh = MeshGrid(
        dim=dim,
        extents=extents,
        counts=counts,
        nodes=nodes,
        elements=elements,
        facets_top=facets_top,
        facets_bottom=facets_bottom,
    )
    for arr in (mesh.extents, mesh.counts, mesh.nodes, mesh.elements,
                mesh.facets_top, mesh.facets_bottom):
        arr.setflags(write=False)
    return mesh


def boundary_facets(mesh: MeshGrid, which: str) -> np.ndarray:
    """Return the tagged facet set, ``which`` in {"top", "bottom"}."""
    if which == "top":
        return mesh.facets_top
    if which == "bottom":
        return mesh.facets_bottom
    raise ValueError(f"which must be 'top' or 'bottom', got {which!r}")


def element_volumes(mesh: MeshGrid) -> np.ndarray:
    """Signed simplex volumes (positive for a valid mesh)."""
    pts = mesh.nodes[mesh.elements]
    edges = pts[:, 1:, :] - pts[:, :1, :]
    if mesh.dim == 2:
        det = edges[:, 0, 0] * edges[:, 1, 1] - edges[:, 0, 1] * edges[:, 1, 0]
        return det / 2.0
    det = np.linalg.det(edges)
    return det / 6.0


def _triangulate_2d(nx: int, ny: int) -> np.ndarray:
    i, j = np.meshgrid(np.arange(nx - 1), np.arange(ny - 1), indexing="xy")
    i = i.ravel()
    j = j.ravel()
    a = i + nx * j          # lower-left
    b = a + 1               # lower-right
    c = a + nx              # upper-left
    d = c + 1               # upper-right
    # split along the a-d diagonal, both triangles counterclockwise
    tris = np.empty((2 * a.size, 3), dtype=np.int64)
    tris[0::2] = np.column_stack([a, b, d])
    tris[1::2] = np.column_stack([a, d, c])
    return tris


def _tetrahedralize_3d(nx: int, ny: int, nz: int) -> np.ndarray:
    def node_id(ii, jj, kk):
        return ii + nx * (jj + ny * kk)

    i, j, k = np.meshgrid(
        np.arange(nx - 1), np.arange(ny - 1), np.arange(nz - 1), indexing="ij"
    )
    i = i.ravel()
    j = j.ravel()
    k = k.ravel()

    steps = np.eye(3, dtype=np.int64)
    tets = []
    for perm in _KUHN_PERMUTATIONS:
        v0 = (i, j, k)
        v1 = tuple(v0[a] + steps[perm[0], a] for a in range(3))
        v2 = tuple(v1[a] + steps[perm[1], a] for a in range(3))
        v3 = (i + 1, j + 1, k + 1)
        ids = [node_id(*v) for v in (v0, v1, v2, v3)]
        # odd permutations produce negative orientation; swap two vertices
        parity = _permutation_sign(perm)
        if parity < 0:
            ids[1], ids[2] = ids[2], ids[1]
        tets.append(np.column_stack(ids))
    # interleave the six tets of each cell so cells stay contiguous
    out = np.stack(tets, axis=1).reshape(-1, 4)
    return out


def _permutation_sign(perm) -> int:
    inversions = sum(
        1 for a in range(3) for b in range(a + 1, 3) if perm[a] > perm[b]
    )
    return -1 if inversions % 2 else 1


def _face_facets(elements, nodes, counts, dim, top: bool) -> np.ndarray:
    """Facets of elements lying entirely on the y = 0 or y = L_y face."""
    nx = counts[0]
    ny = counts[1]
    j_index = (np.arange(nodes.shape[0]) // nx) % ny
    target = ny - 1 if top else 0
    on_face = j_index == target

    if dim == 2:
        face_mask = on_face[elements]
        local_faces = [(0, 1), (1, 2), (2, 0)]
    else:
        face_mask = on_face[elements]
        local_faces = [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)]

    facets = []
    for loc in local_faces:
        sel = np.all(face_mask[:, loc], axis=1)
        if np.any(sel):
            facets.append(elements[sel][:, loc])
    if not facets:
        return np.empty((0, dim), dtype=np.int64)
    out = np.vstack(facets)
    # canonical ordering: sort vertices within each facet, then facet rows
    out = np.sort(out, axis=1)
    order = np.lexsort(out.T[::-1])
    return out[order]
