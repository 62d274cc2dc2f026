"""P1 (linear Lagrange) finite element assembly on structured simplicial meshes.

All element matrices use closed-form exact integration of the P1 products, so
assembled values are reproducible bit for bit and can be checked against
analytic references.  Matrices are exactly symmetric by construction: each
unordered index pair is accumulated once and mirrored.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .mesh import MeshGrid, boundary_facets

__all__ = [
    "assemble_mass",
    "assemble_stiffness",
    "assemble_boundary_mass",
    "assemble_boundary_load",
]


def assemble_mass(mesh: MeshGrid) -> sp.csr_matrix:
    """Mass matrix with entries int psi_i psi_j dx; symmetric positive definite."""
    vols = _volumes(mesh)
    nloc = mesh.dim + 1
    # P1 simplex mass: vol/((d+1)(d+2)) * (ones + I)
    scale = vols / ((nloc) * (nloc + 1))
    local = np.empty((mesh.num_elements, nloc, nloc))
    local[:] = scale[:, None, None]
    idx = np.arange(nloc)
    local[:, idx, idx] *= 2.0
    return _scatter_symmetric(mesh.elements, local, mesh.num_nodes)


def assemble_stiffness(mesh: MeshGrid) -> sp.csr_matrix:
    """Stiffness matrix with entries int grad psi_i . grad psi_j dx.

    Symmetric positive semidefinite with the constant vector in its null
    space (K @ 1 = 0 up to roundoff).
    """
    grads, vols = _gradients(mesh)
    local = np.einsum("eid,ejd->eij", grads, grads) * vols[:, None, None]
    return _scatter_symmetric(mesh.elements, local, mesh.num_nodes)


def assemble_boundary_mass(mesh: MeshGrid, which: str) -> sp.csr_matrix:
    """Facet mass matrix int_Gamma psi_i psi_j dsigma over the tagged face.

    Rows and columns of nodes away from the face are zero; the result is
    n x n so boundary loads compose directly with volume vectors.
    """
    facets = boundary_facets(mesh, which)
    nloc = mesh.dim  # facet simplex has dim vertices
    pts = mesh.nodes[facets]
    if mesh.dim == 2:
        measures = np.linalg.norm(pts[:, 1] - pts[:, 0], axis=1)
    else:
        cross = np.cross(pts[:, 1] - pts[:, 0], pts[:, 2] - pts[:, 0])
        measures = 0.5 * np.linalg.norm(cross, axis=1)
    scale = measures / ((nloc) * (nloc + 1))
    local = np.empty((facets.shape[0], nloc, nloc))
    local[:] = scale[:, None, None]
    idx = np.arange(nloc)
    local[:, idx, idx] *= 2.0
    return _scatter_symmetric(facets, local, mesh.num_nodes)


def assemble_boundary_load(mesh: MeshGrid, which: str, g) -> np.ndarray:
    """Surface load vector with entries int_Gamma g psi_i dsigma.

    The integrand is interpolated at the nodes and integrated through the
    facet mass matrix (group finite element treatment), so ``g`` may be a
    callable of node coordinates or a full-length nodal array.  Entries at
    nodes away from the tagged face are zero.
    """
    bmass = assemble_boundary_mass(mesh, which)
    nodal = np.zeros(mesh.num_nodes)
    face_nodes = np.unique(boundary_facets(mesh, which))
    if callable(g):
        nodal[face_nodes] = g(mesh.nodes[face_nodes])
    else:
        g = np.asarray(g, dtype=float)
        if g.shape != (mesh.num_nodes,):
            raise ValueError(
                f"nodal data must have length {mesh.num_nodes}, got {g.shape}"
            )
        nodal[face_nodes] = g[face_nodes]
    return bmass @ nodal


def _volumes(mesh: MeshGrid) -> np.ndarray:
    pts = mesh.nodes[mesh.elements]
    edges = pts[:, 1:, :] - pts[:, :1, :]
    if mesh.dim == 2:
        det = edges[:, 0, 0] * edges[:, 1, 1] - edges[:, 0, 1] * edges[:, 1, 0]
        return det / 2.0
    return np.linalg.det(edges) / 6.0


def _gradients(mesh: MeshGrid):
    """P1 basis gradients per element, shape (ne, d+1, d), and volumes."""
    pts = mesh.nodes[mesh.elements]
    edges = pts[:, 1:, :] - pts[:, :1, :]          # (ne, d, d), rows p_i - p_0
    inv_t = np.linalg.inv(edges)                   # columns give grad psi_i
    grads = np.empty((mesh.num_elements, mesh.dim + 1, mesh.dim))
    grads[:, 1:, :] = np.swapaxes(inv_t, 1, 2)
    grads[:, 0, :] = -grads[:, 1:, :].sum(axis=1)
    if mesh.dim == 2:
        det = edges[:, 0, 0] * edges[:, 1, 1] - edges[:, 0, 1] * edges[:, 1, 0]
        vols = det / 2.0
    else:
        vols = np.linalg.det(edges) / 6.0
    return grads, vols


def _scatter_symmetric(conn: np.ndarray, local: np.ndarray, n: int) -> sp.csr_matrix:
    """Accumulate symmetric local matrices into a globally exactly-symmetric CSR.

    Only the diagonal and one representative of each off-diagonal local pair
    are scattered; the strict triangle is then mirrored, so A[i, j] and
    A[j, i] are sums of identical values in identical order.
    """
    nloc = local.shape[1]
    rows_d, cols_d, vals_d = [], [], []
    rows_u, cols_u, vals_u = [], [], []
    for p in range(nloc):
        rows_d.append(conn[:, p])
        cols_d.append(conn[:, p])
        vals_d.append(local[:, p, p])
        for q in range(p + 1, nloc):
            rows_u.append(conn[:, p])
            cols_u.append(conn[:, q])
            vals_u.append(local[:, p, q])
    diag = sp.coo_matrix(
        (np.concatenate(vals_d), (np.concatenate(rows_d), np.concatenate(cols_d))),
        shape=(n, n),
    ).tocsr()
    upper = sp.coo_matrix(
        (np.concatenate(vals_u), (np.concatenate(rows_u), np.concatenate(cols_u))),
        shape=(n, n),
    ).tocsr()
    out = diag + upper + upper.T
    out.sum_duplicates()
    out.sort_indices()
    return out
