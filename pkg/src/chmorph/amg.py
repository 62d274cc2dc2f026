"""Classical (Ruge-Stuben) algebraic multigrid for symmetric positive definite systems.

The hierarchy is built with classical strength of connection (absolute-value
measure), the standard greedy coarse/fine splitting driven by influence
counts, distance-1 classical interpolation with strong F-F links dropped when
they share no coarse neighbor, and Galerkin coarse operators R A P with
R = P^T.  Cycles are V(1,1) with a forward Gauss-Seidel pre-sweep and a
backward post-sweep, which makes one cycle a symmetric positive definite
linear operator, as required when the solver is used inside a MINRES
preconditioner.  The coarsest level is factorized densely.

For speed the whole V-cycle runs as one compiled kernel over the levels'
matrices stacked into flat arrays.  All kernels are sequential, so repeated
solves are bit-reproducible; a hierarchy owns one workspace and is therefore
not safe for concurrent solves (build one hierarchy per thread instead).
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from numba import njit

from .krylov import SolveReport

__all__ = ["AmgHierarchy", "AmgLevel", "amg_setup", "amg_solve", "apply_cycles", "cycle"]

_F_NODE = 0
_C_NODE = 1
_U_NODE = 2
_PRE_F_NODE = 3


@dataclass
class AmgLevel:
    """One grid level: operator, its diagonal, and the transfer operators."""

    A: sp.csr_matrix
    diag: np.ndarray
    P: sp.csr_matrix | None = None
    R: sp.csr_matrix | None = None


@dataclass
class AmgHierarchy:
    """Multigrid hierarchy with a dense factorization of the coarsest operator."""

    levels: list[AmgLevel]
    coarse_inverse: np.ndarray
    strength_threshold: float
    max_coarse: int
    degenerate: bool = False
    _flat: tuple = field(default=None, repr=False)
    _work: tuple = field(default=None, repr=False)

    @property
    def matrix(self) -> sp.csr_matrix:
        return self.levels[0].A

    @property
    def level_sizes(self) -> list[int]:
        return [lvl.A.shape[0] for lvl in self.levels]


def amg_setup(A, strength_threshold: float = 0.25, max_levels: int = 25,
              max_coarse: int = 64) -> AmgHierarchy:
    """Build the multigrid hierarchy for a symmetric positive definite matrix.

    Coarsening stops once a level has at most ``max_coarse`` unknowns, which
    is then factorized densely.  If the very first coarsening step is
    degenerate (no coarse points selected, e.g. for a diagonal matrix), the
    hierarchy falls back to a single densely factorized level.
    """
    A = _canonical(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got shape {A.shape}")
    levels = [AmgLevel(A=A, diag=_checked_diagonal(A))]
    degenerate = False

    while levels[-1].A.shape[0] > max_coarse and len(levels) < max_levels:
        fine = levels[-1]
        n = fine.A.shape[0]
        S = _strength_graph(fine.A, strength_threshold)
        if S.nnz == 0:
            degenerate = len(levels) == 1
            break
        splitting = _cf_split(S)
        n_coarse = int(np.sum(splitting == _C_NODE))
        if n_coarse == 0 or n_coarse == n:
            degenerate = len(levels) == 1
            break
        P = _classical_interpolation(fine.A, S, splitting)
        R = P.T.tocsr()
        coarse = _canonical(R @ fine.A @ P)
        fine.P = P
        fine.R = R
        levels.append(AmgLevel(A=coarse, diag=_checked_diagonal(coarse)))

    coarsest = levels[-1].A
    if coarsest.shape[0] > max_coarse and not degenerate:
        warnings.warn(
            f"coarsening stalled at {coarsest.shape[0]} unknowns "
            f"(cap {max_coarse}); factorizing densely",
            RuntimeWarning,
        )
    lu = scipy.linalg.lu_factor(coarsest.toarray())
    coarse_inverse = np.ascontiguousarray(
        scipy.linalg.lu_solve(lu, np.eye(coarsest.shape[0]))
    )
    h = AmgHierarchy(
        levels=levels,
        coarse_inverse=coarse_inverse,
        strength_threshold=strength_threshold,
        max_coarse=max_coarse,
        degenerate=degenerate,
    )
    h._flat = _flatten(levels)
    h._work = _workspace(levels)
    return h


def amg_solve(hierarchy: AmgHierarchy, b, tol: float = 1e-4,
              max_cycles: int = 60) -> tuple[np.ndarray, SolveReport]:
    """Run V-cycles from a zero start until ||b - A x|| <= tol ||b||.

    Non-convergence within ``max_cycles`` is reported through the returned
    ``SolveReport`` (``converged=False``), never silently.
    """
    t0 = time.perf_counter()
    b = np.ascontiguousarray(b, dtype=np.float64)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), SolveReport(
            iterations=0, residual_norm=0.0, converged=True,
            wall_time=time.perf_counter() - t0,
        )
    A = hierarchy.levels[0].A
    x = np.zeros_like(b)
    r = np.empty_like(b)
    resid = bnorm
    cycles = 0
    for cycles in range(1, max_cycles + 1):
        cycle(hierarchy, x, b)
        _csr_residual(A.indptr, A.indices, A.data, x, b, r)
        resid = np.linalg.norm(r)
        if resid <= tol * bnorm:
            return x, SolveReport(
                iterations=cycles, residual_norm=resid, converged=True,
                wall_time=time.perf_counter() - t0,
            )
    return x, SolveReport(
        iterations=cycles, residual_norm=resid, converged=False,
        wall_time=time.perf_counter() - t0,
    )


def apply_cycles(hierarchy: AmgHierarchy, b, cycles: int) -> np.ndarray:
    """Apply a fixed number of V-cycles from a zero start (no residual tests).

    With the cycle count fixed, the map b -> x is one fixed symmetric
    positive definite linear operator, which is the mode to use when the
    surrounding Krylov method needs a stationary preconditioner.
    """
    b = np.ascontiguousarray(b, dtype=np.float64)
    x = np.zeros_like(b)
    for _ in range(cycles):
        cycle(hierarchy, x, b)
    return x


def cycle(hierarchy: AmgHierarchy, x: np.ndarray, b: np.ndarray):
    """One V(1,1) cycle, updating ``x`` in place."""
    (nlev, sizes, node_off, ap, aj, ax, adiag, a_iptr_off, a_val_off,
     pp, pj, px, p_iptr_off, p_val_off,
     rp, rj, rx, r_iptr_off, r_val_off) = hierarchy._flat
    ws_x, ws_b, ws_r = hierarchy._work
    _vcycle_kernel(
        nlev, sizes, node_off, ap, aj, ax, adiag, a_iptr_off, a_val_off,
        pp, pj, px, p_iptr_off, p_val_off,
        rp, rj, rx, r_iptr_off, r_val_off,
        hierarchy.coarse_inverse, x, b, ws_x, ws_b, ws_r,
    )


# --- flattened cycling kernel --------------------------------------------------


def _flatten(levels):
    sizes = np.array([lvl.A.shape[0] for lvl in levels], dtype=np.int64)
    node_off = np.zeros(len(levels) + 1, dtype=np.int64)
    np.cumsum(sizes, out=node_off[1:])

    def stack(mats):
        if mats:
            iptr = np.concatenate([m.indptr for m in mats])
            idx = np.concatenate([m.indices for m in mats])
            val = np.concatenate([m.data for m in mats])
        else:
            iptr = np.empty(0, np.int32)
            idx = np.empty(0, np.int32)
            val = np.empty(0, np.float64)
        iptr_off = np.zeros(len(mats) + 1, dtype=np.int64)
        val_off = np.zeros(len(mats) + 1, dtype=np.int64)
        for i, m in enumerate(mats):
            iptr_off[i + 1] = iptr_off[i] + m.indptr.shape[0]
            val_off[i + 1] = val_off[i] + m.nnz
        return iptr, idx, val, iptr_off, val_off

    ap, aj, ax, a_iptr_off, a_val_off = stack([lvl.A for lvl in levels])
    adiag = np.concatenate([lvl.diag for lvl in levels])
    transfer = [lvl for lvl in levels if lvl.P is not None]
    pp, pj, px, p_iptr_off, p_val_off = stack([lvl.P for lvl in transfer])
    rp, rj, rx, r_iptr_off, r_val_off = stack([lvl.R for lvl in transfer])
    return (len(levels), sizes, node_off, ap, aj, ax, adiag,
            a_iptr_off, a_val_off,
            pp, pj, px, p_iptr_off, p_val_off,
            rp, rj, rx, r_iptr_off, r_val_off)


def _workspace(levels):
    total = sum(lvl.A.shape[0] for lvl in levels)
    return (np.zeros(total), np.zeros(total), np.zeros(total))


@njit(cache=True)
def _vcycle_kernel(nlev, sizes, node_off, ap, aj, ax, adiag,
                   a_iptr_off, a_val_off,
                   pp, pj, px, p_iptr_off, p_val_off,
                   rp, rj, rx, r_iptr_off, r_val_off,
                   coarse_inverse, x0, b0, ws_x, ws_b, ws_r):
    # workspace slices hold per-level iterate/rhs/residual; level 0 uses the
    # caller's arrays directly
    for lvl in range(nlev - 1):
        n = sizes[lvl]
        off = node_off[lvl]
        ipt = a_iptr_off[lvl]
        val = a_val_off[lvl]
        if lvl == 0:
            x = x0
            b = b0
        else:
            x = ws_x[off: off + n]
            b = ws_b[off: off + n]
        r = ws_r[off: off + n]

        # forward Gauss-Seidel sweep
        for i in range(n):
            acc = b[i]
            for kk in range(ap[ipt + i] + val, ap[ipt + i + 1] + val):
                j = aj[kk]
                if j != i:
                    acc -= ax[kk] * x[j]
            x[i] = acc / adiag[off + i]

        # residual
        for i in range(n):
            acc = b[i]
            for kk in range(ap[ipt + i] + val, ap[ipt + i + 1] + val):
                acc -= ax[kk] * x[aj[kk]]
            r[i] = acc

        # restrict into next level's rhs, zero next iterate
        nc = sizes[lvl + 1]
        offc = node_off[lvl + 1]
        bc = ws_b[offc: offc + nc]
        xc = ws_x[offc: offc + nc]
        ript = r_iptr_off[lvl]
        rval = r_val_off[lvl]
        for i in range(nc):
            acc = 0.0
            for kk in range(rp[ript + i] + rval, rp[ript + i + 1] + rval):
                acc += rx[kk] * r[rj[kk]]
            bc[i] = acc
            xc[i] = 0.0

    # coarsest level: dense solve through the precomputed inverse
    nco = sizes[nlev - 1]
    offco = node_off[nlev - 1]
    if nlev == 1:
        xc = x0
        bc = b0
    else:
        xc = ws_x[offco: offco + nco]
        bc = ws_b[offco: offco + nco]
    for i in range(nco):
        acc = 0.0
        for j in range(nco):
            acc += coarse_inverse[i, j] * bc[j]
        xc[i] = acc

    for lvl in range(nlev - 2, -1, -1):
        n = sizes[lvl]
        off = node_off[lvl]
        ipt = a_iptr_off[lvl]
        val = a_val_off[lvl]
        if lvl == 0:
            x = x0
            b = b0
        else:
            x = ws_x[off: off + n]
            b = ws_b[off: off + n]

        # prolong the coarse correction
        nc = sizes[lvl + 1]
        offc = node_off[lvl + 1]
        xc = ws_x[offc: offc + nc]
        pipt = p_iptr_off[lvl]
        pval = p_val_off[lvl]
        for i in range(n):
            acc = 0.0
            for kk in range(pp[pipt + i] + pval, pp[pipt + i + 1] + pval):
                acc += px[kk] * xc[pj[kk]]
            x[i] += acc

        # backward Gauss-Seidel sweep
        for i in range(n - 1, -1, -1):
            acc = b[i]
            for kk in range(ap[ipt + i] + val, ap[ipt + i + 1] + val):
                j = aj[kk]
                if j != i:
                    acc -= ax[kk] * x[j]
            x[i] = acc / adiag[off + i]


@njit(cache=True)
def _csr_residual(indptr, indices, data, x, b, out):
    n = x.shape[0]
    for i in range(n):
        acc = b[i]
        for kk in range(indptr[i], indptr[i + 1]):
            acc -= data[kk] * x[indices[kk]]
        out[i] = acc


# --- setup helpers -----------------------------------------------------------


def _canonical(A) -> sp.csr_matrix:
    A = sp.csr_matrix(A, dtype=np.float64, copy=False)
    A.sum_duplicates()
    A.sort_indices()
    if A.indptr.dtype != np.int32:
        A.indptr = A.indptr.astype(np.int32)
        A.indices = A.indices.astype(np.int32)
    return A


def _checked_diagonal(A: sp.csr_matrix) -> np.ndarray:
    diag = A.diagonal().astype(np.float64)
    if np.any(diag == 0.0):
        raise ValueError("matrix has zero diagonal entries; Gauss-Seidel undefined")
    return diag


def _strength_graph(A: sp.csr_matrix, theta: float) -> sp.csr_matrix:
    """Strong off-diagonal connections: |a_ij| >= theta * max_k |a_ik|, k != i.

    Values of the retained entries are the original matrix entries, which is
    what the interpolation formula consumes.
    """
    n = A.shape[0]
    rows = np.repeat(np.arange(n, dtype=np.int32), np.diff(A.indptr))
    offdiag = A.indices != rows
    magnitude = np.where(offdiag, np.abs(A.data), 0.0)

    rowmax = np.zeros(n)
    nonempty = np.diff(A.indptr) > 0
    if np.any(nonempty):
        rowmax[nonempty] = np.maximum.reduceat(
            magnitude, A.indptr[:-1][nonempty]
        )
    mask = offdiag & (magnitude > 0.0) & (magnitude >= theta * rowmax[rows])

    counts = np.bincount(rows[mask], minlength=n)
    indptr = np.zeros(n + 1, dtype=np.int32)
    np.cumsum(counts, out=indptr[1:])
    return sp.csr_matrix(
        (A.data[mask], A.indices[mask], indptr), shape=A.shape
    )


def _cf_split(S: sp.csr_matrix) -> np.ndarray:
    T = S.T.tocsr()
    splitting = np.empty(S.shape[0], dtype=np.int32)
    _cf_split_kernel(
        S.shape[0],
        S.indptr.astype(np.int32), S.indices.astype(np.int32),
        T.indptr.astype(np.int32), T.indices.astype(np.int32),
        splitting,
    )
    return splitting


@njit(cache=True)
def _cf_split_kernel(n, Sp, Sj, Tp, Tj, splitting):
    """Greedy coarse-point selection ordered by influence counts.

    Points are processed in descending order of how many others they
    strongly influence; selecting a coarse point demotes its dependents to
    fine points and boosts the priority of their remaining strong neighbors.
    The priority queue is the classical bucket-of-intervals structure.
    """
    lam = np.zeros(n, dtype=np.int64)
    lam_max = 0
    for i in range(n):
        lam[i] = Tp[i + 1] - Tp[i]
        if lam[i] > lam_max:
            lam_max = lam[i]

    lam_max = max(2 * lam_max, n + 1)
    interval_ptr = np.zeros(lam_max + 1, dtype=np.int64)
    interval_count = np.zeros(lam_max + 1, dtype=np.int64)
    index_to_node = np.zeros(n, dtype=np.int64)
    node_to_index = np.zeros(n, dtype=np.int64)

    for i in range(n):
        interval_count[lam[i]] += 1
    total = 0
    for i in range(lam_max + 1):
        interval_ptr[i] = total
        total += interval_count[i]
        interval_count[i] = 0
    for i in range(n):
        li = lam[i]
        idx = interval_ptr[li] + interval_count[li]
        index_to_node[idx] = i
        node_to_index[i] = idx
        interval_count[li] += 1

    splitting[:] = _U_NODE

    # isolated points (nothing depends on them, they depend on nothing)
    for i in range(n):
        if lam[i] == 0 and Sp[i + 1] - Sp[i] == 0:
            splitting[i] = _F_NODE

    for top in range(n - 1, -1, -1):
        i = index_to_node[top]
        li = lam[i]
        interval_count[li] -= 1
        if li <= 0:
            break
        if splitting[i] != _U_NODE:
            continue
        splitting[i] = _C_NODE

        for jj in range(Tp[i], Tp[i + 1]):
            j = Tj[jj]
            if splitting[j] == _U_NODE:
                splitting[j] = _PRE_F_NODE

        for jj in range(Tp[i], Tp[i + 1]):
            j = Tj[jj]
            if splitting[j] != _PRE_F_NODE:
                continue
            splitting[j] = _F_NODE
            for kk in range(Sp[j], Sp[j + 1]):
                k = Sj[kk]
                if splitting[k] != _U_NODE:
                    continue
                if lam[k] >= n - 1:
                    continue
                # bump k's priority: move it to the end of its interval,
                # then hand that slot to the next interval
                lk = lam[k]
                old_pos = node_to_index[k]
                new_pos = interval_ptr[lk] + interval_count[lk] - 1

                swapped = index_to_node[new_pos]
                node_to_index[k] = new_pos
                node_to_index[swapped] = old_pos
                index_to_node[old_pos] = swapped
                index_to_node[new_pos] = k

                interval_count[lk] -= 1
                interval_count[lk + 1] += 1
                interval_ptr[lk + 1] = new_pos
                lam[k] += 1

    for i in range(n):
        if splitting[i] == _U_NODE:
            splitting[i] = _F_NODE


def _classical_interpolation(A: sp.csr_matrix, S: sp.csr_matrix,
                             splitting: np.ndarray) -> sp.csr_matrix:
    """Distance-1 classical interpolation from strong coarse neighbors."""
    S = S.copy()
    _drop_ff_without_common_c(
        A.shape[0], S.indptr, S.indices, S.data, splitting
    )
    S.eliminate_zeros()

    n = A.shape[0]
    Pp = np.empty(n + 1, dtype=np.int32)
    _interp_count(n, S.indptr, S.indices, splitting, Pp)
    nnz = Pp[-1]
    Pj = np.empty(nnz, dtype=np.int32)
    Px = np.empty(nnz, dtype=np.float64)
    _interp_weights(
        n, A.indptr, A.indices, A.data,
        S.indptr, S.indices, S.data, splitting, Pp, Pj, Px,
    )
    coarse_index = np.cumsum(splitting == _C_NODE, dtype=np.int32) - 1
    Pj = coarse_index[Pj]
    n_coarse = int(coarse_index[-1]) + 1 if n else 0
    return sp.csr_matrix((Px, Pj, Pp), shape=(n, n_coarse))


@njit(cache=True)
def _drop_ff_without_common_c(n, Sp, Sj, Sx, splitting):
    # zero out strong F-F links that share no strong coarse neighbor; the
    # interpolation formula cannot route their contribution anywhere
    for row in range(n):
        if splitting[row] != _F_NODE:
            continue
        for jj in range(Sp[row], Sp[row + 1]):
            j = Sj[jj]
            if splitting[j] != _F_NODE:
                continue
            has_common = False
            for ii in range(Sp[row], Sp[row + 1]):
                c = Sj[ii]
                if splitting[c] != _C_NODE:
                    continue
                for kk in range(Sp[j], Sp[j + 1]):
                    if Sj[kk] == c:
                        has_common = True
                        break
                if has_common:
                    break
            if not has_common:
                Sx[jj] = 0.0


@njit(cache=True)
def _interp_count(n, Sp, Sj, splitting, Pp):
    nnz = 0
    Pp[0] = 0
    for i in range(n):
        if splitting[i] == _C_NODE:
            nnz += 1
        else:
            for jj in range(Sp[i], Sp[i + 1]):
                if splitting[Sj[jj]] == _C_NODE and Sj[jj] != i:
                    nnz += 1
        Pp[i + 1] = nnz


@njit(cache=True)
def _interp_weights(n, Ap, Aj, Ax, Sp, Sj, Sx, splitting, Pp, Pj, Px):
    for i in range(n):
        if splitting[i] == _C_NODE:
            Pj[Pp[i]] = i
            Px[Pp[i]] = 1.0
            continue

        # denominator: diagonal plus weak couplings of row i
        denom = 0.0
        for mm in range(Ap[i], Ap[i + 1]):
            denom += Ax[mm]
        for mm in range(Sp[i], Sp[i + 1]):
            if Sj[mm] != i:
                denom -= Sx[mm]

        nnz = Pp[i]
        for jj in range(Sp[i], Sp[i + 1]):
            j = Sj[jj]
            if splitting[j] != _C_NODE:
                continue
            numerator = Sx[jj]

            # redistribute strong fine neighbors through shared coarse points
            for kk in range(Sp[i], Sp[i + 1]):
                k = Sj[kk]
                if splitting[k] != _F_NODE or k == i:
                    continue
                a_kj = 0.0
                a_kk = 0.0
                for search in range(Ap[k], Ap[k + 1]):
                    if Aj[search] == j:
                        a_kj = Ax[search]
                    elif Aj[search] == k:
                        a_kk = Ax[search]
                if a_kj * a_kk > 0.0:
                    a_kj = 0.0  # same-sign coupling carries no correction
                if a_kj == 0.0:
                    continue
                inner = 0.0
                for ll in range(Sp[i], Sp[i + 1]):
                    l = Sj[ll]
                    if splitting[l] != _C_NODE:
                        continue
                    for search in range(Ap[k], Ap[k + 1]):
                        if Aj[search] == l:
                            a_kl = Ax[search]
                            if a_kl * a_kk < 0.0:
                                inner += a_kl
                            break
                if abs(inner) > 1e-300:
                    numerator += Sx[kk] * a_kj / inner

            if abs(denom) > 1e-300:
                Px[nnz] = -numerator / denom
            else:
                Px[nnz] = 0.0
            Pj[nnz] = j
            nnz += 1
