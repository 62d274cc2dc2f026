"""Preconditioned MINRES and the 2x2 block operator it is applied to.

MINRES requires a symmetric (possibly indefinite) operator and a symmetric
positive definite preconditioner; the recurrence then minimizes the residual
in the inverse-preconditioner norm, and that norm estimate (``phibar``) is
monotone by construction.  Breakdown of the underlying Lanczos recurrence
(zero continuation coefficient) is reported distinctly from plain
non-convergence.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

__all__ = ["SolveReport", "BlockOperator2x2", "minres", "MinresNonSymmetricError"]


@dataclass
class SolveReport:
    """Outcome of one linear solve.

    ``residual_norm`` is the norm the solver iterated on (preconditioned
    norm for MINRES, Euclidean for the multigrid solver); the Euclidean
    residual of the returned iterate is additionally recorded in
    ``true_residual_norm`` when the solver computes it.
    """

    iterations: int
    residual_norm: float
    converged: bool
    wall_time: float
    breakdown: bool = False
    true_residual_norm: float | None = None
    residual_history: np.ndarray | None = field(default=None, repr=False)


class MinresNonSymmetricError(RuntimeError):
    """Raised when the inner products certify a non-symmetric operator or an
    indefinite preconditioner."""


class BlockOperator2x2:
    """Symmetric 2x2 block operator  [[s11 A11, s12 A12], [s21 A21, s22 A22]].

    Blocks are shared sparse matrices with scalar multipliers, so the same
    assembled mass/stiffness pair can serve every time step.  Construction
    verifies conformality and, unless disabled, value-level symmetry of the
    whole operator.
    """

    def __init__(self, blocks, scales, check_symmetry: bool = True,
                 symmetry_tol: float = 1e-12):
        (self.A11, self.A12), (self.A21, self.A22) = blocks
        (self.s11, self.s12), (self.s21, self.s22) = (
            tuple(map(float, row)) for row in scales
        )
        self.n1 = self.A11.shape[0]
        self.n2 = self.A22.shape[0]
        if self.A11.shape != (self.n1, self.n1) or self.A22.shape != (self.n2, self.n2):
            raise ValueError("diagonal blocks must be square")
        if self.A12.shape != (self.n1, self.n2) or self.A21.shape != (self.n2, self.n1):
            raise ValueError(
                f"off-diagonal blocks non-conformal: {self.A12.shape}, {self.A21.shape}"
            )
        self.symmetric = None
        if check_symmetry:
            self.symmetric = self._check_symmetry(symmetry_tol)
            if not self.symmetric:
                raise ValueError("block operator is not symmetric")

    def _check_symmetry(self, tol: float) -> bool:
        def sym_defect(B):
            d = (B - B.T).tocsr()
            return np.max(np.abs(d.data)) if d.nnz else 0.0

        def scale_of(B, s):
            return abs(s) * (np.max(np.abs(B.data)) if B.nnz else 0.0)

        off = (self.s12 * self.A12.T - self.s21 * self.A21).tocsr()
        off_defect = np.max(np.abs(off.data)) if off.nnz else 0.0
        ref = max(scale_of(self.A12, self.s12), scale_of(self.A21, self.s21), 1e-300)
        ok_off = off_defect <= tol * ref
        ok_d1 = sym_defect(self.A11) <= tol * max(scale_of(self.A11, 1.0), 1e-300)
        ok_d2 = sym_defect(self.A22) <= tol * max(scale_of(self.A22, 1.0), 1e-300)
        return bool(ok_off and ok_d1 and ok_d2)

    @property
    def shape(self):
        n = self.n1 + self.n2
        return (n, n)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        v1 = v[: self.n1]
        v2 = v[self.n1:]
        out = np.empty_like(v)
        out[: self.n1] = self.s11 * (self.A11 @ v1) + self.s12 * (self.A12 @ v2)
        out[self.n1:] = self.s21 * (self.A21 @ v1) + self.s22 * (self.A22 @ v2)
        return out

    def __matmul__(self, v):
        return self.matvec(v)

    def toarray(self) -> np.ndarray:
        top = np.hstack([self.s11 * self.A11.toarray(), self.s12 * self.A12.toarray()])
        bot = np.hstack([self.s21 * self.A21.toarray(), self.s22 * self.A22.toarray()])
        return np.vstack([top, bot])


def _as_matvec(op):
    if op is None:
        return lambda v: v.copy()
    if callable(op) and not hasattr(op, "matvec"):
        return op
    if hasattr(op, "matvec"):
        return op.matvec
    if sp.issparse(op) or isinstance(op, np.ndarray):
        return lambda v: op @ v
    raise TypeError(f"cannot interpret {type(op)!r} as a linear operator")


def minres(op, b, prec=None, tol: float = 1e-7, maxit: int | None = None,
           x0=None, collect_lanczos: bool = False):
    """Minimum-residual iteration for symmetric (indefinite) systems.

    Parameters
    ----------
    op : operator
        Symmetric operator (sparse matrix, BlockOperator2x2, or callable).
    b : ndarray
        Right-hand side.
    prec : operator, optional
        Symmetric positive definite preconditioner application v -> P^{-1} v.
    tol : float
        Relative reduction of the preconditioned residual norm.
    maxit : int, optional
        Iteration cap (default: problem size).
    x0 : ndarray, optional
        Initial guess (default zero).
    collect_lanczos : bool
        Also return the preconditioned Lanczos vectors and recurrence
        coefficients (testing hook).

    Returns
    -------
    (x, report) or (x, report, lanczos) when ``collect_lanczos``.
    """
    t0 = time.perf_counter()
    matvec = _as_matvec(op)
    psolve = _as_matvec(prec)
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if maxit is None:
        maxit = max(5 * n, 100)

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r1 = b - matvec(x) if x0 is not None else b.copy()
    y = psolve(r1)
    beta1 = float(r1 @ y)
    if beta1 < 0.0:
        raise MinresNonSymmetricError("preconditioner is not positive definite")
    if beta1 == 0.0:
        report = SolveReport(
            iterations=0, residual_norm=0.0, converged=True,
            wall_time=time.perf_counter() - t0,
            true_residual_norm=float(np.linalg.norm(b - matvec(x))),
            residual_history=np.zeros(1),
        )
        return (x, report, ([], [], [])) if collect_lanczos else (x, report)
    beta1 = math.sqrt(beta1)

    eps = np.finfo(float).eps
    oldb = 0.0
    beta = beta1
    dbar = 0.0
    epsln = 0.0
    phibar = beta1
    cs = -1.0
    sn = 0.0
    w = np.zeros(n)
    w2 = np.zeros(n)
    r2 = r1

    history = [phibar]
    lanczos_v, alphas, betas = [], [], []
    converged = False
    breakdown = False
    itn = 0

    while itn < maxit:
        itn += 1
        s = 1.0 / beta
        v = s * y
        if collect_lanczos:
            lanczos_v.append(v.copy())
        y = matvec(v)
        if itn >= 2:
            y -= (beta / oldb) * r1
        alpha = float(v @ y)
        y -= (alpha / beta) * r2
        r1 = r2
        r2 = y
        y = psolve(r2)
        oldb = beta
        beta = float(r2 @ y)
        if beta < 0.0:
            raise MinresNonSymmetricError(
                "operator is not symmetric (or preconditioner not SPD)"
            )
        beta = math.sqrt(beta)
        if collect_lanczos:
            alphas.append(alpha)
            betas.append(beta)

        oldeps = epsln
        delta = cs * dbar + sn * alpha
        gbar = sn * dbar - cs * alpha
        epsln = sn * beta
        dbar = -cs * beta
        gamma = math.hypot(gbar, beta)
        gamma = max(gamma, eps)
        cs = gbar / gamma
        sn = beta / gamma
        phi = cs * phibar
        phibar = sn * phibar

        w1 = w2
        w2 = w
        w = (v - oldeps * w1 - delta * w2) / gamma
        x = x + phi * w
        history.append(phibar)

        if phibar <= tol * beta1:
            converged = True
            break
        if beta <= eps * beta1:
            # invariant subspace reached: Lanczos cannot continue
            converged = phibar <= tol * beta1
            breakdown = not converged
            break

    true_resid = float(np.linalg.norm(b - matvec(x)))
    report = SolveReport(
        iterations=itn,
        residual_norm=float(phibar),
        converged=converged,
        wall_time=time.perf_counter() - t0,
        breakdown=breakdown,
        true_residual_norm=true_resid,
        residual_history=np.asarray(history),
    )
    if collect_lanczos:
        return x, report, (lanczos_v, alphas, betas)
    return x, report
