"""Iterative linear solvers, eigensolvers, Green columns and resolvents."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .operators import SparseOperator

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_EIG_TOL = 1e-8
DENSE_LIMIT = 4000


@dataclass
class SolveReport:
    iterations: int
    residual: float
    converged: bool
    wall_time: float
    method: str = "cg"
    fallback: bool = False
    history: list = field(default_factory=list, repr=False)


@dataclass
class SpectrumResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    converged: bool = True

    def __len__(self):
        return self.eigenvalues.size


def _pcg(M, b, x0, tol, max_iter, inv_diag):
    """Jacobi-preconditioned conjugate gradients (works for Hermitian M)."""
    x = np.array(x0, dtype=np.result_type(M.dtype, b.dtype))
    r = b - M @ x
    z = inv_diag * r
    p = z.copy()
    rz = np.vdot(r, z)
    bnorm = np.linalg.norm(b) or 1.0
    history = [float(np.sqrt(abs(rz)))]
    res = np.linalg.norm(r) / bnorm
    for it in range(1, max_iter + 1):
        if res <= tol:
            return x, it - 1, res, True, history, False
        Mp = M @ p
        pMp = np.vdot(p, Mp)
        if not np.isfinite(pMp) or pMp.real <= 0:
            return x, it, res, False, history, True
        alpha = rz / pMp
        x += alpha * p
        r -= alpha * Mp
        z = inv_diag * r
        rz_new = np.vdot(r, z)
        history.append(float(np.sqrt(abs(rz_new))))
        p = z + (rz_new / rz) * p
        rz = rz_new
        res = np.linalg.norm(r) / bnorm
    return x, max_iter, res, res <= tol, history, False


def _bicgstab(M, b, x0, tol, max_iter, inv_diag):
    """Jacobi-preconditioned BiCGSTAB (right preconditioning)."""
    x = np.array(x0, dtype=np.result_type(M.dtype, b.dtype, float))
    r = b - M @ x
    r_hat = r.copy()
    rho = alpha = omega = 1.0
    v = np.zeros_like(r)
    p = np.zeros_like(r)
    bnorm = np.linalg.norm(b) or 1.0
    res = np.linalg.norm(r) / bnorm
    history = [res]
    best_x, best_res = x.copy(), res
    for it in range(1, max_iter + 1):
        if res <= tol:
            return x, it - 1, res, True, history
        rho_new = np.vdot(r_hat, r)
        if rho_new == 0 or omega == 0:
            break
        beta = (rho_new / rho) * (alpha / omega)
        p = r + beta * (p - omega * v)
        y = inv_diag * p
        v = M @ y
        denom = np.vdot(r_hat, v)
        if denom == 0:
            break
        alpha = rho_new / denom
        s = r - alpha * v
        z = inv_diag * s
        t = M @ z
        tt = np.vdot(t, t)
        omega = np.vdot(t, s) / tt if tt != 0 else 0.0
        x = x + alpha * y + omega * z
        r = s - omega * t
        rho = rho_new
        res = np.linalg.norm(r) / bnorm
        history.append(res)
        if res < best_res:
            best_x, best_res = x.copy(), res
        if not np.isfinite(res):
            break
    return best_x, it, best_res, best_res <= tol, history


def solve_linear(M, rhs, tol=DEFAULT_TOL, max_iter=None, x0=None, method="auto"):
    """Solve ``M x = rhs`` iteratively with a Jacobi preconditioner.

    ``method="auto"`` uses CG for symmetric/Hermitian operators and BiCGSTAB
    otherwise; if CG detects an indefinite direction it restarts with BiCGSTAB
    and sets ``report.fallback``.
    """
    A = M.matrix if isinstance(M, SparseOperator) else sp.csr_matrix(M)
    if A.shape[0] != A.shape[1]:
        raise ValueError("operator must be square")
    b = np.asarray(rhs)
    if not np.all(np.isfinite(b)):
        raise ValueError("right-hand side is not finite")
    n = A.shape[0]
    max_iter = max_iter or max(10 * n, 1000)
    x0 = np.zeros(n, dtype=np.result_type(A.dtype, b.dtype)) if x0 is None else x0
    diag = A.diagonal()
    inv_diag = np.where(diag != 0, 1.0 / np.where(diag != 0, diag, 1.0), 1.0)
    self_adjoint = isinstance(M, SparseOperator) and M.is_self_adjoint
    if method == "auto":
        method = "cg" if self_adjoint else "bicgstab"
    start = time.perf_counter()
    fallback = False
    if method == "cg":
        x, it, res, ok, hist, breakdown = _pcg(A, b, x0, tol, max_iter, inv_diag)
        if breakdown:
            log.info("CG met a non-positive curvature direction; switching to BiCGSTAB")
            fallback = True
            method = "bicgstab"
    if method == "bicgstab":
        x, it, res, ok, hist = _bicgstab(A, b, x0, tol, max_iter, inv_diag)
    report = SolveReport(it, float(res), bool(ok), time.perf_counter() - start, method, fallback, hist)
    if not ok:
        log.warning("linear solve did not converge: residual %.3g after %d iterations", res, it)
    return x, report


def _weighted_normalize(vecs, h, dim):
    norms = np.sqrt(h ** dim) * np.linalg.norm(vecs, axis=0)
    return vecs / norms


def gershgorin_shift(A):
    """A shift strictly below the spectrum of the Hermitian matrix ``A``."""
    d = A.diagonal().real
    radius = np.asarray(abs(A).sum(axis=1)).ravel() - np.abs(d)
    return min(0.0, float(np.min(d - radius))) - 1e-3


def shift_invert_operator(M, sigma):
    """LinearOperator applying ``(M - sigma I)^{-1}`` through one sparse LU factorization."""
    A = M.matrix if isinstance(M, SparseOperator) else M
    lu = spla.splu((A - sigma * sp.identity(A.shape[0], dtype=A.dtype, format="csc")).tocsc())
    return spla.LinearOperator(A.shape, matvec=lu.solve, dtype=A.dtype)


def lowest_eigenpairs(M, k, tol=DEFAULT_EIG_TOL, sigma=None, opinv=None):
    """The ``k`` smallest eigenpairs of a symmetric or Hermitian operator.

    Small operators use a dense eigendecomposition; larger ones use
    shift-invert Lanczos (ARPACK).  ``opinv`` may carry a precomputed
    :func:`shift_invert_operator` for ``sigma`` so repeated calls factor once.  Eigenvectors are normalised so that
    ``h^n * sum |v|^2 = 1``.
    """
    if not M.is_self_adjoint:
        raise ValueError("eigenpairs require a symmetric or Hermitian operator")
    n = M.n
    k = int(min(k, n))
    A = M.matrix
    if n <= DENSE_LIMIT or k >= n - 1:
        w, v = scipy.linalg.eigh(A.toarray(), subset_by_index=[0, k - 1])
    else:
        if sigma is None:
            # a Gershgorin lower bound keeps M - sigma I definite
            sigma = gershgorin_shift(A)
            opinv = None
        w, v = spla.eigsh(A, k=k, sigma=sigma, which="LM", tol=tol * 1e-2, OPinv=opinv)
        order = np.argsort(w)
        w, v = w[order], v[:, order]
    resid = np.linalg.norm(A @ v - v * w, axis=0) / np.linalg.norm(v, axis=0)
    v = _weighted_normalize(v, M.grid.h, M.grid.dim)
    scale = max(1.0, float(np.abs(w).max()))
    converged = bool(np.all(resid <= tol * scale))
    return SpectrumResult(np.asarray(w.real), v, resid, converged)


def green_column(M, source, tol=DEFAULT_TOL):
    """Discrete Green's function ``G(., y0)``: solves ``M g = h^{-n} e_source``.

    ``source`` is a grid multi-index or flat grid index of an interior node.
    Returns ``(field, report)``.
    """
    grid = M.grid
    flat = grid.ravel_index(source) if np.ndim(source) else int(source)
    pos = np.searchsorted(M.nodes, flat)
    if pos >= M.nodes.size or M.nodes[pos] != flat:
        raise ValueError("Green column source must be an interior node")
    rhs = np.zeros(M.n, dtype=M.dtype)
    rhs[pos] = grid.h ** (-grid.dim)
    g, report = solve_linear(M, rhs, tol=tol)
    return M.extend(g, name="green"), report


def apply_resolvent(M, t, f, tol=DEFAULT_TOL):
    """``(I + t^2 M)^{-1} f`` for interior vectors ``f``."""
    if not t > 0:
        raise ValueError("t must be positive")
    shifted = M.shifted(1.0, scale=t * t)
    x, report = solve_linear(shifted, np.asarray(f), tol=tol)
    return x, report


def dense_inverse(M):
    return np.linalg.inv(M.todense())
