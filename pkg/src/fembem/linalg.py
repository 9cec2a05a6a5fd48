"""Dense complex linear algebra for the desk-scale solvers.

Thin wrappers around numpy's LAPACK bindings, with the diagnostics the
solvers rely on: LU growth factor, smallest singular value, Hermitian
part extreme eigenvalue, and a compact restarted GMRES.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SingularMatrixError(np.linalg.LinAlgError):
    """Pivot below tolerance during factorization."""

    def __init__(self, pivot_index: int, pivot: float):
        super().__init__(f"singular pivot {pivot:.3e} at index {pivot_index}")
        self.pivot_index = pivot_index
        self.pivot = pivot


@dataclass
class LuSolveResult:
    x: np.ndarray
    growth_factor: float
    residual: float


def lu_solve(A: np.ndarray, b: np.ndarray) -> LuSolveResult:
    """Partial-pivoting LU solve with a growth-factor report.

    Raises SingularMatrixError when a pivot falls below 1e-14 * ||A||.
    """
    A = np.asarray(A, dtype=complex)
    b = np.asarray(b, dtype=complex)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("matrix must be square")
    norm = np.abs(A).max()
    # one explicit elimination pass for pivots and growth; numpy's solve
    # (LAPACK) produces the actual solution
    U = A.copy()
    maxu = norm
    for k in range(n):
        p = k + int(np.argmax(np.abs(U[k:, k])))
        if abs(U[p, k]) <= 1e-14 * norm:
            raise SingularMatrixError(k, float(abs(U[p, k])))
        if p != k:
            U[[k, p]] = U[[p, k]]
        U[k + 1:, k] /= U[k, k]
        U[k + 1:, k + 1:] -= np.outer(U[k + 1:, k], U[k, k + 1:])
        U[k + 1:, k] = 0.0
        m = np.abs(U[k:, k:]).max(initial=0.0)
        maxu = max(maxu, m)
    x = np.linalg.solve(A, b)
    res = float(np.linalg.norm(A @ x - b)
                / max(np.linalg.norm(b), 1e-300))
    return LuSolveResult(x=x, growth_factor=float(maxu / norm), residual=res)


def smallest_singular_value(A: np.ndarray) -> float:
    """sigma_min by full SVD below dimension 3000, inverse iteration on
    the normal equations above."""
    A = np.asarray(A, dtype=complex)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("matrix must be square")
    if n <= 3000:
        return float(np.linalg.svd(A, compute_uv=False)[-1])
    return _sigma_min_inverse_iteration(A)


def _sigma_min_inverse_iteration(A: np.ndarray, iters: int = 60) -> float:
    import numpy.linalg as la
    rng = np.random.default_rng(0)
    n = A.shape[0]
    # inverse iteration on A^H A via two triangular solves per step
    from numpy.linalg import solve
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    x /= la.norm(x)
    prev = np.inf
    for _ in range(iters):
        # z = (A^H A)^{-1} x drives x toward the smallest right singular vector
        y = solve(A.conj().T, x)
        z = solve(A, y)
        s = 1.0 / np.sqrt(la.norm(z))
        x = z / la.norm(z)
        est = la.norm(A @ x)
        if abs(est - prev) <= 1e-8 * est:
            return float(est)
        prev = est
    return float(prev)


def sigma_extremes(A: np.ndarray) -> tuple[float, float]:
    """(sigma_min, sigma_max)."""
    s = np.linalg.svd(np.asarray(A, dtype=complex), compute_uv=False)
    return float(s[-1]), float(s[0])


def min_eig_hermitian_part(A: np.ndarray) -> float:
    """Smallest eigenvalue of (A + A^H)/2."""
    A = np.asarray(A, dtype=complex)
    H = 0.5 * (A + A.conj().T)
    return float(np.linalg.eigvalsh(H)[0])


def gmres(A: np.ndarray, b: np.ndarray, tol: float = 1e-10,
          restart: int = 50, maxiter: int = 2000):
    """Restarted GMRES; returns (x, iteration count).

    Plain dense implementation with modified Gram-Schmidt Arnoldi.
    """
    A = np.asarray(A, dtype=complex)
    b = np.asarray(b, dtype=complex)
    n = len(b)
    x = np.zeros(n, dtype=complex)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return x, 0
    total = 0
    while total < maxiter:
        r = b - A @ x
        beta = np.linalg.norm(r)
        if beta <= tol * bnorm:
            return x, total
        m = min(restart, maxiter - total)
        Q = np.zeros((n, m + 1), dtype=complex)
        H = np.zeros((m + 1, m), dtype=complex)
        Q[:, 0] = r / beta
        k_used = m
        for k in range(m):
            v = A @ Q[:, k]
            for i in range(k + 1):
                H[i, k] = np.vdot(Q[:, i], v)
                v -= H[i, k] * Q[:, i]
            H[k + 1, k] = np.linalg.norm(v)
            total += 1
            if H[k + 1, k] <= 1e-14 * bnorm:
                k_used = k + 1
                break
            Q[:, k + 1] = v / H[k + 1, k]
            # small least squares for the residual estimate
            e1 = np.zeros(k + 2, dtype=complex)
            e1[0] = beta
            y, *_ = np.linalg.lstsq(H[:k + 2, :k + 1], e1, rcond=None)
            if np.linalg.norm(H[:k + 2, :k + 1] @ y - e1) <= tol * bnorm:
                k_used = k + 1
                break
        e1 = np.zeros(k_used + 1, dtype=complex)
        e1[0] = beta
        y, *_ = np.linalg.lstsq(H[:k_used + 1, :k_used], e1, rcond=None)
        x = x + Q[:, :k_used] @ y
        if np.linalg.norm(b - A @ x) <= tol * bnorm:
            return x, total
    return x, total
