"""Symmetric block-tridiagonal matrices: Cholesky factorization, solves, matvecs.

A symmetric block-tridiagonal matrix over n blocks of size d is stored as
    diag: (n, d, d)   diagonal blocks
    off:  (n-1, d, d) sub-diagonal blocks, off[i] = block (i+1, i)
The upper triangle is implied by symmetry. All routines are dense per block
but never materialize the full matrix, so solves cost O(n d^3).
"""

import numpy as np
from scipy.linalg import cholesky, solve_triangular


class BlockTridiagCholesky:
    """Lower block-bidiagonal Cholesky factor L with A = L L^T.

    Raises np.linalg.LinAlgError if a pivot block is not positive definite.
    """

    def __init__(self, diag: np.ndarray, off: np.ndarray | None):
        n, d, _ = diag.shape
        self.n = n
        self.d = d
        self.L_diag = np.empty_like(diag)
        self.L_off = np.empty((n - 1, d, d)) if n > 1 else np.empty((0, d, d))
        try:
            self.L_diag[0] = cholesky(diag[0], lower=True)
        except Exception as exc:
            raise np.linalg.LinAlgError(f"block 0 not positive definite: {exc}") from exc
        for i in range(1, n):
            # L_off[i-1] = off[i-1] @ inv(L_diag[i-1])^T
            tmp = solve_triangular(self.L_diag[i - 1], off[i - 1].T, lower=True)
            self.L_off[i - 1] = tmp.T
            schur = diag[i] - self.L_off[i - 1] @ self.L_off[i - 1].T
            try:
                self.L_diag[i] = cholesky(schur, lower=True)
            except Exception as exc:
                raise np.linalg.LinAlgError(f"block {i} not positive definite: {exc}") from exc

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Solve A x = b for b of shape (n*d,) or (n*d, m)."""
        squeeze = b.ndim == 1
        y = b.reshape(self.n, self.d, -1).astype(float, copy=True)
        # forward: L y = b
        y[0] = solve_triangular(self.L_diag[0], y[0], lower=True)
        for i in range(1, self.n):
            y[i] -= self.L_off[i - 1] @ y[i - 1]
            y[i] = solve_triangular(self.L_diag[i], y[i], lower=True)
        # backward: L^T x = y
        y[-1] = solve_triangular(self.L_diag[-1], y[-1], lower=True, trans="T")
        for i in range(self.n - 2, -1, -1):
            y[i] -= self.L_off[i].T @ y[i + 1]
            y[i] = solve_triangular(self.L_diag[i], y[i], lower=True, trans="T")
        out = y.reshape(self.n * self.d, -1)
        return out[:, 0] if squeeze else out


def block_tridiag_matvec(diag: np.ndarray, off: np.ndarray, x: np.ndarray) -> np.ndarray:
    """y = A x for stacked x of shape (n*d,)."""
    n, d, _ = diag.shape
    xb = x.reshape(n, d)
    y = np.einsum("nij,nj->ni", diag, xb)
    if n > 1:
        y[1:] += np.einsum("nij,nj->ni", off, xb[:-1])
        y[:-1] += np.einsum("nji,nj->ni", off, xb[1:])
    return y.reshape(n * d)


def block_tridiag_dense(diag: np.ndarray, off: np.ndarray) -> np.ndarray:
    """Materialize the full symmetric matrix (debugging / small n only)."""
    n, d, _ = diag.shape
    A = np.zeros((n * d, n * d))
    for i in range(n):
        A[i * d:(i + 1) * d, i * d:(i + 1) * d] = diag[i]
    for i in range(n - 1):
        A[(i + 1) * d:(i + 2) * d, i * d:(i + 1) * d] = off[i]
        A[i * d:(i + 1) * d, (i + 1) * d:(i + 2) * d] = off[i].T
    return A


def quadratic_form(diag: np.ndarray, off: np.ndarray, r: np.ndarray) -> float:
    """r^T A r for stacked r, without forming A."""
    return float(r @ block_tridiag_matvec(diag, off, r))


def psd_sqrt(mat: np.ndarray) -> np.ndarray:
    """Symmetric square root of a PSD matrix, tolerant of zero or slightly
    negative eigenvalues from roundoff (clipped at zero)."""
    w, v = np.linalg.eigh((mat + mat.T) / 2.0)
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.T
