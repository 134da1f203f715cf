"""Dense SVD, trace/spectral norms and the singular value thresholding
proximal operator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SvdFactors",
    "svd",
    "trace_norm",
    "spectral_norm",
    "svt",
    "numerical_rank",
]

# singular values below this multiple of the largest one count as zero
RANK_RTOL = 1e-12


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD ``X = U @ diag(S) @ Vt`` with ``S`` sorted non-increasing."""

    U: np.ndarray
    S: np.ndarray
    Vt: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.S) @ self.Vt


def svd(X: np.ndarray) -> SvdFactors:
    """Thin SVD of a dense matrix.

    Raises on non-finite input; LAPACK convergence failures propagate as
    ``numpy.linalg.LinAlgError``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"expected a matrix, got ndim={X.ndim}")
    if not np.all(np.isfinite(X)):
        raise ValueError("svd input contains non-finite entries")
    U, S, Vt = np.linalg.svd(X, full_matrices=False)
    return SvdFactors(U=U, S=S, Vt=Vt)


def _singular_values(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if not np.all(np.isfinite(X)):
        raise ValueError("input contains non-finite entries")
    if min(X.shape, default=0) == 0:
        return np.zeros(0)
    return np.linalg.svd(X, compute_uv=False)


def trace_norm(X: np.ndarray) -> float:
    """Sum of singular values (nuclear norm)."""
    return float(_singular_values(X).sum())


def spectral_norm(X: np.ndarray) -> float:
    """Largest singular value (operator norm)."""
    s = _singular_values(X)
    return float(s[0]) if s.size else 0.0


def numerical_rank(X: np.ndarray, rtol: float = RANK_RTOL) -> int:
    """Number of singular values above ``rtol`` times the largest."""
    s = _singular_values(X)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rtol * s[0]))


def svt(X: np.ndarray, tau: float) -> np.ndarray:
    """Singular value thresholding: prox of ``tau * trace_norm`` at ``X``.

    Returns the unique minimizer of ``0.5 * ||Z - X||_F^2 + tau * ||Z||_tr``,
    i.e. ``U (S - tau)_+ Vt``.
    """
    if tau < 0:
        raise ValueError(f"threshold must be non-negative, got {tau}")
    X = np.asarray(X, dtype=float)
    if min(X.shape, default=0) == 0:
        return X.copy()
    if tau == 0.0:
        return X.copy()
    f = svd(X)
    s = np.maximum(f.S - tau, 0.0)
    return (f.U * s) @ f.Vt
