"""Dense 3-way tensor algebra: unfolding/folding, concatenation, Tucker
synthesis and observation masks.

Conventions
-----------
Tensors are ``numpy`` arrays of shape ``(n1, n2, n3)`` and matrices are 2-d
arrays.  Modes are 1-based (``k in {1, 2, 3}``) to match the usual tensor
notation.  Vectorization and unfolding use column-major (Fortran) order: the
mode-``k`` unfolding places the mode-``k`` fibers as columns, with the
remaining indices varying fastest in ascending mode order.  ``fold`` is the
exact inverse of ``unfold`` (pure reindexing, no arithmetic).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ObservationMask",
    "unfold",
    "fold",
    "concat_mode1",
    "tucker_synthesize",
    "mask_apply",
    "inner",
]

_ORTHO_TOL = 1e-10


def _check_mode(k: int) -> int:
    if k not in (1, 2, 3):
        raise ValueError(f"mode index must be 1, 2 or 3, got {k!r}")
    return k - 1


def unfold(T: np.ndarray, k: int) -> np.ndarray:
    """Mode-``k`` unfolding of a 3-way tensor into an ``n_k x (N/n_k)`` matrix."""
    axis = _check_mode(k)
    T = np.asarray(T)
    if T.ndim != 3:
        raise ValueError(f"expected a 3-way tensor, got ndim={T.ndim}")
    rest = int(np.prod([d for i, d in enumerate(T.shape) if i != axis]))
    return np.reshape(np.moveaxis(T, axis, 0), (T.shape[axis], rest), order="F")


def fold(Mk: np.ndarray, k: int, dims: tuple[int, int, int]) -> np.ndarray:
    """Inverse of :func:`unfold`: rebuild the tensor from its mode-``k`` unfolding."""
    axis = _check_mode(k)
    Mk = np.asarray(Mk)
    n1, n2, n3 = dims
    nk = dims[axis]
    rest = (n1 * n2 * n3) // nk
    if Mk.shape != (nk, rest):
        raise ValueError(
            f"mode-{k} unfolding of dims {dims} must have shape {(nk, rest)}, "
            f"got {Mk.shape}"
        )
    shape = (nk,) + tuple(d for i, d in enumerate(dims) if i != axis)
    return np.moveaxis(np.reshape(Mk, shape, order="F"), 0, axis)


def concat_mode1(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Concatenate two matrices side by side (shared rows, stacked columns)."""
    A = np.asarray(A)
    B = np.asarray(B)
    if A.shape[0] != B.shape[0]:
        raise ValueError(f"row counts differ: {A.shape[0]} vs {B.shape[0]}")
    return np.concatenate([A, B], axis=1)


def tucker_synthesize(
    core: np.ndarray,
    U1: np.ndarray,
    U2: np.ndarray,
    U3: np.ndarray,
) -> np.ndarray:
    """Multilinear product ``core x1 U1 x2 U2 x3 U3``.

    Each factor ``U_k`` must be ``n_k x c_k`` with orthonormal columns
    (checked to 1e-10).  The result has multilinear rank at most
    ``core.shape``.
    """
    core = np.asarray(core)
    factors = (U1, U2, U3)
    for k, U in enumerate(factors, start=1):
        U = np.asarray(U)
        if U.ndim != 2 or U.shape[1] != core.shape[k - 1]:
            raise ValueError(
                f"factor {k} must have {core.shape[k - 1]} columns, got shape {U.shape}"
            )
        gram = U.T @ U
        if U.shape[1] and np.max(np.abs(gram - np.eye(U.shape[1]))) > _ORTHO_TOL:
            raise ValueError(f"factor {k} does not have orthonormal columns")
    out = core
    for k, U in enumerate(factors, start=1):
        dims = list(out.shape)
        dims[k - 1] = U.shape[0]
        out = fold(np.asarray(U) @ unfold(out, k), k, tuple(dims))
    return out


def inner(A: np.ndarray, B: np.ndarray) -> float:
    """Euclidean inner product of two same-shaped arrays."""
    A = np.asarray(A)
    B = np.asarray(B)
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch: {A.shape} vs {B.shape}")
    return float(np.vdot(A, B))


@dataclass(frozen=True)
class ObservationMask:
    """Set of observed positions of a matrix or a 3-way tensor.

    ``indices`` is an ``(n_obs, ndim)`` integer array of 0-based positions,
    kept sorted lexicographically and free of duplicates; ``shape`` is the
    shape of the array being masked.
    """

    shape: tuple[int, ...]
    indices: np.ndarray = field(repr=False)

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.intp)
        if idx.size == 0:
            idx = idx.reshape(0, len(self.shape))
        if idx.ndim != 2 or idx.shape[1] != len(self.shape):
            raise ValueError(
                f"indices must be (n, {len(self.shape)}), got {idx.shape}"
            )
        if idx.size:
            if idx.min() < 0 or np.any(idx >= np.asarray(self.shape)):
                raise ValueError("mask index out of bounds")
            order = np.lexsort(idx.T[::-1])
            idx = idx[order]
            if np.any(np.all(idx[1:] == idx[:-1], axis=1)):
                raise ValueError("duplicate indices in mask")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def full(cls, shape: tuple[int, ...]) -> "ObservationMask":
        grids = np.indices(shape).reshape(len(shape), -1).T
        return cls(shape, grids)

    @classmethod
    def empty(cls, shape: tuple[int, ...]) -> "ObservationMask":
        return cls(shape, np.empty((0, len(shape)), dtype=np.intp))

    def __len__(self) -> int:
        return self.indices.shape[0]

    def as_tuple(self) -> tuple[np.ndarray, ...]:
        """Index tuple usable for numpy fancy indexing."""
        return tuple(self.indices.T)

    def indicator(self) -> np.ndarray:
        """Dense 0/1 float array of the mask."""
        out = np.zeros(self.shape)
        out[self.as_tuple()] = 1.0
        return out


def mask_apply(X: np.ndarray, mask: ObservationMask) -> np.ndarray:
    """Keep observed entries of ``X`` and zero out the rest."""
    X = np.asarray(X)
    if X.shape != mask.shape:
        raise ValueError(f"shape mismatch: {X.shape} vs mask {mask.shape}")
    out = np.zeros_like(X, dtype=float)
    ix = mask.as_tuple()
    out[ix] = X[ix]
    return out
