"""Dense tensor primitives.

A tensor is simply a complex numpy ndarray in row-major (C) order; the
functions here are thin, checked wrappers around numpy/scipy so the rest
of the package has one place for contraction, factorization and the
tridiagonal eigensolver.
"""
from __future__ import annotations

from collections.abc import Sequence

import numpy as np
import scipy.linalg

from .errors import DimensionError, NumericError

Tensor = np.ndarray


def _check_finite(a: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(a)):
        raise NumericError(f"{what} contains non-finite entries")


def contract_pair(a: Tensor, b: Tensor, axes_a: Sequence[int], axes_b: Sequence[int]) -> Tensor:
    """Contract tensor a with tensor b over the given axis pairs.

    The result carries the uncontracted indices of a (in order) followed by
    the uncontracted indices of b.  Axis lists must have equal length and
    matching extents.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    axes_a = list(axes_a)
    axes_b = list(axes_b)
    if len(axes_a) != len(axes_b):
        raise DimensionError(f"axis lists differ in length: {len(axes_a)} vs {len(axes_b)}")
    for ia, ib in zip(axes_a, axes_b):
        if a.shape[ia] != b.shape[ib]:
            raise DimensionError(
                f"contracted extents differ: a.shape[{ia}]={a.shape[ia]}, b.shape[{ib}]={b.shape[ib]}"
            )
    return np.tensordot(a, b, axes=(axes_a, axes_b))


def _matricize(a: Tensor, left_axes: Sequence[int]) -> tuple[np.ndarray, tuple, tuple]:
    """Reshape a into a matrix with `left_axes` grouped as rows."""
    left = list(left_axes)
    right = [ax for ax in range(a.ndim) if ax not in left]
    perm = left + right
    lshape = tuple(a.shape[ax] for ax in left)
    rshape = tuple(a.shape[ax] for ax in right)
    mat = a.transpose(perm).reshape(int(np.prod(lshape, dtype=np.int64)), -1)
    return mat, lshape, rshape


def svd(a: Tensor, left_axes: Sequence[int] | None = None) -> tuple[Tensor, np.ndarray, Tensor]:
    """Thin singular value decomposition a = U @ diag(S) @ V.

    If `left_axes` is given, a is first matricized with those indices as
    rows.  U has orthonormal columns, V orthonormal rows, S is real and
    sorted descending.
    """
    a = np.asarray(a)
    _check_finite(a, "svd input")
    if left_axes is not None:
        a, _, _ = _matricize(a, left_axes)
    elif a.ndim != 2:
        raise DimensionError("svd needs a matrix or an explicit index bipartition")
    try:
        u, s, vh = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError:
        # gesdd occasionally fails to converge; gesvd is slower but sturdier
        u, s, vh = scipy.linalg.svd(a, full_matrices=False, lapack_driver="gesvd")
    return u, s, vh


def qr(a: Tensor) -> tuple[Tensor, Tensor]:
    """Reduced QR factorization of a matrix."""
    a = np.asarray(a)
    if a.ndim != 2:
        raise DimensionError("qr expects a matrix")
    _check_finite(a, "qr input")
    return np.linalg.qr(a, mode="reduced")


def lq(a: Tensor) -> tuple[Tensor, Tensor]:
    """Reduced LQ factorization: a = L @ Q with orthonormal rows of Q."""
    q, r = qr(a.conj().T)
    return r.conj().T, q.conj().T


def symmetric_tridiag_eig(alphas: Sequence[float], betas: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a real symmetric tridiagonal matrix.

    alphas is the diagonal (length K >= 1), betas the off-diagonal
    (length K-1).  Returns ascending eigenvalues and the orthonormal
    eigenvector matrix with eigenvectors as columns.
    """
    alphas = np.asarray(alphas, dtype=float)
    betas = np.asarray(betas, dtype=float)
    if alphas.ndim != 1 or betas.ndim != 1:
        raise DimensionError("alphas and betas must be one-dimensional")
    if alphas.size == 0:
        raise ValueError("empty tridiagonal matrix")
    if betas.size != alphas.size - 1:
        raise DimensionError(f"need len(betas) == len(alphas)-1, got {betas.size} vs {alphas.size}")
    _check_finite(alphas, "tridiagonal diagonal")
    if betas.size:
        _check_finite(betas, "tridiagonal off-diagonal")
    w, v = scipy.linalg.eigh_tridiagonal(alphas, betas)
    return w, v
