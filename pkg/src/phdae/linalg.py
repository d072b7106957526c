"""Rank-revealing helpers built on the SVD."""

import numpy as np

DEFAULT_RANK_TOL = 1e-11


def rank_threshold(s, shape, tol=DEFAULT_RANK_TOL, scale=None):
    """Singular values at or below this value count as zero.

    The threshold is relative to ``scale`` when given (use it for products
    such as ``A @ N`` whose size should be judged against ``||A||``) and to
    the largest singular value otherwise.
    """
    if len(s) == 0:
        return 0.0
    ref = s[0] if scale is None else max(scale, np.finfo(float).tiny)
    return tol * ref * max(shape)


def numerical_rank(A, tol=DEFAULT_RANK_TOL, scale=None):
    A = np.atleast_2d(A)
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > rank_threshold(s, A.shape, tol, scale)))


def fix_signs(U, V):
    """Flip singular-vector pairs so the first non-negligible entry of each column of V is positive.

    Applied to matching columns of ``U`` and ``V`` so that ``U S V^T`` is unchanged.
    """
    U = U.copy()
    V = V.copy()
    k = min(U.shape[1], V.shape[1])
    for j in range(V.shape[1]):
        col = V[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-12 * max(1.0, np.abs(col).max(initial=0.0)))
        if nz.size and col[nz[0]] < 0:
            V[:, j] = -col
            if j < k:
                U[:, j] = -U[:, j]
    return U, V


def svd_split(A, tol=DEFAULT_RANK_TOL, scale=None):
    """Full SVD ``A = U diag(s) V^T`` with deterministic signs and the numerical rank.

    Returns ``(U, s, V, r)``; columns ``U[:, :r]``/``V[:, :r]`` span range/row space,
    the remaining columns span the left/right null spaces.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    m, n = A.shape
    if A.size == 0:
        return np.eye(m), np.zeros(0), np.eye(n), 0
    U, s, Vt = np.linalg.svd(A)
    r = 0 if s[0] == 0.0 else int(np.sum(s > rank_threshold(s, A.shape, tol, scale)))
    U, V = fix_signs(U, Vt.T)
    return U, s, V, r


def null_space(A, tol=DEFAULT_RANK_TOL, scale=None):
    """Orthonormal basis of the right null space (columns)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    _, _, V, r = svd_split(A, tol, scale)
    return V[:, r:]


def left_null_space(A, tol=DEFAULT_RANK_TOL, scale=None):
    """Orthonormal basis ``Z`` with ``Z.T @ A = 0`` (columns)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    U, _, _, r = svd_split(A, tol, scale)
    return U[:, r:]


def row_space(A, tol=DEFAULT_RANK_TOL, scale=None):
    """Orthonormal basis of the row space, returned as rows."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    _, _, V, r = svd_split(A, tol, scale)
    return V[:, :r].T


def complement(B):
    """Orthonormal basis of the orthogonal complement of the columns of ``B`` (columns)."""
    n = B.shape[0]
    if B.shape[1] == 0:
        return np.eye(n)
    Qf, _ = np.linalg.qr(B, mode="complete")
    return Qf[:, B.shape[1]:]


def sym(A):
    return 0.5 * (A + A.T)


def min_eig_sym(A):
    """Smallest eigenvalue of the symmetric part; +inf for an empty matrix."""
    if A.size == 0:
        return np.inf
    return float(np.linalg.eigvalsh(sym(A))[0])


def norm2(A):
    """Spectral norm, 0 for empty matrices."""
    A = np.atleast_2d(A)
    if A.size == 0:
        return 0.0
    return float(np.linalg.norm(A, 2))
