"""Small shared linear-algebra helpers with a fixed sign convention.

Every SVD and QR used in the package goes through these wrappers so that
scores and loadings are reproducible across runs: in each left vector the
entry of largest magnitude is made positive, ties broken by lowest row
index.
"""

from __future__ import annotations

import numpy as np

from .errors import RankDeficient


def fix_signs(left: np.ndarray, right: np.ndarray | None = None) -> None:
    """Flip columns of ``left`` (and paired rows of ``right``) in place.

    ``right`` holds the matching right factors as rows (e.g. Vt from an SVD),
    so products left @ right are unchanged.
    """
    for j in range(left.shape[1]):
        col = left[:, j]
        i = int(np.argmax(np.abs(col)))  # argmax takes the lowest index on ties
        if col[i] < 0:
            left[:, j] = -col
            if right is not None:
                right[j, :] = -right[j, :]


def svd_signed(m: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD with the deterministic sign convention applied."""
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    u = np.ascontiguousarray(u)
    vt = np.ascontiguousarray(vt)
    fix_signs(u, vt)
    return u, s, vt


def qr_signed(m: np.ndarray) -> np.ndarray:
    """Orthonormal basis of col(m) via QR, columns sign-fixed."""
    q, _ = np.linalg.qr(m)
    q = np.ascontiguousarray(q)
    fix_signs(q)
    return q


def leading_left_vectors(x: np.ndarray, r: int) -> np.ndarray:
    """First r left singular vectors of x (sign-fixed)."""
    u, _, _ = svd_signed(x)
    return u[:, :r].copy()


def complete_orthonormal(u_part: np.ndarray, r: int) -> np.ndarray:
    """Deterministically extend ``u_part`` (orthonormal columns) to r columns.

    Standard basis vectors are orthogonalized against the accepted columns in
    index order; near-dependent candidates are skipped.
    """
    n, k = u_part.shape
    if k >= r:
        return u_part[:, :r]
    if r > n:
        raise RankDeficient(f"cannot extend to {r} orthonormal columns in R^{n}")
    cols = [u_part[:, j] for j in range(k)]
    for i in range(n):
        if len(cols) == r:
            break
        v = np.zeros(n)
        v[i] = 1.0
        for _ in range(2):  # two Gram-Schmidt passes for stability
            for c in cols:
                v -= (c @ v) * c
        nrm = np.linalg.norm(v)
        if nrm > 1e-8:
            cols.append(v / nrm)
    if len(cols) < r:
        raise RankDeficient("orthonormal completion failed")
    return np.column_stack(cols)


def aligned_orthonormal(m: np.ndarray, prev_u: np.ndarray, rank_tol: float = 1e-12) -> np.ndarray:
    """Orthonormal U maximizing trace(U^T m), robust to rank deficiency.

    Singular directions below rank_tol * sigma_max do not affect the trace;
    they are filled by a deterministic orthonormal completion so U keeps its
    width. For m == 0 every orthonormal U is optimal and prev_u is returned.
    """
    u, s, vt = svd_signed(m)
    if s[0] <= 0.0:
        return prev_u.copy()
    k = int(np.sum(s > rank_tol * s[0]))
    if k < u.shape[1]:
        u = u.copy()
        u[:, k:] = complete_orthonormal(u[:, :k], u.shape[1])[:, k:]
    return u @ vt


def orthonormal_basis(m: np.ndarray, tol: float) -> np.ndarray:
    """Orthonormal basis of col(m), keeping singular directions above tol.

    ``tol`` is an absolute cutoff on singular values; an empty (n, 0) matrix
    is returned when every singular value falls below it.
    """
    if m.size == 0:
        return np.zeros((m.shape[0], 0))
    u, s, _ = svd_signed(m)
    k = int(np.sum(s > tol))
    return u[:, :k].copy()
