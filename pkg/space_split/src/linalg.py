"""
Small dense linear algebra for the frame recursion.

Every routine accepts arbitrary leading batch dimensions, so a stack of
independent chains is factorized in one call. The unstable dimension m is
small (1-8); the Gram-Schmidt loops run over m, never over the batch or the state.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NonFinite, RankDeficient, Singular

RANK_TOL = 1e-13
SINGULAR_TOL = 1e-13


@dataclass(frozen=True)
class QrPair:
    """Thin QR factors: q is (..., n, m) orthonormal, r is (..., m, m) upper-triangular, diag > 0."""

    q: np.ndarray
    r: np.ndarray


def check_finite(array, where):
    """Raise NonFinite if ``array`` holds NaN or Inf."""
    if not np.all(np.isfinite(array)):
        raise NonFinite(where)
    return array


def qr_positive(a):
    """
    Factorize a = q r with modified Gram-Schmidt plus one reorthogonalization pass.

    Normalizing each column by its norm makes every diagonal entry of r
    positive, which fixes the otherwise free column signs and makes the
    factorization unique.

    Args:
        a (ndarray): (..., n, m) with m <= n.

    Returns:
        QrPair: the factors.

    Raises:
        RankDeficient: if some diagonal of r falls below 1e-13 * ||a||_F.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim < 2:
        raise ValueError(f"qr_positive expects a matrix, got shape {a.shape}")
    n, m = a.shape[-2:]
    if m > n:
        raise ValueError(f"qr_positive needs m <= n, got {n}x{m}")
    check_finite(a, "qr_positive input")

    q = a.copy()
    r = np.zeros(a.shape[:-2] + (m, m))
    threshold = RANK_TOL * np.linalg.norm(a, axis=(-2, -1))
    for j in range(m):
        v = q[..., :, j]
        for _ in range(2):
            for i in range(j):
                qi = q[..., :, i]
                proj = np.sum(qi * v, axis=-1)
                v = v - proj[..., None] * qi
                r[..., i, j] += proj
        norm = np.linalg.norm(v, axis=-1)
        if np.any(norm <= threshold):
            worst = np.argmin(norm - threshold)
            raise RankDeficient(np.ravel(norm)[worst], np.ravel(threshold)[worst])
        r[..., j, j] = norm
        q[..., :, j] = v / norm[..., None]
    return QrPair(q=q, r=r)


def upper_tri_inverse(r):
    """
    Invert an upper-triangular (..., m, m) matrix by back substitution.

    Row i of the inverse is (e_i - r[i, i+1:] @ inv[i+1:, :]) / r_ii, solved
    from the last row up for the whole batch at once. Entries below the
    diagonal of the result are structural zeros.

    Raises:
        Singular: if any |r_ii| <= 1e-13.
    """
    r = np.asarray(r, dtype=float)
    m = r.shape[-1]
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    if np.any(np.abs(diag) <= SINGULAR_TOL):
        raise Singular(np.min(np.abs(diag)))
    inv = np.zeros(r.shape)
    eye = np.eye(m)
    for i in range(m - 1, -1, -1):
        rhs = eye[i] - np.einsum("...j,...jk->...k", r[..., i, i + 1 :], inv[..., i + 1 :, :])
        inv[..., i, :] = rhs / diag[..., i, None]
    return np.triu(inv)


@lru_cache(maxsize=None)
def symmetric_index(m):
    """Row/column indices (i, j), i >= j, of the packed symmetric storage, row-major."""
    rows, cols = np.tril_indices(m)
    rows.setflags(write=False)
    cols.setflags(write=False)
    return rows, cols


def packed_size(m):
    return m * (m + 1) // 2


def unpack_symmetric(packed, m):
    """Expand (..., m(m+1)/2, n) packed vectors to the full symmetric (..., m, m, n) array."""
    packed = np.asarray(packed, dtype=float)
    rows, cols = symmetric_index(m)
    full = np.empty(packed.shape[:-2] + (m, m, packed.shape[-1]))
    full[..., rows, cols, :] = packed
    full[..., cols, rows, :] = packed
    return full


def pack_symmetric(full):
    """Keep the i >= j entries of a (..., m, m, n) array."""
    rows, cols = symmetric_index(full.shape[-3])
    return full[..., rows, cols, :]


def congruence_rescale(a_tilde, r_inv):
    """
    Apply the double contraction a^{ij} = a~^{pq} (R^-1)^{pi} (R^-1)^{qj}.

    Component by component this is (R^-1)^T A~^s (R^-1) for the m x m matrix
    A~^s collecting component s of every vector, so the cost is n small
    matrix products.

    Args:
        a_tilde (ndarray): packed (..., m(m+1)/2, n) vectors, i >= j.
        r_inv (ndarray): (..., m, m).

    Returns:
        ndarray: packed (..., m(m+1)/2, n), symmetric by storage.
    """
    r_inv = np.asarray(r_inv, dtype=float)
    m = r_inv.shape[-1]
    full = unpack_symmetric(a_tilde, m)
    rescaled = np.einsum("...pqs,...pi,...qj->...ijs", full, r_inv, r_inv)
    return pack_symmetric(rescaled)
