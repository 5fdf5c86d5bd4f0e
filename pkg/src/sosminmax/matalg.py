"""Dense symmetric linear algebra shared by the solvers.

All eigendecompositions go through LAPACK ``syev`` (tridiagonal reduction
followed by implicit QL/QR) so eigenvalues come back ascending and runs are
reproducible.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

DEFAULT_RANK_TOL = 1e-10


class NotPSDError(ValueError):
    """Raised when a matrix that must be PSD has a clearly negative eigenvalue."""


class ConditioningError(ValueError):
    """Raised when a kernel matrix is too close to singular to be used."""


def sym(A, tol=1e-12):
    """Return the symmetric part of ``A`` after checking it is nearly symmetric.

    The check is relative: ``max |A - A'| <= tol * ||A||_F``.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    skew = np.max(np.abs(A - A.T)) if A.size else 0.0
    if skew > tol * max(np.linalg.norm(A), 1e-300):
        raise ValueError(f"matrix is not symmetric (max skew {skew:.3e})")
    return 0.5 * (A + A.T)


def eigh(A):
    """Symmetric eigendecomposition with ascending eigenvalues."""
    return sla.eigh(A, driver="ev")


def inv_sqrt(K, rank_tol=DEFAULT_RANK_TOL):
    """Moore-Penrose inverse square root of a PSD matrix.

    Eigenvalues below ``rank_tol * lambda_max`` are treated as zero, so the
    result ``X`` satisfies ``X K X = projector onto range(K)``.
    """
    K = sym(K, tol=1e-10)
    w, V = eigh(K)
    lmax = max(w[-1], 0.0) if w.size else 0.0
    if w.size and w[0] < -1e-8 * max(lmax, 1.0):
        raise NotPSDError(f"matrix has eigenvalue {w[0]:.3e} < 0")
    keep = w > rank_tol * lmax
    scale = np.zeros_like(w)
    scale[keep] = 1.0 / np.sqrt(w[keep])
    X = (V * scale) @ V.T
    return 0.5 * (X + X.T)


def features_from_gram(L, K, rank_tol=DEFAULT_RANK_TOL):
    """Empirical feature matrix ``Phi = L K^{-1/2}``.

    ``L`` (n, m) holds kernel values between all points and the m anchor
    points whose Gram matrix is ``K``.  Raises if ``K`` is singular, since a
    rank-deficient anchor set cannot represent the feature space.
    """
    K = sym(K, tol=1e-10)
    w = eigh(K)[0]
    if w[0] <= rank_tol * max(w[-1], 1.0):
        raise ConditioningError(
            f"anchor kernel matrix is singular (min eigenvalue {w[0]:.3e})"
        )
    return np.asarray(L, dtype=np.float64) @ inv_sqrt(K, rank_tol)


def empirical_features(sset, pts, m=None):
    """Empirical features of ``pts`` in the basis of its first ``m`` points.

    Row i is phi~(x_i) = K^{-1/2} (k(x_a, x_i))_{a<m}; by construction
    ``Phi @ Phi.T`` reproduces the kernel matrix of ``pts`` whenever the
    first m points span the feature space.
    """
    X = getattr(pts, "points", pts)
    if m is None:
        m = sset.dims()[0]
    if X.shape[0] < m:
        raise ConditioningError(f"need at least {m} points, got {X.shape[0]}")
    L = sset.gram(X, X[:m])
    return features_from_gram(L, L[:m])


def kron(A, B):
    return np.kron(np.asarray(A, dtype=np.float64), np.asarray(B, dtype=np.float64))


def hadamard(A, B):
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch {A.shape} vs {B.shape}")
    return A * B


def min_eig(A):
    A = np.asarray(A, dtype=np.float64)
    if A.size == 0:
        return 0.0
    return float(sla.eigvalsh(0.5 * (A + A.T), driver="ev")[0])


def is_psd(A, tol=1e-9):
    """True when ``lambda_min(A) >= -tol * max(1, lambda_max)``."""
    A = np.asarray(A, dtype=np.float64)
    if A.size == 0:
        return True
    w = sla.eigvalsh(0.5 * (A + A.T), driver="ev")
    return bool(w[0] >= -tol * max(1.0, w[-1]))


def numerical_rank(A, rel_tol=1e-9):
    """Rank of a symmetric PSD matrix, eigenvalues relative to the largest."""
    w = sla.eigvalsh(0.5 * (A + A.T), driver="ev")
    if w.size == 0 or w[-1] <= 0:
        return 0
    return int(np.sum(w > rel_tol * w[-1]))


def svec(A):
    """Stack the upper triangle with off-diagonals scaled by sqrt(2)."""
    n = A.shape[0]
    iu = np.triu_indices(n)
    scale = np.where(iu[0] == iu[1], 1.0, np.sqrt(2.0))
    return A[iu] * scale


def smat(v, n):
    """Inverse of :func:`svec`."""
    iu = np.triu_indices(n)
    scale = np.where(iu[0] == iu[1], 1.0, 1.0 / np.sqrt(2.0))
    A = np.zeros((n, n))
    A[iu] = v * scale
    return A + np.triu(A, 1).T


def svec_basis(n):
    """Symmetric basis matrices matching :func:`svec` ordering, as low-rank factors.

    Yields ``(i, j, U, w)`` with ``E_ij = U diag(w) U'``; diagonal entries are
    rank one and off-diagonal ones rank two.
    """
    r2 = np.sqrt(2.0)
    for i, j in zip(*np.triu_indices(n)):
        if i == j:
            U = np.zeros((n, 1))
            U[i, 0] = 1.0
            yield i, j, U, np.array([1.0])
        else:
            U = np.zeros((n, 2))
            U[i, 0] = U[j, 0] = 1.0
            U[i, 1] = 1.0
            U[j, 1] = -1.0
            yield i, j, U, np.array([0.5 / r2, -0.5 / r2])
