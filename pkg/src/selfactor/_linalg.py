"""Dense linear-algebra kernels with deterministic sign conventions."""

import numpy as np
from scipy.linalg import subspace_angles
from scipy.sparse.linalg import LinearOperator, eigsh

_EXACT_NORM_LIMIT = 600


def fix_signs(U, Vt=None):
    """Flip singular-vector pairs so each column of ``U`` has a nonnegative
    largest-magnitude entry (first such entry on ties)."""
    if U.size == 0:
        return (U, Vt) if Vt is not None else U
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    U = U * signs
    if Vt is None:
        return U
    return U, Vt * signs[:, None]


def svd(A, full_matrices=False):
    U, s, Vt = np.linalg.svd(A, full_matrices=full_matrices)
    k = min(U.shape[1], Vt.shape[0])
    Uk, Vk = fix_signs(U[:, :k], Vt[:k])
    U = np.concatenate([Uk, fix_signs(U[:, k:])], axis=1) if U.shape[1] > k else Uk
    Vt = np.concatenate([Vk, Vt[k:]], axis=0) if Vt.shape[0] > k else Vk
    return U, s, Vt


def top_eigh(A, r):
    """Top ``r`` eigenpairs of a symmetric matrix, descending, signs fixed."""
    w, Q = np.linalg.eigh((A + A.T) / 2)
    order = np.argsort(-w, kind="stable")[:r]
    return w[order], fix_signs(Q[:, order])


def spectral_norm_sq(X):
    """Largest squared singular value of ``X``."""
    X = np.asarray(X, dtype=float)
    if X.size == 0 or not np.any(X):
        return 0.0
    if min(X.shape) <= _EXACT_NORM_LIMIT:
        return float(np.linalg.norm(X, 2) ** 2)
    n, p = X.shape
    if p <= n:
        op = LinearOperator((p, p), matvec=lambda v: X.T @ (X @ v), dtype=float)
        dim = p
    else:
        op = LinearOperator((n, n), matvec=lambda v: X @ (X.T @ v), dtype=float)
        dim = n
    v0 = np.ones(dim) / np.sqrt(dim)
    w = eigsh(op, k=1, which="LA", v0=v0, tol=1e-14, return_eigenvectors=False)
    return float(w[0])


def polar(W, fallback=None, tol=0.0):
    """Orthonormal factor ``U V^T`` of ``W`` (the Procrustes maximiser of <W, V>).

    A zero ``W`` returns ``fallback`` unchanged.
    """
    if not np.any(W) or np.linalg.norm(W) <= tol:
        return fallback
    if W.shape[1] == 1:
        return W / np.linalg.norm(W)
    U, _, Vt = svd(W)
    return U @ Vt


def numerical_rank(A, tol=1e-10):
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > tol * s[0]))


def max_principal_angle(A, B):
    """Largest principal angle (radians) between the column spans of ``A`` and ``B``."""
    return float(np.max(subspace_angles(A, B)))


def inv_sqrt_psd(M, tol=1e-12):
    """Pseudo inverse square root of a symmetric PSD matrix."""
    w, Q = np.linalg.eigh((M + M.T) / 2)
    cut = tol * max(float(w[-1]), 0.0)
    inv = np.zeros_like(w)
    good = w > cut
    inv[good] = 1.0 / np.sqrt(w[good])
    return (Q * inv) @ Q.T, int(np.sum(good))
