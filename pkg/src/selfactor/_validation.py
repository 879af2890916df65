"""Input validation helpers shared by the functional core and the estimators."""

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import DataError, ParameterError


def as_matrix(A, name="X", allow_empty=False):
    """Return ``A`` as a finite 2-d float64 array, raising DataError otherwise."""
    if A is None:
        raise DataError(f"{name} is required")
    arr = np.asarray(A, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    try:
        arr = check_array(
            arr,
            ensure_2d=True,
            dtype=np.float64,
            ensure_min_samples=0 if allow_empty else 1,
            ensure_min_features=0 if allow_empty else 1,
            input_name=name,
        )
    except ValueError as exc:
        raise DataError(f"{name}: {exc}") from exc
    return arr


def check_pair(X, Y):
    X = as_matrix(X, "X")
    Y = as_matrix(Y, "Y")
    if X.shape[0] != Y.shape[0]:
        raise DataError(
            f"X and Y must share the number of rows, got {X.shape[0]} and {Y.shape[0]}"
        )
    return X, Y


def check_rank(r, p, m):
    if int(r) != r or r < 1:
        raise ParameterError(f"rank must be a positive integer, got {r!r}")
    r = int(r)
    if r > min(p, m):
        raise ParameterError(f"rank {r} exceeds min(p, m) = {min(p, m)}")
    return r


def check_nonnegative(value, name):
    value = float(value)
    if not np.isfinite(value) or value < 0:
        raise ParameterError(f"{name} must be a finite nonnegative number, got {value!r}")
    return value


def check_budget(d, upper, name="d"):
    if int(d) != d or not 1 <= d <= upper:
        raise ParameterError(f"{name} must be an integer in [1, {upper}], got {d!r}")
    return int(d)


def check_gram(G, tol=1e-8):
    """Validate a symmetric positive semidefinite Gram matrix."""
    G = as_matrix(G, "G")
    if G.shape[0] != G.shape[1]:
        raise DataError(f"Gram matrix must be square, got {G.shape}")
    scale = max(1.0, float(np.max(np.abs(np.diag(G)))))
    if np.max(np.abs(G - G.T)) > tol * scale:
        raise DataError("Gram matrix is not symmetric")
    lo = np.linalg.eigvalsh((G + G.T) / 2)[0]
    if lo < -tol * scale:
        raise DataError(f"Gram matrix is not positive semidefinite (min eigenvalue {lo:.3g})")
    return (G + G.T) / 2


def check_random_state(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
