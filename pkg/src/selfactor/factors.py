"""Factor extraction from a fitted coefficient matrix, the robust augmented design,
and a rolling-window forecast harness."""

from dataclasses import dataclass

import numpy as np

from . import _linalg
from ._validation import as_matrix, check_pair
from .exceptions import DataError, NumericError, ParameterError

__all__ = [
    "FactorSet",
    "extract_type1",
    "extract_type2",
    "extract_type1_qr",
    "extract_type2_qr",
    "augment_design",
    "AugmentedDesign",
    "lagged_design",
    "RollingResult",
    "rolling_forecast",
    "ar_fitter",
    "rrr_fitter",
    "srrr_fitter",
]

TOL_RANK = 1e-10


@dataclass(frozen=True)
class FactorSet:
    Z: np.ndarray
    loadings: np.ndarray
    selected_vars: np.ndarray
    type: str

    @property
    def n_factors(self):
        return self.Z.shape[1]


def _selected(B):
    return np.flatnonzero(np.any(B != 0, axis=1))


def _truncate(s, tol=TOL_RANK):
    if s.size == 0 or s[0] <= 0:
        return 0
    return int(np.sum(s > tol * s[0]))


def extract_type1(X, B_hat):
    """Factors from the SVD ``B = U D V^T``: scores ``X U D``, loadings ``U D``.

    ``U D`` is formed as ``B V`` so rows of ``B`` that are exactly zero stay zero.
    """
    X = as_matrix(X, "X")
    B = as_matrix(B_hat, "B_hat")
    if not np.any(B):
        raise NumericError("B_hat is zero; there are no factors to extract")
    _, s, Vt = _linalg.svd(B)
    k = _truncate(s)
    loadings = B @ Vt[:k].T
    return FactorSet(X @ loadings, loadings, _selected(B), "I")


def extract_type2(X, B_hat):
    """Uncorrelated factors from the spectral decomposition of ``B^T X^T X B``.

    The eigenvectors ``V`` are the right singular vectors of ``X B``, so the
    scores ``X B V`` come out as ``U D`` with ``Z^T Z = D^2``; loadings are ``B V``.
    """
    X = as_matrix(X, "X")
    B = as_matrix(B_hat, "B_hat")
    XB = X @ B
    if not np.any(XB):
        raise NumericError("X B_hat is zero; there are no factors to extract")
    U, s, Wt = _linalg.svd(XB)
    k = _truncate(s)
    return FactorSet(U[:, :k] * s[:k], B @ Wt[:k].T, _selected(B), "II")


def extract_type1_qr(X, B_hat):
    """Type-I factors via a QR of ``B``; only the small triangular factor is decomposed.

    With ``B = Q R`` and ``R = U_r D W^T`` the right singular vectors of ``B`` are ``W``.
    """
    X = as_matrix(X, "X")
    B = as_matrix(B_hat, "B_hat")
    if not np.any(B):
        raise NumericError("B_hat is zero; there are no factors to extract")
    _, R = np.linalg.qr(B)
    _, s, Wt = _linalg.svd(R)
    k = _truncate(s)
    loadings = B @ Wt[:k].T
    return FactorSet(X @ loadings, loadings, _selected(B), "I")


def extract_type2_qr(X, B_hat):
    """Type-II factors via a QR of ``X B`` instead of forming ``B^T X^T X B``."""
    X = as_matrix(X, "X")
    B = as_matrix(B_hat, "B_hat")
    XB = X @ B
    if not np.any(XB):
        raise NumericError("X B_hat is zero; there are no factors to extract")
    Q, R = np.linalg.qr(XB)
    Ur, s, Wt = _linalg.svd(R)
    k = _truncate(s)
    return FactorSet(Q @ Ur[:, :k] * s[:k], B @ Wt[:k].T, _selected(B), "II")


@dataclass(frozen=True)
class AugmentedDesign:
    X_bar: np.ndarray
    n_predictors: int

    def is_indicator(self, j):
        return np.asarray(j) >= self.n_predictors

    def outlier_rows(self, support):
        """Rows flagged by selected case-indicator columns."""
        support = np.asarray(support, dtype=int)
        return support[support >= self.n_predictors] - self.n_predictors

    def predictor_support(self, support):
        support = np.asarray(support, dtype=int)
        return support[support < self.n_predictors]


def augment_design(X):
    """``[X I_n]``: each observation gets its own indicator column."""
    X = as_matrix(X, "X")
    n, p = X.shape
    return AugmentedDesign(np.hstack([X, np.eye(n)]), p)


def lagged_design(series, lags, horizon=1, responses=None):
    """Direct ``horizon``-step design from a ``T x k`` series.

    Row ``i`` of the response block is ``series[t + horizon]`` and its predictors are
    ``series[t], series[t-1], ..., series[t-lags+1]`` for ``t = lags - 1 + i``.
    Returns ``(Y, X, origins)`` where ``origins`` are the ``t`` values.
    """
    Z = as_matrix(series, "series")
    if int(lags) != lags or lags < 1:
        raise ParameterError(f"lags must be a positive integer, got {lags!r}")
    if int(horizon) != horizon or horizon < 1:
        raise ParameterError(f"horizon must be a positive integer, got {horizon!r}")
    T = Z.shape[0]
    rows = T - lags - horizon + 1
    if rows < 1:
        raise DataError(f"{T} rows cannot support {lags} lags at horizon {horizon}")
    origins = np.arange(lags - 1, lags - 1 + rows)
    X = np.hstack([Z[origins - l] for l in range(lags)])
    target = Z if responses is None else Z[:, responses]
    return target[origins + horizon], X, origins


@dataclass(frozen=True)
class RollingResult:
    mse: np.ndarray
    n_folds: int
    squared_errors: np.ndarray
    origins: np.ndarray


def rolling_forecast(series, window, fitter, horizon=1, lags=1, responses=None, presample=None):
    """Rolling-origin evaluation with a moving fixed-length estimation window.

    The first ``presample`` rows are never forecast targets; the default
    ``lags + horizon - 1`` is the minimum the lagged design consumes, and larger
    values shift the first estimation window later.  The fold count is
    ``T - presample - window - horizon + 1``.  At each origin ``t`` the model
    is fit on the ``window`` design rows ending at ``t`` whose targets are already
    observed, and row ``t + horizon`` is forecast.  ``fitter(X, Y)`` returns a
    callable mapping predictor rows to forecasts.
    """
    Z = as_matrix(series, "series")
    used = lags + horizon - 1
    presample = used if presample is None else int(presample)
    if presample < used:
        raise ParameterError(f"presample must be at least lags + horizon - 1 = {used}")
    Y_all, X_all, origins = lagged_design(Z, lags, horizon, responses)
    # keep origins that leave the configured presample rows untouched
    start = presample - used
    Y_all, X_all, origins = Y_all[start:], X_all[start:], origins[start:]
    n = Y_all.shape[0]
    if int(window) != window or window < 1:
        raise ParameterError(f"window must be a positive integer, got {window!r}")
    if window >= n:
        raise DataError(f"window {window} leaves no forecast origins (only {n} usable rows)")
    errors = []
    fold_origins = []
    for i in range(window + horizon - 1, n):
        # training targets must be observed by the forecast origin
        hi = i - horizon + 1
        lo = hi - window
        predict = fitter(X_all[lo:hi], Y_all[lo:hi])
        yhat = np.asarray(predict(X_all[i : i + 1]), dtype=float).reshape(1, -1)
        errors.append((Y_all[i] - yhat[0]) ** 2)
        fold_origins.append(origins[i])
    errors = np.array(errors)
    return RollingResult(errors.mean(axis=0), len(errors), errors, np.array(fold_origins))


def _with_intercept(fit_centered):
    """Center inside the window, fit, and add the means back at prediction time."""

    def fitter(X, Y):
        X, Y = check_pair(X, Y)
        mx, my = X.mean(axis=0), Y.mean(axis=0)
        B = fit_centered(X - mx, Y - my)

        def predict(Xn):
            return (np.asarray(Xn, dtype=float) - mx) @ B + my

        return predict

    return fitter


def ar_fitter(per_series=True):
    """Least squares on the lagged design; with ``per_series`` each response only
    uses its own lags (a univariate autoregression per series)."""

    def fit_centered(X, Y):
        if not per_series:
            return np.linalg.lstsq(X, Y, rcond=None)[0]
        m = Y.shape[1]
        k = X.shape[1]
        if k % m:
            raise ParameterError("per-series autoregression needs the responses to be the lagged series")
        B = np.zeros((k, m))
        for j in range(m):
            cols = np.arange(j, k, m)
            B[cols, j] = np.linalg.lstsq(X[:, cols], Y[:, j], rcond=None)[0]
        return B

    return _with_intercept(fit_centered)


def rrr_fitter(rank):
    from .solver import rrr_closed_form

    def fit_centered(X, Y):
        return rrr_closed_form(X, Y, min(rank, X.shape[1], Y.shape[1]))

    return _with_intercept(fit_centered)


def srrr_fitter(rank, lam=None, rule="hard", criterion=None, config=None, lambda_grid=None):
    """Selective reduced-rank fit; ``lam=None`` tunes lambda by the criterion."""
    from .selection import CriterionConfig, tune
    from .solver import ProblemSpec, SolverConfig, fit

    config = config or SolverConfig(max_outer=200)

    def fit_centered(X, Y):
        r = min(rank, X.shape[1], Y.shape[1])
        if lam is not None:
            return fit(ProblemSpec(X, Y, rank=r, lam=lam, rule=rule), config).B
        best, _ = tune(X, Y, lambda_grid, [r], criterion or CriterionConfig(), config, rule=rule)
        return best.B

    return _with_intercept(fit_centered)
