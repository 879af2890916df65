"""scikit-learn compatible wrappers around the functional core."""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.feature_selection import SelectorMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .exceptions import ParameterError
from .factors import extract_type1, extract_type2
from .pca import PcaSpec, fit_pca
from .screening import ScreenSpec, fit_hybrid, fit_screened, fit_sparse_l0
from .selection import CriterionConfig, tune
from .solver import ProblemSpec, SolverConfig, fit
from .thresholding import make_rule

__all__ = [
    "SelectiveReducedRankRegressor",
    "TunedSelectiveReducedRankRegressor",
    "RankConstrainedScreener",
    "SelectivePCA",
]


class _SolverParams:
    """Shared iteration parameters, translated into a SolverConfig."""

    def _solver_config(self):
        return SolverConfig(
            K_inflation=self.K_inflation,
            max_inner=self.max_inner,
            max_outer=self.max_outer,
            tol_obj=self.tol_obj,
            tol_param=self.tol_param,
            S_init=self.init,
            n_starts=self.n_starts,
            seed=0 if self.random_state is None else int(self.random_state),
        )


def _rule(kind, eta, shape):
    kind = "hard-ridge" if kind in ("hardridge", "hr") else kind
    return make_rule(kind, eta=eta if kind == "hard-ridge" else None, shape=shape)


class _CenteredRegressor(RegressorMixin, BaseEstimator):
    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.target_tags.multi_output = True
        return tags

    def _prepare(self, X, y):
        X, y = validate_data(self, X, y, multi_output=True, y_numeric=True, dtype=np.float64)
        self._y_1d = y.ndim == 1
        Y = y.reshape(-1, 1) if self._y_1d else y
        if self.fit_intercept:
            self.x_mean_, self.y_mean_ = X.mean(axis=0), Y.mean(axis=0)
        else:
            self.x_mean_, self.y_mean_ = np.zeros(X.shape[1]), np.zeros(Y.shape[1])
        return X - self.x_mean_, Y - self.y_mean_

    def _store(self, res):
        self.coef_ = res.B
        self.intercept_ = self.y_mean_ - self.x_mean_ @ res.B
        self.loadings_ = res.S
        self.components_ = res.V
        self.support_ = res.support
        self.rank_ = res.rank_achieved
        self.n_iter_ = res.iterations
        self.objective_trace_ = res.objective_trace
        self.converged_ = res.converged
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = validate_data(self, X, dtype=np.float64, reset=False)
        out = X @ self.coef_ + self.intercept_
        return out[:, 0] if self._y_1d else out

    def factors(self, X, kind=2):
        """Factor scores of ``X`` under the fitted coefficients (Type I or II)."""
        check_is_fitted(self, "coef_")
        X = validate_data(self, X, dtype=np.float64, reset=False) - self.x_mean_
        return (extract_type1 if kind == 1 else extract_type2)(X, self.coef_).Z


class SelectiveReducedRankRegressor(_SolverParams, _CenteredRegressor):
    """Reduced-rank regression with row (``mode='selective'``) or entry
    (``mode='sparse'``) thresholding of the factor loadings.

    ``lam`` acts on the loss scaled by ``1 / (2 ||X||_2^2)``.
    """

    def __init__(self, rank=1, lam=0.0, rule="hard", eta=0.0, shape=None, mode="selective", fit_intercept=True,
                 K_inflation=0.0, max_inner=50, max_outer=500, tol_obj=1e-10, tol_param=1e-8, init="rrr",
                 n_starts=1, random_state=0):
        self.rank = rank
        self.lam = lam
        self.rule = rule
        self.eta = eta
        self.shape = shape
        self.mode = mode
        self.fit_intercept = fit_intercept
        self.K_inflation = K_inflation
        self.max_inner = max_inner
        self.max_outer = max_outer
        self.tol_obj = tol_obj
        self.tol_param = tol_param
        self.init = init
        self.n_starts = n_starts
        self.random_state = random_state

    def fit(self, X, y):
        Xc, Yc = self._prepare(X, y)
        problem = ProblemSpec(Xc, Yc, rank=self.rank, lam=self.lam, rule=_rule(self.rule, self.eta, self.shape),
                              mode=self.mode)
        return self._store(fit(problem, self._solver_config()))


class TunedSelectiveReducedRankRegressor(_SolverParams, _CenteredRegressor):
    """Selective reduced-rank regression with ``(lam, rank)`` picked by ``pic`` or ``sfpic``."""

    def __init__(self, criterion="sfpic", sigma=None, A1=None, A2=None, lambda_grid=None, rank_grid=None,
                 rule="hard", eta=0.0, shape=None, mode="selective", fit_intercept=True, K_inflation=0.0,
                 max_inner=50, max_outer=500, tol_obj=1e-10, tol_param=1e-8, init="rrr", n_starts=1,
                 random_state=0):
        self.criterion = criterion
        self.sigma = sigma
        self.A1 = A1
        self.A2 = A2
        self.lambda_grid = lambda_grid
        self.rank_grid = rank_grid
        self.rule = rule
        self.eta = eta
        self.shape = shape
        self.mode = mode
        self.fit_intercept = fit_intercept
        self.K_inflation = K_inflation
        self.max_inner = max_inner
        self.max_outer = max_outer
        self.tol_obj = tol_obj
        self.tol_param = tol_param
        self.init = init
        self.n_starts = n_starts
        self.random_state = random_state

    def fit(self, X, y):
        Xc, Yc = self._prepare(X, y)
        crit = CriterionConfig(kind=self.criterion, sigma=self.sigma, A1=self.A1, A2=self.A2)
        best, rows = tune(Xc, Yc, self.lambda_grid, self.rank_grid, crit, self._solver_config(),
                          rule=_rule(self.rule, self.eta, self.shape), mode=self.mode)
        self.scores_ = [r.as_dict() for r in rows]
        chosen = min((r for r in rows if r.feasible), key=lambda r: r.score)
        self.lam_, self.grid_rank_, self.score_ = chosen.lam, chosen.rank, chosen.score
        return self._store(best)


class RankConstrainedScreener(_SolverParams, SelectorMixin, BaseEstimator):
    """Keep the ``d`` predictors chosen by rank-constrained screening.

    With ``d_elem`` as well the hybrid entry-budget refinement runs on the
    survivors; with only ``d_elem`` the entry-budget fit is used alone.
    """

    def __init__(self, d=None, rank=1, eta=0.0, d_elem=None, progressive=False, alpha=0.01, squeeze=True,
                 fit_intercept=True, K_inflation=0.0, max_inner=50, max_outer=500, tol_obj=1e-10, tol_param=1e-8,
                 init="rrr", n_starts=1, random_state=0):
        self.d = d
        self.rank = rank
        self.eta = eta
        self.d_elem = d_elem
        self.progressive = progressive
        self.alpha = alpha
        self.squeeze = squeeze
        self.fit_intercept = fit_intercept
        self.K_inflation = K_inflation
        self.max_inner = max_inner
        self.max_outer = max_outer
        self.tol_obj = tol_obj
        self.tol_param = tol_param
        self.init = init
        self.n_starts = n_starts
        self.random_state = random_state

    def fit(self, X, y):
        X, y = validate_data(self, X, y, multi_output=True, y_numeric=True, dtype=np.float64)
        Y = y.reshape(-1, 1) if y.ndim == 1 else y
        if self.fit_intercept:
            X, Y = X - X.mean(axis=0), Y - Y.mean(axis=0)
        cfg = self._solver_config()
        if self.d is None and self.d_elem is None:
            raise ParameterError("set d, d_elem or both")
        if self.d is not None and self.d_elem is not None:
            res = fit_hybrid(X, Y, self.d, self.d_elem, self.rank, self.eta, cfg, self.progressive, self.alpha)
        elif self.d is not None:
            spec = ScreenSpec(d=self.d, rank=self.rank, eta=self.eta, progressive=self.progressive,
                              alpha=self.alpha, squeeze=self.squeeze)
            res = fit_screened(X, Y, spec, cfg)
        else:
            res = fit_sparse_l0(X, Y, self.d_elem, self.rank, self.eta, cfg)
        self.result_ = res
        self.support_ = res.support
        self.coef_ = res.B
        return self

    def _get_support_mask(self):
        check_is_fitted(self, "support_")
        mask = np.zeros(self.n_features_in_, dtype=bool)
        mask[self.support_] = True
        return mask


class SelectivePCA(_SolverParams, TransformerMixin, BaseEstimator):
    """Principal components with row- or entry-sparse loadings.

    ``mode=None`` picks the mode from the budgets given (none: ``'selective'``).
    ``components_`` holds the unit-length loading directions (one per row);
    ``transform`` projects centered data onto them.
    """

    def __init__(self, n_components=1, lam=0.0, rule="soft", mode=None, d=None, d_elem=None, eta=0.0,
                 shape=None, center=True, K_inflation=0.0, max_inner=50, max_outer=500, tol_obj=1e-10,
                 tol_param=1e-8, init="rrr", n_starts=1, random_state=0):
        self.n_components = n_components
        self.lam = lam
        self.rule = rule
        self.mode = mode
        self.d = d
        self.d_elem = d_elem
        self.eta = eta
        self.shape = shape
        self.center = center
        self.K_inflation = K_inflation
        self.max_inner = max_inner
        self.max_outer = max_outer
        self.tol_obj = tol_obj
        self.tol_param = tol_param
        self.init = init
        self.n_starts = n_starts
        self.random_state = random_state

    def fit(self, X, y=None):
        X = validate_data(self, X, dtype=np.float64)
        self.mean_ = X.mean(axis=0) if self.center else np.zeros(X.shape[1])
        mode = self.mode
        if mode is None:
            budgets = (self.d is not None, self.d_elem is not None)
            mode = {(True, True): "hybrid", (True, False): "screened", (False, True): "sparse_l0"}.get(
                budgets, "selective")
        spec = PcaSpec(rank=self.n_components, lam=self.lam, rule=_rule(self.rule, self.eta, self.shape),
                       mode=mode, d=self.d, d_elem=self.d_elem, eta=self.eta)
        res = fit_pca(X - self.mean_, spec, self._solver_config())
        norms = np.linalg.norm(res.S, axis=0)
        norms[norms == 0] = 1.0
        self.loadings_ = res.S
        self.components_ = (res.S / norms).T
        self.support_ = res.support
        self.adjusted_variance_ = res.adjusted_variance
        self.sigma_hat_ = res.sigma_hat
        self.objective_trace_ = res.objective_trace
        self.n_iter_ = res.iterations
        return self

    def transform(self, X):
        check_is_fitted(self, "components_")
        X = validate_data(self, X, dtype=np.float64, reset=False)
        return (X - self.mean_) @ self.components_.T

    def inverse_transform(self, Z):
        check_is_fitted(self, "components_")
        return np.asarray(Z) @ self.components_ + self.mean_
