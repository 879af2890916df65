"""Model complexity, predictive information criteria and grid tuning.

The complexity of a coefficient matrix with ``J`` nonzero rows and rank ``r`` is::

    P_o = sigma^2 * ((min(q, J) + m - r) * r + J * log(e * p / J))

with ``q = rank(X)``; the empty model scores zero.  ``pic`` adds a weighted
version of it to the residual sum of squares.  ``sfpic`` divides the residual
sum of squares by ``m n`` minus the weighted complexity and needs no ``sigma``.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _linalg
from ._validation import check_pair
from .exceptions import InfeasibleCriterion, ParameterError
from .solver import ProblemSpec, SolverConfig, fit, spectral_norm_sq

__all__ = [
    "ComplexityScore",
    "CriterionConfig",
    "ScoreRow",
    "complexity",
    "pic_score",
    "sfpic_score",
    "support_and_rank",
    "default_lambda_grid",
    "estimate_sigma",
    "tune",
]

_DEFAULT_A1 = {"pic": 2.4, "sfpic": 2.0}
_DEFAULT_A2 = 1.8


@dataclass(frozen=True)
class ComplexityScore:
    J: int
    r: int
    q: int
    df: float
    inflation: float
    P_o: float


@dataclass(frozen=True)
class CriterionConfig:
    kind: str = "sfpic"
    sigma: float | str | None = None
    A1: float | None = None
    A2: float | None = None

    def __post_init__(self):
        if self.kind not in _DEFAULT_A1:
            raise ParameterError(f"criterion must be 'pic' or 'sfpic', got {self.kind!r}")
        if self.A1 is None:
            object.__setattr__(self, "A1", _DEFAULT_A1[self.kind])
        if self.A2 is None:
            object.__setattr__(self, "A2", _DEFAULT_A2)
        if self.A1 < 0 or self.A2 < 0:
            raise ParameterError("criterion weights must be nonnegative")
        if self.kind == "sfpic" and self.sigma is not None:
            raise ParameterError("sfpic does not use sigma; leave it unset")
        if isinstance(self.sigma, str) and self.sigma != "estimate":
            raise ParameterError(f"sigma must be a positive number or 'estimate', got {self.sigma!r}")
        if isinstance(self.sigma, (int, float)) and not self.sigma > 0:
            raise ParameterError(f"sigma must be positive, got {self.sigma!r}")


def support_and_rank(B, tol_rank=1e-10):
    """Number of nonzero rows and numerical rank of ``B``."""
    B = np.atleast_2d(np.asarray(B, dtype=float))
    J = int(np.count_nonzero(np.any(B != 0, axis=1)))
    if J == 0:
        return 0, 0
    return J, _linalg.numerical_rank(B, tol_rank)


def complexity(B=None, q=None, m=None, p=None, sigma=1.0, J=None, r=None, tol_rank=1e-10):
    """Complexity penalty from a matrix ``B`` (p x m) or from an explicit ``(J, r)`` pair."""
    if B is not None:
        B = np.atleast_2d(np.asarray(B, dtype=float))
        p = B.shape[0] if p is None else p
        m = B.shape[1] if m is None else m
        J, r = support_and_rank(B, tol_rank)
    if None in (J, r, q, m, p):
        raise ParameterError("complexity needs B or (J, r), plus q, m and p")
    J, r, q, m, p = int(J), int(r), int(q), int(m), int(p)
    if not 0 <= J <= p:
        raise ParameterError(f"J must lie in [0, {p}], got {J}")
    if J == 0:
        if r:
            raise ParameterError("a model with no rows cannot have positive rank")
        return ComplexityScore(0, 0, q, 0.0, 0.0, 0.0)
    if not 0 <= r <= min(J, m):
        raise ParameterError(f"rank {r} exceeds min(J, m) = {min(J, m)}")
    df = float((min(q, J) + m - r) * r)
    inflation = J * math.log(math.e * p / J)
    return ComplexityScore(J, r, q, df, inflation, float(sigma) ** 2 * (df + inflation))


def _rss(Y, X, B):
    R = Y - X @ B
    return float(np.sum(R * R))


def estimate_sigma(X, Y):
    """Noise scale from least-squares residuals, median over responses.

    Falls back to the raw responses when ``X`` leaves no residual degrees of freedom.
    """
    X, Y = check_pair(X, Y)
    n = X.shape[0]
    q = _linalg.numerical_rank(X)
    if n > q:
        E = Y - X @ (np.linalg.pinv(X) @ Y)
        return float(np.sqrt(np.median(np.sum(E * E, axis=0) / (n - q))))
    return float(np.sqrt(np.median(np.sum(Y * Y, axis=0) / n)))


def _resolve_sigma(config, X, Y):
    if config.sigma is None:
        raise ParameterError("pic needs sigma; pass a value or sigma='estimate'")
    if config.sigma == "estimate":
        return estimate_sigma(X, Y)
    return float(config.sigma)


def pic_score(Y, X, B, config, q=None, sigma=None):
    """Residual sum of squares plus ``sigma^2 (A1 df + A2 inflation)``."""
    if config.kind != "pic":
        raise ParameterError("pic_score needs a pic criterion")
    X, Y = check_pair(X, Y)
    sigma = _resolve_sigma(config, X, Y) if sigma is None else sigma
    q = _linalg.numerical_rank(X) if q is None else q
    c = complexity(B, q=q, m=Y.shape[1], p=X.shape[1])
    return _rss(Y, X, B) + sigma**2 * (config.A1 * c.df + config.A2 * c.inflation)


def sfpic_score(Y, X, B, config, q=None, strict=True):
    """Residual sum of squares over ``m n - A1 df - A2 inflation``.

    A nonpositive denominator is infeasible: ``InfeasibleCriterion`` when
    ``strict``, otherwise ``inf``.
    """
    if config.kind != "sfpic":
        raise ParameterError("sfpic_score needs an sfpic criterion")
    X, Y = check_pair(X, Y)
    q = _linalg.numerical_rank(X) if q is None else q
    n, m = Y.shape
    c = complexity(B, q=q, m=m, p=X.shape[1])
    denom = m * n - config.A1 * c.df - config.A2 * c.inflation
    if denom <= 0:
        if strict:
            raise InfeasibleCriterion(f"complexity exceeds the data budget (denominator {denom:.4g})")
        return math.inf
    return _rss(Y, X, B) / denom


def default_lambda_grid(X, Y, n_values=50, ratio=1e-3, K=None):
    """Geometric grid from the smallest all-zero threshold down by ``ratio``."""
    X, Y = check_pair(X, Y)
    K = spectral_norm_sq(X) if K is None else K
    if K == 0:
        return np.zeros(1)
    lam_max = float(np.max(np.linalg.norm(X.T @ Y, axis=1))) / K
    return np.geomspace(lam_max, lam_max * ratio, n_values)


@dataclass(frozen=True)
class ScoreRow:
    lam: float
    rank: int
    J: int
    r: int
    df: float
    inflation: float
    rss: float
    score: float
    feasible: bool
    objective: float
    converged: bool

    def as_dict(self):
        return dict(self.__dict__)


def tune(
    X,
    Y,
    lambda_grid=None,
    rank_grid=None,
    criterion=None,
    config=None,
    rule="hard",
    mode="selective",
    fitter=None,
):
    """Fit every (lambda, rank) cell and return ``(best_fit, rows)``.

    Within a rank, lambdas are visited from largest to smallest and each fit
    also tries the previous solution as a start.  ``fitter(X, Y, lam, rank,
    config)`` may replace the default solver call, e.g. to tune a row budget.
    Rows come back in grid order (ranks outer, lambdas as given).
    """
    X, Y = check_pair(X, Y)
    criterion = criterion or CriterionConfig()
    config = config or SolverConfig()
    p, m = X.shape[1], Y.shape[1]
    lambda_grid = default_lambda_grid(X, Y) if lambda_grid is None else np.asarray(lambda_grid, dtype=float)
    rank_grid = list(range(1, min(p, m) + 1)) if rank_grid is None else list(rank_grid)
    if lambda_grid.size == 0 or not rank_grid:
        raise ParameterError("lambda and rank grids must be nonempty")
    q = _linalg.numerical_rank(X)
    sigma = _resolve_sigma(criterion, X, Y) if criterion.kind == "pic" else None
    n = X.shape[0]

    def default_fitter(X, Y, lam, rank, cfg):
        return fit(ProblemSpec(X, Y, rank=rank, lam=lam, rule=rule, mode=mode), cfg)

    fitter = fitter or default_fitter
    order = np.argsort(-lambda_grid, kind="stable")
    cells = {}
    for rank in rank_grid:
        warm = None
        for i in order:
            lam = float(lambda_grid[i])
            res = fitter(X, Y, lam, rank, config)
            if warm is not None and np.any(warm):
                alt = fitter(X, Y, lam, rank, replace(config, S_init=warm, n_starts=1))
                if alt.objective < res.objective:
                    res = alt
            warm = res.S
            cells[(rank, i)] = res
    rows = []
    best = best_score = None
    for rank in rank_grid:
        for i, lam in enumerate(lambda_grid):
            res = cells[(rank, i)]
            c = complexity(res.B, q=q, m=m, p=p)
            rss = _rss(Y, X, res.B)
            if criterion.kind == "pic":
                score = rss + sigma**2 * (criterion.A1 * c.df + criterion.A2 * c.inflation)
                feasible = True
            else:
                denom = m * n - criterion.A1 * c.df - criterion.A2 * c.inflation
                feasible = denom > 0
                score = rss / denom if feasible else math.inf
            rows.append(ScoreRow(float(lam), int(rank), c.J, c.r, c.df, c.inflation, rss, score, feasible,
                                 res.objective, bool(res.converged)))
            if feasible and (best_score is None or score < best_score):
                best, best_score = res, score
    if best is None:
        raise InfeasibleCriterion(
            "every grid cell is infeasible under sfpic; widen the lambda grid toward sparser models "
            "or use pic with an estimated sigma"
        )
    return best, rows
