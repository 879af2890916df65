"""Monte Carlo checks of prediction-error rates.

Each grid cell ``(n, p, m, J, r, sigma)`` is simulated over several seeds and
fitted; the record keeps the prediction error ``||X B_hat - X B*||_F^2`` next to
two benchmarks, the complexity ``P_o(B*) / sigma^2`` and the plain rate
``(J + m - r) r + J log p``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ParameterError
from .oracle import simulate_instance
from .selection import CriterionConfig, complexity, tune
from .solver import ProblemSpec, SolverConfig, fit, spectral_norm_sq

__all__ = ["GridCell", "RateRecord", "RateExperiment", "rate_experiment", "theory_lambda", "plain_rate"]


@dataclass(frozen=True)
class GridCell:
    n: int
    p: int
    m: int
    J: int
    r: int
    sigma: float = 1.0
    snr: float = 1.0


@dataclass(frozen=True)
class RateRecord:
    cell: GridCell
    seed: int
    estimator: str
    error: float
    benchmark: float
    rate: float

    @property
    def ratio(self):
        return self.error / (self.cell.sigma**2 * self.benchmark) if self.cell.sigma > 0 else 0.0


@dataclass
class RateExperiment:
    records: list = field(default_factory=list)

    def cells(self):
        seen = []
        for rec in self.records:
            if rec.cell not in seen:
                seen.append(rec.cell)
        return seen

    def median_error(self, cell, estimator=None):
        vals = [r.error for r in self.records if r.cell == cell and (estimator is None or r.estimator == estimator)]
        return float(np.median(vals))

    def median_ratio(self, cell, estimator=None):
        vals = [r.ratio for r in self.records if r.cell == cell and (estimator is None or r.estimator == estimator)]
        return float(np.median(vals))

    def rate_fit(self, estimator):
        """Least-squares line of median error on the plain rate: ``(slope, intercept, R^2)``."""
        cells = self.cells()
        x = np.array([plain_rate(c) for c in cells])
        y = np.array([self.median_error(c, estimator) for c in cells])
        slope, intercept = np.polyfit(x, y, 1)
        resid = y - (slope * x + intercept)
        tss = float(np.sum((y - y.mean()) ** 2))
        r2 = 1.0 - float(np.sum(resid**2)) / tss if tss > 0 else 1.0
        return float(slope), float(intercept), r2

    def as_rows(self):
        return [
            dict(n=r.cell.n, p=r.cell.p, m=r.cell.m, J=r.cell.J, r=r.cell.r, sigma=r.cell.sigma, snr=r.cell.snr,
                 seed=r.seed, estimator=r.estimator, error=r.error, benchmark=r.benchmark, rate=r.rate,
                 ratio=r.ratio)
            for r in self.records
        ]


def plain_rate(cell):
    return (cell.J + cell.m - cell.r) * cell.r + cell.J * math.log(cell.p)


def theory_lambda(sigma, r, p, K, A=1.0):
    """Row threshold ``A sigma sqrt(r + log p)`` expressed on the ``1/K``-scaled loss."""
    return A * sigma * math.sqrt(r + math.log(p)) / math.sqrt(K)


def _fit(X, Y, cell, estimator, criterion, A, rule, config, rank_grid):
    m, p = Y.shape[1], X.shape[1]
    rank = cell.r if estimator == "selective" else min(p, m)
    if criterion is None:
        lam = theory_lambda(cell.sigma, rank, p, spectral_norm_sq(X), A)
        return fit(ProblemSpec(X, Y, rank=rank, lam=lam, rule=rule), config).B
    ranks = rank_grid if estimator == "selective" and rank_grid is not None else [rank]
    best, _ = tune(X, Y, None, ranks, criterion, config, rule=rule)
    return best.B


def rate_experiment(grid, seeds=range(10), estimators=("selective", "group"), criterion=None, A=1.0,
                    rule="hard", config=None, rank_grid=None):
    """Simulate and fit every cell, seed and estimator.

    ``'selective'`` fits at the true rank, ``'group'`` is the full-rank
    row-selection baseline.  With ``criterion=None`` lambda follows
    :func:`theory_lambda`; otherwise it is tuned by the given criterion.
    """
    config = config or SolverConfig(max_outer=300)
    if isinstance(criterion, str):
        criterion = CriterionConfig(kind=criterion, sigma="estimate" if criterion == "pic" else None)
    exp = RateExperiment()
    for cell in grid:
        if not isinstance(cell, GridCell):
            cell = GridCell(*cell)
        for est in estimators:
            if est not in ("selective", "group"):
                raise ParameterError(f"unknown estimator {est!r}")
        for seed in seeds:
            X, Y, B_star = simulate_instance(cell.n, cell.p, cell.m, cell.J, cell.r, cell.sigma, cell.snr, seed)
            q = np.linalg.matrix_rank(X)
            # sigma-free complexity, so the ratio reads in units of the noise variance
            bench = complexity(B_star, q=q, m=cell.m, p=cell.p).P_o
            for est in estimators:
                error = _error(X, _fit(X, Y, cell, est, criterion, A, rule, config, rank_grid), B_star)
                exp.records.append(RateRecord(cell, int(seed), est, error, bench, plain_rate(cell)))
    return exp


def _error(X, B_hat, B_star):
    D = X @ (B_hat - B_star)
    return float(np.sum(D * D))
