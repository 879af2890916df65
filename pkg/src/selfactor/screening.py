"""Rank-constrained variable screening and its entry-budget and hybrid variants.

Screening solves::

    min ||Y - X B||_F^2 / (2K) + eta ||B||_F^2 / 2
    s.t. at most d nonzero rows in B, rank(B) <= r

by swapping the thresholding step of the solver for quantile thresholding.  A
progressive budget schedule and data squeezing (physically dropping eliminated
columns) make very wide problems cheap.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from ._validation import check_budget, check_nonnegative, check_pair, check_random_state, check_rank
from .exceptions import ParameterError
from .solver import (
    FitResult,
    SolverConfig,
    _best_of,
    _pack,
    _zero_design_result,
    quantile_entry_step,
    quantile_row_step,
    step_constant,
)
from .thresholding import quantile_threshold_entries, quantile_threshold_rows

__all__ = [
    "ScreenSpec",
    "ScreenResult",
    "progressive_schedule",
    "squeeze",
    "fit_screened",
    "fit_sparse_l0",
    "fit_hybrid",
]


@dataclass(frozen=True)
class ScreenSpec:
    d: int
    rank: int = 1
    eta: float = 0.0
    d_elem: int | None = None
    alpha: float = 0.01
    progressive: bool = False
    squeeze: bool = True

    def __post_init__(self):
        check_nonnegative(self.eta, "eta")
        if not self.alpha > 0:
            raise ParameterError(f"alpha must be positive, got {self.alpha!r}")
        if self.d_elem is not None and not self.d <= self.d_elem <= self.d * self.rank:
            raise ParameterError(
                f"hybrid budgets need d <= d_elem <= d * rank, got d={self.d}, d_elem={self.d_elem}, rank={self.rank}"
            )


@dataclass(frozen=True)
class ScreenResult(FitResult):
    surviving_index_map: np.ndarray = None
    schedule_trace: tuple = ()
    squeeze_events: tuple = ()
    degenerate: bool = False


def progressive_schedule(p, d, alpha=0.01):
    """Budgets ``round(2p / (1 + exp(alpha t)))`` decreasing from ``p`` to ``d``."""
    p, d = int(p), int(d)
    if d >= p:
        return [d]
    if not alpha > 0:
        raise ParameterError(f"alpha must be positive, got {alpha!r}")
    t_end = math.ceil(math.log(2 * p / d - 1) / alpha)
    q = [int(round(2 * p / (1 + math.exp(alpha * t)))) for t in range(t_end + 1)]
    q = [min(p, max(d, v)) for v in q]
    q[-1] = d
    return q


def squeeze(S, X, index_map=None):
    """Drop zero rows of ``S`` and the matching columns of ``X``.

    Returns ``(S_kept, X_kept, index_map)`` where ``index_map`` carries original
    column indices through repeated calls.
    """
    S = np.asarray(S)
    index_map = np.arange(S.shape[0]) if index_map is None else np.asarray(index_map)
    keep = np.flatnonzero(np.any(S != 0, axis=1))
    if keep.size == 0:
        raise ParameterError("squeezing would eliminate every variable")
    return S[keep], X[:, keep], index_map[keep]


def _schedule_budget(schedule):
    last = len(schedule) - 1

    def budget(t):
        return schedule[min(max(t - 1, 0), last)]

    budget.final = schedule[-1]
    return budget


def _screen_result(out, p, K, label, schedule=(), degenerate=False):
    base = _pack(out, p, K, label)
    return ScreenResult(
        **{f: getattr(base, f) for f in FitResult.__dataclass_fields__},
        surviving_index_map=np.asarray(out.active),
        schedule_trace=tuple(schedule),
        squeeze_events=tuple(out.squeeze_events),
        degenerate=degenerate,
    )


def _from_fit(res, p, degenerate=False):
    return ScreenResult(
        **{f: getattr(res, f) for f in FitResult.__dataclass_fields__},
        surviving_index_map=np.arange(p),
        degenerate=degenerate,
    )


def _squared_loss_with_ridge(eta):
    def penalty(S):
        return 0.5 * eta * float(np.sum(S * S))

    return penalty


def fit_screened(X, Y, spec, config=None):
    """Rank-constrained screening with a row budget ``spec.d``."""
    config = config or SolverConfig()
    X, Y = check_pair(X, Y)
    p, m = X.shape[1], Y.shape[1]
    r = check_rank(spec.rank, p, m)
    d = int(spec.d)
    if d < 1:
        raise ParameterError(f"d must be at least 1, got {d}")
    degenerate = d >= p
    d = min(d, p)
    K, L, factor = step_constant(X, config)
    if L == 0:
        return _from_fit(_zero_design_result(X, Y, r), p, degenerate)
    rng = check_random_state(config.seed)
    schedule = progressive_schedule(p, d, spec.alpha) if spec.progressive else [d]
    budget = _schedule_budget(schedule) if spec.progressive else None
    step = quantile_row_step(d, spec.eta, config.tie_policy, rng, budget)

    def project(S):
        return quantile_threshold_rows(S, schedule[0], 0.0, config.tie_policy, rng)

    out, label = _best_of(
        X, Y, r, K, step, _squared_loss_with_ridge(spec.eta), factor, config,
        project=project, budget=budget, squeeze=spec.squeeze,
    )
    return _screen_result(out, p, K, label, schedule=out.budgets or schedule, degenerate=degenerate)


def fit_sparse_l0(X, Y, d_elem, r, eta=0.0, config=None):
    """Factor-sparse fit with at most ``d_elem`` nonzero entries in ``S``."""
    config = config or SolverConfig()
    X, Y = check_pair(X, Y)
    p, m = X.shape[1], Y.shape[1]
    r = check_rank(r, p, m)
    d_elem = check_budget(d_elem, p * r, "d_elem")
    eta = check_nonnegative(eta, "eta")
    K, L, factor = step_constant(X, config)
    if L == 0:
        return _from_fit(_zero_design_result(X, Y, r), p)
    rng = check_random_state(config.seed)
    step = quantile_entry_step(d_elem, eta, config.tie_policy, rng)

    def project(S):
        return quantile_threshold_entries(S, d_elem, 0.0, config.tie_policy, rng)

    out, label = _best_of(
        X, Y, r, K, step, _squared_loss_with_ridge(eta), factor, config, project=project
    )
    return _screen_result(out, p, K, label)


def fit_hybrid(X, Y, d, d_elem, r, eta=0.0, config=None, progressive=False, alpha=0.01):
    """Screen to ``d`` rows, then fit an entry budget ``d_elem`` on the survivors."""
    X, Y = check_pair(X, Y)
    spec = ScreenSpec(d=d, rank=r, eta=eta, d_elem=d_elem, alpha=alpha, progressive=progressive, squeeze=True)
    stage1 = fit_screened(X, Y, spec, config)
    keep = stage1.support
    if keep.size == 0:
        return stage1
    Xs = X[:, keep]
    r2 = min(r, keep.size)
    # same K as stage 1 so the ridge weight keeps its meaning on the reduced design
    stage2_cfg = replace(config or SolverConfig(), S_init=stage1.S[keep][:, :r2], K=stage1.K)
    stage2 = fit_sparse_l0(Xs, Y, min(d_elem, keep.size * r2), r2, eta, stage2_cfg)
    p = X.shape[1]
    S = np.zeros((p, r2))
    S[keep] = stage2.S
    support = keep[stage2.support]
    return ScreenResult(
        S=S,
        V=stage2.V,
        B=S @ stage2.V.T,
        objective_trace=stage2.objective_trace,
        support=support,
        rank_achieved=stage2.rank_achieved,
        iterations=(stage1.iterations[0] + stage2.iterations[0], stage1.iterations[1] + stage2.iterations[1]),
        converged=stage2.converged,
        K=stage2.K,
        start=stage2.start,
        surviving_index_map=keep,
        schedule_trace=stage1.schedule_trace,
        squeeze_events=stage1.squeeze_events,
    )
