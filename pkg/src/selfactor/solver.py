"""Block coordinate descent for selective and sparse reduced-rank regression.

The coefficient matrix is factored as ``B = S V^T`` with ``V`` column-orthonormal.
Each outer iteration solves the ``V``-block exactly by a Procrustes rotation and
then runs iterative thresholding on the ``S``-block::

    Xi = X^T Y V / K + (I - X^T X / K) S
    S  = threshold(Xi)

With ``K >= ||X||_2^2`` the scaled objective
``||Y - X S V^T||_F^2 / (2K) + penalty(S)`` never increases; the decrease is at
least ``(1 - ||X||_2^2 / K) ||S_old - S_new||_F^2 / 2`` per outer step, and this is
checked at runtime when ``descent_check`` is on.
"""

import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import _linalg
from ._validation import check_nonnegative, check_pair, check_random_state, check_rank
from .exceptions import DescentViolation, NumericError, ParameterError
from .thresholding import (
    apply_elementwise,
    apply_rowwise,
    entry_penalty,
    group_penalty,
    make_rule,
    quantile_threshold_entries,
    quantile_threshold_rows,
)

logger = logging.getLogger(__name__)

__all__ = [
    "ProblemSpec",
    "SolverConfig",
    "FitResult",
    "spectral_norm_sq",
    "init_rrr",
    "v_step",
    "s_step",
    "fit",
    "objective",
    "profiled_objective",
    "rrr_closed_form",
    "step_constant",
]

MODES = ("selective", "sparse")
_BOUNDARY_EPS = 1e-12

spectral_norm_sq = _linalg.spectral_norm_sq


@dataclass(frozen=True)
class ProblemSpec:
    """Data and regularisation for one selective/sparse fit.

    ``lam`` thresholds row norms of ``Xi`` (``mode='selective'``) or its entries
    (``mode='sparse'``); both work on the scale of the ``1/(2K)``-scaled loss.
    """

    X: np.ndarray
    Y: np.ndarray
    rank: int = 1
    lam: float = 0.0
    rule: object = "hard"
    mode: str = "selective"

    def __post_init__(self):
        X, Y = check_pair(self.X, self.Y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "rank", check_rank(self.rank, X.shape[1], Y.shape[1]))
        object.__setattr__(self, "lam", check_nonnegative(self.lam, "lambda"))
        object.__setattr__(self, "rule", make_rule(self.rule))
        if self.mode not in MODES:
            raise ParameterError(f"mode must be one of {MODES}, got {self.mode!r}")


@dataclass(frozen=True)
class SolverConfig:
    """Iteration controls.

    ``K=None`` uses ``||X||_2^2 * (1 + K_inflation)``.  A strictly larger step
    constant (``K_inflation`` around 1e-6) is what guarantees accumulation points
    are coordinatewise minima; the default of zero reproduces the plain step.
    ``K`` below ``||X||_2^2`` is only accepted for the soft rule, down to half.
    """

    K: float | None = None
    K_inflation: float = 0.0
    max_inner: int = 50
    max_outer: int = 500
    tol_obj: float = 1e-10
    tol_param: float = 1e-8
    S_init: object = "rrr"
    n_starts: int = 1
    seed: int = 0
    descent_check: bool = True
    descent_slack: float = 1e-9
    tie_policy: str = "lowest-index"
    record_iterates: bool = False

    def __post_init__(self):
        if self.K is not None and not self.K > 0:
            raise ParameterError(f"K must be positive, got {self.K!r}")
        check_nonnegative(self.K_inflation, "K_inflation")
        for name in ("max_inner", "max_outer", "n_starts"):
            if int(getattr(self, name)) < 1:
                raise ParameterError(f"{name} must be at least 1")
        if isinstance(self.S_init, str) and self.S_init not in ("rrr", "zero", "random"):
            raise ParameterError(f"S_init must be 'rrr', 'zero', 'random' or an array, got {self.S_init!r}")


@dataclass(frozen=True)
class FitResult:
    S: np.ndarray
    V: np.ndarray
    B: np.ndarray
    objective_trace: np.ndarray
    support: np.ndarray
    rank_achieved: int
    iterations: tuple
    converged: bool
    K: float
    start: str = "rrr"
    iterates: tuple | None = None

    @property
    def objective(self):
        return float(self.objective_trace[-1])


@dataclass
class _EngineOutput:
    S: np.ndarray
    V: np.ndarray
    active: np.ndarray
    trace: list
    outer: int
    inner: int
    converged: bool
    iterates: list | None
    budgets: list = field(default_factory=list)
    squeeze_events: list = field(default_factory=list)


def step_constant(X, config, rule=None):
    """Resolve ``K`` and the descent factor it implies."""
    L = spectral_norm_sq(X)
    if config.K is None:
        K = L * (1.0 + config.K_inflation)
        return K, L, (1.0 - L / K) if K > 0 else 0.0
    K = float(config.K)
    if K >= L:
        return K, L, 1.0 - L / K
    soft = rule is not None and make_rule(rule).kind == "soft"
    if soft and K >= L / 2:
        # relaxed constant valid for soft thresholding
        return K, L, 2.0 - L / K
    if config.descent_check:
        raise ParameterError(
            f"K={K:.6g} is below ||X||_2^2={L:.6g}; descent is only guaranteed for K >= ||X||_2^2"
            " (or K >= ||X||_2^2/2 with the soft rule)"
        )
    warnings.warn("K below ||X||_2^2: monotone descent is not guaranteed", RuntimeWarning, stacklevel=2)
    return K, L, -np.inf


def rrr_closed_form(X, Y, r):
    """Exact reduced-rank regression estimate of rank at most ``r``."""
    S0, V = init_rrr(X, Y, r, warn=False)
    return S0 @ V.T


def init_rrr(X, Y, r, warn=True):
    """Reduced-rank regression factors ``(S0, V_r)`` with ``B_rrr = S0 V_r^T``."""
    X, Y = check_pair(X, Y)
    r = check_rank(r, X.shape[1], Y.shape[1])
    B_ols = np.linalg.pinv(X) @ Y
    fitted = X @ B_ols
    _, s, Vt = _linalg.svd(fitted, full_matrices=True)
    V = Vt[:r].T
    if warn:
        top = s[0] if s.size else 0.0
        if r > s.size or s[r - 1] <= 1e-10 * max(top, 1e-300):
            warnings.warn(
                f"rank {r} exceeds the numerical rank of the fitted values; padding with an orthonormal completion",
                RuntimeWarning,
                stacklevel=2,
            )
    return B_ols @ V, V


def v_step(Y, X, S, V_prev=None):
    """Procrustes update ``V = U_w V_w^T`` from ``W = Y^T X S``.

    A zero ``W`` keeps ``V_prev`` (or the leading identity columns when absent).
    """
    W = Y.T @ (X @ S)
    fallback = V_prev if V_prev is not None else np.eye(Y.shape[1])[:, : S.shape[1]]
    return _linalg.polar(W, fallback)


def _row_step(rule, lam):
    def step(Xi, t):
        out = apply_rowwise(rule, Xi, lam)
        _log_boundary(rule, np.linalg.norm(Xi, axis=1), lam, t)
        return out

    return step


def _entry_step(rule, lam):
    def step(Xi, t):
        out = apply_elementwise(rule, Xi, lam)
        _log_boundary(rule, np.abs(Xi), lam, t)
        return out

    return step


def _log_boundary(rule, mags, lam, t):
    if rule.discontinuous and np.any(np.abs(mags - lam) < _BOUNDARY_EPS):
        logger.debug("outer iteration %d: a thresholded magnitude sits on the discontinuity at %g", t, lam)


def s_step(X, Y, V, S_in, rule, lam, K, max_inner=50, tol=1e-8, mode="selective"):
    """Inner iterative-thresholding loop for fixed ``V``."""
    rule = make_rule(rule)
    step = _row_step(rule, lam) if mode == "selective" else _entry_step(rule, lam)
    S, _, _ = _inner(X, (X.T @ Y) @ V / K, S_in, K, step, 1, max_inner, tol)
    return S


def _inner(X, A, S, K, step, t, max_inner, tol):
    """Returns the final iterate, the inner count, and the summed squared step lengths."""
    moved = 0.0
    for l in range(1, max_inner + 1):
        Xi = A + S - X.T @ (X @ S) / K
        if not np.all(np.isfinite(Xi)):
            raise NumericError(f"non-finite entries in the thresholding input (outer {t}, inner {l})")
        S_new = step(Xi, t)
        diff = np.linalg.norm(S_new - S)
        moved += diff * diff
        S = S_new
        if diff <= tol * (1.0 + np.linalg.norm(S)):
            break
    return S, l, moved


def objective(problem, S, V, K=None):
    """Scaled penalised loss of ``(S, V)`` for ``problem``."""
    X, Y = problem.X, problem.Y
    if S.shape != (X.shape[1], V.shape[1]) or V.shape[0] != Y.shape[1]:
        raise ParameterError(f"shape mismatch: S {S.shape}, V {V.shape} for X {X.shape}, Y {Y.shape}")
    if K is None:
        K = spectral_norm_sq(X) or 1.0
    loss = np.linalg.norm(Y - X @ S @ V.T) ** 2 / (2 * K)
    if problem.mode == "selective":
        return loss + group_penalty(problem.rule, S, problem.lam)
    return loss + entry_penalty(problem.rule, S, problem.lam)


def profiled_objective(X, Y, S, K):
    """Loss after optimising ``V`` out, via the nuclear-norm identity."""
    XS = X @ S
    nuc = np.linalg.svd(Y.T @ XS, compute_uv=False).sum()
    return (np.linalg.norm(XS) ** 2 - 2 * nuc + np.linalg.norm(Y) ** 2) / (2 * K)


def _run(
    X,
    Y,
    S0,
    V0,
    K,
    step,
    penalty,
    factor,
    config,
    budget=None,
    squeeze=False,
    C=None,
):
    """Shared outer loop.

    ``step(Xi, t, n_active)`` thresholds, ``penalty(S)`` evaluates the penalty,
    ``budget(t)`` (optional) reports the cardinality budget in force at ``t`` so
    descent is only asserted while the budget is unchanged.
    """
    p, r = S0.shape
    C = X.T @ Y if C is None else C
    y_sq = float(np.linalg.norm(Y) ** 2)
    active = np.arange(p)
    Xa, Ca, S = X, C, S0
    V = V0 if V0 is not None else _linalg.polar(C.T @ S0, np.eye(Y.shape[1])[:, :r])

    def F(Sa, Va):
        XS = Xa @ Sa
        return np.linalg.norm(Y - XS @ Va.T) ** 2 / (2 * K) + penalty(Sa)

    f_prev = F(S, V)
    trace = [f_prev]
    floor = 1e-12 * max(abs(f_prev), y_sq / (2 * K), 1e-300)
    B_prev = S @ V.T
    iterates = [S0.copy()] if config.record_iterates else None
    budgets = [budget(0)] if budget else []
    events = []
    inner_total = 0
    converged = False
    t = 0
    for t in range(1, config.max_outer + 1):
        V = _linalg.polar(Ca.T @ S, V)
        A = Ca @ V / K
        S_new, n_inner, moved = _inner(
            Xa, A, S, K, lambda Xi, tt: step(Xi, tt, Xa.shape[1]), t, config.max_inner, config.tol_param
        )
        inner_total += n_inner
        f_new = F(S_new, V)
        if config.descent_check and np.isfinite(factor):
            same_budget = budget is None or budget(t) == budget(t - 1)
            # each inner step removes factor/2 * its squared length, which is the
            # outer-step bound whenever a single inner step is taken
            gap = f_prev - f_new - factor * moved / 2
            if same_budget and gap < -config.descent_slack * (1.0 + abs(f_prev)):
                raise DescentViolation(
                    f"objective rose at outer iteration {t}: {f_prev!r} -> {f_new!r} (gap {gap:.3e})"
                )
        B = S_new @ V.T
        d_obj = abs(f_prev - f_new) <= config.tol_obj * max(abs(f_prev), floor)
        d_par = np.linalg.norm(B - B_prev) / (1.0 + np.linalg.norm(B)) < config.tol_param
        S, B_prev, f_prev = S_new, B, f_new
        trace.append(f_new)
        if budget:
            budgets.append(budget(t))
        if iterates is not None:
            full = np.zeros((p, r))
            full[active] = S
            iterates.append(full)
        if squeeze:
            keep = np.flatnonzero(np.any(S != 0, axis=1))
            if keep.size == 0:
                raise NumericError(f"every variable was eliminated at outer iteration {t}")
            if keep.size < S.shape[0]:
                events.append((t, int(S.shape[0]), int(keep.size)))
                Xa, Ca, S, B_prev = Xa[:, keep], Ca[keep], S[keep], B_prev[keep]
                active = active[keep]
        settled = budget is None or budget(t) == budget.final
        if d_obj and d_par and settled:
            converged = True
            break
    return _EngineOutput(S, V, active, trace, t, inner_total, converged, iterates, budgets, events)


def _starts(X, Y, r, config, rng, project=None):
    """Initial (label, S0, V0) triples per the configured start strategy."""
    p = X.shape[1]
    starts = []
    S_init = config.S_init
    S_rrr = V_rrr = None
    if isinstance(S_init, str) and S_init == "rrr" or config.n_starts > 1:
        S_rrr, V_rrr = init_rrr(X, Y, r)
    if not isinstance(S_init, str):
        S_given = np.asarray(S_init, dtype=float)
        if S_given.shape != (p, r):
            raise ParameterError(f"S_init must have shape {(p, r)}, got {S_given.shape}")
        starts.append(("given", S_given, None))
    elif S_init == "rrr":
        starts.append(("rrr", S_rrr, V_rrr))
    elif S_init == "zero":
        starts.append(("zero", np.zeros((p, r)), None))
    else:
        starts.append(("random", rng.standard_normal((p, r)), None))
    if config.n_starts > 1 and not any(label == "zero" for label, _, _ in starts):
        starts.append(("zero", np.zeros((p, r)), None))
    unit = np.linalg.norm(S_rrr) / np.sqrt(S_rrr.size) if S_rrr is not None else 0.0
    k = 0
    while len(starts) < config.n_starts:
        k += 1
        # perturbation sizes double so later starts explore farther from RRR
        scale = 0.1 * 2.0 ** (k - 1) * unit
        starts.append((f"perturbed-{k}", S_rrr + scale * rng.standard_normal((p, r)), None))
    if project is None:
        return starts
    projected = []
    for label, S, V in starts:
        P = project(S)
        projected.append((label, P, V if np.array_equal(P, S) else None))
    return projected


def _zero_design_result(X, Y, r, start="zero"):
    p, m = X.shape[1], Y.shape[1]
    S = np.zeros((p, r))
    V = np.eye(m)[:, :r]
    f0 = np.linalg.norm(Y) ** 2 / 2
    return FitResult(S, V, S @ V.T, np.array([f0]), np.array([], dtype=int), 0, (0, 0), True, 1.0, start)


def _pack(out, p, K, label):
    S = np.zeros((p, out.S.shape[1]))
    S[out.active] = out.S
    B = S @ out.V.T
    support = np.flatnonzero(np.any(S != 0, axis=1))
    return FitResult(
        S=S,
        V=out.V,
        B=B,
        objective_trace=np.asarray(out.trace),
        support=support,
        rank_achieved=_linalg.numerical_rank(B),
        iterations=(out.outer, out.inner),
        converged=out.converged,
        K=K,
        start=label,
        iterates=tuple(out.iterates) if out.iterates is not None else None,
    )


def fit(problem, config=None):
    """Fit a selective (row-sparse) or sparse (entry-sparse) reduced-rank model."""
    config = config or SolverConfig()
    X, Y, r = problem.X, problem.Y, problem.rank
    K, L, factor = step_constant(X, config, problem.rule)
    if L == 0:
        return _zero_design_result(X, Y, r)
    rule, lam = problem.rule, problem.lam
    if problem.mode == "selective":
        thresh = _row_step(rule, lam)

        def penalty(S):
            return group_penalty(rule, S, lam)

    else:
        thresh = _entry_step(rule, lam)

        def penalty(S):
            return entry_penalty(rule, S, lam)

    def step(Xi, t, n_active):
        return thresh(Xi, t)

    out, label = _best_of(X, Y, r, K, step, penalty, factor, config)
    return _pack(out, X.shape[1], K, label)


def _best_of(X, Y, r, K, step, penalty, factor, config, project=None, budget=None, squeeze=False):
    rng = check_random_state(config.seed)
    C = X.T @ Y
    best = None
    for label, S0, V0 in _starts(X, Y, r, config, rng, project):
        out = _run(X, Y, S0, V0, K, step, penalty, factor, config, budget=budget, squeeze=squeeze, C=C)
        if best is None or out.trace[-1] < best[0].trace[-1]:
            best = (out, label)
    return best


def quantile_row_step(d, eta, tie_policy, rng, schedule=None):
    """Row-budget quantile thresholding, optionally following a budget schedule."""

    def step(Xi, t, n_active):
        budget = d if schedule is None else schedule(t)
        return quantile_threshold_rows(Xi, min(budget, n_active), eta, tie_policy, rng)

    return step


def quantile_entry_step(d_elem, eta, tie_policy, rng):
    def step(Xi, t, n_active):
        return quantile_threshold_entries(Xi, min(d_elem, Xi.size), eta, tie_policy, rng)

    return step


def with_config(config, **changes):
    return replace(config or SolverConfig(), **changes)
