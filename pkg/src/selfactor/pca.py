"""Selective and sparse principal component analysis.

With an identity design the solver's S-step is exact in one pass, so each
iteration is a polar step followed by a threshold::

    X S = U D W^T
    S  <- threshold(X^T U W^T)

Everything depends on the data only through ``G = X^T X``: the same update reads
``S <- threshold(G S (S^T G S)^{-1/2})``.  Both paths are provided and produce
the same iterates.  Constrained (row budget, entry budget) and hybrid variants
replace the threshold by quantile thresholding.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import _linalg
from ._validation import as_matrix, check_budget, check_gram, check_nonnegative, check_random_state
from .exceptions import DataError, DescentViolation, NumericError, ParameterError
from .screening import _schedule_budget, progressive_schedule
from .solver import SolverConfig
from .thresholding import (
    apply_elementwise,
    apply_rowwise,
    entry_penalty,
    group_penalty,
    make_rule,
    quantile_threshold_entries,
    quantile_threshold_rows,
)

__all__ = [
    "PcaSpec",
    "PcaResult",
    "fit_pca",
    "fit_pca_screened",
    "update_from_gram",
    "update_from_data",
    "noise_scale_estimate",
    "adjusted_variance",
    "adjusted_variance_gram",
]

PCA_MODES = ("selective", "sparse", "screened", "sparse_l0", "hybrid")
_DEGENERATE = ("stop", "raise")


@dataclass(frozen=True)
class PcaSpec:
    """Problem definition for a PCA fit.

    ``lam`` and ``rule`` drive the penalized modes; ``d`` (rows) and ``d_elem``
    (entries) drive the constrained ones.  ``hybrid`` needs both budgets.
    """

    rank: int = 1
    lam: float = 0.0
    rule: object = "soft"
    mode: str = "selective"
    d: int | None = None
    d_elem: int | None = None
    eta: float = 0.0
    progressive: bool = False
    alpha: float = 0.01
    squeeze: bool = True
    on_degenerate: str = "stop"

    def __post_init__(self):
        if int(self.rank) != self.rank or self.rank < 1:
            raise ParameterError(f"rank must be a positive integer, got {self.rank!r}")
        if self.mode not in PCA_MODES:
            raise ParameterError(f"mode must be one of {PCA_MODES}, got {self.mode!r}")
        check_nonnegative(self.lam, "lambda")
        check_nonnegative(self.eta, "eta")
        object.__setattr__(self, "rule", make_rule(self.rule))
        if self.on_degenerate not in _DEGENERATE:
            raise ParameterError(f"on_degenerate must be one of {_DEGENERATE}")
        if self.mode in ("screened", "hybrid") and self.d is None:
            raise ParameterError(f"mode {self.mode!r} needs a row budget d")
        if self.mode in ("sparse_l0", "hybrid") and self.d_elem is None:
            raise ParameterError(f"mode {self.mode!r} needs an entry budget d_elem")
        if self.mode == "hybrid" and not self.d <= self.d_elem <= self.d * self.rank:
            raise ParameterError(
                f"hybrid budgets need d <= d_elem <= d * rank, got d={self.d}, d_elem={self.d_elem}"
            )


@dataclass(frozen=True)
class PcaResult:
    S: np.ndarray
    objective_trace: np.ndarray
    support: np.ndarray
    entry_support: np.ndarray
    adjusted_variance: float
    sigma_hat: float
    iterations: int
    converged: bool
    mode: str
    V: np.ndarray | None = None
    degenerate: bool = False
    surviving_index_map: np.ndarray | None = None
    schedule_trace: tuple = ()
    iterates: tuple | None = None

    @property
    def objective(self):
        return float(self.objective_trace[-1])


def noise_scale_estimate(X):
    """``sqrt(median_j ||x_j||^2 / n)``."""
    X = as_matrix(X, "X")
    if X.shape[0] < 2:
        raise DataError("noise scale estimate needs at least two rows")
    return float(np.sqrt(np.median(np.sum(X * X, axis=0) / X.shape[0])))


def _sequential_residuals(M):
    """Squared diagonal of the Cholesky factor of a PSD matrix, tolerating rank loss.

    Entry k is the variance of component k left after removing components 0..k-1,
    which is exactly ``diag(R)**2`` for the QR of any ``Z`` with ``Z^T Z = M``.
    """
    M = np.array(M, dtype=float)
    r = M.shape[0]
    out = np.zeros(r)
    scale = max(float(np.max(np.diag(M))), 0.0) if r else 0.0
    for k in range(r):
        piv = M[k, k]
        if piv <= 1e-14 * scale:
            out[k] = 0.0
            continue
        out[k] = piv
        row = M[k, k + 1 :] / piv
        M[k + 1 :, k + 1 :] -= np.outer(M[k + 1 :, k], row)
    return out


def _unit_columns(S):
    nrm = np.linalg.norm(S, axis=0)
    nrm[nrm == 0] = 1.0
    return S / nrm


def adjusted_variance(X, S):
    """Variance fraction captured by the components ``X S`` after sequential
    orthogonalization: ``sum(diag(R)**2) / ||X||_F^2`` with ``X S = Q R``.

    Loadings are scaled to unit length first, so only their directions matter.
    """
    X = as_matrix(X, "X")
    S = _unit_columns(as_matrix(S, "S"))
    total = float(np.sum(X * X))
    if total == 0 or not np.any(S):
        return 0.0
    R = np.linalg.qr(X @ S, mode="r")
    return float(min(1.0, np.sum(np.diag(R) ** 2) / total))


def adjusted_variance_gram(G, S):
    G = check_gram(G)
    S = _unit_columns(as_matrix(S, "S"))
    total = float(np.trace(G))
    if total == 0 or not np.any(S):
        return 0.0
    return float(min(1.0, np.sum(_sequential_residuals(S.T @ G @ S)) / total))


class _DataOperator:
    def __init__(self, X):
        self.X = X
        self.total = float(np.sum(X * X))

    def restrict(self, keep):
        out = _DataOperator.__new__(_DataOperator)
        out.X, out.total = self.X[:, keep], self.total
        return out

    def polar(self, S):
        XS = self.X @ S
        if S.shape[1] == 1:
            nrm = np.linalg.norm(XS)
            return (XS / nrm if nrm > 0 else np.zeros_like(XS)), nrm
        U, s, Wt = _linalg.svd(XS)
        good = s > 1e-12 * s[0] if s.size and s[0] > 0 else np.zeros(s.size, dtype=bool)
        return U[:, good] @ Wt[good], float(np.sum(s[good]))

    def xi(self, S):
        V, nuc = self.polar(S)
        return self.X.T @ V, nuc, V


class _GramOperator:
    def __init__(self, G):
        self.G = G
        self.total = float(np.trace(G))

    def restrict(self, keep):
        out = _GramOperator.__new__(_GramOperator)
        out.G, out.total = self.G[np.ix_(keep, keep)], self.total
        return out

    def xi(self, S):
        GS = self.G @ S
        M = S.T @ GS
        if S.shape[1] == 1:
            q = float(M[0, 0])
            if q <= 0:
                return np.zeros_like(S), 0.0, None
            return GS / np.sqrt(q), np.sqrt(q), None
        w = np.linalg.eigvalsh((M + M.T) / 2)
        top = max(float(w[-1]), 0.0)
        # same cut as the data path, where 1e-12 applies to singular values
        Minv, _ = _linalg.inv_sqrt_psd(M, 1e-24)
        nuc = float(np.sum(np.sqrt(w[w > 1e-24 * top]))) if top > 0 else 0.0
        return GS @ Minv, nuc, None


def update_from_gram(G, S, rule="soft", lam=0.0, mode="selective"):
    """One PCA step from the Gram matrix alone."""
    G = check_gram(G)
    S = as_matrix(S, "S")
    if S.shape[0] != G.shape[0]:
        raise ParameterError(f"S has {S.shape[0]} rows but G is {G.shape[0]}x{G.shape[0]}")
    if not np.any(G @ S):
        raise NumericError("S^T G S is zero; the polar factor is undefined")
    Xi, _, _ = _GramOperator(G).xi(S)
    return _threshold(make_rule(rule), Xi, lam, mode)


def update_from_data(X, S, rule="soft", lam=0.0, mode="selective"):
    """One PCA step from the data matrix."""
    X = as_matrix(X, "X")
    S = as_matrix(S, "S")
    if not np.any(X @ S):
        raise NumericError("X S is zero; the polar factor is undefined")
    Xi, _, _ = _DataOperator(X).xi(S)
    return _threshold(make_rule(rule), Xi, lam, mode)


def _threshold(rule, Xi, lam, mode):
    if mode == "selective":
        return apply_rowwise(rule, Xi, lam)
    if mode == "sparse":
        return apply_elementwise(rule, Xi, lam)
    raise ParameterError(f"single-step updates support 'selective' or 'sparse', got {mode!r}")


def _initial_loadings(op, r, p):
    if isinstance(op, _DataOperator):
        _, _, Vt = np.linalg.svd(op.X, full_matrices=False)
        S0 = _linalg.fix_signs(Vt[:r].T)
    else:
        _, S0 = _linalg.top_eigh(op.G, r)
    if S0.shape[1] < r:
        S0 = np.concatenate([S0, np.eye(p)[:, S0.shape[1] : r]], axis=1)
    return S0


def _pca_starts(op, r, p, config, rng, project):
    S_svd = _initial_loadings(op, r, p)
    init = config.S_init
    starts = []
    if not isinstance(init, str):
        S_given = np.asarray(init, dtype=float)
        if S_given.shape != (p, r):
            raise ParameterError(f"S_init must have shape {(p, r)}, got {S_given.shape}")
        starts.append(("given", S_given))
    elif init == "random":
        starts.append(("random", rng.standard_normal((p, r))))
    else:
        # 'rrr' (and 'zero', which is degenerate here) mean the leading singular vectors
        starts.append(("svd", S_svd))
    scale = 0.1 / np.sqrt(p)
    k = 0
    while len(starts) < config.n_starts:
        k += 1
        starts.append((f"perturbed-{k}", S_svd + scale * rng.standard_normal((p, r))))
    return [(label, project(S) if project else S) for label, S in starts]


@dataclass
class _PcaRun:
    S: np.ndarray
    V: np.ndarray | None
    active: np.ndarray
    trace: list
    outer: int
    converged: bool
    degenerate: bool
    iterates: list | None
    budgets: list = field(default_factory=list)


def _pca_loop(op, S0, step, penalty, config, budget=None, squeeze=False, on_degenerate="stop"):
    p, r = S0.shape
    active = np.arange(p)
    S = S0
    _, nuc0, V = op.xi(S)
    f_prev = 0.5 * (op.total - 2 * nuc0 + float(np.sum(S * S))) + penalty(S)
    trace = [f_prev]
    floor = 1e-12 * max(abs(f_prev), op.total / 2, 1e-300)
    iterates = [S0.copy()] if config.record_iterates else None
    budgets = [budget(0)] if budget else []
    converged = degenerate = False
    t = 0
    for t in range(1, config.max_outer + 1):
        if not np.any(S):
            degenerate = True
            if on_degenerate == "raise":
                raise NumericError(f"all loadings vanished before iteration {t}")
            break
        Xi, _, V = op.xi(S)
        S_new = step(Xi, t, S.shape[0])
        f_new = 0.5 * (op.total - 2 * float(np.sum(Xi * S_new)) + float(np.sum(S_new * S_new))) + penalty(S_new)
        if config.descent_check:
            same_budget = budget is None or budget(t) == budget(t - 1)
            if same_budget and f_new - f_prev > config.descent_slack * (1.0 + abs(f_prev)):
                raise DescentViolation(f"PCA objective rose at iteration {t}: {f_prev!r} -> {f_new!r}")
        d_obj = abs(f_prev - f_new) <= config.tol_obj * max(abs(f_prev), floor)
        d_par = np.linalg.norm(S_new - S) / (1.0 + np.linalg.norm(S_new)) < config.tol_param
        S, f_prev = S_new, f_new
        trace.append(f_new)
        if budget:
            budgets.append(budget(t))
        if iterates is not None:
            full = np.zeros((p, r))
            full[active] = S
            iterates.append(full)
        if squeeze:
            keep = np.flatnonzero(np.any(S != 0, axis=1))
            if 0 < keep.size < S.shape[0]:
                op, S, active = op.restrict(keep), S[keep], active[keep]
        settled = budget is None or budget(t) == budget.final
        if d_obj and d_par and settled:
            converged = True
            break
    return _PcaRun(S, V, active, trace, t, converged, degenerate, iterates, budgets)


def _mode_step(spec, rule, budget_rows, d_elem, config, rng, schedule=None):
    lam, eta = spec.lam, spec.eta
    if budget_rows is not None:

        def step(Xi, t, n):
            b = budget_rows if schedule is None else schedule(t)
            return quantile_threshold_rows(Xi, min(b, n), eta, config.tie_policy, rng)

        return step, _ridge(eta)
    if d_elem is not None:

        def step(Xi, t, n):
            return quantile_threshold_entries(Xi, min(d_elem, Xi.size), eta, config.tie_policy, rng)

        return step, _ridge(eta)
    if spec.mode == "selective":
        return (lambda Xi, t, n: apply_rowwise(rule, Xi, lam)), (lambda S: group_penalty(rule, S, lam))
    return (lambda Xi, t, n: apply_elementwise(rule, Xi, lam)), (lambda S: entry_penalty(rule, S, lam))


def _ridge(eta):
    return lambda S: 0.5 * eta * float(np.sum(S * S))


def _resolve(data, gram):
    if gram:
        G = check_gram(data)
        return _GramOperator(G), G.shape[0]
    X = as_matrix(data, "X")
    return _DataOperator(X), X.shape[1]


def _best(op, p, r, step, penalty, config, project, budget, squeeze, on_degenerate):
    rng = check_random_state(config.seed)
    best = None
    for label, S0 in _pca_starts(op, r, p, config, rng, project):
        run = _pca_loop(op, S0, step, penalty, config, budget, squeeze, on_degenerate)
        if best is None or run.trace[-1] < best.trace[-1]:
            best = run
    return best


def _finish(run, data, gram, p, mode, n_samples, schedule=(), index_map=None):
    S = np.zeros((p, run.S.shape[1]))
    S[run.active] = run.S
    if gram:
        av = adjusted_variance_gram(data, S)
        sigma = float(np.sqrt(np.median(np.diag(data)) / n_samples)) if n_samples else float("nan")
    else:
        av = adjusted_variance(data, S)
        sigma = noise_scale_estimate(data) if data.shape[0] >= 2 else float("nan")
    return PcaResult(
        S=S,
        objective_trace=np.asarray(run.trace),
        support=np.flatnonzero(np.any(S != 0, axis=1)),
        entry_support=np.argwhere(S != 0),
        adjusted_variance=av,
        sigma_hat=sigma,
        iterations=run.outer,
        converged=run.converged,
        mode=mode,
        V=run.V,
        degenerate=run.degenerate,
        surviving_index_map=np.asarray(run.active) if index_map is None else index_map,
        schedule_trace=tuple(schedule),
        iterates=tuple(run.iterates) if run.iterates is not None else None,
    )


def fit_pca(data, spec=None, config=None, gram=False, n_samples=None):
    """Fit selective, sparse, screened, entry-budget or hybrid PCA.

    ``data`` is ``X`` (n x p) or, with ``gram=True``, ``G = X^T X``.  For Gram
    input ``n_samples`` is only used to report ``sigma_hat``.
    """
    spec = spec or PcaSpec()
    config = config or SolverConfig()
    op, p = _resolve(data, gram)
    data = op.G if gram else op.X
    r = int(spec.rank)
    if r > p:
        raise ParameterError(f"rank {r} exceeds the number of variables {p}")
    if spec.mode == "hybrid":
        return _fit_hybrid(op, data, gram, p, spec, config, n_samples)
    rng = check_random_state(config.seed + 1)
    budget = project = None
    schedule = ()
    d_rows = d_elem = None
    if spec.mode == "screened":
        d_rows = check_budget(spec.d, p, "d")
        schedule = progressive_schedule(p, d_rows, spec.alpha) if spec.progressive else [d_rows]
        budget = _schedule_budget(schedule) if spec.progressive else None

        def project(S):
            return quantile_threshold_rows(S, schedule[0], 0.0, config.tie_policy, rng)

    elif spec.mode == "sparse_l0":
        d_elem = check_budget(spec.d_elem, p * r, "d_elem")

        def project(S):
            return quantile_threshold_entries(S, d_elem, 0.0, config.tie_policy, rng)

    step, penalty = _mode_step(spec, spec.rule, d_rows, d_elem, config, rng, budget)
    squeeze = spec.squeeze and spec.mode == "screened"
    run = _best(op, p, r, step, penalty, config, project, budget, squeeze, spec.on_degenerate)
    return _finish(run, data, gram, p, spec.mode, n_samples, schedule=run.budgets or schedule)


def _fit_hybrid(op, data, gram, p, spec, config, n_samples):
    stage1 = fit_pca(
        data, replace(spec, mode="screened", d_elem=None), config, gram=gram, n_samples=n_samples
    )
    keep = stage1.support
    if keep.size == 0:
        return replace(stage1, mode="hybrid")
    r = spec.rank
    sub = op.restrict(keep)
    d_elem = min(spec.d_elem, keep.size * r)
    rng = check_random_state(config.seed + 2)

    def project(S):
        return quantile_threshold_entries(S, d_elem, 0.0, config.tie_policy, rng)

    step, penalty = _mode_step(spec, spec.rule, None, d_elem, config, rng)
    cfg = replace(config, S_init=stage1.S[keep], n_starts=1)
    run = _best(sub, keep.size, r, step, penalty, cfg, project, None, False, spec.on_degenerate)
    run.active = keep[run.active]
    run.outer += stage1.iterations
    return _finish(run, data, gram, p, "hybrid", n_samples, schedule=stage1.schedule_trace, index_map=keep)


def fit_pca_screened(data, d, d_elem=None, r=1, eta=0.0, config=None, gram=False, progressive=False, alpha=0.01):
    """Constrained PCA: row budget only, entry budget only (``d=None``), or both (hybrid)."""
    if d is None and d_elem is None:
        raise ParameterError("give a row budget d, an entry budget d_elem, or both")
    if d is None:
        mode = "sparse_l0"
    elif d_elem is None:
        mode = "screened"
    else:
        mode = "hybrid"
    spec = PcaSpec(rank=r, mode=mode, d=d, d_elem=d_elem, eta=eta, progressive=progressive, alpha=alpha)
    return fit_pca(data, spec, config, gram=gram)
