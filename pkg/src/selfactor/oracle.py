"""Exhaustive reference solvers for small instances, and a simulator.

``brute_force_group`` is exact: for a fixed row support the rank-constrained
ridge problem is plain reduced-rank regression on a stacked design.
``brute_force_entry`` is near exact: for a fixed entry pattern the loadings are
profiled out in closed form and the remaining maximisation over orthonormal
``V`` is run from many starts.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import _linalg
from ._validation import check_budget, check_nonnegative, check_pair, check_random_state, check_rank
from .exceptions import ParameterError
from .solver import rrr_closed_form, spectral_norm_sq

__all__ = ["OracleSolution", "SimulatedInstance", "brute_force_group", "brute_force_entry", "simulate_instance"]

MAX_GROUP_P = 14
MAX_GROUP_RANK = 3
MAX_ENTRY_CELLS = 16


@dataclass(frozen=True)
class OracleSolution:
    objective: float
    support: tuple
    B: np.ndarray
    enumerated_count: int


def _ridge_rrr(X, Y, J, r, eta, K):
    """Best ``(objective, B_J)`` for rows ``J`` with rank at most ``r``."""
    m = Y.shape[1]
    if not J:
        return float(np.sum(Y * Y)) / (2 * K), np.zeros((0, m))
    XJ = X[:, list(J)] / math.sqrt(K)
    Yt = Y / math.sqrt(K)
    if eta > 0:
        XJ = np.vstack([XJ, math.sqrt(eta) * np.eye(len(J))])
        Yt = np.vstack([Yt, np.zeros((len(J), m))])
    rank = min(r, len(J), m)
    BJ = rrr_closed_form(XJ, Yt, rank)
    R = Yt - XJ @ BJ
    return 0.5 * float(np.sum(R * R)), BJ


def brute_force_group(X, Y, r, d=None, lam=None, eta=0.0, K=None):
    """Global minimiser over row supports.

    With ``d`` the support size is at most ``d`` (screening form).  With ``lam``
    every nonzero row costs ``lam**2 / (2 (1 + eta))``, the row penalty induced by
    hard-ridge thresholding (plain group l0 at ``eta = 0``).  The loss is scaled
    by ``1 / (2K)`` with ``K = ||X||_2^2`` unless given, plus ``eta ||B||^2 / 2``.
    """
    X, Y = check_pair(X, Y)
    p, m = X.shape[1], Y.shape[1]
    r = check_rank(r, p, m)
    eta = check_nonnegative(eta, "eta")
    if p > MAX_GROUP_P or r > MAX_GROUP_RANK:
        raise ParameterError(f"enumeration guard: need p <= {MAX_GROUP_P} and r <= {MAX_GROUP_RANK}, got p={p}, r={r}")
    if (d is None) == (lam is None):
        raise ParameterError("give exactly one of d (budget) or lam (penalty)")
    if d is not None:
        d = check_budget(d, p, "d")
        sizes = range(d + 1)
        per_row = 0.0
    else:
        lam = check_nonnegative(lam, "lambda")
        sizes = range(p + 1)
        per_row = lam * lam / (2 * (1 + eta))
    K = spectral_norm_sq(X) if K is None else float(K)
    K = K if K > 0 else 1.0
    supports = sorted(J for k in sizes for J in itertools.combinations(range(p), k))
    best = None
    for J in supports:
        f, BJ = _ridge_rrr(X, Y, J, r, eta, K)
        f += per_row * len(J)
        if best is None or f < best[0]:
            best = (f, J, BJ)
    f, J, BJ = best
    B = np.zeros((p, m))
    B[list(J)] = BJ
    return OracleSolution(float(f), tuple(J), B, len(supports))


def _column_patterns(p, r, d_elem):
    """Entry patterns of size ``d_elem`` as per-column row sets, one per column permutation class."""
    seen = set()
    cells = [(j, k) for k in range(r) for j in range(p)]
    for combo in itertools.combinations(range(p * r), d_elem):
        cols = [[] for _ in range(r)]
        for c in combo:
            j, k = cells[c]
            cols[k].append(j)
        key = tuple(sorted(tuple(c) for c in cols))
        if key not in seen:
            seen.add(key)
    return sorted(seen)


def _profile_matrices(X, Y, pattern, eta, K):
    m = Y.shape[1]
    Ms, solvers = [], []
    for J in pattern:
        if not J:
            Ms.append(np.zeros((m, m)))
            solvers.append(None)
            continue
        XJ = X[:, list(J)]
        H = np.linalg.pinv(XJ.T @ XJ + K * eta * np.eye(len(J))) @ XJ.T
        P = XJ @ H
        Ms.append(Y.T @ P @ Y)
        solvers.append(H)
    return np.array(Ms), solvers


def _polar_batch(W):
    if W.shape[-1] == 1:
        nrm = np.linalg.norm(W, axis=-2, keepdims=True)
        return W / np.where(nrm > 0, nrm, 1.0)
    U, _, Vt = np.linalg.svd(W, full_matrices=False)
    return U @ Vt


def _maximise(Ms, V0, tol=1e-12, max_iter=2000):
    """Ascent on ``sum_k v_k^T M_k v_k`` over orthonormal ``V`` for a batch of starts.

    Each step maximises the linearisation, which never lowers a convex objective.
    """
    V = V0
    val = np.einsum("sak,kab,sbk->s", V, Ms, V)
    for _ in range(max_iter):
        W = np.einsum("kab,sbk->sak", Ms, V)
        ok = np.linalg.norm(W, axis=(1, 2)) > 0
        V = np.where(ok[:, None, None], _polar_batch(np.where(ok[:, None, None], W, V)), V)
        new = np.einsum("sak,kab,sbk->s", V, Ms, V)
        done = np.all(new - val <= tol * (1.0 + np.abs(new)))
        val = new
        if done:
            break
    return V, val


def brute_force_entry(X, Y, d_elem, r, eta=0.0, K=None, n_random=20, seed=0):
    """Near-exact minimiser over entry patterns of ``S`` with at most ``d_elem`` nonzeros."""
    X, Y = check_pair(X, Y)
    p, m = X.shape[1], Y.shape[1]
    r = check_rank(r, p, m)
    eta = check_nonnegative(eta, "eta")
    if p * r > MAX_ENTRY_CELLS:
        raise ParameterError(f"enumeration guard: need p * r <= {MAX_ENTRY_CELLS}, got {p * r}")
    d_elem = check_budget(d_elem, p * r, "d_elem")
    if r == 1:
        return brute_force_group(X, Y, 1, d=d_elem, eta=eta, K=K)
    K = spectral_norm_sq(X) if K is None else float(K)
    K = K if K > 0 else 1.0
    rng = check_random_state(seed)
    y_sq = float(np.sum(Y * Y))
    randoms = np.array([np.linalg.qr(rng.standard_normal((m, r)))[0] for _ in range(n_random)])
    patterns = _column_patterns(p, r, d_elem)
    best = None
    for pattern in patterns:
        Ms, solvers = _profile_matrices(X, Y, pattern, eta, K)
        starts = [randoms]
        tops = np.array([_linalg.top_eigh(M, 1)[1][:, 0] for M in Ms]).T
        starts.append(_polar_batch(tops[None] + 1e-9 * randoms[:1]))
        starts.append(_linalg.top_eigh(Ms.sum(axis=0), r)[1][None])
        V, val = _maximise(Ms, np.concatenate(starts))
        i = int(np.argmax(val))
        f = (y_sq - float(val[i])) / (2 * K)
        if best is None or f < best[0] - 1e-15:
            best = (f, pattern, V[i], solvers)
    f, pattern, V, solvers = best
    S = np.zeros((p, r))
    for k, J in enumerate(pattern):
        if J:
            S[list(J), k] = solvers[k] @ (Y @ V[:, k])
    support = tuple((j, k) for k, J in enumerate(pattern) for j in J)
    return OracleSolution(float(f), support, S @ V.T, len(patterns))


@dataclass(frozen=True)
class SimulatedInstance:
    X: np.ndarray
    Y: np.ndarray
    B_star: np.ndarray
    support: np.ndarray
    seed: int

    def __iter__(self):
        return iter((self.X, self.Y, self.B_star))


def simulate_instance(n, p, m, J_star, r_star, sigma=1.0, snr=1.0, seed=0):
    """Gaussian design, row-sparse low-rank ``B*`` and Gaussian noise.

    ``B*`` is scaled so the root-mean-square of ``X B*`` equals ``snr * sigma``
    (``snr`` itself when ``sigma`` is zero).  Unpacks as ``(X, Y, B_star)``.
    """
    if not 1 <= r_star <= min(J_star, m) or J_star > p:
        raise ParameterError(f"need 1 <= r_star <= min(J_star, m) and J_star <= p, got J*={J_star}, r*={r_star}")
    check_nonnegative(sigma, "sigma")
    rng = check_random_state(seed)
    X = rng.standard_normal((n, p))
    support = np.sort(rng.choice(p, size=J_star, replace=False))
    B = np.zeros((p, m))
    B[support] = rng.standard_normal((J_star, r_star)) @ rng.standard_normal((r_star, m))
    rms = np.linalg.norm(X @ B) / math.sqrt(n * m)
    target = snr * sigma if sigma > 0 else snr
    B *= target / rms
    E = sigma * rng.standard_normal((n, m))
    return SimulatedInstance(X, X @ B + E, B, support, int(seed))
