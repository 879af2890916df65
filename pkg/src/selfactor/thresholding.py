"""Threshold rules, their row-wise/element-wise/quantile versions, and induced penalties.

A threshold rule ``Theta(s; lam)`` is odd, nondecreasing, shrinks toward zero and
diverges as ``s -> inf``.  Every such rule defines a family of penalties through
the integral of ``Theta^{-1}(u) - u``; the closed forms below are the members of
that family used by the solvers, and :func:`penalty_from_threshold` recomputes
them by quadrature as an independent check.
"""

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .exceptions import ParameterError

__all__ = [
    "RULE_KINDS",
    "ThresholdRule",
    "PenaltyValue",
    "make_rule",
    "apply_scalar",
    "apply_rowwise",
    "apply_elementwise",
    "quantile_threshold",
    "quantile_threshold_rows",
    "quantile_threshold_entries",
    "penalty_from_threshold",
    "basic_penalty",
    "group_penalty",
    "entry_penalty",
]

RULE_KINDS = ("soft", "hard", "hard-ridge", "scad", "mcp")
TIE_POLICIES = ("lowest-index", "random")

_DEFAULT_SHAPE = {"scad": 3.7, "mcp": 3.0}


@dataclass(frozen=True)
class ThresholdRule:
    """A scalar threshold function with its parameters.

    Parameters
    ----------
    kind : {'soft', 'hard', 'hard-ridge', 'scad', 'mcp'}
    eta : float
        Ridge weight; only used by ``hard-ridge`` (survivors are divided by ``1 + eta``).
    shape : float, optional
        Concavity parameter: ``a`` for SCAD (default 3.7, must exceed 2) or
        ``gamma`` for MCP (default 3, must exceed 1).
    boundary_policy : {'keep', 'drop'}, optional
        What happens at ``|s| == lam`` for the discontinuous rules.  Defaults to
        ``drop`` for ``hard`` and ``keep`` for ``hard-ridge``.
    """

    kind: str = "soft"
    eta: float = 0.0
    shape: float | None = None
    boundary_policy: str | None = None

    def __post_init__(self):
        if self.kind not in RULE_KINDS:
            raise ParameterError(f"unknown threshold rule {self.kind!r}; choose from {RULE_KINDS}")
        eta = float(self.eta)
        if not np.isfinite(eta) or eta < 0:
            raise ParameterError(f"eta must be nonnegative, got {self.eta!r}")
        if eta and self.kind != "hard-ridge":
            raise ParameterError("eta is only meaningful for the hard-ridge rule")
        object.__setattr__(self, "eta", eta)
        shape = self.shape
        if self.kind in _DEFAULT_SHAPE:
            shape = _DEFAULT_SHAPE[self.kind] if shape is None else float(shape)
            lower = 2.0 if self.kind == "scad" else 1.0
            if not shape > lower:
                raise ParameterError(f"{self.kind} shape parameter must exceed {lower}, got {shape}")
        elif shape is not None:
            raise ParameterError(f"shape is not used by the {self.kind} rule")
        object.__setattr__(self, "shape", shape)
        policy = self.boundary_policy
        if policy is None:
            policy = "drop" if self.kind == "hard" else "keep"
        if policy not in ("keep", "drop"):
            raise ParameterError(f"boundary_policy must be 'keep' or 'drop', got {policy!r}")
        object.__setattr__(self, "boundary_policy", policy)

    @property
    def discontinuous(self):
        return self.kind in ("hard", "hard-ridge")

    def __call__(self, s, lam):
        """Evaluate the rule elementwise on ``s``."""
        lam = _check_lambda(lam)
        s = np.asarray(s, dtype=float)
        a = np.abs(s)
        if self.kind == "soft":
            t = np.maximum(a - lam, 0.0)
        elif self.kind in ("hard", "hard-ridge"):
            alive = a >= lam if self.boundary_policy == "keep" else a > lam
            t = np.where(alive, a / (1.0 + self.eta), 0.0)
        elif self.kind == "scad":
            c = self.shape
            mid = ((c - 1.0) * a - c * lam) / (c - 2.0)
            t = np.where(a <= 2 * lam, np.maximum(a - lam, 0.0), np.where(a <= c * lam, mid, a))
        else:  # mcp
            g = self.shape
            mid = (a - lam) * g / (g - 1.0)
            t = np.where(a <= lam, 0.0, np.where(a <= g * lam, mid, a))
        return np.sign(s) * t

    def inverse(self, u, lam):
        """``sup{s : Theta(s; lam) <= u}`` for ``u >= 0``."""
        lam = _check_lambda(lam)
        u = np.asarray(u, dtype=float)
        if self.kind == "soft":
            return u + lam
        if self.kind == "hard":
            return np.maximum(u, lam)
        if self.kind == "hard-ridge":
            return np.maximum((1.0 + self.eta) * u, lam)
        if self.kind == "scad":
            c = self.shape
            mid = ((c - 2.0) * u + c * lam) / (c - 1.0)
            return np.where(u <= lam, u + lam, np.where(u <= c * lam, mid, u))
        g = self.shape
        return np.where(u <= g * lam, lam + u * (g - 1.0) / g, u)

    def breakpoints(self, lam):
        """Kinks of :meth:`inverse` on ``u > 0``."""
        if self.kind == "soft":
            return []
        if self.kind == "hard":
            return [lam]
        if self.kind == "hard-ridge":
            return [lam / (1.0 + self.eta)]
        if self.kind == "scad":
            return [lam, self.shape * lam]
        return [self.shape * lam]

    def slack(self, theta, lam):
        """The nonnegative slack term added to the integral (zero on the rule's range)."""
        a = np.abs(np.asarray(theta, dtype=float))
        if self.kind != "hard-ridge":
            return np.zeros_like(a)
        c = lam / (1.0 + self.eta)
        return np.where((a > 0) & (a < c), 0.5 * (1.0 + self.eta) * (c - a) ** 2, 0.0)

    def penalty(self, theta, lam):
        """Closed-form penalty ``P(theta; lam) - P(0; lam)``, elementwise."""
        lam = _check_lambda(lam)
        a = np.abs(np.asarray(theta, dtype=float))
        if self.kind == "soft":
            return lam * a
        if self.kind == "hard":
            return np.where(a < lam, -0.5 * a**2 + lam * a, 0.5 * lam**2)
        if self.kind == "hard-ridge":
            eta = self.eta
            return 0.5 * eta * a**2 + np.where(a != 0, lam**2 / (2.0 + 2.0 * eta), 0.0)
        if self.kind == "scad":
            c = self.shape
            mid = (2 * c * lam * a - a**2 - lam**2) / (2 * (c - 1.0))
            return np.where(a <= lam, lam * a, np.where(a <= c * lam, mid, 0.5 * (c + 1.0) * lam**2))
        g = self.shape
        return np.where(a <= g * lam, lam * a - a**2 / (2 * g), 0.5 * g * lam**2)

    def inverse_slope_floor(self):
        """Essential infimum of ``d Theta^{-1}(u) / du`` over ``u >= 0``."""
        if self.kind == "soft":
            return 1.0
        if self.kind == "scad":
            return (self.shape - 2.0) / (self.shape - 1.0)
        if self.kind == "mcp":
            return (self.shape - 1.0) / self.shape
        return 0.0

    def to_token(self):
        parts = [f"rule={self.kind}"]
        if self.kind == "hard-ridge":
            parts.append(f"eta={self.eta!r}")
        if self.shape is not None:
            parts.append(f"shape={self.shape!r}")
        return ",".join(parts)


@dataclass(frozen=True)
class PenaltyValue:
    value: float
    integral: float
    slack: float


def make_rule(rule="soft", **params):
    """Build a rule from a string token (``'hard-ridge'``) plus parameters.

    Already-built rules pass through unchanged; ``None`` parameters are ignored.
    """
    if isinstance(rule, ThresholdRule):
        return rule
    params = {k: v for k, v in params.items() if v is not None}
    token = str(rule).strip().lower().replace("_", "-")
    if token in ("hardridge", "hr"):
        token = "hard-ridge"
    return ThresholdRule(kind=token, **params)


def _check_lambda(lam):
    lam = float(lam)
    if not np.isfinite(lam) or lam < 0:
        raise ParameterError(f"lambda must be a finite nonnegative number, got {lam!r}")
    return lam


def apply_scalar(rule, s, lam):
    return float(make_rule(rule)(float(s), lam))


def apply_rowwise(rule, A, lam):
    """Shrink each row of ``A`` along its own direction by thresholding its norm."""
    rule = make_rule(rule)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    norms = np.linalg.norm(A, axis=1)
    shrunk = rule(norms, lam)
    scale = np.divide(shrunk, norms, out=np.zeros_like(norms), where=norms > 0)
    return A * scale[:, None]


def apply_elementwise(rule, A, lam):
    return make_rule(rule)(np.asarray(A, dtype=float), lam)


def _top_indices(magnitudes, d, tie_policy, rng):
    if tie_policy not in TIE_POLICIES:
        raise ParameterError(f"tie_policy must be one of {TIE_POLICIES}, got {tie_policy!r}")
    if tie_policy == "lowest-index":
        return np.argsort(-magnitudes, kind="stable")[:d]
    if rng is None:
        raise ParameterError("the random tie policy needs a seeded generator")
    perm = rng.permutation(magnitudes.size)
    return perm[np.argsort(-magnitudes[perm], kind="stable")][:d]


def quantile_threshold(s, d, eta=0.0, tie_policy="lowest-index", rng=None):
    """Keep the ``d`` largest-magnitude entries of ``s`` (divided by ``1 + eta``)."""
    s = np.asarray(s, dtype=float).ravel()
    if int(d) != d or not 1 <= d <= s.size:
        raise ParameterError(f"d must be an integer in [1, {s.size}], got {d!r}")
    if eta < 0:
        raise ParameterError(f"eta must be nonnegative, got {eta!r}")
    keep = _top_indices(np.abs(s), int(d), tie_policy, rng)
    out = np.zeros_like(s)
    out[keep] = s[keep] / (1.0 + eta)
    return out


def quantile_threshold_rows(S, d, eta=0.0, tie_policy="lowest-index", rng=None):
    """Keep the ``d`` rows of ``S`` with largest norms (divided by ``1 + eta``)."""
    S = np.atleast_2d(np.asarray(S, dtype=float))
    p = S.shape[0]
    if int(d) != d or not 1 <= d <= p:
        raise ParameterError(f"d must be an integer in [1, {p}], got {d!r}")
    if eta < 0:
        raise ParameterError(f"eta must be nonnegative, got {eta!r}")
    keep = _top_indices(np.linalg.norm(S, axis=1), int(d), tie_policy, rng)
    out = np.zeros_like(S)
    out[keep] = S[keep] / (1.0 + eta)
    return out


def quantile_threshold_entries(S, d_elem, eta=0.0, tie_policy="lowest-index", rng=None):
    """Element-wise quantile thresholding of a matrix (row-major entry order)."""
    S = np.atleast_2d(np.asarray(S, dtype=float))
    return quantile_threshold(S.ravel(), d_elem, eta, tie_policy, rng).reshape(S.shape)


def penalty_from_threshold(rule, theta, lam):
    """Reconstruct ``P(theta) - P(0)`` from the rule by quadrature plus its slack term."""
    rule = make_rule(rule)
    lam = _check_lambda(lam)
    a = abs(float(theta))
    if a == 0.0:
        return PenaltyValue(0.0, 0.0, 0.0)
    points = [b for b in rule.breakpoints(lam) if 0.0 < b < a]
    integral, _ = integrate.quad(
        lambda u: float(rule.inverse(u, lam)) - u,
        0.0,
        a,
        points=points or None,
        epsabs=1e-10,
        epsrel=1e-12,
        limit=200,
    )
    slack = float(rule.slack(a, lam))
    return PenaltyValue(integral + slack, integral, slack)


def basic_penalty(kind, B, lam):
    """Group penalties on the rows of ``B``: ``group-l0``, ``group-l1`` or ``group-hard``."""
    lam = _check_lambda(lam)
    norms = np.linalg.norm(np.atleast_2d(np.asarray(B, dtype=float)), axis=1)
    if kind == "group-l0":
        return 0.5 * lam**2 * float(np.count_nonzero(norms))
    if kind == "group-l1":
        return lam * float(norms.sum())
    if kind == "group-hard":
        return float(np.sum(np.where(norms < lam, -0.5 * norms**2 + lam * norms, 0.5 * lam**2)))
    raise ParameterError(f"unknown basic penalty {kind!r}")


def group_penalty(rule, S, lam):
    return float(np.sum(make_rule(rule).penalty(np.linalg.norm(S, axis=1), lam)))


def entry_penalty(rule, S, lam):
    return float(np.sum(make_rule(rule).penalty(S, lam)))
