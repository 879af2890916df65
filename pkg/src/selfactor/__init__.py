"""Selective reduced-rank regression, rank-constrained screening and sparse PCA."""

from .estimators import (
    RankConstrainedScreener,
    SelectivePCA,
    SelectiveReducedRankRegressor,
    TunedSelectiveReducedRankRegressor,
)
from .exceptions import DataError, DescentViolation, InfeasibleCriterion, NumericError, ParameterError
from .factors import augment_design, extract_type1, extract_type2, rolling_forecast
from .oracle import brute_force_entry, brute_force_group, simulate_instance
from .pca import PcaSpec, adjusted_variance, fit_pca, fit_pca_screened, noise_scale_estimate, update_from_gram
from .screening import ScreenSpec, fit_hybrid, fit_screened, fit_sparse_l0, progressive_schedule
from .selection import CriterionConfig, complexity, pic_score, sfpic_score, support_and_rank, tune
from .solver import ProblemSpec, SolverConfig, fit, init_rrr, rrr_closed_form
from .thresholding import ThresholdRule, make_rule, quantile_threshold

__version__ = "0.1.0"
