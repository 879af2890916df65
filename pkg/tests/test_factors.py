import numpy as np
import pytest

from selfactor import _linalg
from selfactor.exceptions import DataError, NumericError, ParameterError
from selfactor.factors import (
    ar_fitter,
    augment_design,
    extract_type1,
    extract_type1_qr,
    extract_type2,
    extract_type2_qr,
    lagged_design,
    rolling_forecast,
    rrr_fitter,
    srrr_fitter,
)
from selfactor.oracle import simulate_instance
from selfactor.solver import ProblemSpec, SolverConfig, fit, rrr_closed_form
from selfactor.theory import theory_lambda


def off_diagonal_ratio(Z):
    G = Z.T @ Z
    return np.max(np.abs(G - np.diag(np.diag(G)))) / np.max(np.diag(G))


def correlated_design(rng, n=40, p=8):
    return rng.standard_normal((n, p)) @ (np.eye(p) + 0.6 * rng.standard_normal((p, p)))


def test_type1_rank_one(rng):
    X = rng.standard_normal((10, 4))
    u = rng.standard_normal(4)
    B = np.outer(u, [1.0, 2.0])
    fs = extract_type1(X, B)
    assert fs.n_factors == 1 and fs.type == "I"
    U, s, _ = np.linalg.svd(B)
    np.testing.assert_allclose(np.abs(fs.Z[:, 0]), np.abs(X @ U[:, 0] * s[0]), atol=1e-10)


def test_rrr_spans_coincide(rng):
    for _ in range(5):
        X = correlated_design(rng)
        Y = rng.standard_normal((40, 5))
        B = rrr_closed_form(X, Y, 3)
        a, b = extract_type1(X, B), extract_type2(X, B)
        assert a.n_factors == b.n_factors == 3
        assert _linalg.max_principal_angle(a.Z, b.Z) <= 1e-8


def test_row_sparse_loadings(rng):
    X = correlated_design(rng)
    B = np.zeros((8, 4))
    B[[1, 5]] = rng.standard_normal((2, 4))
    for extract in (extract_type1, extract_type2, extract_type1_qr, extract_type2_qr):
        fs = extract(X, B)
        np.testing.assert_array_equal(fs.selected_vars, [1, 5])
        assert not np.any(np.delete(fs.loadings, [1, 5], axis=0))


def test_spans_always_equal_col_xb(rng):
    # X U and X B share a column space for every B, so the two factor spans agree
    X = correlated_design(rng)
    B = np.zeros((8, 4))
    B[:3] = rng.standard_normal((3, 4))
    a, b = extract_type1(X, B), extract_type2(X, B)
    assert _linalg.max_principal_angle(a.Z, X @ B) < 1e-8
    assert _linalg.max_principal_angle(a.Z, b.Z) < 1e-8


def test_type2_uncorrelated(rng):
    for i in range(10):
        X = correlated_design(rng)
        Y = rng.standard_normal((40, 5))
        res = fit(ProblemSpec(X, Y, rank=3, lam=0.05 * i, rule="hard"), SolverConfig(max_outer=200))
        if not np.any(res.B):
            continue
        assert off_diagonal_ratio(extract_type2(X, res.B).Z) <= 1e-8
        assert off_diagonal_ratio(extract_type2_qr(X, res.B).Z) <= 1e-8


def test_type2_rank_one(rng):
    X = rng.standard_normal((12, 4))
    B = np.outer(rng.standard_normal(4), rng.standard_normal(3))
    Z = extract_type2(X, B).Z
    XB = X @ B
    assert _linalg.max_principal_angle(Z, XB[:, :1]) < 1e-8


def test_factor_count_is_numerical_rank(rng):
    X = rng.standard_normal((20, 6))
    B = rng.standard_normal((6, 2)) @ rng.standard_normal((2, 5))
    assert extract_type1(X, B).n_factors == 2 and extract_type2(X, B).n_factors == 2


def test_qr_paths_match(rng):
    X = correlated_design(rng)
    B = np.zeros((8, 5))
    B[:4] = rng.standard_normal((4, 3)) @ rng.standard_normal((3, 5))
    assert _linalg.max_principal_angle(extract_type1(X, B).Z, extract_type1_qr(X, B).Z) <= 1e-8
    assert _linalg.max_principal_angle(extract_type2(X, B).Z, extract_type2_qr(X, B).Z) <= 1e-8


def test_zero_coefficients_rejected(rng):
    X = rng.standard_normal((5, 3))
    with pytest.raises(NumericError):
        extract_type1(X, np.zeros((3, 2)))
    with pytest.raises(NumericError):
        extract_type2(X, np.zeros((3, 2)))


def test_augment_dimensions(rng):
    X = rng.standard_normal((6, 3))
    aug = augment_design(X)
    assert aug.X_bar.shape == (6, 9)
    np.testing.assert_array_equal(aug.X_bar[:, 3:], np.eye(6))
    support = np.array([0, 2, 4, 8])
    np.testing.assert_array_equal(aug.outlier_rows(support), [1, 5])
    np.testing.assert_array_equal(aug.predictor_support(support), [0, 2])
    assert list(aug.is_indicator([2, 3])) == [False, True]


def outlier_data(seed, n_out, magnitude=80.0):
    X, Y, B = simulate_instance(50, 10, 5, 3, 2, sigma=1.0, snr=5, seed=seed)
    loc = np.random.default_rng(1000 + seed)
    rows = loc.choice(50, n_out, replace=False)
    C = np.linalg.svd(B)[2][:2]
    Y = Y.copy()
    for i in rows:
        u = loc.standard_normal(2)
        Y[i] += magnitude * (u / np.linalg.norm(u)) @ C
    return X, Y, np.sort(rows)


def augmented_fit(X, Y, A):
    aug = augment_design(X)
    K = np.linalg.norm(aug.X_bar, 2) ** 2
    lam = theory_lambda(1.0, 2, aug.X_bar.shape[1], K, A)
    res = fit(ProblemSpec(aug.X_bar, Y, rank=2, lam=lam, rule="hard"), SolverConfig(S_init="zero"))
    return aug, res


def test_augmented_single_outlier_flagged():
    X, Y, rows = outlier_data(3, 1)
    aug, res = augmented_fit(X, Y, 1.5)
    np.testing.assert_array_equal(aug.outlier_rows(res.support), rows)


def test_augmented_clean_strong_penalty():
    X, Y, _ = outlier_data(3, 0)
    aug, res = augmented_fit(X, Y, 3.0)
    assert aug.outlier_rows(res.support).size == 0


def test_lagged_design_alignment():
    Z = np.arange(20.0).reshape(10, 2)
    Y, X, origins = lagged_design(Z, 2, horizon=1)
    assert Y.shape == (8, 2) and X.shape == (8, 4)
    np.testing.assert_array_equal(Y[0], Z[2])
    np.testing.assert_array_equal(X[0], np.r_[Z[1], Z[0]])
    np.testing.assert_array_equal(origins, np.arange(1, 9))
    Y3, _, _ = lagged_design(Z, 2, horizon=3)
    np.testing.assert_array_equal(Y3[0], Z[4])
    with pytest.raises(DataError):
        lagged_design(Z[:2], 2)
    with pytest.raises(ParameterError):
        lagged_design(Z, 0)


def test_rolling_fold_counts():
    Z = np.random.default_rng(0).standard_normal((194, 3))
    res = rolling_forecast(Z, 100, ar_fitter(), lags=1)
    assert res.n_folds == 93 and res.squared_errors.shape == (93, 3)
    res = rolling_forecast(np.random.default_rng(0).standard_normal((198, 3)), 100, ar_fitter(), lags=4, presample=4)
    assert res.n_folds == 94
    with pytest.raises(DataError):
        rolling_forecast(Z, 194, ar_fitter())
    with pytest.raises(ParameterError):
        rolling_forecast(Z, 50, ar_fitter(), lags=2, presample=1)


def test_rolling_constant_series():
    Z = np.full((60, 2), 3.5)
    for fitter in (ar_fitter(), rrr_fitter(1), srrr_fitter(1, lam=0.1)):
        res = rolling_forecast(Z, 20, fitter, lags=2)
        np.testing.assert_allclose(res.mse, 0.0, atol=1e-20)


def test_rolling_uses_only_past(rng):
    Z = rng.standard_normal((40, 2))
    seen = []

    def spy(X, Y):
        seen.append(Y.copy())
        return lambda Xn: np.zeros((1, 2))

    res = rolling_forecast(Z, 10, spy, horizon=2, lags=1)
    for fold, (Ytrain, origin) in enumerate(zip(seen, res.origins)):
        # the last training target is observed at the forecast origin
        np.testing.assert_array_equal(Ytrain[-1], Z[origin])


def test_ar4_mse_near_innovation_variance():
    coef = np.array([0.5, -0.2, 0.15, 0.1])
    ratios = []
    for seed in range(20):
        loc = np.random.default_rng(seed)
        T = 600
        z = np.zeros(T + 100)
        e = loc.standard_normal(T + 100)
        for t in range(4, T + 100):
            z[t] = coef @ z[t - 4 : t][::-1] + e[t]
        res = rolling_forecast(z[100:, None], 300, ar_fitter(), lags=4)
        ratios.append(res.mse[0])
    assert abs(np.mean(ratios) - 1.0) <= 0.1
    assert all(abs(r - 1.0) <= 0.25 for r in ratios)


def test_srrr_fitter_tuned(rng):
    Z = rng.standard_normal((80, 3))
    res = rolling_forecast(Z, 50, srrr_fitter(1, lambda_grid=[0.5, 0.1]), lags=1)
    assert res.n_folds == 29 and np.all(np.isfinite(res.mse))
