import numpy as np
import pytest
from sklearn.base import clone
from sklearn.utils.estimator_checks import parametrize_with_checks

from selfactor import (
    RankConstrainedScreener,
    SelectivePCA,
    SelectiveReducedRankRegressor,
    TunedSelectiveReducedRankRegressor,
)
from selfactor.oracle import simulate_instance
from selfactor.solver import ProblemSpec, fit
from selfactor.thresholding import make_rule


@parametrize_with_checks([
    SelectiveReducedRankRegressor(rank=1, lam=0.01),
    TunedSelectiveReducedRankRegressor(criterion="pic", sigma="estimate", rank_grid=[1], lambda_grid=[0.0, 0.1]),
    RankConstrainedScreener(d=1),
    SelectivePCA(n_components=1),
])
def test_sklearn_compatible(estimator, check):
    check(estimator)


@pytest.fixture
def planted():
    X, Y, B = simulate_instance(60, 10, 4, 3, 2, 0.2, 5.0, seed=8)
    return X + 3.0, Y - 1.0, B


def test_regressor_matches_functional_core(planted):
    X, Y, _ = planted
    est = SelectiveReducedRankRegressor(rank=2, lam=0.1).fit(X, Y)
    Xc, Yc = X - X.mean(0), Y - Y.mean(0)
    res = fit(ProblemSpec(Xc, Yc, rank=2, lam=0.1, rule=make_rule("hard")))
    np.testing.assert_allclose(est.coef_, res.B, atol=1e-12)
    np.testing.assert_allclose(est.predict(X), Xc @ res.B + Y.mean(0), atol=1e-10)
    np.testing.assert_array_equal(est.support_, res.support)


def test_regressor_recovers_support(planted):
    X, Y, B = planted
    est = SelectiveReducedRankRegressor(rank=2, lam=0.1).fit(X, Y)
    np.testing.assert_array_equal(est.support_, np.flatnonzero(np.any(B != 0, axis=1)))
    assert est.factors(X, kind=1).shape == (60, 2)
    Z = est.factors(X, kind=2)
    G = Z.T @ Z
    np.testing.assert_allclose(G - np.diag(np.diag(G)), 0, atol=1e-8)


def test_single_response(planted):
    X, Y, _ = planted
    est = SelectiveReducedRankRegressor(rank=1, lam=0.05).fit(X, Y[:, 0])
    assert est.predict(X).shape == (60,)


def test_tuned_regressor(planted):
    X, Y, B = planted
    est = TunedSelectiveReducedRankRegressor(rank_grid=[1, 2, 3], lambda_grid=np.linspace(0.01, 1.0, 8)).fit(X, Y)
    assert len(est.scores_) == 24
    assert est.grid_rank_ in (1, 2, 3)
    assert est.lam_ in set(np.linspace(0.01, 1.0, 8))
    feasible = [r["score"] for r in est.scores_ if r["feasible"]]
    assert est.score_ == min(feasible)


def test_screener_transform(planted):
    X, Y, B = planted
    sel = RankConstrainedScreener(d=3, rank=2).fit(X, Y)
    assert sorted(sel.support_) == list(np.flatnonzero(np.any(B != 0, axis=1)))
    assert sel.transform(X).shape == (60, 3)
    np.testing.assert_array_equal(sel.get_support(indices=True), sorted(sel.support_))
    hyb = RankConstrainedScreener(d=3, d_elem=5, rank=2).fit(X, Y)
    assert np.count_nonzero(hyb.result_.S) <= 5


def test_pca_transform_round_trip(rng):
    X = rng.standard_normal((50, 6)) @ np.diag([4, 3, 1, 1, 1, 1])
    pca = SelectivePCA(n_components=2).fit(X)
    Z = pca.transform(X)
    np.testing.assert_allclose(pca.components_ @ pca.components_.T, np.eye(2), atol=1e-8)
    np.testing.assert_allclose(pca.inverse_transform(Z), (X - X.mean(0)) @ pca.components_.T @ pca.components_
                               + X.mean(0), atol=1e-10)
    sparse = SelectivePCA(n_components=1, d=2).fit(X)
    assert len(sparse.support_) == 2


def test_clone_preserves_params():
    est = SelectiveReducedRankRegressor(rank=3, lam=0.4, rule="hard-ridge", eta=0.5)
    assert clone(est).get_params() == est.get_params()
