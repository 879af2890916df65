import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_instance
from selfactor.exceptions import ParameterError
from selfactor.oracle import brute_force_entry, brute_force_group, simulate_instance
from selfactor.screening import (
    ScreenSpec,
    fit_hybrid,
    fit_screened,
    fit_sparse_l0,
    progressive_schedule,
    squeeze,
)
from selfactor.solver import ProblemSpec, SolverConfig, fit


def test_schedule_endpoints_and_length():
    q = progressive_schedule(1000, 50, 0.01)
    assert q[0] == 1000 and q[-1] == 50
    # t runs over 0..ceil(100 log 39)
    assert len(q) == math.ceil(100 * math.log(39)) + 1 == 368
    assert all(a >= b for a, b in zip(q, q[1:]))
    assert progressive_schedule(10, 10) == [10]
    assert progressive_schedule(10, 12) == [12]


@given(p=st.integers(2, 400), data=st.data(), alpha=st.floats(0.01, 2.0))
def test_schedule_property(p, data, alpha):
    d = data.draw(st.integers(1, p - 1))
    q = progressive_schedule(p, d, alpha)
    assert q[0] == p and q[-1] == d
    assert all(d <= v <= p for v in q)
    assert all(a >= b for a, b in zip(q, q[1:]))


def test_squeeze_maps():
    X = np.arange(12.0).reshape(3, 4)
    S = np.ones((4, 2))
    S2, X2, idx = squeeze(S, X)
    np.testing.assert_array_equal(idx, np.arange(4))
    assert X2.shape == X.shape
    S[1] = 0
    S2, X2, idx = squeeze(S, X)
    np.testing.assert_array_equal(idx, [0, 2, 3])
    np.testing.assert_array_equal(X2, X[:, [0, 2, 3]])
    S2[0] = 0
    S3, X3, idx = squeeze(S2, X2, idx)
    np.testing.assert_array_equal(idx, [2, 3])
    S3[1] = 0
    _, X4, idx = squeeze(S3, X3, idx)
    np.testing.assert_array_equal(idx, [2])
    np.testing.assert_array_equal(X4, X[:, [2]])
    with pytest.raises(ParameterError):
        squeeze(np.zeros((2, 1)), X[:, :2])


def test_zero_start_is_marginal_screening(rng):
    X, Y = random_instance(rng, p=12, m=3)
    res = fit_screened(X, Y, ScreenSpec(d=4, rank=3), SolverConfig(S_init="zero", max_outer=1))
    top = np.argsort(-np.linalg.norm(X.T @ Y, axis=1), kind="stable")[:4]
    np.testing.assert_array_equal(res.support, np.sort(top))


def test_full_budget_matches_plain_fit(rng):
    X, Y = random_instance(rng)
    a = fit_screened(X, Y, ScreenSpec(d=8, rank=2))
    b = fit(ProblemSpec(X, Y, rank=2, lam=0.0, rule="hard"))
    np.testing.assert_allclose(a.B, b.B, atol=1e-10)
    assert a.degenerate and fit_screened(X, Y, ScreenSpec(d=12, rank=2)).degenerate
    assert not fit_screened(X, Y, ScreenSpec(d=7, rank=2)).degenerate


def test_screen_matches_oracle():
    X, Y, _ = simulate_instance(30, 8, 4, 3, 2, sigma=1.0, snr=1.0, seed=11)
    oracle = brute_force_group(X, Y, 2, d=3)
    res = fit_screened(X, Y, ScreenSpec(d=3, rank=2), SolverConfig(n_starts=10))
    assert oracle.objective <= res.objective + 1e-12
    assert res.objective == pytest.approx(oracle.objective, abs=1e-6)


def test_constraints_hold(rng):
    X, Y = random_instance(rng, p=15)
    for progressive in (False, True):
        res = fit_screened(X, Y, ScreenSpec(d=4, rank=2, eta=0.3, progressive=progressive, alpha=0.5))
        assert res.support.size <= 4 and res.rank_achieved <= 2
        assert set(res.support) <= set(res.surviving_index_map)
        assert len(set(res.surviving_index_map)) == len(res.surviving_index_map)
        assert np.all(np.diff(res.objective_trace) <= 1e-9 * (1 + abs(res.objective_trace[0]))) or progressive
    res = fit_screened(X, Y, ScreenSpec(d=4, rank=2, progressive=True, alpha=0.5))
    assert res.schedule_trace[0] == 15 and res.schedule_trace[-1] == 4 and res.converged


@pytest.mark.parametrize("seed", range(5))
def test_squeeze_equivalence(seed):
    loc = np.random.default_rng(100 + seed)
    X, Y = random_instance(loc, n=20, p=10, m=3)
    a = fit_screened(X, Y, ScreenSpec(d=4, rank=2, squeeze=True))
    b = fit_screened(X, Y, ScreenSpec(d=4, rank=2, squeeze=False))
    assert a.squeeze_events and not b.squeeze_events
    assert len(a.objective_trace) == len(b.objective_trace)
    np.testing.assert_allclose(a.objective_trace, b.objective_trace, atol=1e-10)
    np.testing.assert_array_equal(a.support, b.support)


def test_sparse_l0_examples(rng):
    X, Y = random_instance(rng)
    full = fit_sparse_l0(X, Y, 16, 2)
    plain = fit(ProblemSpec(X, Y, rank=2, lam=0.0, rule="hard", mode="sparse"))
    np.testing.assert_allclose(full.B, plain.B, atol=1e-10)
    one = fit_sparse_l0(X, Y, 3, 1)
    rows = fit_screened(X, Y, ScreenSpec(d=3, rank=1))
    np.testing.assert_allclose(one.B, rows.B, atol=1e-10)
    res = fit_sparse_l0(X, Y, 5, 2, eta=0.2)
    assert np.count_nonzero(res.S) <= 5
    with pytest.raises(ParameterError):
        fit_sparse_l0(X, Y, 17, 2)


def test_sparse_l0_matches_entry_oracle():
    X, Y, _ = simulate_instance(25, 5, 3, 3, 2, sigma=1.0, snr=1.5, seed=2)
    oracle = brute_force_entry(X, Y, 4, 2)
    res = fit_sparse_l0(X, Y, 4, 2, config=SolverConfig(n_starts=10))
    assert oracle.objective <= res.objective + 1e-9
    assert res.objective == pytest.approx(oracle.objective, abs=1e-6)


def test_hybrid_budgets(rng):
    X, Y = random_instance(rng, p=12, m=4)
    res = fit_hybrid(X, Y, 4, 4, 2)
    assert set(res.support) <= set(res.surviving_index_map)
    assert np.count_nonzero(res.S) <= 4
    for d, d_elem in ((4, 3), (4, 9)):
        with pytest.raises(ParameterError):
            fit_hybrid(X, Y, d, d_elem, 2)


def test_hybrid_shape_audit():
    X, Y, _ = simulate_instance(80, 500, 6, 20, 3, sigma=1.0, snr=2.0, seed=5)
    res = fit_hybrid(X, Y, 100, 150, 3, config=SolverConfig(max_outer=200))
    assert np.count_nonzero(res.S) <= 150
    assert np.count_nonzero(np.any(res.S != 0, axis=1)) <= 100


def test_spec_validation():
    with pytest.raises(ParameterError):
        ScreenSpec(d=3, alpha=0)
    with pytest.raises(ParameterError):
        ScreenSpec(d=3, eta=-1)
    with pytest.raises(ParameterError):
        ScreenSpec(d=3, rank=2, d_elem=7)
