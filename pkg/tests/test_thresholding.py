import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from selfactor.exceptions import ParameterError
from selfactor.thresholding import (
    RULE_KINDS,
    ThresholdRule,
    apply_elementwise,
    apply_rowwise,
    apply_scalar,
    basic_penalty,
    make_rule,
    penalty_from_threshold,
    quantile_threshold,
    quantile_threshold_entries,
    quantile_threshold_rows,
)

RULES = [make_rule(k, eta=0.5 if k == "hard-ridge" else None) for k in RULE_KINDS]
reals = st.floats(-50, 50, allow_nan=False)
lams = st.floats(0, 10, allow_nan=False)


def test_scalar_examples():
    assert apply_scalar("soft", 1.5, 1) == 0.5
    assert apply_scalar(make_rule("hard-ridge", eta=1), 2.0, 1) == 1.0
    assert apply_scalar(make_rule("hard-ridge", eta=1), 0.5, 1) == 0.0


def test_invalid_parameters():
    with pytest.raises(ParameterError):
        make_rule("hard-ridge", eta=-1)
    with pytest.raises(ParameterError):
        make_rule("scad", shape=2.0)
    with pytest.raises(ParameterError):
        make_rule("mcp", shape=1.0)
    with pytest.raises(ParameterError):
        make_rule("soft", eta=0.3)
    with pytest.raises(ParameterError):
        make_rule("bogus")
    with pytest.raises(ParameterError):
        apply_scalar("soft", 1.0, -0.1)


def test_tokens():
    assert make_rule("hardridge").kind == "hard-ridge"
    assert make_rule("HARD_RIDGE", eta=0.5).eta == 0.5
    rule = make_rule("scad")
    assert rule.shape == 3.7 and make_rule(rule) is rule
    assert make_rule("hard-ridge", eta=0.5).to_token() == "rule=hard-ridge,eta=0.5"


def test_rowwise_examples():
    for rule in RULES:
        assert not np.any(apply_rowwise(rule, np.zeros((3, 2)), 1.3))
    np.testing.assert_allclose(apply_rowwise("soft", [[3.0, 4.0]], 1), [[2.4, 3.2]])
    A = np.array([[0.3, 0.4], [1.2, 1.6]])
    out = apply_rowwise("hard-ridge", A, 1)
    np.testing.assert_array_equal(out, [[0, 0], [1.2, 1.6]])


def test_elementwise_examples():
    np.testing.assert_allclose(apply_elementwise("soft", [[1.5, -0.2]], 1), [[0.5, 0]])
    A = np.array([[1.5, -0.2], [3.0, 0.0]])
    np.testing.assert_array_equal(apply_elementwise("soft", A, 0), A)
    np.testing.assert_array_equal(apply_elementwise("hard", [[0.9, 1.1]], 1), [[0, 1.1]])


def test_boundary_policies():
    assert apply_scalar("hard", 1.0, 1.0) == 0.0
    assert apply_scalar("hard-ridge", 1.0, 1.0) == 1.0
    keep = ThresholdRule("hard", boundary_policy="keep")
    assert keep(1.0, 1.0) == 1.0
    drop = ThresholdRule("hard-ridge", eta=1.0, boundary_policy="drop")
    assert drop(1.0, 1.0) == 0.0


def test_quantile_examples():
    np.testing.assert_array_equal(quantile_threshold([3, -1, 2], 2), [3, 0, 2])
    np.testing.assert_array_equal(quantile_threshold([3, -1, 2], 2, eta=1), [1.5, 0, 1])
    s = np.array([3.0, -1.0, 2.0])
    np.testing.assert_array_equal(quantile_threshold(s, 3, eta=0.5), s / 1.5)
    with pytest.raises(ParameterError):
        quantile_threshold(s, 0)
    with pytest.raises(ParameterError):
        quantile_threshold(s, 4)


def test_quantile_rows_examples():
    S = np.array([[3.0, 4.0], [1.0, 0.0], [0.0, 3.0]])
    out = quantile_threshold_rows(S, 1)
    np.testing.assert_array_equal(out, [[3, 4], [0, 0], [0, 0]])
    assert not np.any(quantile_threshold_rows(np.zeros((4, 2)), 2))
    tied = np.array([[1.0, 0.0], [0.0, 1.0], [0.6, 0.8], [0.1, 0.0]])
    out = quantile_threshold_rows(tied, 2)
    assert np.flatnonzero(np.any(out != 0, axis=1)).tolist() == [0, 1]


def test_quantile_random_ties_seeded():
    s = np.ones(6)
    a = quantile_threshold(s, 3, tie_policy="random", rng=np.random.default_rng(1))
    b = quantile_threshold(s, 3, tie_policy="random", rng=np.random.default_rng(1))
    np.testing.assert_array_equal(a, b)
    assert np.count_nonzero(a) == 3
    with pytest.raises(ParameterError):
        quantile_threshold(s, 3, tie_policy="random")


def test_quantile_entries_row_major():
    S = np.array([[1.0, 5.0], [4.0, 2.0]])
    np.testing.assert_array_equal(quantile_threshold_entries(S, 2), [[0, 5], [4, 0]])


def test_penalty_examples():
    assert penalty_from_threshold("soft", 2, 1).value == pytest.approx(2, abs=1e-8)
    assert penalty_from_threshold("hard", 2, 1).value == pytest.approx(0.5, abs=1e-8)
    assert penalty_from_threshold(make_rule("hard-ridge", eta=1), 2, 1).value == pytest.approx(2.25, abs=1e-8)
    assert make_rule("hard-ridge", eta=1).penalty(2.0, 1.0) == pytest.approx(2.25)


def test_penalty_slack_zero_on_range():
    rule = make_rule("hard-ridge", eta=1.0)
    # the range of the rule is {0} and |theta| >= lam / (1 + eta)
    assert rule.slack(0.6, 1.0) == 0.0
    assert rule.slack(0.2, 1.0) > 0
    pv = penalty_from_threshold(rule, 0.2, 1.0)
    assert pv.slack > 0 and pv.value == pytest.approx(rule.penalty(0.2, 1.0), abs=1e-8)


def test_basic_penalties():
    B = np.array([[1.0, 0], [0, 2.0], [0, 0], [3, 3]])
    assert basic_penalty("group-l0", B, 2) == 6
    assert basic_penalty("group-l1", [[3.0, 4.0]], 1) == 5
    assert basic_penalty("group-hard", [[0.3, 0.4]], 1) == pytest.approx(0.375)
    with pytest.raises(ParameterError):
        basic_penalty("group-l2", B, 1)


@pytest.mark.parametrize("rule", RULES, ids=lambda r: r.kind)
@given(s=reals, t=reals, lam=lams)
def test_definition_axioms(rule, s, t, lam):
    assert rule(-s, lam) == -rule(s, lam)
    lo, hi = min(s, t), max(s, t)
    assert rule(lo, lam) <= rule(hi, lam) + 1e-12
    a = abs(s)
    assert -1e-12 <= rule(a, lam) <= a + 1e-12


@pytest.mark.parametrize("rule", RULES, ids=lambda r: r.kind)
def test_divergence(rule):
    big = np.array([1e3, 1e6, 1e9])
    assert np.all(np.diff(rule(big, 2.0)) > 0) and rule(1e9, 2.0) > 1e8


@pytest.mark.parametrize("rule", RULES, ids=lambda r: r.kind)
@given(a=st.floats(0, 20), b=st.floats(0, 20), lam=st.floats(0.01, 5))
def test_penalty_monotone_in_magnitude(rule, a, b, lam):
    lo, hi = min(a, b), max(a, b)
    assert rule.penalty(lo, lam) <= rule.penalty(hi, lam) + 1e-12


@pytest.mark.parametrize("rule", RULES, ids=lambda r: r.kind)
@given(theta=st.floats(-10, 10), lam=st.sampled_from([0.1, 1.0, 5.0]))
def test_quadrature_matches_closed_form(rule, theta, lam):
    assert penalty_from_threshold(rule, theta, lam).value == pytest.approx(float(rule.penalty(theta, lam)), abs=1e-6)


@given(
    A=st.lists(st.lists(st.floats(-10, 10), min_size=3, max_size=3), min_size=1, max_size=6),
    lam=st.floats(0, 5),
)
def test_rowwise_parallel_and_norm(A, lam):
    A = np.array(A)
    rule = make_rule("scad")
    out = apply_rowwise(rule, A, lam)
    norms = np.linalg.norm(A, axis=1)
    np.testing.assert_allclose(np.linalg.norm(out, axis=1), rule(norms, lam), atol=1e-9)
    for a, o, nrm in zip(A, out, norms):
        if nrm > 0:
            c = o @ a / nrm**2
            assert c >= -1e-12
            np.testing.assert_allclose(o, c * a, atol=1e-9)


@given(s=st.lists(st.floats(-100, 100), min_size=1, max_size=30, unique=True), data=st.data())
def test_quantile_keeps_largest(s, data):
    s = np.array(s)
    d = data.draw(st.integers(1, s.size))
    out = quantile_threshold(s, d)
    kept = out != 0
    assert kept.sum() == min(d, np.count_nonzero(s))
    if kept.any() and (~kept).any():
        assert np.abs(s[kept]).min() >= np.abs(s[~kept]).max()
