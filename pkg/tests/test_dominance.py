import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relimp.corrmat import AugmentedProblem, subset_r_squared, validate
from relimp.dominance import (
    gda_reallocation,
    general_dominance,
    popcount,
    shapley_from_table,
    subset_engine,
)
from relimp.errors import TooManyPredictors, ValidationError
from relimp.ortho import METHODS, johnson, orthogonalize

from conftest import random_corr_values, random_problem


def permutation_oracle(problem: AugmentedProblem) -> np.ndarray:
    """Average sequential R^2 increments over all p! orderings."""
    p = problem.p
    total = np.zeros(p)
    orders = list(itertools.permutations(range(p)))
    for order in orders:
        prev = 0.0
        for k, i in enumerate(order):
            cur = subset_r_squared(problem, order[: k + 1])
            total[i] += cur - prev
            prev = cur
    return total / len(orders)


def test_popcount():
    assert popcount(np.array([0, 1, 2, 3, 7, 1023])).tolist() == [0, 1, 1, 2, 3, 10]


def test_identity_gd_is_squared_correlations():
    rho = np.array([0.4, -0.3, 0.2, 0.1])
    prob = AugmentedProblem.from_correlations(validate(np.eye(4)), rho)
    np.testing.assert_allclose(general_dominance(prob).values, rho**2, atol=1e-14)


def test_worked_example_closed_form(worked):
    r1, r2, r2full = 0.7, 0.5, 0.5
    closed = [0.5 * (r1**2 + r2full - r2**2), 0.5 * (r2**2 + r2full - r1**2)]
    np.testing.assert_allclose(general_dominance(worked).values, closed, atol=1e-12)
    np.testing.assert_allclose(closed, [0.37, 0.13], atol=1e-12)


def test_p3_weights_follow_expansion(rng):
    prob = random_problem(rng, 3)
    r = lambda *s: subset_r_squared(prob, s)
    gd1 = (r(0) + 0.5 * (r(0, 1) - r(1)) + 0.5 * (r(0, 2) - r(2)) + (r(0, 1, 2) - r(1, 2))) / 3
    assert general_dominance(prob).values[0] == pytest.approx(gd1, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_permutation_oracle(p, seed):
    prob = random_problem(np.random.default_rng(seed), p)
    gd = general_dominance(prob).values
    np.testing.assert_allclose(gd, permutation_oracle(prob), atol=1e-10)
    assert gd.sum() == pytest.approx(prob.r_squared, abs=1e-8)


def test_permutation_symmetry(rng):
    prob = random_problem(rng, 6)
    gd = general_dominance(prob).values
    for _ in range(5):
        perm = rng.permutation(6)
        c = validate(prob.corr.values[np.ix_(perm, perm)])
        swapped = AugmentedProblem.from_correlations(c, prob.rho_xy[perm])
        np.testing.assert_allclose(general_dominance(swapped).values, gd[perm], atol=1e-10)


def test_dummy_predictor(rng):
    prob = random_problem(rng, 4)
    big = np.eye(5)
    big[:4, :4] = prob.corr.values
    padded = AugmentedProblem.from_correlations(validate(big), np.append(prob.rho_xy, 0.0))
    gd = general_dominance(padded).values
    assert abs(gd[4]) < 1e-10
    np.testing.assert_allclose(gd[:4], general_dominance(prob).values, atol=1e-10)


def test_engine_matches_direct_solves(worked, rng):
    table = subset_engine(worked.corr, worked.rho_xy)
    assert table[0, 0] == 0.0
    assert table[0b11, 0] == pytest.approx(0.5, abs=1e-14)
    prob = random_problem(rng, 5)
    table = subset_engine(prob.corr, prob.rho_xy)[:, 0]
    for mask in range(32):
        s = [i for i in range(5) if mask >> i & 1]
        assert table[mask] == pytest.approx(subset_r_squared(prob, s), abs=1e-12)


def test_engine_rejects_inconsistent_targets(worked):
    with pytest.raises(ValidationError):
        subset_engine(worked.corr, [0.95, -0.95])


def test_engine_trace_identity(rng):
    """Summed R^2 of the orthogonal predictors on any subset is the subset size."""
    for p in (3, 5, 7):
        c = validate(random_corr_values(rng, p))
        for m in METHODS:
            table = subset_engine(c, orthogonalize(c, m).loading)
            sizes = popcount(np.arange(1 << p))
            np.testing.assert_allclose(table.sum(axis=1), sizes, atol=1e-8)


def test_gda_examples(worked):
    np.testing.assert_allclose(gda_reallocation(johnson(validate(np.eye(3))), validate(np.eye(3))).values, np.eye(3), atol=1e-14)
    a = gda_reallocation(johnson(worked.corr), worked.corr).values
    np.testing.assert_allclose(a, [[0.9, 0.1], [0.1, 0.9]], atol=1e-12)


def test_gda_row_and_column_sums(rng):
    for p in range(2, 9):
        c = validate(random_corr_values(rng, p))
        a = gda_reallocation(johnson(c), c)
        np.testing.assert_allclose(a.values.sum(axis=0), 1.0, atol=1e-8)
        np.testing.assert_allclose(a.row_sums(), 1.0, atol=1e-8)


def test_batched_shapley_matches_columnwise(rng):
    c = validate(random_corr_values(rng, 4))
    targets = johnson(c).loading
    both = shapley_from_table(subset_engine(c, targets))
    for j in range(4):
        np.testing.assert_allclose(both[:, j], shapley_from_table(subset_engine(c, targets[:, j]))[:, 0], atol=1e-15)


def test_size_limits():
    with pytest.raises(TooManyPredictors):
        subset_engine(validate(np.eye(21)), np.zeros(21))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        table = subset_engine(validate(np.eye(16)), np.full(16, 0.1))
    assert any("sub-models" in str(w.message) for w in caught)
    assert table.shape == (1 << 16, 1)
    gd = shapley_from_table(table)[:, 0]
    np.testing.assert_allclose(gd, 0.01, atol=1e-12)


def test_shapley_rejects_bad_table():
    with pytest.raises(ValidationError):
        shapley_from_table(np.zeros((6, 1)))


def test_efficiency_many(rng):
    for _ in range(50):
        prob = random_problem(rng, int(rng.integers(2, 9)))
        assert math.isclose(general_dominance(prob).total, prob.r_squared, abs_tol=1e-8)
