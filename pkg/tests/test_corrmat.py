import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relimp.corrmat import (
    AugmentedProblem,
    classify_scenario,
    equicorrelation,
    ingest_dataset,
    read_data_csv,
    read_matrix_csv,
    scenario_label,
    subset_r_squared,
    validate,
    vif,
)
from relimp.errors import (
    DiagonalNotUnit,
    IndexOutOfRange,
    MissingValues,
    NotPositiveDefinite,
    NotSquare,
    OffDiagonalOutOfRange,
    RankDeficient,
    ResponseColumnNotFound,
)

from conftest import random_corr_values


def test_identity_is_valid():
    c = validate(np.eye(3))
    np.testing.assert_allclose(c.spectrum, [1, 1, 1], atol=1e-14)


def test_equicorrelation_spectrum_closed_form():
    c = validate(equicorrelation(3, 0.5))
    # 1 + (p-1) rho, then 1 - rho twice
    np.testing.assert_allclose(c.spectrum, [2.0, 0.5, 0.5], atol=1e-12)


def test_negative_equicorrelation_rejected_with_lambda_min():
    with pytest.raises(NotPositiveDefinite) as info:
        validate(equicorrelation(3, -0.6))
    assert info.value.lambda_min == pytest.approx(1 - 2 * 0.6, abs=1e-12)


@pytest.mark.parametrize(
    "matrix, error",
    [
        (np.ones((2, 3)), NotSquare),
        (np.array([[1.0, 0.2], [0.2, 1.1]]), DiagonalNotUnit),
        (np.array([[1.0, 1.2], [1.2, 1.0]]), OffDiagonalOutOfRange),
        (np.array([[1.0, 1.0], [1.0, 1.0]]), NotPositiveDefinite),
    ],
)
def test_validation_errors(matrix, error):
    with pytest.raises(error):
        validate(matrix)


def test_asymmetry_is_averaged():
    c = validate(np.array([[1.0, 0.3], [0.5, 1.0]]))
    assert c.values[0, 1] == c.values[1, 0] == pytest.approx(0.4)


def test_values_are_read_only():
    c = validate(equicorrelation(3, 0.2))
    with pytest.raises(ValueError):
        c.values[0, 1] = 0.0


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 9), st.integers(0, 2**32 - 1))
def test_spectral_invariants(p, seed):
    c = validate(random_corr_values(np.random.default_rng(seed), p))
    v, lam = c.eigvecs, c.spectrum
    assert np.all(np.diff(lam) <= 1e-12)
    assert np.trace(c.values) == pytest.approx(p, abs=1e-10)
    np.testing.assert_allclose(v.T @ v, np.eye(p), atol=1e-10)
    np.testing.assert_allclose((v * lam) @ v.T, c.values, atol=1e-10)
    # sign convention: the largest-magnitude entry of each eigenvector is positive
    idx = np.argmax(np.abs(v), axis=0)
    assert np.all(v[idx, np.arange(p)] > 0)
    np.testing.assert_allclose(c.sqrt @ c.sqrt, c.values, atol=1e-10)
    np.testing.assert_allclose(c.inv_sqrt @ c.values @ c.inv_sqrt, np.eye(p), atol=1e-8)
    assert np.all(vif(c) >= 1 - 1e-12)


def test_vif_examples():
    np.testing.assert_allclose(vif(validate(np.eye(4))), np.ones(4))
    np.testing.assert_allclose(vif(validate(equicorrelation(2, 0.6))), [1 / (1 - 0.36)] * 2)
    rho, p = 0.5, 3
    closed = (1 + (p - 2) * rho) / ((1 - rho) * (1 + (p - 1) * rho))
    np.testing.assert_allclose(vif(validate(equicorrelation(p, rho))), [closed] * p)
    assert closed == pytest.approx(1.5)


def test_subset_r_squared_worked_example(worked):
    assert subset_r_squared(worked, []) == 0.0
    r1, r2, rho = 0.7, 0.5, 0.6
    closed = (r1**2 - 2 * rho * r1 * r2 + r2**2) / (1 - rho**2)
    assert subset_r_squared(worked, [0, 1]) == pytest.approx(closed, abs=1e-14)
    assert closed == pytest.approx(0.5)
    assert subset_r_squared(worked, [0]) == pytest.approx(0.49)
    assert worked.r_squared == pytest.approx(0.5, abs=1e-12)


def test_subset_r_squared_out_of_range(worked):
    with pytest.raises(IndexOutOfRange):
        subset_r_squared(worked, [2])


def test_subset_r_squared_monotone(rng):
    from conftest import random_problem

    prob = random_problem(rng, 5)
    subsets = [s for k in range(6) for s in itertools.combinations(range(5), k)]
    for s in subsets:
        for t in subsets:
            if set(s) <= set(t):
                assert subset_r_squared(prob, s) <= subset_r_squared(prob, t) + 1e-12


def test_augmented_problem_rejects_impossible_response():
    corr = validate(equicorrelation(2, 0.9))
    with pytest.raises(NotPositiveDefinite):
        AugmentedProblem.from_correlations(corr, [0.9, -0.9])


def test_augmented_round_trip(worked):
    again = AugmentedProblem.from_augmented(worked.augmented())
    np.testing.assert_allclose(again.rho_xy, worked.rho_xy)
    assert again.r_squared == pytest.approx(worked.r_squared)


@pytest.mark.parametrize(
    "l_ratio, v_ratio, label",
    [(0.88, 0.27, "1.1"), (1.66, 0.50, "1.2"), (1.5, 4.0, "2.2"), (1.2, 4.5, "2.1"), (1.4999, 3.9999, "1.1")],
)
def test_scenario_label(l_ratio, v_ratio, label):
    assert scenario_label(l_ratio, v_ratio) == label


def test_classify_scenario_matches_recomputation(rng):
    for p in range(2, 8):
        c = validate(random_corr_values(rng, p))
        s = classify_scenario(c)
        assert s.lambda1_ratio == pytest.approx(np.linalg.eigvalsh(c.values)[-1] / np.sqrt(p), rel=1e-12)
        assert s.vif_ratio == float(np.max(vif(c)) / p)
        assert s.label == scenario_label(s.lambda1_ratio, s.vif_ratio)


def test_ingest_toy_dataset_against_hand_correlations():
    rows = np.array(
        [
            [1.0, 2.0, 0.5, 3.0],
            [2.0, 1.0, 1.5, 2.0],
            [3.0, 4.0, 0.0, 5.0],
            [4.0, 3.0, 2.0, 4.5],
            [0.0, 1.0, 1.0, 1.0],
        ]
    )
    names = ["a", "b", "c", "y"]
    prob = ingest_dataset(rows, names, "y")
    expected = np.corrcoef(rows, rowvar=False)
    np.testing.assert_allclose(prob.corr.values, expected[:3, :3], atol=1e-12)
    np.testing.assert_allclose(prob.rho_xy, expected[:3, 3], atol=1e-12)
    assert prob.labels == ("a", "b", "c")


def test_ingest_moves_response_last():
    rng = np.random.default_rng(3)
    rows = rng.standard_normal((30, 4))
    prob = ingest_dataset(rows, ["y", "a", "b", "c"], "y")
    expected = np.corrcoef(rows, rowvar=False)
    np.testing.assert_allclose(prob.rho_xy, expected[0, 1:], atol=1e-12)


def test_ingest_orthogonal_predictors_give_identity():
    x = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=float)
    y = np.array([1.0, 2.0, 0.0, 3.0])
    prob = ingest_dataset(np.column_stack([x, y]), ["a", "b", "y"], "y")
    np.testing.assert_allclose(prob.corr.values, np.eye(2), atol=1e-12)


def test_ingest_errors():
    rows = np.array([[1.0, 2.0, 1.0], [2.0, 4.0, 0.0], [3.0, 6.0, 2.0], [4.0, 8.0, 1.0]])
    with pytest.raises(RankDeficient):
        ingest_dataset(rows, ["a", "b", "y"], "y")
    with pytest.raises(ResponseColumnNotFound):
        ingest_dataset(rows, ["a", "b", "y"], "z")
    bad = rows.copy()
    bad[1, 0] = np.nan
    with pytest.raises(MissingValues):
        ingest_dataset(bad, ["a", "b", "y"], "y")
    with pytest.raises(RankDeficient):
        ingest_dataset(rows[:2], ["a", "b", "y"], "y")


def test_read_matrix_csv_variants(tmp_path):
    plain = tmp_path / "plain.csv"
    plain.write_text("1,0.2\n0.2,1\n")
    labels, m = read_matrix_csv(plain)
    assert labels is None and m.shape == (2, 2)

    header = tmp_path / "header.csv"
    header.write_text("a,b,y\n1,0.2,0.3\n0.2,1,0.1\n0.3,0.1,1\n")
    labels, m = read_matrix_csv(header)
    assert labels == ["a", "b", "y"]

    both = tmp_path / "both.csv"
    both.write_text(",a,y\na,1,0.3\ny,0.3,1\n")
    labels, m = read_matrix_csv(both)
    assert labels == ["a", "y"] and m[0, 1] == 0.3


def test_read_data_csv_missing_tokens(tmp_path):
    f = tmp_path / "d.csv"
    f.write_text("a,b\n1,2\nNA,3\n")
    header, values = read_data_csv(f)
    assert header == ["a", "b"] and np.isnan(values[1, 0])
