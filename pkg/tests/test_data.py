import numpy as np
import pytest

from factorcov.data import (
    FactorModelEstimate,
    ObservationMatrix,
    SubsetSelector,
    TrueModel,
    load_panel_csv,
    restrict,
    save_matrix_csv,
    validate,
)


def test_restrict_permutes_rows():
    Y = ObservationMatrix(np.array([[0., 1], [10, 11], [20, 21]]))
    out = restrict(Y, SubsetSelector((2, 0)))
    np.testing.assert_array_equal(out.values, [[20, 21], [0, 1]])
    assert out.T == Y.T


def test_restrict_identity_returns_same_object():
    Y = ObservationMatrix(np.arange(6.0).reshape(3, 2))
    assert restrict(Y, SubsetSelector((0, 1, 2))) is Y


def test_restrict_out_of_range():
    Y = ObservationMatrix(np.zeros((3, 2)))
    with pytest.raises(ValueError, match="out of range"):
        restrict(Y, SubsetSelector((5,)))


def test_restrict_idempotent_on_projection():
    rng = np.random.default_rng(0)
    Y = ObservationMatrix(rng.standard_normal((5, 4)))
    S = SubsetSelector((3, 1, 4))
    once = restrict(Y, S)
    twice = restrict(once, SubsetSelector(tuple(range(S.size))))
    np.testing.assert_array_equal(once.values, twice.values)


def test_validate_ok():
    assert validate(ObservationMatrix(np.ones((2, 3)))) == []


def test_validate_reports_nan_location():
    vals = np.ones((2, 3))
    vals[1, 2] = np.nan
    msgs = validate(ObservationMatrix(vals))
    assert any("(1,2)" in m for m in msgs)


def test_validate_requires_two_time_points():
    msgs = validate(ObservationMatrix(np.ones((2, 1))))
    assert any("T >= 2" in m for m in msgs)


def test_validate_duplicate_ids():
    msgs = validate(ObservationMatrix(np.ones((2, 2)), variable_ids=("a", "a")))
    assert any("unique" in m for m in msgs)


def test_values_are_frozen():
    Y = ObservationMatrix(np.ones((2, 2)))
    with pytest.raises(ValueError):
        Y.values[0, 0] = 5.0


def test_subset_selector_rejects_duplicates_and_empty():
    with pytest.raises(ValueError):
        SubsetSelector((1, 1))
    with pytest.raises(ValueError):
        SubsetSelector(())


def test_subset_parse_ranges():
    S = SubsetSelector.parse("0..3,7,10..11")
    assert S.indices == (0, 1, 2, 3, 7, 10, 11)


def test_estimate_method_tag_checked():
    m = np.eye(2)
    with pytest.raises(ValueError, match="method tag"):
        FactorModelEstimate(np.ones((3, 1)), np.ones((2, 1)), m, m, np.array([1.0]), "bogus")


def test_estimate_invariant_checks():
    T, K = 8, 2
    rng = np.random.default_rng(1)
    q, _ = np.linalg.qr(rng.standard_normal((T, K)))
    F = np.sqrt(T) * q
    B = rng.standard_normal((3, K))
    m = np.eye(3)
    est = FactorModelEstimate(F, B, m, m, np.array([2.0, 1.0]), "method1")
    assert est.check_invariants() == []
    bad = FactorModelEstimate(F + 0.1, B, m, m, np.array([1.0, 2.0]), "method1")
    problems = bad.check_invariants()
    assert any("orthonormal" in p for p in problems)
    assert any("eig_diag" in p for p in problems)


def test_true_model_reconstruction():
    rng = np.random.default_rng(2)
    B = rng.standard_normal((4, 2))
    model = TrueModel.from_parts(B, rng.standard_normal((6, 2)), np.eye(4))
    assert model.check_invariants() == []


def test_csv_roundtrip_with_header_and_ids(tmp_path):
    path = tmp_path / "panel.csv"
    path.write_text("id,t1,t2,t3\ng1,1.5,2.0,3.25\ng2,-1,0,4\n")
    Y = load_panel_csv(path)
    assert Y.variable_ids == ("g1", "g2")
    np.testing.assert_array_equal(Y.values, [[1.5, 2.0, 3.25], [-1, 0, 4]])


def test_csv_plain_numeric_body(tmp_path):
    path = tmp_path / "plain.csv"
    path.write_text("1,2\n3,4\n")
    Y = load_panel_csv(path)
    assert Y.variable_ids is None
    np.testing.assert_array_equal(Y.values, [[1, 2], [3, 4]])


def test_csv_strict_rejects_missing_cell(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1,2\n3,\n")
    with pytest.raises(ValueError, match="line 2"):
        load_panel_csv(path)


def test_csv_reports_nonnumeric_position(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("id,t1,t2\ng1,1,2\ng2,1,oops\n")
    with pytest.raises(ValueError, match="line 3"):
        load_panel_csv(path)


def test_save_matrix_roundtrips_exactly(tmp_path):
    rng = np.random.default_rng(3)
    m = rng.standard_normal((3, 3)) / 3.0
    path = tmp_path / "m.csv"
    save_matrix_csv(path, m)
    back = load_panel_csv(path, strict=False)
    np.testing.assert_array_equal(back.values, m)
