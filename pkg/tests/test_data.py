import numpy as np
import pytest

from pdpfi.data import Dataset, full_view, load_csv, view
from pdpfi.errors import (EmptyFile, IndexOutOfBounds, LengthMismatch, MissingTarget, NonFiniteValue,
                          ParseError, ValidationError)
from conftest import write_csv


def test_load_roundtrip(tmp_path, small_data):
    p = tmp_path / "d.csv"
    small_data.to_csv(p)
    back = load_csv(p, "y")
    assert back.feature_names == small_data.feature_names
    np.testing.assert_array_equal(back.features, small_data.features)
    np.testing.assert_array_equal(back.target, small_data.target)


def test_target_column_anywhere(tmp_path):
    p = write_csv(tmp_path / "d.csv", ["u", "y", "v"], [[1, 2, 3], [4, 5, 6]])
    d = load_csv(p, "y")
    assert d.feature_names == ("u", "v")
    np.testing.assert_array_equal(d.features, [[1, 3], [4, 6]])
    np.testing.assert_array_equal(d.target, [2, 5])


def test_semicolon_delimiter(tmp_path):
    p = tmp_path / "w.csv"
    p.write_text('"fixed acidity";"alcohol";"quality"\n7.4;9.4;5\n7.8;9.8;5\n')
    d = load_csv(p, "quality")
    assert d.feature_names == ("fixed acidity", "alcohol")
    assert d.n == 2


def test_missing_target(tmp_path):
    p = write_csv(tmp_path / "d.csv", ["a", "b"], [[1, 2]])
    with pytest.raises(MissingTarget):
        load_csv(p, "y")


def test_empty(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("")
    with pytest.raises(EmptyFile):
        load_csv(p, "y")
    p.write_text("a,y\n")
    with pytest.raises(EmptyFile):
        load_csv(p, "y")


def test_parse_error_position(tmp_path):
    p = write_csv(tmp_path / "d.csv", ["a", "y"], [[1, 2], [3, "x"]])
    with pytest.raises(ParseError) as e:
        load_csv(p, "y")
    assert (e.value.row, e.value.col) == (1, 1)


def test_non_finite(tmp_path):
    p = write_csv(tmp_path / "d.csv", ["a", "y"], [["nan", 2]])
    with pytest.raises(NonFiniteValue) as e:
        load_csv(p, "y")
    assert (e.value.row, e.value.col) == (0, 0)


def test_validation_errors_are_value_errors():
    assert issubclass(ParseError, ValidationError)
    assert issubclass(ValidationError, ValueError)


def test_dataset_checks():
    with pytest.raises(LengthMismatch):
        Dataset(np.zeros((3, 2)), ("a", "b"), np.zeros(4))
    with pytest.raises(ValidationError):
        Dataset(np.zeros((3, 2)), ("a",), np.zeros(3))


def test_dataset_is_read_only(small_data):
    with pytest.raises(ValueError):
        small_data.features[0, 0] = 1.0


def test_view_duplicates_and_bounds(small_data):
    v = view(small_data, [3, 3, 0])
    np.testing.assert_array_equal(v.X, small_data.features[[3, 3, 0]])
    assert len(v) == 3
    with pytest.raises(IndexOutOfBounds):
        view(small_data, [small_data.n])
    with pytest.raises(IndexOutOfBounds):
        view(small_data, [-1])
    assert len(full_view(small_data)) == small_data.n


def test_feature_index(small_data):
    assert small_data.feature_index("b") == 1
    assert small_data.feature_index(2) == 2
    with pytest.raises(IndexOutOfBounds):
        small_data.feature_index(3)
    with pytest.raises(ValidationError):
        small_data.feature_index("zzz")
