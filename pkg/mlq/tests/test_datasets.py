"""
Tests for dataset ingestion, splitting, save-back and feature scaling.
"""
import numpy as np
import pytest

from mlq.services.datasets import MISSING_MARKER, load_dataset, save_prediction, split_index
from mlq.services.ml_errors import DataError
from mlq.services.synthetic import write_synthetic
from mlq.utils.helpers import parse_timestamp
from mlq.utils.preprocessing import fit_scaler
from conftest import APPLIANCE_FEATURES, FIXED_NOW, make_spec

POINTS = (("x", "Double"), ("y", "Double"), ("ok", "Boolean"))


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_columns_follow_feature_order(tmp_path):
    path = write(tmp_path, "1.5,2,true\n3,4.25,false\n")
    data = load_dataset(make_spec(POINTS), path, test_size=0.5)
    assert data.X.tolist() == [[1.5, 2.0], [3.0, 4.25]]
    assert data.y.tolist() == ["true", "false"]
    assert data.split == 1


def test_rows_with_missing_cells_are_excluded(tmp_path):
    path = write(tmp_path, f"1,2,true\n{MISSING_MARKER},3,false\n4,5,{MISSING_MARKER}\n6,7,false\n")
    data = load_dataset(make_spec(POINTS), path)
    assert data.rows == 2
    assert data.excluded == 2


def test_column_count_must_match(tmp_path):
    path = write(tmp_path, "1,2\n3,4\n")
    with pytest.raises(DataError, match="expected 3 column"):
        load_dataset(make_spec(POINTS), path)


def test_bad_cell_reports_row_and_column(tmp_path):
    path = write(tmp_path, "1,2,true\n1,abc,false\n")
    with pytest.raises(DataError, match="row 2, column 2"):
        load_dataset(make_spec(POINTS), path)


def test_empty_and_missing_files(tmp_path):
    with pytest.raises(DataError):
        load_dataset(make_spec(POINTS), write(tmp_path, ""))
    with pytest.raises(DataError):
        load_dataset(make_spec(POINTS), str(tmp_path / "absent.csv"))
    with pytest.raises(DataError, match="no dataset"):
        load_dataset(make_spec(POINTS))


def test_timestamps_lead_each_row(tmp_path):
    path = tmp_path / "regress.csv"
    write_synthetic(str(path), "smarthome-regress", seed=3, rows=20, timestamps=True)
    spec = make_spec(APPLIANCE_FEATURES + (("washer_next", "Double"),), timestamps=True)
    data = load_dataset(spec, str(path))
    assert data.X.shape == (20, 10)
    assert len(data.timestamps) == 20
    assert data.timestamps[1] > data.timestamps[0]


def test_bad_timestamp(tmp_path):
    path = write(tmp_path, "2024-01-01,1,2,true\n")
    spec = make_spec(POINTS, timestamps=True)
    with pytest.raises(DataError, match="timestamp"):
        load_dataset(spec, path)


@pytest.mark.parametrize("rows, share, expected", [(10, 0.2, 8), (1000, 0.2, 800), (7, 0.0, 7), (5, 0.5, 3)])
def test_split_index(rows, share, expected):
    assert split_index(rows, share) == expected


def test_sequential_split_keeps_order_and_shuffle_is_seeded(tmp_path):
    path = write(tmp_path, "".join(f"{i},{i},true\n" for i in range(50)))
    ordered = load_dataset(make_spec(POINTS, sequential=True), path)
    assert ordered.X[:, 0].tolist() == [float(i) for i in range(50)]
    one = load_dataset(make_spec(POINTS, sequential=False), path)
    two = load_dataset(make_spec(POINTS, sequential=False), path)
    assert one.X.tolist() == two.X.tolist()
    assert one.X[:, 0].tolist() != ordered.X[:, 0].tolist()
    assert sorted(one.X[:, 0].tolist()) == ordered.X[:, 0].tolist()


def test_string_features_are_encoded_stably(tmp_path):
    path = write(tmp_path, "10.0.0.1,5,true\n10.0.0.1,7,false\n10.0.0.2,9,true\n")
    spec = make_spec((("ip", "String"), ("code", "Int32"), ("bad", "Boolean")))
    data = load_dataset(spec, path)
    assert data.X[0, 0] == data.X[1, 0]
    assert data.X[0, 0] != data.X[2, 0]
    assert 0.0 <= data.X[2, 0] < 1.0


def test_save_prediction_appends_a_row(tmp_path):
    path = write(tmp_path, "")
    spec = make_spec(POINTS, timestamps=True)
    row = save_prediction(spec, path, [1.5, 2.0], True, now=FIXED_NOW)
    save_prediction(spec, path, [3.0, 4.0], None, now=FIXED_NOW)
    lines = (tmp_path / "data.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == row
    assert len(lines) == 2
    fields = lines[0].split(",")
    assert parse_timestamp(fields[0]) == FIXED_NOW
    assert fields[1:] == ["1.5", "2.0", "true"]
    assert lines[1].endswith(MISSING_MARKER)


def test_standard_scaler_on_train_split(tmp_path):
    """Scaled train columns have zero mean and unit population deviation."""
    path = tmp_path / "classify.csv"
    write_synthetic(str(path), "smarthome-classify", seed=10, rows=500)
    data = load_dataset(make_spec(APPLIANCE_FEATURES + (("washer_on", "Boolean"),)), str(path))
    scaler = fit_scaler("standard", data.X_train)
    scaled = scaler.transform(data.X_train)
    assert np.all(np.abs(scaled.mean(axis=0)) < 1e-9)
    assert np.all(np.abs(scaled.std(axis=0) - 1.0) < 1e-9)


def test_min_max_scaler_maps_train_range_to_unit_interval():
    X = np.array([[1.0, -2.0], [3.0, 0.0], [2.0, 2.0]])
    scaled = fit_scaler("min_max", X).transform(X)
    assert scaled.min(axis=0).tolist() == [0.0, 0.0]
    assert scaled.max(axis=0).tolist() == [1.0, 1.0]


def test_constant_columns_pass_through():
    X = np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]])
    scaler = fit_scaler("standard", X)
    assert scaler.constant_columns == (1,)
    assert scaler.transform(X)[:, 1].tolist() == [5.0, 5.0, 5.0]


def test_identity_and_unknown_scalers():
    X = np.array([[1.0], [2.0]])
    assert fit_scaler("none", X).transform(X).tolist() == X.tolist()
    with pytest.raises(ValueError):
        fit_scaler("robust", X)
