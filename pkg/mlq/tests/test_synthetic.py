"""
Tests for the seeded synthetic dataset presets.
"""
import pytest

from mlq.services.ml_errors import PresetError
from mlq.services.synthetic import OFF_DRAW, ON_DRAW, PRESETS, WASHER, gen_synthetic, write_synthetic
from mlq.utils.helpers import parse_timestamp


def rows_of(text):
    return [line.split(",") for line in text.splitlines()]


@pytest.mark.parametrize("preset", sorted(PRESETS))
def test_same_seed_same_bytes(preset):
    assert gen_synthetic(preset, seed=4, rows=50) == gen_synthetic(preset, seed=4, rows=50)
    assert gen_synthetic(preset, seed=4, rows=50) != gen_synthetic(preset, seed=5, rows=50)


@pytest.mark.parametrize("preset, columns", [
    ("smarthome-classify", 11),
    ("smarthome-cluster", 11),
    ("smarthome-regress", 11),
    ("line", 2),
    ("separable-2d", 3),
    ("ping-clients", 3),
])
def test_column_counts(preset, columns):
    rows = rows_of(gen_synthetic(preset, rows=20))
    assert len(rows) == 20
    assert {len(r) for r in rows} == {columns}
    unlabeled = rows_of(gen_synthetic(preset, rows=20, target=False))
    assert {len(r) for r in unlabeled} == {columns - 1}


def test_timestamps_are_leading_and_increasing():
    rows = rows_of(gen_synthetic("smarthome-regress", rows=5, timestamps=True))
    stamps = [parse_timestamp(r[0]) for r in rows]
    assert stamps == sorted(stamps)
    assert (stamps[1] - stamps[0]).total_seconds() == 8


def test_washer_state_is_separable():
    for row in rows_of(gen_synthetic("smarthome-classify", seed=7, rows=300)):
        washer = float(row[WASHER])
        assert washer < OFF_DRAW[1] or washer > ON_DRAW[0]
        assert row[-1] == ("true" if washer > ON_DRAW[0] else "false")


def test_aggregate_is_the_sum_plus_small_noise():
    for row in rows_of(gen_synthetic("smarthome-classify", seed=2, rows=100)):
        loads = [float(v) for v in row[:9]]
        assert abs(float(row[9]) - sum(loads)) < 1.0 + 1e-6


def test_ping_clients_label_follows_the_code():
    for ip, code, malicious in rows_of(gen_synthetic("ping-clients", rows=200)):
        assert ip.startswith("10.0.")
        assert malicious == ("true" if int(code) > 500 else "false")


def test_unknown_preset_and_bad_row_count():
    with pytest.raises(PresetError, match="unknown preset"):
        gen_synthetic("weather")
    with pytest.raises(PresetError):
        gen_synthetic("line", rows=0)


def test_write_synthetic_creates_directories(tmp_path):
    path = tmp_path / "nested" / "dir" / "line.csv"
    text = write_synthetic(str(path), "line", seed=1, rows=3)
    assert path.read_text(encoding="utf-8") == text
