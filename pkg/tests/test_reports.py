"""Tests for result serialization."""

import csv
import json
from pathlib import Path

import pytest

from kdesign.models import ReportFormat, RunConfig
from kdesign.reports import ResultRecord, to_json, write_report


@pytest.fixture
def record() -> ResultRecord:
    """A small record without rows."""
    return ResultRecord(
        op="verify fact2",
        params={"n": 2, "k": 2},
        estimate=0.4,
        std_error=0.01,
        samples=100,
        master_seed=3,
        config=RunConfig(subcommand="verify fact2", params={"n": 2, "k": 2}, master_seed=3),
        details={"bound": 1.0},
    )


def test_to_json_is_sorted(record: ResultRecord) -> None:
    """Test that JSON output is key-sorted and complete."""
    payload = json.loads(to_json(record))
    assert list(payload) == sorted(payload)
    assert payload["estimate"] == 0.4
    assert payload["config"]["format"] == "json"
    assert payload["details"] == {"bound": 1.0}


def test_write_json(record: ResultRecord, tmp_path: Path) -> None:
    """Test writing a JSON report into a new directory."""
    path = write_report(record, tmp_path / "out" / "r.json", ReportFormat.JSON)
    assert path.exists()
    assert json.loads(path.read_text(encoding="utf-8"))["op"] == "verify fact2"


def test_write_csv_flat_record(record: ResultRecord, tmp_path: Path) -> None:
    """Test that a record without rows becomes one flat CSV row."""
    path = write_report(record, tmp_path / "r.csv", ReportFormat.CSV)
    with path.open(encoding="utf-8", newline="") as handle:
        rows = list(csv.DictReader(handle))
    assert len(rows) == 1
    assert json.loads(rows[0]["params"]) == {"k": 2, "n": 2}
    assert rows[0]["estimate"] == "0.4"
    assert "config" not in rows[0]


def test_write_csv_rows(record: ResultRecord, tmp_path: Path) -> None:
    """Test that table rows are written with the union of their keys."""
    table = record.model_copy(update={"rows": [{"t": 1, "x": 2}, {"t": 2, "y": 3}]})
    path = write_report(table, tmp_path / "rows.csv", ReportFormat.CSV)
    with path.open(encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        rows = list(reader)
    assert reader.fieldnames == ["t", "x", "y"]
    assert rows[1] == {"t": "2", "x": "", "y": "3"}
