"""
Result records and their JSON/CSV serialization.
"""

import csv
import json
import logging
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field

from kdesign.models import ReportFormat, RunConfig

logger = logging.getLogger(__name__)


class ResultRecord(BaseModel):
    """One CLI result; ``config`` is the fully resolved invocation."""

    model_config = ConfigDict(frozen=True)

    op: str
    params: dict[str, Any] = Field(default_factory=dict)
    estimate: float | None = None
    std_error: float | None = None
    samples: int | None = None
    residual: float | None = None
    elapsed_ms: float = 0.0
    master_seed: int
    config: RunConfig
    details: dict[str, Any] = Field(default_factory=dict)
    rows: list[dict[str, Any]] = Field(default_factory=list)


def to_json(record: ResultRecord) -> str:
    return json.dumps(record.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"


def _csv_rows(record: ResultRecord) -> tuple[list[str], list[dict[str, Any]]]:
    if record.rows:
        header: list[str] = []
        for row in record.rows:
            header += [key for key in row if key not in header]
        return header, record.rows
    flat = record.model_dump(mode="json", exclude={"config", "details", "rows"})
    flat["params"] = json.dumps(flat["params"], sort_keys=True)
    return sorted(flat), [flat]


def write_report(record: ResultRecord, path: str | Path, fmt: ReportFormat) -> Path:
    """Write ``record`` to ``path``; CSV writes the record's rows when it has any."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    if fmt is ReportFormat.JSON:
        target.write_text(to_json(record), encoding="utf-8")
    else:
        header, rows = _csv_rows(record)
        with target.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.DictWriter(handle, fieldnames=header)
            writer.writeheader()
            writer.writerows(rows)
    logger.info(f"wrote {fmt.value} report for {record.op} to {target}")
    return target
