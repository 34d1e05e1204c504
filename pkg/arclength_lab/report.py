"""
Verification reports

A VerificationReport is an indented JSON key-value tree with a fixed key
order: version, command, config, checks, tables, summary, then wall_time.
Everything except wall_time is the report body; identical config and seed
give an identical body. Floats are written with their shortest round-trip
repr and exact rationals as "p/q" strings, so parsing a report and emitting
it again reproduces the text byte for byte.
"""

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np

from arclength_lab.errors import ReportError
from arclength_lab.poly_core import format_rational

logger = logging.getLogger(__name__)

REPORT_KEYS = ("version", "command", "config", "checks", "tables", "summary", "wall_time")


class CheckStatus(Enum):
    PASS = "pass"
    FAIL = "fail"
    WARN = "warn"


def jsonable(value: Any) -> Any:
    """Convert numpy scalars/arrays, Fractions, Enums and tuples into plain JSON values"""
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if isinstance(value, Fraction):
        return format_rational(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if hasattr(value, "to_dict"):
        return jsonable(value.to_dict())
    raise ReportError(f"cannot serialize {type(value).__name__}")


@dataclass
class CheckRecord:
    """One named check: status, measured constants and witnesses"""
    name: str
    anchor: str
    status: CheckStatus
    measured: Dict[str, Any] = field(default_factory=dict)
    witnesses: List[Any] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "anchor": self.anchor,
            "status": self.status.value,
            "measured": jsonable(self.measured),
            "witnesses": jsonable(self.witnesses),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CheckRecord":
        try:
            return cls(data["name"], data["anchor"], CheckStatus(data["status"]),
                       data.get("measured", {}), data.get("witnesses", []))
        except (KeyError, ValueError) as exc:
            raise ReportError(f"malformed check record: {exc}") from exc


@dataclass
class Table:
    """Column-labelled rows; the source of plot data"""
    columns: List[str]
    rows: List[List[Any]] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {"columns": list(self.columns), "rows": jsonable(self.rows)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Table":
        if "columns" not in data:
            raise ReportError("table without columns")
        return cls(list(data["columns"]), [list(r) for r in data.get("rows", [])])


@dataclass
class VerificationReport:
    command: str
    config: Dict[str, Any]
    checks: List[CheckRecord] = field(default_factory=list)
    tables: Dict[str, Table] = field(default_factory=dict)
    summary: Dict[str, Any] = field(default_factory=dict)
    version: str = ""
    wall_time: Optional[float] = None

    def add_check(self, name: str, anchor: str, status: CheckStatus, measured: Optional[Dict[str, Any]] = None,
                  witnesses: Optional[List[Any]] = None) -> CheckRecord:
        record = CheckRecord(name, anchor, status, dict(measured or {}), list(witnesses or []))
        self.checks.append(record)
        if status is CheckStatus.FAIL:
            logger.error("check %s failed (%s)", name, anchor)
        elif status is CheckStatus.WARN:
            logger.warning("check %s: warning (%s)", name, anchor)
        return record

    def add_table(self, name: str, columns: List[str], rows: List[List[Any]]) -> Table:
        table = Table(list(columns), [list(r) for r in rows])
        self.tables[name] = table
        return table

    @property
    def passed(self) -> bool:
        return all(c.status is not CheckStatus.FAIL for c in self.checks)

    @property
    def failing(self) -> List[str]:
        return [c.name for c in self.checks if c.status is CheckStatus.FAIL]

    def counts(self) -> Dict[str, int]:
        return {s.value: sum(1 for c in self.checks if c.status is s) for s in CheckStatus}

    def to_tree(self, include_wall_time: bool = True) -> Dict[str, Any]:
        tree = {
            "version": self.version,
            "command": self.command,
            "config": jsonable(self.config),
            "checks": [c.to_dict() for c in self.checks],
            "tables": {name: t.to_dict() for name, t in self.tables.items()},
            "summary": jsonable(self.summary),
        }
        if include_wall_time:
            tree["wall_time"] = self.wall_time
        return tree

    def to_text(self) -> str:
        return json.dumps(self.to_tree(), indent=2) + "\n"

    def body_text(self) -> str:
        """Serialized report without wall_time"""
        return json.dumps(self.to_tree(include_wall_time=False), indent=2) + "\n"

    def write(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.write_text(self.to_text())
        logger.info("report written to %s", path)
        return path


def parse_report(text: str) -> VerificationReport:
    try:
        tree = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ReportError(f"report is not valid JSON: {exc}") from exc
    if not isinstance(tree, dict):
        raise ReportError("report root must be an object")
    keys = [k for k in tree if k != "wall_time"]
    if tuple(keys) != REPORT_KEYS[:-1]:
        raise ReportError(f"unexpected report keys {list(tree)}")
    return VerificationReport(
        command=tree["command"],
        config=tree["config"],
        checks=[CheckRecord.from_dict(c) for c in tree["checks"]],
        tables={name: Table.from_dict(t) for name, t in tree["tables"].items()},
        summary=tree["summary"],
        version=tree["version"],
        wall_time=tree.get("wall_time"),
    )


def load_report(path: Union[str, Path]) -> VerificationReport:
    return parse_report(Path(path).read_text())


def plot_table_text(table: Table) -> str:
    buffer = io.StringIO()
    buffer.write("# " + ",".join(table.columns) + "\n")
    writer = csv.writer(buffer, lineterminator="\n")
    for row in table.rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buffer.getvalue()


def emit_plot_data(report: VerificationReport, which: str, path: Optional[Union[str, Path]] = None) -> str:
    """Comma-separated rows of a report table with a '#' column header; written to path when given"""
    if which not in report.tables:
        raise ReportError(f"report has no table '{which}' (available: {sorted(report.tables)})")
    text = plot_table_text(report.tables[which])
    if path is not None:
        Path(path).write_text(text)
        logger.info("plot data '%s' written to %s (%d rows)", which, path, len(report.tables[which].rows))
    return text
