"""
Verification Report Test Suite
Tests for report serialization and plot data:
- Fixed key order and byte-identical re-emission
- Serialization of numpy values and exact rationals
- Plot tables with a '#' header line
"""

import sys
import os
from fractions import Fraction

import numpy as np
import pytest

# Add project root to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from arclength_lab.errors import ReportError
from arclength_lab.report import (
    REPORT_KEYS,
    CheckStatus,
    VerificationReport,
    emit_plot_data,
    jsonable,
    load_report,
    parse_report,
)


@pytest.fixture
def report():
    report = VerificationReport(command="verify", config={"seed": 3, "curves": ["moment-2"]}, version="0.1.0")
    report.add_check("identity:moment-2", "Jacobian identity", CheckStatus.PASS,
                     {"max_relative_error": 1.25e-12, "exponent": Fraction(3, 2)})
    report.add_check("bands:elim-diff", "band refinement", CheckStatus.WARN, witnesses=[[1, 2]])
    report.add_table("knapp", ["delta", "ratio", "error"], [[0.5, 0.125, 0.0], [0.25, 0.1, 1e-3]])
    report.add_table("empty", ["x", "y"], [])
    report.summary = {"pass": 1, "warn": 1}
    report.wall_time = 0.5
    return report


class TestSerialization:
    """Report tree and round trip"""

    def test_key_order(self, report):
        assert tuple(report.to_tree()) == REPORT_KEYS
        assert "wall_time" not in report.body_text()

    def test_round_trip_is_byte_identical(self, report):
        text = report.to_text()
        assert parse_report(text).to_text() == text

    def test_load_from_file(self, report, tmp_path):
        path = report.write(tmp_path / "report.json")
        assert load_report(path).body_text() == report.body_text()

    def test_rationals_and_numpy(self):
        assert jsonable(Fraction(10, 3)) == "10/3"
        assert jsonable(np.float64(0.5)) == 0.5
        assert jsonable(np.array([1, 2])) == [1, 2]
        assert jsonable(np.bool_(True)) is True
        assert jsonable(CheckStatus.FAIL) == "fail"

    def test_unserializable(self):
        with pytest.raises(ReportError):
            jsonable(object())

    def test_status(self, report):
        assert report.passed
        report.add_check("bands:clauses", "band clauses", CheckStatus.FAIL)
        assert not report.passed
        assert report.failing == ["bands:clauses"]
        assert report.counts() == {"pass": 1, "fail": 1, "warn": 1}

    @pytest.mark.parametrize("text", ["not json", "[1, 2]", '{"checks": [], "version": ""}'])
    def test_malformed(self, text):
        with pytest.raises(ReportError):
            parse_report(text)


class TestPlotData:
    """emit_plot_data"""

    def test_header_and_rows(self, report):
        text = emit_plot_data(report, "knapp")
        lines = text.splitlines()
        assert lines[0] == "# delta,ratio,error"
        assert lines[1] == "0.5,0.125,0.0"
        assert len(lines) == 3

    def test_empty_table(self, report, tmp_path):
        path = tmp_path / "empty.csv"
        emit_plot_data(report, "empty", path)
        assert path.read_text() == "# x,y\n"

    def test_missing_table(self, report):
        with pytest.raises(ReportError):
            emit_plot_data(report, "tower")


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
