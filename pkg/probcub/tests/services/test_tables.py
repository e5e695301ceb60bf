"""
Unit tests for services.tables module.

Tests that CSV and SVG outputs are byte-identical across reruns.
"""

import numpy as np
import pandas as pd

from probcub.app.models import TemperatureSchedule, TIPosterior
from probcub.app.services.tables import (
    plot_intervals,
    plot_lines,
    ti_rungs_frame,
    write_csv,
    write_json,
)


def ti_posterior():
    return TIPosterior(
        schedule=TemperatureSchedule(t=[0.0, 0.1, 1.0]),
        mu=[-5.0, -3.0, -1.0],
        cov=np.diag([0.1, 0.2, 0.3]),
        logz_mean=-2.5,
        logz_var_outer=0.01,
        logz_var_propagated=0.02,
    )


class TestCsv:
    """Test CSV output."""

    def test_full_precision_and_unix_newlines(self, tmp_path):
        """Test that floats survive a write exactly and lines end in LF."""
        frame = pd.DataFrame({"x": [0.1, 1 / 3], "label": ["a", "b"]})
        path = write_csv(frame, tmp_path / "out" / "t.csv")
        raw = path.read_bytes()
        assert b"\r\n" not in raw
        assert pd.read_csv(path)["x"].tolist() == [0.1, 1 / 3]

    def test_reruns_are_identical(self, tmp_path):
        """Test byte-identical CSV files."""
        frame = pd.DataFrame({"n": [1, 2], "v": [np.pi, np.e]})
        a = write_csv(frame, tmp_path / "a.csv").read_bytes()
        b = write_csv(frame, tmp_path / "b.csv").read_bytes()
        assert a == b

    def test_json_record(self, tmp_path):
        """Test that a pydantic record is written as indented JSON."""
        path = write_json(ti_posterior().schedule, tmp_path / "s.json")
        assert path.read_text().endswith("\n")
        assert '"t"' in path.read_text()


class TestSvg:
    """Test chart output."""

    def test_line_chart_reruns_are_identical(self, tmp_path):
        """Test byte-identical SVG files."""
        series = {"bc": (np.array([8, 16, 32]), np.array([1e-2, 3e-3, 8e-4]))}
        a = plot_lines(tmp_path / "a.svg", series, "n", "error", log=True).read_bytes()
        b = plot_lines(tmp_path / "b.svg", series, "n", "error", log=True).read_bytes()
        assert a == b
        assert a.lstrip().startswith(b"<?xml")

    def test_interval_chart(self, tmp_path):
        """Test the error-bar chart with a reference line."""
        frame = pd.DataFrame(
            {
                "n": [10, 20, 10, 20],
                "method": ["bc", "bc", "mc", "mc"],
                "mean": [1.0, 1.1, 0.9, 1.05],
                "lo": [0.8, 1.0, 0.5, 0.9],
                "hi": [1.2, 1.2, 1.3, 1.2],
            }
        )
        path = plot_intervals(tmp_path / "i.svg", frame, "n", "method", truth=1.0)
        assert path.stat().st_size > 0


class TestTiRungsFrame:
    """Test the per-rung TI table."""

    def test_rows_and_summary(self):
        """Test m rung rows plus one summary row."""
        frame = ti_rungs_frame(ti_posterior())
        assert len(frame) == 4
        assert frame["rung"].tolist() == ["1", "2", "3", "summary"]
        summary = frame.iloc[-1]
        assert summary["logZ_mean"] == -2.5
        assert summary["var_propagated"] == 0.02
        np.testing.assert_allclose(frame["sigma_diag"][:3], [0.1, 0.2, 0.3])
