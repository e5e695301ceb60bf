"""
Unit tests for services.external module.

Spawns small Python child processes that speak the line protocol.
"""

import shlex
import sys

import numpy as np
import pytest

from probcub.app.errors import EvaluatorError
from probcub.app.services.external import ExternalIntegrand

SUM_SCRIPT = """
import sys
for line in sys.stdin:
    print(sum(float(v) for v in line.split()), flush=True)
"""


def command_for(tmp_path, body, name="child.py"):
    script = tmp_path / name
    script.write_text(body)
    return f"{shlex.quote(sys.executable)} {shlex.quote(str(script))}"


class TestExternalIntegrand:
    """Test the child-process evaluator."""

    def test_sums_coordinates(self, tmp_path):
        """Test a round trip through a well-behaved child."""
        points = np.array([[0.25, 0.5], [1.0, -2.0], [1e-17, 3.0]])
        with ExternalIntegrand(command_for(tmp_path, SUM_SCRIPT)) as f:
            values = f(points)
            more = f(np.array([[4.0, 4.0]]))
        np.testing.assert_allclose(values, points.sum(axis=1))
        assert more[0] == 8.0
        assert f.evaluations == 4

    def test_nonzero_exit_status(self, tmp_path):
        """Test that a failing child is reported when it is closed."""
        body = SUM_SCRIPT + "sys.exit(3)\n"
        f = ExternalIntegrand(command_for(tmp_path, body))
        f.start()
        f(np.array([[1.0]]))
        with pytest.raises(EvaluatorError):
            f.close()

    def test_garbage_reply(self, tmp_path):
        """Test that a non-numeric reply raises EvaluatorError."""
        body = "import sys\nfor line in sys.stdin:\n    print('oops', flush=True)\n"
        with pytest.raises(EvaluatorError):
            with ExternalIntegrand(command_for(tmp_path, body)) as f:
                f(np.array([[1.0]]))

    def test_silent_child(self, tmp_path):
        """Test that a child that exits without replying raises EvaluatorError."""
        with pytest.raises(EvaluatorError):
            with ExternalIntegrand(command_for(tmp_path, "pass\n")) as f:
                f(np.array([[1.0]]))

    def test_hung_child_times_out(self, tmp_path):
        """Test that a child that never answers is killed and reported."""
        body = "import sys, time\nfor line in sys.stdin:\n    time.sleep(60)\n"
        f = ExternalIntegrand(command_for(tmp_path, body), timeout=0.5)
        f.start()
        child = f.process
        with pytest.raises(EvaluatorError, match="within 0.5s"):
            f(np.array([[1.0]]))
        assert f.process is None
        assert child.poll() is not None

    def test_missing_command(self, tmp_path):
        """Test that an unstartable command raises EvaluatorError."""
        with pytest.raises(EvaluatorError):
            ExternalIntegrand(str(tmp_path / "no-such-binary")).start()
