"""
External Integrand Evaluator

Child-process line protocol for expensive black-box integrands: one point
per line on the child's stdin (space-separated decimals), one decimal per
line back on its stdout. The child must exit with status 0.
"""

import contextlib
import queue
import shlex
import subprocess
import threading
from typing import IO, Any

import numpy as np
from loguru import logger

from probcub.app.errors import EvaluatorError
from probcub.app.models import as_points


def _pump(stream: IO[str], replies: "queue.Queue[str]") -> None:
    # "" marks end of stream.
    for line in iter(stream.readline, ""):
        replies.put(line)
    replies.put("")


class ExternalIntegrand:
    """
    Evaluates an integrand by talking to a long-running child process.

    Use as a context manager, or call ``close`` when done; points can be
    evaluated in several batches while the child is alive. ``timeout``
    bounds both the wait for each reply and the wait for the child to exit.
    """

    def __init__(self, command: str, timeout: float = 30.0) -> None:
        self.command = command
        self.timeout = timeout
        self.process: subprocess.Popen[str] | None = None
        self.evaluations = 0
        self._replies: queue.Queue[str] = queue.Queue()
        self._reader: threading.Thread | None = None

    def start(self) -> None:
        """Launch the child process."""
        if self.process is not None:
            logger.warning(f"Evaluator already running: {self.command}")
            return
        try:
            self.process = subprocess.Popen(
                shlex.split(self.command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise EvaluatorError(f"cannot start evaluator {self.command!r}: {exc}") from exc
        assert self.process.stdout is not None
        self._replies = queue.Queue()
        self._reader = threading.Thread(
            target=_pump, args=(self.process.stdout, self._replies), daemon=True
        )
        self._reader.start()
        logger.info(f"Started external evaluator: {self.command}")

    def _reply(self, i: int) -> str:
        try:
            return self._replies.get(timeout=self.timeout)
        except queue.Empty as exc:
            logger.error(f"Evaluator {self.command!r} hung at point {i}; killing it")
            self._kill()
            raise EvaluatorError(
                f"evaluator returned no value for point {i} within {self.timeout}s"
            ) from exc

    def __call__(self, X: Any) -> np.ndarray:
        points = as_points(X)
        if self.process is None:
            self.start()
        assert self.process is not None and self.process.stdin

        values = np.empty(points.shape[0])
        for i, x in enumerate(points):
            line = " ".join(f"{v:.17g}" for v in x)
            try:
                self.process.stdin.write(line + "\n")
                self.process.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                raise EvaluatorError(f"evaluator closed its pipe at point {i}") from exc
            reply = self._reply(i)
            if not reply:
                raise EvaluatorError(f"evaluator returned no value for point {i}")
            try:
                values[i] = float(reply.strip())
            except ValueError as exc:
                raise EvaluatorError(f"evaluator replied {reply.strip()!r} for point {i}") from exc
        self.evaluations += points.shape[0]
        return values

    def _kill(self) -> None:
        if self.process is None:
            return
        process, self.process = self.process, None
        process.kill()
        process.wait()
        if self._reader is not None:
            self._reader.join(timeout=self.timeout)

    def close(self) -> None:
        """Close the child's input and require a zero exit status."""
        if self.process is None:
            return
        process, self.process = self.process, None
        if process.stdin is not None:
            with contextlib.suppress(BrokenPipeError):
                process.stdin.close()
        try:
            process.wait(timeout=self.timeout)
        except subprocess.TimeoutExpired as exc:
            process.kill()
            process.wait()
            raise EvaluatorError(f"evaluator did not exit within {self.timeout}s") from exc
        if self._reader is not None:
            self._reader.join(timeout=self.timeout)
        if process.returncode != 0:
            logger.error(f"Evaluator {self.command!r} exited with code {process.returncode}")
            raise EvaluatorError(f"evaluator exited with code {process.returncode}")
        logger.info(f"External evaluator finished after {self.evaluations} evaluations")

    def __enter__(self) -> "ExternalIntegrand":
        self.start()
        return self

    def __exit__(self, exc_type: Any, exc: Any, tb: Any) -> None:
        if exc_type is None:
            self.close()
        else:
            self._kill()
