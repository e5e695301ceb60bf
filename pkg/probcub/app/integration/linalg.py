"""
Gram Factorisation

Cholesky factorisation of kernel Gram matrices with bounded diagonal
jitter escalation.
"""

import numpy as np
from loguru import logger
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from probcub.app.config import Settings, get_settings
from probcub.app.errors import ConditioningError


class GramFactor:
    """
    Lower Cholesky factor of K + jitter * I.

    ``jitter`` is the absolute value added to the diagonal (0 when the plain
    matrix factorised).
    """

    def __init__(self, matrix: np.ndarray, jitter: float = 0.0) -> None:
        self.matrix = matrix
        self.jitter = jitter
        self._cho: tuple[np.ndarray, bool] | None = None
        if matrix.shape[0] > 0:
            shifted = matrix + jitter * np.eye(matrix.shape[0]) if jitter else matrix
            self._cho = cho_factor(shifted, lower=True, check_finite=False)

    @property
    def n(self) -> int:
        return int(self.matrix.shape[0])

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Solve (K + jitter I) x = b."""
        b = np.asarray(b, dtype=float)
        if self._cho is None:
            return np.zeros_like(b)
        return np.asarray(cho_solve(self._cho, b, check_finite=False))

    def quad_form(self, b: np.ndarray) -> float:
        """b^T (K + jitter I)^{-1} b."""
        return float(np.asarray(b) @ self.solve(b))

    def logdet(self) -> float:
        if self._cho is None:
            return 0.0
        return float(2.0 * np.sum(np.log(np.diag(self._cho[0]))))


def condition_estimate(matrix: np.ndarray) -> float:
    """2-norm condition number from the symmetric eigenvalues."""
    eig = np.abs(np.linalg.eigvalsh(matrix))
    if eig.min() == 0.0:
        return float("inf")
    return float(eig.max() / eig.min())


def jitter_ladder(matrix: np.ndarray, settings: Settings | None = None) -> list[float]:
    """Absolute jitters to try: 0, then initial * scale escalating to max * scale."""
    settings = settings or get_settings()
    n = matrix.shape[0]
    scale = float(np.trace(matrix)) / n if n else 0.0
    ladder = [0.0]
    rel = settings.jitter_initial
    while rel <= settings.jitter_max * (1.0 + 1e-9):
        ladder.append(rel * scale)
        rel *= settings.jitter_factor
    return ladder


def factorize(matrix: np.ndarray, settings: Settings | None = None) -> GramFactor:
    """
    Factorise a symmetric PSD matrix, adding jitter only when needed.

    Args:
        matrix: Symmetric n x n Gram matrix.
        settings: Tolerances (defaults to the cached settings).

    Returns:
        GramFactor carrying the jitter that was added.

    Raises:
        ConditioningError: If factorisation fails at the largest jitter.
    """
    K = np.asarray(matrix, dtype=float)
    if K.shape[0] == 0:
        return GramFactor(K)

    ladder = jitter_ladder(K, settings)
    for jitter in ladder:
        try:
            factor = GramFactor(K, jitter)
        except LinAlgError:
            logger.debug(f"Cholesky failed at jitter {jitter:.3e} (n={K.shape[0]})")
            continue
        if jitter > 0:
            logger.debug(f"Gram matrix factorised with jitter {jitter:.3e}")
        return factor

    condition = condition_estimate(K)
    logger.error(f"Gram matrix of size {K.shape[0]} is numerically singular")
    raise ConditioningError(
        f"Cholesky failed after jitter {ladder[-1]:.3e}",
        condition=condition,
        jitter=ladder[-1],
    )
