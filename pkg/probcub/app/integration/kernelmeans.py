"""
Kernel Means

Closed-form kernel means mu(x) = Pi[k(., x)] and initial errors PiPi[k] for
the supported (kernel, measure) pairs, empirical kernel means built from
samples, and the high-probability error bound of the empirical version.
"""

from collections.abc import Callable
from dataclasses import dataclass
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.special import erf, gammainc, gammaln

from probcub.app.errors import ArgumentError, UnsupportedPairError
from probcub.app.integration.kernels import (
    MATERN_COEFFS,
    Brownian,
    ExpQuadratic,
    Kernel,
    MaternTP,
    SphereSobolev32,
    WeightedSobolev,
)
from probcub.app.integration.measures import (
    Empirical,
    GaussianMixture,
    Measure,
    UniformBox,
    UniformSphere,
)
from probcub.app.models import FloatArray, KernelMeanForm, PointSet, as_points

CHUNK = 2048


@dataclass(frozen=True)
class ClosedForm:
    """Kernel-mean formulas for one (kernel, measure) family pair."""

    mean: Callable[[Any, Any, np.ndarray], np.ndarray]
    initial: Callable[[Any, Any], float]
    supports: Callable[[Any, Any], bool] = lambda kernel, measure: True


def _lower_gamma(j: int, s: np.ndarray) -> np.ndarray:
    """int_0^s u^j e^{-u} du = j! P(j + 1, s)."""
    return np.exp(gammaln(j + 1)) * gammainc(j + 1, s)


def _matern_moment(alpha: float, s: np.ndarray, shift: int = 0) -> np.ndarray:
    """sum_j a_j int_0^s u^{j + shift} e^{-u} du for the Matern coefficients a_j."""
    return sum(
        (a * _lower_gamma(j + shift, s) for j, a in enumerate(MATERN_COEFFS[alpha])),
        np.zeros_like(s),
    )


def _matern_box_mean(kernel: MaternTP, measure: UniformBox, X: np.ndarray) -> np.ndarray:
    lo, hi = measure.lo_array, measure.hi_array
    sig = kernel.sigmas(measure.dim)
    out = np.full(X.shape[0], kernel.lam)
    for i in range(measure.dim):
        ell = sig[i] / kernel.rate
        left = _matern_moment(kernel.alpha, (X[:, i] - lo[i]) / ell)
        right = _matern_moment(kernel.alpha, (hi[i] - X[:, i]) / ell)
        out *= ell * (left + right) / (hi[i] - lo[i])
    return out


def _matern_box_initial(kernel: MaternTP, measure: UniformBox) -> float:
    sig = kernel.sigmas(measure.dim)
    out = kernel.lam
    for i in range(measure.dim):
        length = measure.hi[i] - measure.lo[i]
        ell = sig[i] / kernel.rate
        s = np.array(length / ell)
        inner = length * _matern_moment(kernel.alpha, s) - ell * _matern_moment(
            kernel.alpha, s, shift=1
        )
        out *= float(2.0 * ell * inner / length**2)
    return float(out)


def _expquad_box_mean(kernel: ExpQuadratic, measure: UniformBox, X: np.ndarray) -> np.ndarray:
    lo, hi = measure.lo_array, measure.hi_array
    root = np.sqrt(2.0) * kernel.sigma
    out = np.full(X.shape[0], kernel.lam)
    for i in range(measure.dim):
        width = hi[i] - lo[i]
        out *= (
            kernel.sigma
            * np.sqrt(np.pi / 2.0)
            * (erf((hi[i] - X[:, i]) / root) + erf((X[:, i] - lo[i]) / root))
            / width
        )
    return out


def _expquad_box_initial(kernel: ExpQuadratic, measure: UniformBox) -> float:
    sigma = kernel.sigma
    out = kernel.lam
    for lo, hi in zip(measure.lo, measure.hi):
        length = hi - lo
        inner = length * sigma * np.sqrt(np.pi / 2.0) * erf(
            length / (np.sqrt(2.0) * sigma)
        ) + sigma**2 * np.expm1(-(length**2) / (2.0 * sigma**2))
        out *= 2.0 * inner / length**2
    return float(out)


def _gaussian_overlap(sigma: float, cov: np.ndarray, diff: np.ndarray) -> np.ndarray:
    """sigma^d |A|^{-1/2} exp(-diff^T A^{-1} diff / 2) with A = sigma^2 I + cov."""
    d = cov.shape[0]
    A = sigma**2 * np.eye(d) + cov
    chol = np.linalg.cholesky(A)
    r = np.linalg.solve(chol, diff.T)
    log_det = 2.0 * np.sum(np.log(np.diag(chol)))
    return np.exp(d * np.log(sigma) - 0.5 * log_det - 0.5 * np.sum(r * r, axis=0))


def _expquad_mixture_mean(
    kernel: ExpQuadratic, measure: GaussianMixture, X: np.ndarray
) -> np.ndarray:
    out = np.zeros(X.shape[0])
    for w, mean, cov in zip(measure.weights, measure.means, measure.covariances):
        out += w * _gaussian_overlap(kernel.sigma, cov, X - mean)
    return kernel.lam * out


def _expquad_mixture_initial(kernel: ExpQuadratic, measure: GaussianMixture) -> float:
    total = 0.0
    comps = list(zip(measure.weights, measure.means, measure.covariances))
    for wa, ma, ca in comps:
        for wb, mb, cb in comps:
            overlap = _gaussian_overlap(kernel.sigma, ca + cb, (ma - mb)[None, :])
            total += wa * wb * float(overlap[0])
    return kernel.lam * total


def _sobolev_mean(kernel: WeightedSobolev, measure: UniformBox, X: np.ndarray) -> np.ndarray:
    return np.full(X.shape[0], kernel.gamma_empty)


def _sobolev_initial(kernel: WeightedSobolev, measure: UniformBox) -> float:
    return kernel.gamma_empty


def _sobolev_supports(kernel: WeightedSobolev, measure: UniformBox) -> bool:
    return measure.is_unit and measure.dim == kernel.d


def _sphere_mean(kernel: SphereSobolev32, measure: UniformSphere, X: np.ndarray) -> np.ndarray:
    return np.full(X.shape[0], 4.0 / 3.0)


def _sphere_initial(kernel: SphereSobolev32, measure: UniformSphere) -> float:
    return 4.0 / 3.0


def _brownian_mean(kernel: Brownian, measure: UniformBox, X: np.ndarray) -> np.ndarray:
    x = X[:, 0]
    return x - 0.5 * x**2


def _brownian_initial(kernel: Brownian, measure: UniformBox) -> float:
    return 1.0 / 3.0


def _empirical_mean(kernel: Kernel, measure: Empirical, X: np.ndarray) -> np.ndarray:
    w = np.asarray(measure.weights)
    atoms = np.asarray(measure.points)
    out = np.zeros(X.shape[0])
    for start in range(0, atoms.shape[0], CHUNK):
        stop = start + CHUNK
        out += kernel.matrix(X, atoms[start:stop]) @ w[start:stop]
    return out


def _empirical_initial(kernel: Kernel, measure: Empirical) -> float:
    means = _empirical_mean(kernel, measure, np.asarray(measure.points))
    return float(np.asarray(measure.weights) @ means)


CLOSED_FORMS: dict[tuple[type[Kernel], type[Measure]], ClosedForm] = {
    (MaternTP, UniformBox): ClosedForm(_matern_box_mean, _matern_box_initial),
    (ExpQuadratic, UniformBox): ClosedForm(_expquad_box_mean, _expquad_box_initial),
    (ExpQuadratic, GaussianMixture): ClosedForm(
        _expquad_mixture_mean, _expquad_mixture_initial
    ),
    (WeightedSobolev, UniformBox): ClosedForm(
        _sobolev_mean, _sobolev_initial, _sobolev_supports
    ),
    (SphereSobolev32, UniformSphere): ClosedForm(
        _sphere_mean, _sphere_initial, lambda kernel, measure: measure.d == 2
    ),
    (Brownian, UniformBox): ClosedForm(
        _brownian_mean, _brownian_initial, lambda kernel, measure: measure.is_unit
    ),
}

# Catalogued pairs without an implementation here.
RECOGNIZED: list[tuple[str, str]] = [
    ("WendlandTP", "UniformBox"),
    ("Splines", "UniformBox"),
    ("PolynomialTP", "UniformBox"),
    ("GradientBased", "KnownScore"),
    ("Trigonometric", "UniformBox"),
    ("Trigonometric", "GaussianMixture"),
]


def catalogue() -> list[dict[str, str]]:
    """Every known (kernel, measure) pair with its status."""
    rows = [
        {"kernel": k.__name__, "measure": m.__name__, "status": "implemented"}
        for k, m in CLOSED_FORMS
    ]
    rows.append({"kernel": "any", "measure": "Empirical", "status": "implemented"})
    rows.extend(
        {"kernel": k, "measure": m, "status": "recognized-unimplemented"}
        for k, m in RECOGNIZED
    )
    return rows


def _closed_form(kernel: Kernel, measure: Measure) -> ClosedForm:
    if isinstance(measure, Empirical):
        return ClosedForm(_empirical_mean, _empirical_initial)
    form = CLOSED_FORMS.get((type(kernel), type(measure)))
    if form is None or not form.supports(kernel, measure):
        recognized = (kernel.name, measure.name) in RECOGNIZED
        raise UnsupportedPairError(kernel.name, measure.name, recognized=recognized)
    return form


class KernelMean(BaseModel):
    """
    Kernel mean of ``kernel`` under ``measure``.

    The Empirical form approximates some target by the atomic ``measure``
    built from ``samples`` and ``weights``; the samples are kept so callers
    can check they are disjoint from the cubature states.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    kernel: Kernel
    measure: Measure
    form: KernelMeanForm = KernelMeanForm.ANALYTIC
    samples: PointSet | None = None
    weights: FloatArray | None = None

    @model_validator(mode="after")
    def _check_form(self) -> "KernelMean":
        if self.form == KernelMeanForm.EMPIRICAL:
            if self.samples is None or self.weights is None:
                raise ValueError("an empirical kernel mean needs its samples and weights")
        return self

    @property
    def m(self) -> int:
        return 0 if self.samples is None else self.samples.n

    def mean_vector(self, X: Any) -> np.ndarray:
        """mu(x_i) for every state, validated against the kernel's domain."""
        pts = self.kernel.check_domain(X)
        if pts.shape[0] == 0:
            return np.zeros(0)
        if pts.shape[1] != self.measure.dim:
            raise ArgumentError(
                f"points are {pts.shape[1]}-dimensional, measure is {self.measure.dim}"
            )
        return _closed_form(self.kernel, self.measure).mean(self.kernel, self.measure, pts)

    def mean_at(self, x: Any) -> float:
        return float(self.mean_vector(np.asarray(x, dtype=float).reshape(1, -1))[0])

    def initial_error(self) -> float:
        return float(_closed_form(self.kernel, self.measure).initial(self.kernel, self.measure))


def analytic_mean(kernel: Kernel, measure: Measure) -> KernelMean:
    """
    Exact kernel mean for a supported pair.

    Raises:
        UnsupportedPairError: If no closed form is available.
    """
    _closed_form(kernel, measure)
    return KernelMean(kernel=kernel, measure=measure)


def mean_at(km: KernelMean, x: Any) -> float:
    """Kernel mean at a single point."""
    return km.mean_at(x)


def mean_vector(km: KernelMean, X: Any) -> np.ndarray:
    """Kernel mean at every state of X."""
    return km.mean_vector(X)


def initial_error(km: KernelMean) -> float:
    """PiPi[k], the prior variance of the integral."""
    return km.initial_error()


def empirical_mean(
    kernel: Kernel,
    samples: PointSet | np.ndarray,
    weights: Any | None = None,
) -> KernelMean:
    """
    Empirical kernel mean sum_j w_j k(x_j, .).

    Args:
        kernel: Kernel.
        samples: Nonempty states approximating the target.
        weights: One weight per state (default uniform 1/m).

    Returns:
        KernelMean in the Empirical form.
    """
    if not isinstance(samples, PointSet):
        samples = PointSet(points=as_points(samples))
    m = samples.n
    if m == 0:
        raise ArgumentError("an empirical kernel mean needs at least one sample")
    w = np.full(m, 1.0 / m) if weights is None else np.asarray(weights, dtype=float).reshape(-1)
    if w.shape != (m,):
        raise ArgumentError(f"got {w.size} weights for {m} samples")
    measure = Empirical(points=samples.points, weights=w)
    return KernelMean(
        kernel=kernel,
        measure=measure,
        form=KernelMeanForm.EMPIRICAL,
        samples=samples,
        weights=w,
    )


def mean_error_bound(kernel: Kernel, m: int, delta: float, ess: float | None = None) -> float:
    """
    Bound on the RKHS error of a uniform empirical kernel mean.

    With probability at least 1 - delta the error is below
    2 sqrt(sup k(x, x) / m) + sqrt(log(2 / delta) / (2 m)).

    Args:
        kernel: Kernel with a finite diagonal supremum.
        m: Number of independent samples.
        delta: Failure probability, 0 < delta <= 1.
        ess: Effective sample size used in place of m (dependent samples).

    Returns:
        The bound.
    """
    if not 0.0 < delta <= 1.0:
        raise ArgumentError(f"delta must lie in (0, 1], got {delta}")
    size = float(m if ess is None else ess)
    if size <= 0:
        raise ArgumentError("the sample size must be positive")
    sup = kernel.sup_diagonal()
    return float(2.0 * np.sqrt(sup / size) + np.sqrt(np.log(2.0 / delta) / (2.0 * size)))
