"""
Point Set Models

Immutable ordered states {x_i} with a provenance tag and a deduplication
guarantee.
"""

from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.spatial import cKDTree

from probcub.app.config import get_settings
from probcub.app.models.arrays import FloatArray

SPHERE_TOL = 1e-9


class ProvenanceKind(str, Enum):
    """How a point set was generated."""

    MC = "MC"
    MCMC = "MCMC"
    QMC = "QMC"
    SPHERICAL_DESIGN = "SphericalDesign"
    SPHERICAL_LATTICE = "SphericalLattice"
    USER_SUPPLIED = "UserSupplied"


class Provenance(BaseModel):
    """Provenance tag, with net order/base or design strength where relevant."""

    model_config = ConfigDict(frozen=True)

    kind: ProvenanceKind
    order: int | None = Field(default=None, ge=1)
    base: int | None = Field(default=None, ge=2)
    t: int | None = Field(default=None, ge=0)

    @classmethod
    def mc(cls) -> "Provenance":
        return cls(kind=ProvenanceKind.MC)

    @classmethod
    def mcmc(cls) -> "Provenance":
        return cls(kind=ProvenanceKind.MCMC)

    @classmethod
    def qmc(cls, order: int = 1, base: int = 2) -> "Provenance":
        return cls(kind=ProvenanceKind.QMC, order=order, base=base)

    @classmethod
    def design(cls, t: int | None = None) -> "Provenance":
        return cls(kind=ProvenanceKind.SPHERICAL_DESIGN, t=t)

    @classmethod
    def lattice(cls) -> "Provenance":
        return cls(kind=ProvenanceKind.SPHERICAL_LATTICE)

    @classmethod
    def user(cls) -> "Provenance":
        return cls(kind=ProvenanceKind.USER_SUPPLIED)

    @property
    def label(self) -> str:
        """Short label used in result tables."""
        if self.kind == ProvenanceKind.QMC:
            return f"QMC(order={self.order},base={self.base})"
        if self.kind == ProvenanceKind.SPHERICAL_DESIGN and self.t is not None:
            return f"SphericalDesign(t={self.t})"
        return self.kind.value


def deduplicate(
    points: np.ndarray,
    tol: float = 1e-12,
    counts: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Greedy sup-norm deduplication.

    Points are visited in order; a point within ``tol`` of an earlier kept
    point is dropped and its multiplicity is added to that kept point.

    Args:
        points: (n, d) array.
        tol: Sup-norm tolerance.
        counts: Optional multiplicities of the input points (default 1 each).

    Returns:
        Tuple of (kept indices in ascending order, multiplicities of the kept points).
    """
    pts = np.asarray(points, dtype=float)
    n = pts.shape[0]
    mult = np.ones(n) if counts is None else np.asarray(counts, dtype=float).copy()
    if n < 2:
        return np.arange(n), mult

    pairs = cKDTree(pts).query_pairs(r=tol, p=np.inf, output_type="ndarray")
    if len(pairs) == 0:
        return np.arange(n), mult

    # query_pairs yields i < j; sorting by i makes removed[i] final when read
    pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
    removed = np.zeros(n, dtype=bool)
    for i, j in pairs:
        if not removed[i] and not removed[j]:
            removed[j] = True
            mult[i] += mult[j]

    kept = np.flatnonzero(~removed)
    return kept, mult[kept]


class PointSet(BaseModel):
    """
    Ordered, deduplicated states.

    ``counts`` holds the multiplicity of each state in the raw draw
    (repeated MCMC states, resampled atoms) and ``dropped`` how many raw
    states deduplication removed.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    points: FloatArray
    provenance: Provenance = Field(default_factory=Provenance.user)
    seed: int | None = None
    counts: FloatArray | None = None
    dropped: int = Field(default=0, ge=0)
    acceptance_rate: float | None = Field(default=None, ge=0.0, le=1.0)

    @field_validator("points")
    @classmethod
    def _two_dimensional(cls, value: np.ndarray) -> np.ndarray:
        if value.ndim == 1:
            value = value.reshape(-1, 1)
        if value.ndim != 2:
            raise ValueError(f"points must be an (n, d) array, got shape {value.shape}")
        if value.shape[1] < 1:
            raise ValueError("points must have at least one coordinate")
        if not np.all(np.isfinite(value)):
            raise ValueError("points must be finite")
        return value

    @model_validator(mode="after")
    def _check_invariants(self) -> "PointSet":
        n = self.n
        prov = self.provenance

        if self.counts is not None and self.counts.shape != (n,):
            raise ValueError(f"counts must have shape ({n},), got {self.counts.shape}")

        if prov.kind == ProvenanceKind.QMC:
            base = prov.base or 2
            m = int(round(np.log(max(n, 1)) / np.log(base)))
            if n < 1 or base**m != n:
                raise ValueError(f"QMC point set of size {n} is not a power of {base}")

        if prov.kind in (ProvenanceKind.SPHERICAL_DESIGN, ProvenanceKind.SPHERICAL_LATTICE):
            if self.dim != 3:
                raise ValueError("spherical point sets must be 3-dimensional")
            norms = np.linalg.norm(self.points, axis=1)
            if n and np.max(np.abs(norms - 1.0)) > SPHERE_TOL:
                raise ValueError("spherical point set has points off the unit sphere")

        kept, _ = deduplicate(self.points, get_settings().dedup_tol)
        if len(kept) != n:
            raise ValueError(f"point set contains {n - len(kept)} duplicate states")
        return self

    @classmethod
    def empty(cls, dim: int) -> "PointSet":
        """Empty point set of the given dimension."""
        return cls(points=np.zeros((0, dim)))

    @property
    def n(self) -> int:
        return int(self.points.shape[0])

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    def __len__(self) -> int:
        return self.n

    def multiplicities(self) -> np.ndarray:
        """Counts, or ones when no counts were recorded."""
        if self.counts is None:
            return np.ones(self.n)
        return np.asarray(self.counts)

    def take(self, indices: Any) -> "PointSet":
        """
        Subset of states, in the given order.

        QMC and design tags do not survive subsetting (their structure is
        lost), so such subsets are tagged UserSupplied.
        """
        idx = np.asarray(indices, dtype=int)
        prov = self.provenance
        if prov.kind not in (ProvenanceKind.MC, ProvenanceKind.MCMC):
            prov = Provenance.user()
        counts = None if self.counts is None else self.counts[idx]
        return PointSet(
            points=self.points[idx],
            provenance=prov,
            seed=self.seed,
            counts=counts,
            acceptance_rate=self.acceptance_rate,
        )

    def to_frame(self) -> pd.DataFrame:
        """Points as a DataFrame with columns x1..xd."""
        columns = [f"x{i + 1}" for i in range(self.dim)]
        return pd.DataFrame(np.asarray(self.points), columns=columns)

    def to_csv(self, path: str | Path) -> Path:
        """
        Write points to CSV with header ``x1,...,xd``.

        Args:
            path: Destination file.

        Returns:
            The written path.
        """
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        return path

    def write_design(self, path: str | Path) -> Path:
        """Write points in the whitespace-separated design-file format."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        header = f"{self.provenance.label}, n={self.n}"
        np.savetxt(path, np.asarray(self.points), fmt="%.17g", header=header)
        return path


def as_points(X: PointSet | np.ndarray | Any) -> np.ndarray:
    """
    Raw (n, d) array from a PointSet or array-like.

    A 1-D array is read as n one-dimensional points.
    """
    if isinstance(X, PointSet):
        return np.asarray(X.points)
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    return arr
