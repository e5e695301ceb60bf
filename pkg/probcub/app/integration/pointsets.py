"""
Point Set Generators

i.i.d. Monte Carlo, random-walk Metropolis with deduplication, digital nets
(plain and higher order), spherical design import, a spherical Fibonacci
lattice, sample splitting, and the fill-distance diagnostic.
"""

import re
from collections.abc import Callable
from pathlib import Path
from typing import Any, Literal

import numpy as np
from loguru import logger
from pydantic import ValidationError
from scipy.fft import irfft, rfft
from scipy.spatial import cKDTree
from scipy.stats import qmc

from probcub.app.config import get_settings
from probcub.app.errors import (
    ArgumentError,
    CapacityError,
    DegenerateChainError,
    DesignFileError,
    DesignParseError,
    DesignValidationError,
    UnsupportedOperationError,
)
from probcub.app.integration.measures import Measure, sample
from probcub.app.models import PointSet, Provenance, as_points, deduplicate

MANTISSA_BITS = 52
DESIGN_NORM_TOL = 1e-6
BUILTIN_DESIGNS = Path(__file__).resolve().parent.parent / "data" / "designs"

_T_PATTERN = re.compile(r"(?:^|[_-])t(\d+)")
_WOMERSLEY_PATTERN = re.compile(r"s[fs](\d{3})\.(\d{5})")


def pointset_from_array(
    points: Any,
    provenance: Provenance | None = None,
    seed: int | None = None,
) -> PointSet:
    """
    Build a PointSet from raw states, merging duplicates into counts.

    Args:
        points: (n, d) array-like.
        provenance: Tag (default UserSupplied).
        seed: Seed that produced the states, if any.

    Returns:
        Deduplicated PointSet; ``dropped`` counts merged states.
    """
    raw = as_points(points)
    kept, counts = deduplicate(raw, get_settings().dedup_tol)
    dropped = raw.shape[0] - len(kept)
    if dropped:
        logger.warning(f"Dropped {dropped} duplicate states out of {raw.shape[0]}")
    return PointSet(
        points=raw[kept],
        provenance=provenance or Provenance.user(),
        seed=seed,
        counts=counts if dropped else None,
        dropped=dropped,
    )


def mc_points(measure: Measure, n: int, seed: int) -> PointSet:
    """
    Deduplicated i.i.d. draws from a directly sampleable measure.

    Args:
        measure: Target measure.
        n: Number of draws.
        seed: Seed.

    Returns:
        PointSet tagged MC; fewer than n states when atoms repeat.
    """
    X = sample(measure, n, seed)
    if X.dropped:
        logger.warning(f"MC draw kept {X.n} of {n} states after deduplication")
    return X


def _reflect(x: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Fold a proposal back into [lo, hi] by reflection at the walls."""
    width = hi - lo
    d = np.mod(x - lo, 2.0 * width)
    return lo + np.where(d > width, 2.0 * width - d, d)


def mcmc_chain(
    log_density: Callable[[np.ndarray], float],
    x0: Any,
    n: int,
    step: float,
    seed: int,
    reflect: tuple[Any, Any] | None = None,
    burn_in: int = 0,
) -> tuple[np.ndarray, float | None]:
    """
    Raw random-walk Metropolis chain with Gaussian proposals.

    The chain has n states after burn-in: x0 (or the last burn-in state)
    followed by n - 1 proposals, each either accepted or a repeat.

    Args:
        log_density: Unnormalised log target.
        x0: Initial state; the log density must be finite there.
        n: Number of states kept.
        step: Proposal standard deviation, > 0.
        seed: Seed.
        reflect: Optional (lo, hi) box; proposals are reflected into it.
        burn_in: States discarded before the kept ones.

    Returns:
        Tuple of (chain of shape (n, d), acceptance rate or None if no proposals).
    """
    if step <= 0:
        raise ArgumentError(f"step must be positive, got {step}")
    if n < 1 or burn_in < 0:
        raise ArgumentError("n must be >= 1 and burn_in >= 0")
    x = np.asarray(x0, dtype=float).reshape(-1).copy()
    lp = float(log_density(x))
    if not np.isfinite(lp):
        raise ArgumentError("log density is not finite at the initial state")

    bounds = None
    if reflect is not None:
        bounds = (np.asarray(reflect[0], dtype=float), np.asarray(reflect[1], dtype=float))

    rng = np.random.default_rng(seed)
    total = burn_in + n
    chain = np.empty((total, x.size))
    chain[0] = x
    accepted = 0
    for i in range(1, total):
        proposal = x + step * rng.standard_normal(x.size)
        if bounds is not None:
            proposal = _reflect(proposal, *bounds)
        lp_new = float(log_density(proposal))
        if np.log(rng.random()) < lp_new - lp:
            x, lp = proposal, lp_new
            accepted += 1
        chain[i] = x

    proposals = total - 1
    if proposals and accepted == 0:
        logger.error(f"Chain rejected all {proposals} proposals at step {step:.3e}")
        raise DegenerateChainError(
            f"zero accepted moves over {proposals} proposals (step {step:.3e})"
        )
    rate = accepted / proposals if proposals else None
    return chain[burn_in:], rate


def mcmc_points(
    log_density: Callable[[np.ndarray], float],
    x0: Any,
    n: int,
    step: float,
    seed: int,
    reflect: tuple[Any, Any] | None = None,
    burn_in: int = 0,
) -> PointSet:
    """
    Random-walk Metropolis states with rejected-move repeats removed.

    Repeats are merged into ``counts`` so the chain's weighting survives
    deduplication. See ``mcmc_chain`` for the arguments.

    Returns:
        PointSet tagged MCMC with the acceptance rate.

    Raises:
        DegenerateChainError: If no proposal was accepted.
    """
    chain, rate = mcmc_chain(log_density, x0, n, step, seed, reflect, burn_in)
    kept, counts = deduplicate(chain, get_settings().dedup_tol)
    dropped = n - len(kept)
    logger.debug(
        f"MCMC kept {len(kept)} of {n} states, acceptance "
        f"{'n/a' if rate is None else f'{rate:.3f}'}"
    )
    return PointSet(
        points=chain[kept],
        provenance=Provenance.mcmc(),
        seed=seed,
        counts=counts,
        dropped=dropped,
        acceptance_rate=rate,
    )


def tune_step(
    log_density: Callable[[np.ndarray], float],
    x0: Any,
    step: float,
    seed: int,
    target: tuple[float, float] = (0.2, 0.5),
    pilot: int = 500,
    rounds: int = 20,
    reflect: tuple[Any, Any] | None = None,
) -> float:
    """
    Adapt the random-walk scale with short pilot chains.

    After each pilot the step is multiplied by (log r* / log r)^0.8, clipped
    to [0.1, 3], until the acceptance rate r falls inside ``target``.

    Returns:
        Tuned step (the last one tried if the band was never reached).
    """
    lo_rate, hi_rate = target
    goal = 0.5 * (lo_rate + hi_rate)
    x = np.asarray(x0, dtype=float)
    for k in range(rounds):
        try:
            chain, rate = mcmc_chain(log_density, x, pilot, step, seed + k, reflect)
        except DegenerateChainError:
            rate = 0.0
            chain = x.reshape(1, -1)
        assert rate is not None
        if lo_rate <= rate <= hi_rate:
            logger.debug(f"Step {step:.4g} tuned to acceptance {rate:.3f} after {k + 1} pilots")
            return step
        if rate <= 0.0:
            ratio = 0.1
        elif rate >= 1.0:
            ratio = 3.0
        else:
            ratio = float(np.clip((np.log(goal) / np.log(rate)) ** 0.8, 0.1, 3.0))
        step *= ratio
        x = chain[-1]
    logger.warning(f"Step tuning did not reach acceptance band {target}; using {step:.4g}")
    return step


def effective_sample_size(chain: Any) -> float:
    """
    Initial-positive-sequence effective sample size.

    Computed per coordinate from FFT autocorrelations; the smallest value
    over coordinates is returned.
    """
    x = np.asarray(chain, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if n < 4:
        return float(n)

    best = float(n)
    for col in x.T:
        centred = col - col.mean()
        if np.allclose(centred, 0.0):
            best = min(best, 1.0)
            continue
        spectrum = rfft(centred, 2 * n)
        acov = irfft(spectrum * np.conj(spectrum))[:n] / n
        rho = acov / acov[0]
        tau = -1.0
        for k in range(0, n - 1, 2):
            pair = rho[k] + rho[k + 1]
            if pair <= 0:
                break
            tau += 2.0 * pair
        best = min(best, n / max(tau, 1.0 / n))
    return float(np.clip(best, 1.0, n))


def split_samples(
    X: PointSet,
    fraction: float = 0.5,
    mode: Literal["alternate", "head"] = "alternate",
) -> tuple[PointSet, PointSet]:
    """
    Split states into two disjoint parts.

    ``alternate`` spreads the first part evenly through the sequence (every
    other state for fraction 0.5, starting with the first); ``head`` takes
    the leading block.

    Args:
        X: States to split, at least two.
        fraction: Share of states in the first part, in (0, 1).
        mode: Split mode.

    Returns:
        Tuple of (first part, second part).
    """
    if not 0.0 < fraction < 1.0:
        raise ArgumentError(f"fraction must lie in (0, 1), got {fraction}")
    n = X.n
    if n < 2:
        raise ArgumentError("at least two states are needed to split")
    idx = np.arange(n)
    if mode == "alternate":
        mask = np.ceil((idx + 1) * fraction) > np.ceil(idx * fraction)
    elif mode == "head":
        k = int(np.clip(round(fraction * n), 1, n - 1))
        mask = idx < k
    else:
        raise ArgumentError(f"unknown split mode {mode!r}")
    if mask.all() or not mask.any():
        raise ArgumentError("split leaves one part empty")
    return X.take(idx[mask]), X.take(idx[~mask])


def digital_net(d: int, m: int, order: int = 1) -> PointSet:
    """
    Base-2 digital net of 2^m points in [0, 1)^d.

    Order 1 is the unscrambled Sobol net. Higher orders interlace the digits
    of an (order * d)-dimensional Sobol net, ``order`` coordinates per output
    coordinate, keeping at most 52 interlaced bits.

    Args:
        d: Dimension, >= 1.
        m: Net exponent, n = 2^m.
        order: Interlacing factor in {1, 2, 3}.

    Returns:
        PointSet tagged QMC(order, base=2).

    Raises:
        CapacityError: If order * d exceeds the generating-matrix table or
            the interlaced digits no longer fit in double precision.
    """
    if d < 1 or m < 0:
        raise ArgumentError("digital nets need d >= 1 and m >= 0")
    if order not in (1, 2, 3):
        raise ArgumentError(f"order must be 1, 2 or 3, got {order}")
    dims = d * order
    if dims > qmc.Sobol.MAXDIM:
        raise CapacityError(
            f"{dims} net coordinates requested, table holds {qmc.Sobol.MAXDIM}"
        )
    if m > 30 or (m - 1) * order + 1 > MANTISSA_BITS:
        raise CapacityError(f"m = {m} exceeds the net precision at order {order}")

    base_net = qmc.Sobol(d=dims, scramble=False).random_base2(m)
    if order == 1:
        points = base_net
    else:
        digits = np.rint(base_net * 2**m).astype(np.int64)
        n = digits.shape[0]
        points = np.zeros((n, d))
        for j in range(d):
            for a in range(1, m + 1):
                for r in range(1, order + 1):
                    position = (a - 1) * order + r
                    if position > MANTISSA_BITS:
                        break
                    bit = (digits[:, j * order + r - 1] >> (m - a)) & 1
                    points[:, j] += bit * 2.0**-position
    return PointSet(points=points, provenance=Provenance.qmc(order=order, base=2))


def design_strength(path: Path) -> int | None:
    """Design strength t parsed from a file name, if it follows a known convention."""
    match = _WOMERSLEY_PATTERN.search(path.name)
    if match:
        return int(match.group(1))
    match = _T_PATTERN.search(path.stem)
    return int(match.group(1)) if match else None


def load_sphere_design(path: str | Path, t: int | None = None) -> PointSet:
    """
    Read a spherical design file.

    One point per line as three whitespace-separated decimals; blank lines
    and lines starting with '#' are skipped. Points within 1e-6 of unit norm
    are renormalised.

    Args:
        path: Design file.
        t: Design strength (parsed from the file name when omitted).

    Returns:
        PointSet tagged SphericalDesign(t).

    Raises:
        DesignFileError: If the file cannot be read.
        DesignParseError: On a malformed line.
        DesignValidationError: If a point is too far from the unit sphere.
    """
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise DesignFileError(f"cannot read design file {path}: {exc}") from exc

    rows = []
    for number, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = stripped.split()
        if len(fields) != 3:
            raise DesignParseError(str(path), number, line)
        try:
            rows.append([float(v) for v in fields])
        except ValueError as exc:
            raise DesignParseError(str(path), number, line) from exc
    if not rows:
        raise DesignValidationError(f"{path} contains no points")

    points = np.asarray(rows)
    norms = np.linalg.norm(points, axis=1)
    bad = np.flatnonzero(np.abs(norms - 1.0) > DESIGN_NORM_TOL)
    if bad.size:
        raise DesignValidationError(
            f"{path}: point {bad[0] + 1} has norm {norms[bad[0]]:.9f}"
        )
    try:
        return PointSet(
            points=points / norms[:, None],
            provenance=Provenance.design(t if t is not None else design_strength(path)),
        )
    except ValidationError as exc:
        raise DesignValidationError(f"{path}: {exc.errors()[0]['msg']}") from exc


def design_files(directory: str | Path | None = None) -> list[Path]:
    """Design files in a directory (the bundled designs by default), ordered by size."""
    directory = Path(directory) if directory is not None else BUILTIN_DESIGNS
    if not directory.is_dir():
        raise DesignFileError(f"design directory {directory} does not exist")
    files = [p for p in directory.iterdir() if p.is_file() and not p.name.startswith(".")]

    def size(p: Path) -> int:
        return sum(
            1 for line in p.read_text().splitlines() if line.strip() and not line.startswith("#")
        )

    return sorted(files, key=lambda p: (size(p), p.name))


def spherical_fibonacci(n: int) -> PointSet:
    """
    Golden-spiral point set on S^2.

    Points sit at heights z_i = 1 - (2i + 1)/n with longitude advancing by
    pi(3 - sqrt 5) per point.
    """
    if n < 1:
        raise ArgumentError(f"n must be at least 1, got {n}")
    i = np.arange(n)
    z = 1.0 - (2.0 * i + 1.0) / n
    r = np.sqrt(1.0 - z**2)
    phi = i * np.pi * (3.0 - np.sqrt(5.0))
    points = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    points /= np.linalg.norm(points, axis=1, keepdims=True)
    return PointSet(points=points, provenance=Provenance.lattice())


def fill_distance(
    X: PointSet | np.ndarray,
    box_lo: Any,
    box_hi: Any,
    grid_per_dim: int = 64,
) -> tuple[float, float]:
    """
    Grid approximation of the fill distance sup_x min_i |x - x_i|.

    Args:
        X: States.
        box_lo: Lower box corner.
        box_hi: Upper box corner.
        grid_per_dim: Grid points per dimension (>= 8), endpoints included.

    Returns:
        Tuple of (fill distance estimate, grid cell diagonal). The estimate
        undershoots by at most the cell diagonal.
    """
    pts = as_points(X)
    lo = np.atleast_1d(np.asarray(box_lo, dtype=float))
    hi = np.atleast_1d(np.asarray(box_hi, dtype=float))
    d = lo.size
    if d > 4:
        raise UnsupportedOperationError("fill distance is only approximated for d <= 4")
    if grid_per_dim < 8:
        raise ArgumentError("grid_per_dim must be at least 8")
    if pts.shape[0] == 0 or pts.shape[1] != d:
        raise ArgumentError("states must be nonempty and match the box dimension")

    axes = [np.linspace(lo[i], hi[i], grid_per_dim) for i in range(d)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    distances, _ = cKDTree(pts).query(grid)
    cell = float(np.linalg.norm((hi - lo) / (grid_per_dim - 1)))
    return float(np.max(distances)), cell
