"""
Finite weighted point clouds standing in for compactly supported measures.

Everything downstream (fractal builders, projections, Fourier averages,
distance histograms) consumes and produces ``DiscreteMeasure`` objects.
"""

import math
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist
from scipy.special import gamma

from core.errors import LabError
from core.scaling import ScalingFit, fit_scaling

logger = logging.getLogger(__name__)

MAX_COORDINATE = 1e6
DEFAULT_PRODUCT_CAP = 10**7
# Upper bound on the number of centre-atom distances held in memory at once
PAIR_CHUNK = 4_000_000
DEFAULT_FROSTMAN_CENTERS = 256


def _frozen_array(values: np.ndarray) -> np.ndarray:
    values.setflags(write=False)
    return values


def unit_ball_volume(d: int) -> float:
    """Lebesgue measure of the unit ball in R^d."""
    return float(math.pi ** (d / 2.0) / gamma(d / 2.0 + 1.0))


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere S^{d-1} in R^d (2 for d = 1)."""
    return float(2.0 * math.pi ** (d / 2.0) / gamma(d / 2.0))


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """
    Atomic measure sum_j w_j delta_{x_j} in R^d.

    Arrays are copied on construction and made read-only, so instances can
    be shared freely between threads. ``resolution`` is the finest scale of
    the construction that produced the atoms (0 when unknown); estimators
    refuse radii and scales below it.
    """
    points: np.ndarray
    weights: np.ndarray
    resolution: float = 0.0
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        points = np.array(self.points, dtype=float)
        if points.ndim == 1:
            points = points.reshape(-1, 1)
        if points.ndim != 2 or points.shape[1] < 1:
            raise LabError("dimension", f"points must be an (N, d) array, got shape {points.shape}")
        weights = np.array(self.weights, dtype=float).reshape(-1)
        if weights.shape[0] != points.shape[0]:
            raise LabError("dimension",
                           f"{points.shape[0]} points but {weights.shape[0]} weights")
        if points.shape[0] == 0:
            raise LabError("empty_set", "a measure needs at least one atom")
        if not np.all(np.isfinite(points)) or float(np.max(np.abs(points))) > MAX_COORDINATE:
            raise LabError("unbounded_support",
                           f"coordinates must be finite and at most {MAX_COORDINATE:g} in magnitude")
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise LabError("negative_weight", "weights must be finite and nonnegative")
        if not (self.resolution >= 0.0 and math.isfinite(self.resolution)):
            raise LabError("below_resolution", f"invalid resolution {self.resolution}")

        object.__setattr__(self, "points", _frozen_array(points))
        object.__setattr__(self, "weights", _frozen_array(weights))
        object.__setattr__(self, "resolution", float(self.resolution))
        object.__setattr__(self, "metadata", dict(self.metadata))
        object.__setattr__(self, "_total_mass", math.fsum(weights))

    @property
    def ambient_dim(self) -> int:
        return int(self.points.shape[1])

    @property
    def atom_count(self) -> int:
        return int(self.points.shape[0])

    @property
    def total_mass(self) -> float:
        return self._total_mass

    def diameter(self) -> float:
        """Diagonal of the bounding box, an upper bound for the support diameter."""
        extent = self.points.max(axis=0) - self.points.min(axis=0)
        return float(np.linalg.norm(extent))

    def with_metadata(self, **entries: Any) -> "DiscreteMeasure":
        merged = dict(self.metadata)
        merged.update(entries)
        return DiscreteMeasure(self.points, self.weights, self.resolution, merged)


@dataclass(frozen=True, eq=False)
class ProductMeasure:
    """
    Unmaterialised product of measures.

    Fourier transforms of a product factor into transforms of the factors,
    which lets the spectral code work with products whose atom count could
    never be stored.
    """
    factors: Tuple[DiscreteMeasure, ...]
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.factors) < 1:
            raise LabError("empty_set", "a product needs at least one factor")
        object.__setattr__(self, "factors", tuple(self.factors))

    @property
    def ambient_dim(self) -> int:
        return sum(f.ambient_dim for f in self.factors)

    @property
    def atom_count(self) -> int:
        return math.prod(f.atom_count for f in self.factors)

    @property
    def total_mass(self) -> float:
        return math.prod(f.total_mass for f in self.factors)

    @property
    def resolution(self) -> float:
        return max(f.resolution for f in self.factors)

    def diameter(self) -> float:
        return float(math.sqrt(sum(f.diameter() ** 2 for f in self.factors)))

    def factor_slices(self) -> Tuple[slice, ...]:
        slices = []
        start = 0
        for factor in self.factors:
            slices.append(slice(start, start + factor.ambient_dim))
            start += factor.ambient_dim
        return tuple(slices)

    def split_at(self, dim: int) -> Optional[Tuple["ProductMeasure", "ProductMeasure"]]:
        """Group the factors into a first block of ambient dimension ``dim`` and the rest.

        Returns None when no factor boundary falls at ``dim``.
        """
        total = 0
        for index, factor in enumerate(self.factors):
            total += factor.ambient_dim
            if total == dim and index + 1 < len(self.factors):
                return (ProductMeasure(self.factors[:index + 1]),
                        ProductMeasure(self.factors[index + 1:]))
        return None

    def materialize(self, cap: int = DEFAULT_PRODUCT_CAP) -> DiscreteMeasure:
        result = self.factors[0]
        for factor in self.factors[1:]:
            result = product_measure(result, factor, cap=cap)
        return result.with_metadata(**self.metadata) if self.metadata else result


MeasureLike = Union[DiscreteMeasure, ProductMeasure]


@dataclass(frozen=True)
class Ball:
    """Closed Euclidean ball B(center, radius)."""
    center: Tuple[float, ...]
    radius: float

    def __post_init__(self):
        center = tuple(float(c) for c in np.atleast_1d(np.asarray(self.center, dtype=float)))
        object.__setattr__(self, "center", center)
        if not self.radius > 0:
            raise LabError("bad_radius", f"ball radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class FrostmanEstimate:
    """Fitted growth exponent of the largest ball mass, with its audit."""
    exponent: float
    constant: float
    radii_used: Tuple[float, ...]
    max_violation: float
    fit: ScalingFit

    def to_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "constant": self.constant,
            "radii_used": list(self.radii_used),
            "max_violation": self.max_violation,
            "r_squared": self.fit.r_squared,
        }


def _check_radii_resolution(mu: MeasureLike, radii: np.ndarray):
    if mu.resolution > 0 and np.any(radii < mu.resolution * (1.0 - 1e-9)):
        raise LabError("below_resolution",
                       f"radius {radii.min():.3e} is below the measure resolution {mu.resolution:.3e}")


def ball_mass(mu: DiscreteMeasure, b: Ball) -> float:
    """Mass of the closed ball ``b``."""
    center = np.asarray(b.center, dtype=float)
    if center.size != mu.ambient_dim:
        raise LabError("dimension",
                       f"ball centre has dimension {center.size}, measure has {mu.ambient_dim}")
    distances = np.linalg.norm(mu.points - center, axis=1)
    return float(math.fsum(mu.weights[distances <= b.radius]))


def ball_masses(mu: DiscreteMeasure, centers: np.ndarray, radii: Sequence[float]) -> np.ndarray:
    """
    Closed-ball masses for every (centre, radius) pair.

    Args:
        mu: Measure to evaluate
        centers: (C, d) array of ball centres
        radii: Radii, any order

    Returns:
        (C, R) array whose column order follows ``radii``
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if centers.shape[1] != mu.ambient_dim:
        raise LabError("dimension",
                       f"centres have dimension {centers.shape[1]}, measure has {mu.ambient_dim}")
    radii = np.asarray(radii, dtype=float).reshape(-1)
    order = np.argsort(radii)
    sorted_radii = radii[order]
    n_radii = radii.size

    out = np.empty((centers.shape[0], n_radii))
    chunk = max(1, PAIR_CHUNK // mu.atom_count)
    for start in range(0, centers.shape[0], chunk):
        distances = cdist(centers[start:start + chunk], mu.points)
        rows = distances.shape[0]
        # atom lies in ball k iff fewer than k+1 radii are strictly below its distance
        slot = np.searchsorted(sorted_radii, distances, side="left")
        flat = slot + (n_radii + 1) * np.arange(rows)[:, None]
        sums = np.bincount(flat.ravel(),
                           weights=np.broadcast_to(mu.weights, distances.shape).ravel(),
                           minlength=rows * (n_radii + 1)).reshape(rows, n_radii + 1)
        out[start:start + rows, order] = np.cumsum(sums, axis=1)[:, :n_radii]
    return out


def default_radii(mu: MeasureLike, count: int = 10) -> np.ndarray:
    """Geometric radii from a quarter of the diameter down towards the resolution floor."""
    diam = mu.diameter() or 1.0
    hi = diam / 4.0
    lo = max(mu.resolution * 2.0, hi * 2.0 ** -10)
    return np.geomspace(hi, lo, count)


def frostman_exponent(mu: DiscreteMeasure,
                      radii: Optional[Sequence[float]] = None,
                      centers: Union[int, np.ndarray] = DEFAULT_FROSTMAN_CENTERS,
                      seed: int = 0) -> FrostmanEstimate:
    """
    Estimate the Frostman exponent s in mu(B(x, r)) <= C r^s.

    Centres are atoms drawn by weight (or an explicit array); the largest
    ball mass at each radius is regressed against the radius in log-log
    coordinates, and the exponent is clamped to [0, d].

    Args:
        mu: Measure to audit
        radii: At least three radii; defaults to ``default_radii(mu)``
        centers: Number of weighted centre draws, or an explicit (C, d) array
        seed: Seed for centre sampling

    Returns:
        FrostmanEstimate

    Raises:
        LabError: ``insufficient_scales`` for fewer than three radii,
            ``below_resolution`` for radii under the construction floor
    """
    radii_arr = default_radii(mu) if radii is None else np.asarray(radii, dtype=float).reshape(-1)
    radii_arr = np.unique(radii_arr)
    if radii_arr.size < 3:
        raise LabError("insufficient_scales", f"need at least 3 distinct radii, got {radii_arr.size}")
    if np.any(radii_arr <= 0):
        raise LabError("bad_radius", "radii must be positive")
    _check_radii_resolution(mu, radii_arr)

    if isinstance(centers, (int, np.integer)):
        if mu.atom_count <= centers:
            center_points = mu.points[mu.weights > 0]
        else:
            rng = np.random.default_rng(seed)
            probabilities = mu.weights / mu.weights.sum()
            picks = rng.choice(mu.atom_count, size=int(centers), replace=True, p=probabilities)
            center_points = mu.points[np.unique(picks)]
    else:
        center_points = np.atleast_2d(np.asarray(centers, dtype=float))

    masses = ball_masses(mu, center_points, radii_arr)
    peak = np.maximum(masses.max(axis=0), np.finfo(float).tiny)
    fit = fit_scaling(np.log(radii_arr), np.log(peak), min_points=3)

    exponent = float(np.clip(fit.slope, 0.0, mu.ambient_dim))
    constant = float(math.exp(fit.intercept))
    predicted = constant * radii_arr ** exponent
    max_violation = max(0.0, float((masses / predicted).max()) - 1.0)

    logger.debug(f"Frostman audit: exponent {exponent:.4f} from {center_points.shape[0]} centres, "
                 f"{radii_arr.size} radii, max violation {max_violation:.3f}")
    return FrostmanEstimate(
        exponent=exponent,
        constant=constant,
        radii_used=tuple(float(r) for r in radii_arr),
        max_violation=max_violation,
        fit=fit,
    )


def product_measure(mu: DiscreteMeasure, nu: DiscreteMeasure,
                    cap: int = DEFAULT_PRODUCT_CAP) -> DiscreteMeasure:
    """
    Materialised product mu x nu in R^{d1 + d2}.

    Atoms are ordered with the ``mu`` index varying slowest.

    Raises:
        LabError: ``product_too_large`` when the atom count would exceed ``cap``
    """
    count = mu.atom_count * nu.atom_count
    if count > cap:
        raise LabError("product_too_large",
                       f"product has {count} atoms, cap is {cap}; subsample the factors first")
    points = np.hstack([
        np.repeat(mu.points, nu.atom_count, axis=0),
        np.tile(nu.points, (mu.atom_count, 1)),
    ])
    weights = np.outer(mu.weights, nu.weights).ravel()
    metadata = {"construction": "product",
                "factors": [mu.metadata.get("provenance"), nu.metadata.get("provenance")]}
    return DiscreteMeasure(points, weights, max(mu.resolution, nu.resolution), metadata)


def lazy_product(*factors: DiscreteMeasure, metadata: Optional[Dict[str, Any]] = None) -> ProductMeasure:
    """Product measure that is never materialised unless asked to."""
    return ProductMeasure(tuple(factors), dict(metadata or {}))


def pushforward(mu: DiscreteMeasure,
                point_map: Callable[[np.ndarray], np.ndarray],
                vectorized: bool = True,
                resolution: Optional[float] = None) -> DiscreteMeasure:
    """
    Image measure f_# mu: atoms move, weights stay.

    Args:
        mu: Source measure
        point_map: With ``vectorized`` it maps the (N, d) atom array to an
            (N, d') array, otherwise it maps one d-vector at a time
        vectorized: Whether ``point_map`` works on the whole atom array
        resolution: Resolution of the image; defaults to the source's

    Raises:
        LabError: ``map_dimension`` if the image dimension is inconsistent
    """
    n_atoms = mu.atom_count
    if vectorized:
        image = np.asarray(point_map(mu.points), dtype=float)
        if image.ndim == 1 and image.shape[0] == n_atoms:
            image = image.reshape(-1, 1)
        if image.ndim != 2 or image.shape[0] != n_atoms:
            raise LabError("map_dimension",
                           f"map returned shape {image.shape} for {n_atoms} atoms")
    else:
        rows = [np.atleast_1d(np.asarray(point_map(p), dtype=float)).ravel() for p in mu.points]
        sizes = {row.size for row in rows}
        if len(sizes) != 1:
            raise LabError("map_dimension", f"map produced output dimensions {sorted(sizes)}")
        image = np.vstack(rows)

    floor = mu.resolution if resolution is None else float(resolution)
    return DiscreteMeasure(image, mu.weights, floor, mu.metadata)


def lower_derivative_density(mu: DiscreteMeasure, z: Sequence[float], radii: Sequence[float]) -> float:
    """
    Finite-scale proxy for the lower density at ``z``.

    Returns the minimum over ``radii`` of mu(B(z, r)) / (alpha(d) r^d). For
    an atom at ``z`` the value grows as the radii shrink; the minimum over
    the radii supplied is what gets returned.

    Raises:
        LabError: ``below_resolution`` for a radius under the resolution floor,
            ``unsorted_scales`` if the radii are not strictly decreasing
    """
    point = np.asarray(z, dtype=float).reshape(-1)
    if point.size != mu.ambient_dim:
        raise LabError("dimension", f"point has dimension {point.size}, measure has {mu.ambient_dim}")
    radii_arr = np.asarray(radii, dtype=float).reshape(-1)
    if radii_arr.size == 0 or np.any(radii_arr <= 0):
        raise LabError("bad_radius", "radii must be positive")
    if np.any(np.diff(radii_arr) >= 0):
        raise LabError("unsorted_scales", "radii must be strictly decreasing")
    _check_radii_resolution(mu, radii_arr)

    masses = ball_masses(mu, point[None, :], radii_arr)[0]
    densities = masses / (unit_ball_volume(mu.ambient_dim) * radii_arr ** mu.ambient_dim)
    return float(densities.min())


def density_pairing(lam: DiscreteMeasure, radius: float) -> float:
    """
    Integral of alpha(d)^{-1} r^{-d} lam(B(z, r)) against lam(z) at fixed ``radius``.

    For a measure with a bounded density this tends to the squared L^2 norm
    of the density as the radius shrinks.
    """
    if not radius > 0:
        raise LabError("bad_radius", "radius must be positive")
    _check_radii_resolution(lam, np.array([radius]))
    tree = cKDTree(lam.points)
    weights = np.array(lam.weights, dtype=float)
    paired = float(tree.count_neighbors(tree, radius, weights=(weights, weights)))
    return paired / (unit_ball_volume(lam.ambient_dim) * radius ** lam.ambient_dim)
