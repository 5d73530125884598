"""
Distance measures delta(mu, nu)(B) = (mu x nu)({(x, y) : |x - y| in B}).

Histograms of pairwise distances, an L^2 indicator for their densities, the
weighted pairing int delta(mu)(t) delta(nu)(t) t^{1-n} dt, and the
three-way consistency check that ties the pairing to the projections S_g.
"""

import math
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np
from scipy.spatial.distance import cdist

from core.errors import LabError
from core.measure import PAIR_CHUNK, DiscreteMeasure, density_pairing, product_measure, pushforward, sphere_area
from core.rotations import Rotation, RotationMeasure, s_map

logger = logging.getLogger(__name__)

DEFAULT_BINS = 64
STABILITY_TOLERANCE = 0.1


@dataclass(frozen=True, eq=False)
class DistanceMeasure:
    """
    Histogram of pairwise distances.

    ``masses`` covers the bins, ``diagonal_mass`` the pairs at distance 0
    and ``overflow_mass`` pairs beyond the last edge; together they add up
    to ``source_mass``.
    """
    bin_edges: np.ndarray
    masses: np.ndarray
    source_mass: float
    diagonal_mass: float = 0.0
    overflow_mass: float = 0.0

    def __post_init__(self):
        edges = np.array(self.bin_edges, dtype=float).reshape(-1)
        masses = np.array(self.masses, dtype=float).reshape(-1)
        if edges.size != masses.size + 1:
            raise LabError("dimension", f"{edges.size} edges for {masses.size} bins")
        if edges[0] != 0.0 or np.any(np.diff(edges) <= 0):
            raise LabError("bad_bins", "bin edges must start at 0 and increase strictly")
        if np.any(masses < 0):
            raise LabError("negative_weight", "bin masses must be nonnegative")
        edges.setflags(write=False)
        masses.setflags(write=False)
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "masses", masses)

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.bin_edges)

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    @property
    def density(self) -> np.ndarray:
        return self.masses / self.widths

    @property
    def bin_count(self) -> int:
        return int(self.masses.size)

    def coarsened(self) -> "DistanceMeasure":
        """Merge neighbouring bins pairwise (an odd last bin stays as it is)."""
        keep = self.bin_count - self.bin_count % 2
        masses = self.masses[:keep].reshape(-1, 2).sum(axis=1)
        edges = self.bin_edges[:keep + 1:2]
        if keep < self.bin_count:
            masses = np.append(masses, self.masses[-1])
            edges = np.append(edges, self.bin_edges[-1])
        return DistanceMeasure(edges, masses, self.source_mass, self.diagonal_mass, self.overflow_mass)


@dataclass(frozen=True)
class L2Indicator:
    """Squared L^2 norm of the histogram density and its ratio to the pairwise-coarsened value."""
    value: float
    refinement_ratio: float
    stable: bool


@dataclass(frozen=True)
class ConsistencyTriplet:
    """The three sides of the distance-measure chain at radius r."""
    density_side: float
    middle: float
    pairing: float
    constant: float
    radius: float

    @property
    def spread(self) -> float:
        values = [self.density_side, self.middle, self.pairing]
        low = min(values)
        return max(values) / low if low > 0 else math.inf

    def consistent(self, factor: float = 2.0) -> bool:
        return self.spread <= factor

    def to_dict(self) -> dict:
        return {"density_side": self.density_side, "middle": self.middle, "pairing": self.pairing,
                "constant": self.constant, "radius": self.radius, "spread": self.spread}


def common_edges(mu: DiscreteMeasure, nu: DiscreteMeasure, bins: int = DEFAULT_BINS) -> np.ndarray:
    """``bins`` equal bins on [0, D], D the diagonal of the joint bounding box."""
    stacked = np.vstack([mu.points, nu.points])
    reach = float(np.linalg.norm(stacked.max(axis=0) - stacked.min(axis=0))) or 1.0
    return np.linspace(0.0, reach, int(bins) + 1)


def distance_measure(mu: DiscreteMeasure, nu: DiscreteMeasure,
                     bins: Union[int, Sequence[float]] = DEFAULT_BINS) -> DistanceMeasure:
    """
    Histogram of |x - y| under mu x nu.

    Args:
        mu: First measure
        nu: Second measure (may be ``mu`` itself)
        bins: Number of equal bins over the joint diameter, or explicit edges starting at 0

    Returns:
        DistanceMeasure; pairs at distance exactly 0 are split out as ``diagonal_mass``

    Raises:
        LabError: ``dimension`` for mismatched spaces, ``bins_too_fine`` if a
            bin is narrower than the coarser resolution
    """
    if mu.ambient_dim != nu.ambient_dim:
        raise LabError("dimension", f"measures live in R^{mu.ambient_dim} and R^{nu.ambient_dim}")
    edges = common_edges(mu, nu, bins) if np.isscalar(bins) else np.asarray(bins, dtype=float).reshape(-1)
    if edges.size < 2:
        raise LabError("degenerate_bins", "need at least one bin")
    floor = max(mu.resolution, nu.resolution)
    if floor > 0 and float(np.diff(edges).min()) < floor * (1.0 - 1e-9):
        raise LabError("bins_too_fine", f"bin width {np.diff(edges).min():.3g} is below the resolution {floor:.3g}")

    n_bins = edges.size - 1
    masses = np.zeros(n_bins)
    diagonal = []
    overflow = []
    chunk = max(1, PAIR_CHUNK // nu.atom_count)
    for start in range(0, mu.atom_count, chunk):
        dist = cdist(mu.points[start:start + chunk], nu.points).ravel()
        pair_weights = np.outer(mu.weights[start:start + chunk], nu.weights).ravel()
        zero = dist == 0.0
        diagonal.append(float(pair_weights[zero].sum()))
        beyond = dist > edges[-1]
        overflow.append(float(pair_weights[beyond].sum()))
        inside = ~(zero | beyond)
        slot = np.clip(np.searchsorted(edges, dist[inside], side="right") - 1, 0, n_bins - 1)
        masses += np.bincount(slot, weights=pair_weights[inside], minlength=n_bins)

    logger.debug(f"Distance histogram: {mu.atom_count}x{nu.atom_count} pairs into {n_bins} bins")
    return DistanceMeasure(edges, masses, mu.total_mass * nu.total_mass,
                           math.fsum(diagonal), math.fsum(overflow))


def distance_l2_indicator(dm: DistanceMeasure, tolerance: float = STABILITY_TOLERANCE) -> L2Indicator:
    """
    Squared L^2 norm of the histogram density, sum(mass_i^2 / width_i).

    Merging neighbouring bins leaves the value of a square-integrable
    density nearly unchanged, while a point mass doubles it, so the ratio
    fine/coarse is the L^2 indicator.

    Raises:
        LabError: ``degenerate_bins`` for a single-bin histogram
    """
    if dm.bin_count < 2:
        raise LabError("degenerate_bins", "the L^2 indicator needs at least two bins")
    value = float(np.sum(dm.masses ** 2 / dm.widths))
    coarse = dm.coarsened()
    coarse_value = float(np.sum(coarse.masses ** 2 / coarse.widths))
    ratio = value / coarse_value if coarse_value > 0 else math.inf
    return L2Indicator(value, ratio, abs(ratio - 1.0) < tolerance)


def weighted_distance_pairing(dmu: DistanceMeasure, dnu: DistanceMeasure, n: int) -> float:
    """Midpoint rule for the integral of delta(mu)(t) delta(nu)(t) t^{1-n} dt over the bins."""
    if dmu.bin_count != dnu.bin_count or not np.allclose(dmu.bin_edges, dnu.bin_edges, rtol=1e-12, atol=0.0):
        raise LabError("bin_mismatch", "distance histograms must share their bin edges")
    return float(np.sum(dmu.density * dnu.density * dmu.midpoints ** (1 - n) * dmu.widths))


def _sorted_distances(mu: DiscreteMeasure):
    dist = cdist(mu.points, mu.points)
    weights = np.outer(mu.weights, mu.weights)
    off = dist > 0
    values, pair_weights = dist[off], weights[off]
    order = np.argsort(values)
    return values[order], np.concatenate([[0.0], np.cumsum(pair_weights[order])]), pair_weights[order]


def consistency_triplet(mu: DiscreteMeasure, nu: DiscreteMeasure, r: float,
                        g_samples: Union[RotationMeasure, Sequence[Rotation]],
                        bins: int = DEFAULT_BINS) -> ConsistencyTriplet:
    """
    Evaluate the distance-measure chain three independent ways.

    1. The average over g of the density pairing of lambda_g = (S_g)_#(mu x nu) at radius r.
    2. c int delta(mu)([t - r, t + r]) / (2r) t^{1-n} d delta(nu)(t) from sorted pair distances.
    3. c times ``weighted_distance_pairing`` of the two histograms.

    Here c = 1 / area(S^{n-1}); for Haar g the three agree as r -> 0 and
    the measures smooth out.
    """
    n = mu.ambient_dim
    if nu.ambient_dim != n:
        raise LabError("dimension", f"measures live in R^{n} and R^{nu.ambient_dim}")
    if not r > 0:
        raise LabError("bad_radius", "radius must be positive")
    if isinstance(g_samples, RotationMeasure):
        rotations = g_samples.samples
        g_weights = g_samples.weights / g_samples.weights.sum()
    else:
        rotations = tuple(g_samples)
        g_weights = np.full(len(rotations), 1.0 / len(rotations))
    constant = 1.0 / sphere_area(n)

    joint = product_measure(mu, nu)
    per_g = [density_pairing(pushforward(joint, s_map(g), resolution=0.0), r) for g in rotations]
    density_side = float(np.dot(g_weights, per_g))

    mu_dist, mu_cumulative, _ = _sorted_distances(mu)
    nu_dist, _, nu_weights = _sorted_distances(nu)
    upper = np.searchsorted(mu_dist, nu_dist + r, side="right")
    lower = np.searchsorted(mu_dist, nu_dist - r, side="left")
    window_mass = mu_cumulative[upper] - mu_cumulative[lower]
    middle = constant * float(np.sum(nu_weights * window_mass / (2.0 * r) * nu_dist ** (1 - n)))

    edges = common_edges(mu, nu, bins)
    pairing = constant * weighted_distance_pairing(distance_measure(mu, mu, edges),
                                                   distance_measure(nu, nu, edges), n)
    logger.debug(f"Consistency at r={r}: density {density_side:.4g}, middle {middle:.4g}, pairing {pairing:.4g}")
    return ConsistencyTriplet(density_side, middle, pairing, constant, float(r))
