"""
Dimension and measure estimators for point clouds and constructed measures.

Box counting stands in for Hausdorff dimension (the two agree on the
self-similar sets the factory builds), energy sweeps across construction
levels stand in for sup{s : I_s(mu) < infinity}, and the covered-volume
curve decides whether a projected set looks Lebesgue-positive.
"""

import math
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from core.errors import LabError
from core.fractals import DEFAULT_ATOM_CAP, ConstructedSet, FractalSpec, build_from_spec
from core.measure import DiscreteMeasure
from core.scaling import ScalingFit, fit_scaling
from core.spectral import riesz_energy_spatial
from utils.seeding import stream_rng

logger = logging.getLogger(__name__)

# Floor nudge so points on a cell boundary land in the upper cell
CELL_EPSILON = 1e-9
DEFAULT_OFFSETS = 3
PLATEAU_COUNT = 8
SATURATION_FRACTION = 0.9
MIN_SCALES = 4

POSITIVE_SLOPE = 0.15
NULL_SLOPE = -0.3
VERDICTS = ("positive", "null", "inconclusive")

PointsLike = Union[np.ndarray, DiscreteMeasure, ConstructedSet]


@dataclass(frozen=True)
class BoxCount:
    """Occupied delta-cells at one scale; ``spread`` is the max - min over grid offsets."""
    scale: float
    occupied: int
    spread: int = 0

    def covered_volume(self, d: int) -> float:
        return self.occupied * self.scale ** d


@dataclass(frozen=True)
class EnergyDimension:
    value: float
    flag: str
    ratios: Dict[float, float]
    levels: Tuple[int, ...] = ()

    def to_dict(self) -> dict:
        return {"value": self.value, "flag": self.flag, "levels": list(self.levels),
                "ratios": {str(k): v for k, v in self.ratios.items()}}


@dataclass(frozen=True)
class PositivityResult:
    curve: ScalingFit
    verdict: str
    box_fit: ScalingFit
    counts: Tuple[BoxCount, ...]

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "volume_slope": self.curve.slope,
                "box_slope": self.box_fit.slope, "scale_window": list(self.curve.scale_window)}


def _as_points(points: PointsLike) -> Tuple[np.ndarray, float]:
    if isinstance(points, ConstructedSet):
        return points.measure.points, points.resolution
    if isinstance(points, DiscreteMeasure):
        return points.points, points.resolution
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.size == 0:
        raise LabError("empty_set", "box counting needs at least one point")
    return arr, 0.0


def _occupied(points: np.ndarray, origin: np.ndarray, scale: float) -> int:
    cells = np.floor((points - origin) / scale + CELL_EPSILON).astype(np.int64)
    cells -= cells.min(axis=0)
    extent = cells.max(axis=0) + 1
    if float(np.prod(extent.astype(float))) < 2.0 ** 62:
        keys = np.ravel_multi_index(tuple(cells.T), tuple(int(e) for e in extent))
        return int(np.unique(keys).size)
    return int(np.unique(cells, axis=0).shape[0])


def count_boxes(points: PointsLike, scale: float, origin: Optional[Sequence[float]] = None,
                offsets: int = DEFAULT_OFFSETS, seed: int = 0) -> BoxCount:
    """
    Number of delta-cells meeting the cloud, minimised over grid placements.

    The first grid is anchored at ``origin`` (default: the cloud's lower
    corner); ``offsets`` further grids are shifted by seeded random
    fractions of a cell.
    """
    pts, _ = _as_points(points)
    if not scale > 0:
        raise LabError("bad_radius", f"box scale must be positive, got {scale}")
    anchor = pts.min(axis=0) if origin is None else np.asarray(origin, dtype=float).reshape(-1)
    counts = [_occupied(pts, anchor, scale)]
    if offsets:
        rng = stream_rng(seed, f"box-offsets-{float(scale)!r}")
        for shift in rng.random((offsets, pts.shape[1])):
            counts.append(_occupied(pts, anchor - shift * scale, scale))
    return BoxCount(float(scale), min(counts), max(counts) - min(counts))


def default_scales(points: PointsLike, resolution_floor: float = 0.0, count: int = 12) -> np.ndarray:
    """Geometric scales from extent/16 down to max(2 * floor, extent/16 * 2^-10)."""
    pts, floor = _as_points(points)
    floor = max(floor, resolution_floor)
    extent = float(np.ptp(pts, axis=0).max()) or 1.0
    hi = extent / 16.0
    lo = max(2.0 * floor, hi * 2.0 ** -10)
    if lo >= hi:
        raise LabError("insufficient_scales", f"resolution floor {floor:.3g} leaves no room below {hi:.3g}")
    return np.geomspace(hi, lo, count)


def _validate_scales(scales: Sequence[float], floor: float) -> np.ndarray:
    arr = np.asarray(scales, dtype=float).reshape(-1)
    if arr.size < MIN_SCALES:
        raise LabError("insufficient_scales", f"need at least {MIN_SCALES} scales, got {arr.size}")
    if np.any(arr <= 0):
        raise LabError("bad_radius", "scales must be positive")
    if np.any(np.diff(arr) >= 0):
        raise LabError("unsorted_scales", "scales must be strictly decreasing")
    if floor > 0 and np.any(arr < floor * (1.0 - CELL_EPSILON)):
        raise LabError("below_resolution", f"scale {arr.min():.3e} is below the resolution floor {floor:.3e}")
    return arr


def box_counts(points: PointsLike, scales: Sequence[float], resolution_floor: float = 0.0,
               origin: Optional[Sequence[float]] = None, offsets: int = DEFAULT_OFFSETS,
               seed: int = 0) -> List[BoxCount]:
    pts, floor = _as_points(points)
    arr = _validate_scales(scales, max(floor, resolution_floor))
    return [count_boxes(pts, float(delta), origin, offsets, seed) for delta in arr]


def _fit_window(counts: Sequence[BoxCount], distinct: int) -> Tuple[int, int]:
    usable = [i for i, c in enumerate(counts)
              if PLATEAU_COUNT <= c.occupied < SATURATION_FRACTION * distinct]
    if len(usable) < MIN_SCALES:
        raise LabError("insufficient_scales",
                       f"only {len(usable)} scales survive trimming (need {MIN_SCALES})",
                       detail=[(c.scale, c.occupied) for c in counts])
    return usable[0], usable[-1] + 1


def _distinct_points(pts: np.ndarray) -> int:
    return int(np.unique(pts, axis=0).shape[0]) if pts.shape[0] <= 2_000_000 else pts.shape[0]


def box_dimension(points: PointsLike, scales: Optional[Sequence[float]] = None,
                  resolution_floor: float = 0.0, offsets: int = DEFAULT_OFFSETS,
                  seed: int = 0) -> ScalingFit:
    """
    Box-counting slope of log N(delta) against log(1/delta).

    Scales whose count is below 8 (coarse plateau) or at least 90% of the
    distinct points (saturation) are trimmed before fitting.

    Args:
        points: (N, d) array, measure or constructed set
        scales: Strictly decreasing scales; defaults to ``default_scales``
        resolution_floor: Smallest admissible scale (the measure's own floor also applies)
        offsets: Random grid placements besides the anchored one
        seed: Seed for the offsets

    Returns:
        ScalingFit over the trimmed window

    Raises:
        LabError: ``empty_set``, ``insufficient_scales``, ``below_resolution``
            or ``unsorted_scales``
    """
    pts, floor = _as_points(points)
    floor = max(floor, resolution_floor)
    grid = default_scales(pts, floor) if scales is None else scales
    counts = box_counts(pts, grid, floor, offsets=offsets, seed=seed)
    window = _fit_window(counts, _distinct_points(pts))
    log_inverse = np.log([1.0 / c.scale for c in counts])
    log_counts = np.log([c.occupied for c in counts])
    fit = fit_scaling(log_inverse, log_counts, window=window)
    logger.debug(f"Box dimension {fit.slope:.4f} over scales "
                 f"{counts[window[0]].scale:.3g}..{counts[window[1] - 1].scale:.3g}")
    return fit


def lebesgue_positivity(points: PointsLike, resolution_floor: float = 0.0,
                        scales: Optional[Sequence[float]] = None,
                        offsets: int = DEFAULT_OFFSETS, seed: int = 0,
                        positive_slope: float = POSITIVE_SLOPE,
                        null_slope: float = NULL_SLOPE) -> PositivityResult:
    """
    Classify a cloud in R^d as Lebesgue-positive, null or inconclusive.

    The covered volume N(delta) delta^d is regressed on log(1/delta) over
    the box-counting window: flat (|slope| <= 0.15) means positive, a decay
    with slope <= -0.3 means null. Both thresholds can be overridden.
    """
    pts, floor = _as_points(points)
    floor = max(floor, resolution_floor)
    d = pts.shape[1]
    grid = default_scales(pts, floor) if scales is None else scales
    counts = box_counts(pts, grid, floor, offsets=offsets, seed=seed)
    window = _fit_window(counts, _distinct_points(pts))
    log_inverse = np.log([1.0 / c.scale for c in counts])
    box_fit = fit_scaling(log_inverse, np.log([c.occupied for c in counts]), window=window)
    curve = fit_scaling(log_inverse, np.log([c.covered_volume(d) for c in counts]), window=window)

    if abs(curve.slope) <= positive_slope:
        verdict = "positive"
    elif curve.slope <= null_slope:
        verdict = "null"
    else:
        verdict = "inconclusive"
    logger.debug(f"Covered-volume slope {curve.slope:.4f}: {verdict}")
    return PositivityResult(curve, verdict, box_fit, tuple(counts))


def _provenance(mu: Union[DiscreteMeasure, ConstructedSet]) -> Optional[FractalSpec]:
    if isinstance(mu, ConstructedSet):
        return mu.provenance
    raw = mu.metadata.get("provenance")
    if raw is None:
        return None
    return raw if isinstance(raw, FractalSpec) else FractalSpec.from_dict(raw)


def energy_dimension(mu: Union[DiscreteMeasure, ConstructedSet], s_grid: Sequence[float],
                     levels: Optional[Sequence[int]] = None, factor: float = 1.0,
                     cap: int = DEFAULT_ATOM_CAP) -> EnergyDimension:
    """
    Largest s in ``s_grid`` whose Riesz energy stays bounded across construction levels.

    The measure is rebuilt from its provenance at each level L. With
    I_L the off-diagonal energy at level L, the increments
    I_L - I_{L-1} of a self-similar construction grow geometrically, with
    ratio below 1 exactly when s is below the dimension; s counts as finite
    when the last increment ratio is below ``factor``.

    Args:
        mu: Factory-built measure (or its ConstructedSet)
        s_grid: Increasing exponents in (0, d)
        levels: Construction levels to sweep; defaults to the last five up to mu's level
        factor: Divergence threshold on the increment ratio
        cap: Atom cap for the rebuilt levels

    Raises:
        LabError: ``no_level_sweep`` without provenance or with fewer than three levels
    """
    grid = np.asarray(s_grid, dtype=float).reshape(-1)
    if grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise LabError("unsorted_scales", "s_grid must be nonempty and increasing")
    measure = mu.measure if isinstance(mu, ConstructedSet) else mu
    if np.any(grid <= 0) or np.any(grid >= measure.ambient_dim):
        raise LabError("bad_exponent", f"s_grid must lie in (0, {measure.ambient_dim})")
    if np.count_nonzero(measure.weights) <= 1 or np.unique(measure.points, axis=0).shape[0] == 1:
        return EnergyDimension(float(grid[0]), "zero_dimensional", {})

    spec = _provenance(mu)
    if spec is None:
        raise LabError("no_level_sweep", "measure carries no construction provenance to sweep")
    sweep = list(levels) if levels is not None else list(range(max(1, spec.level - 4), spec.level + 1))
    if len(sweep) < 3:
        raise LabError("no_level_sweep", f"need at least three construction levels, got {sweep}")

    energies = np.empty((len(sweep), grid.size))
    for row, level in enumerate(sweep):
        built = build_from_spec(spec.at_level(level), cap).measure
        energies[row] = [riesz_energy_spatial(built, float(s)).value for s in grid]
    increments = np.diff(energies, axis=0)

    ratios: Dict[float, float] = {}
    best = None
    for column, s in enumerate(grid):
        previous, last = increments[-2, column], increments[-1, column]
        ratio = last / previous if previous > 0 else math.inf
        ratios[float(s)] = float(ratio)
        if ratio < factor:
            best = float(s)
    if best is None:
        logger.debug("No exponent in the grid has bounded energy")
        return EnergyDimension(0.0, "all_divergent", ratios, tuple(sweep))
    logger.debug(f"Energy dimension {best} from levels {sweep}")
    return EnergyDimension(best, "ok", ratios, tuple(sweep))
