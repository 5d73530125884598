"""
Builders for the fractal sets used by the experiments.

Central Cantor sets of prescribed dimension, their products, difference
sets and affine images, and the planar sharpness sets A_s and B_s. Every
builder returns a ``ConstructedSet`` whose measure is the natural uniform
self-similar measure of the construction.
"""

import math
import logging
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from core.errors import LabError
from core.measure import (
    DEFAULT_PRODUCT_CAP,
    DiscreteMeasure,
    product_measure,
    pushforward,
)

logger = logging.getLogger(__name__)

DEFAULT_ATOM_CAP = 10**7

FRACTAL_KINDS = ("central_cantor", "product", "sharpness_A", "sharpness_B",
                 "difference_set", "affine_embed")
_ARITY = {"product": 2, "difference_set": 1, "affine_embed": 1}
_SPEC_FIELDS = ("kind", "dimension_target", "level", "ratio", "seed", "children", "matrix", "offset")


def cantor_ratio(s: float) -> float:
    """Contraction ratio 2^{-1/s} of the two-map central Cantor set of dimension s.

    Ratios within 1e-9 of a unit fraction are snapped to it, so s = log 2 / log 3
    gives exactly 1/3.
    """
    ratio = 2.0 ** (-1.0 / s)
    inverse = 1.0 / ratio
    if abs(inverse - round(inverse)) < 1e-9:
        ratio = 1.0 / round(inverse)
    return ratio


def cantor_dimension(ratio: float) -> float:
    return math.log(2.0) / math.log(1.0 / ratio)


def _check_dimension(s: Optional[float]):
    if s is None or not (0.0 < s <= 1.0):
        raise LabError("bad_dimension", f"dimension target must lie in (0, 1], got {s}")


@dataclass
class FractalSpec:
    """Declarative recipe for a constructed set."""
    kind: str
    dimension_target: Optional[float] = None
    level: int = 1
    ratio: Optional[float] = None
    seed: int = 0
    children: List["FractalSpec"] = field(default_factory=list)
    matrix: Optional[List[List[float]]] = None
    offset: Optional[List[float]] = None

    def __post_init__(self):
        if self.kind not in FRACTAL_KINDS:
            raise LabError("unknown_kind", f"unknown fractal kind '{self.kind}'. Available: {list(FRACTAL_KINDS)}")
        if int(self.level) < 1:
            raise LabError("bad_level", f"level must be at least 1, got {self.level}")
        self.level = int(self.level)
        self.children = [c if isinstance(c, FractalSpec) else FractalSpec.from_dict(c)
                         for c in self.children]
        arity = _ARITY.get(self.kind, 0)
        if len(self.children) != arity:
            raise LabError("bad_arity", f"kind '{self.kind}' takes {arity} children, got {len(self.children)}")

        if self.kind == "central_cantor":
            if self.dimension_target is None and self.ratio is None:
                raise LabError("bad_dimension", "central_cantor needs a dimension_target or a ratio")
            if self.dimension_target is not None:
                _check_dimension(self.dimension_target)
                derived = cantor_ratio(self.dimension_target)
                if self.ratio is not None and abs(self.ratio - derived) > 1e-9:
                    raise LabError("bad_ratio",
                                   f"ratio {self.ratio} does not match dimension {self.dimension_target}")
                self.ratio = derived
            else:
                if not (0.0 < self.ratio <= 0.5):
                    raise LabError("bad_ratio", f"ratio must lie in (0, 1/2], got {self.ratio}")
                self.dimension_target = cantor_dimension(self.ratio)
        elif self.kind in ("sharpness_A", "sharpness_B"):
            _check_dimension(self.dimension_target)
        elif self.kind == "affine_embed" and self.matrix is None:
            raise LabError("bad_arity", "affine_embed needs a matrix")

    def at_level(self, level: int) -> "FractalSpec":
        """Same recipe at another construction level (composites shift every child)."""
        return replace(self, level=level, children=[c.at_level(level) for c in self.children])

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"kind": self.kind, "level": self.level, "seed": self.seed}
        if self.dimension_target is not None:
            data["dimension_target"] = self.dimension_target
        if self.ratio is not None:
            data["ratio"] = self.ratio
        if self.children:
            data["children"] = [c.to_dict() for c in self.children]
        if self.matrix is not None:
            data["matrix"] = [list(map(float, row)) for row in self.matrix]
        if self.offset is not None:
            data["offset"] = list(map(float, self.offset))
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FractalSpec":
        unknown = set(data) - set(_SPEC_FIELDS)
        if unknown:
            raise LabError("unknown_config_key", f"unknown fractal spec keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class ConstructedSet:
    """A built fractal: its measure plus the analytic facts about the ideal set."""
    measure: DiscreteMeasure
    nominal_dimension: float
    resolution: float
    provenance: FractalSpec


def _finish(points: np.ndarray, weights: np.ndarray, resolution: float,
            nominal: float, spec: FractalSpec) -> ConstructedSet:
    metadata = {"provenance": spec.to_dict(), "nominal_dimension": nominal, "seed": spec.seed}
    measure = DiscreteMeasure(points, weights, resolution, metadata)
    return ConstructedSet(measure, nominal, resolution, spec)


def _check_cap(count: int, cap: int, what: str):
    if count > cap:
        raise LabError("too_large", f"{what} would have {count} atoms, cap is {cap}")


def cantor_points(ratio: float, level: int) -> np.ndarray:
    """Midpoints of the level-k intervals, lexicographic in the IFS address."""
    lefts = np.zeros(1)
    for _ in range(level):
        lefts = np.concatenate([ratio * lefts, ratio * lefts + (1.0 - ratio)])
    return lefts + ratio ** level / 2.0


def build_cantor(s: float, level: int, cap: int = DEFAULT_ATOM_CAP) -> ConstructedSet:
    """
    Level-k central Cantor set of dimension s on [0, 1].

    Uses the maps x -> r x and x -> r x + 1 - r with r = 2^{-1/s}; s = 1
    gives the uniform midpoint grid on [0, 1].

    Args:
        s: Target dimension in (0, 1]
        level: Construction depth k
        cap: Atom cap

    Returns:
        ConstructedSet with 2^k atoms of weight 2^{-k} and resolution r^k

    Raises:
        LabError: ``bad_dimension`` for s outside (0, 1], ``too_large`` above the cap
    """
    _check_dimension(s)
    spec = FractalSpec(kind="central_cantor", dimension_target=s, level=level)
    _check_cap(2 ** spec.level, cap, "Cantor set")
    points = cantor_points(spec.ratio, spec.level)
    weights = np.full(points.size, 2.0 ** -spec.level)
    return _finish(points, weights, spec.ratio ** spec.level, s, spec)


def build_sharpness_A(s: float, level: int, cap: int = DEFAULT_ATOM_CAP) -> ConstructedSet:
    """
    Planar sharpness set A_s = {(x, y) in R^2 x R^2 : x_1 in C_s, y_1 = 0}.

    Atoms are (c, u, 0, v) with c from the level-k Cantor set and u, v on a
    midpoint grid of [0, 1] whose spacing matches the Cantor resolution.
    """
    cantor = build_cantor(s, level, cap)
    grid_count = max(1, int(round(1.0 / cantor.resolution)))
    _check_cap(cantor.measure.atom_count * grid_count ** 2, cap, "sharpness set A_s")

    grid = (np.arange(grid_count) + 0.5) / grid_count
    c, u, v = np.meshgrid(cantor.measure.points[:, 0], grid, grid, indexing="ij")
    points = np.column_stack([c.ravel(), u.ravel(), np.zeros(c.size), v.ravel()])
    weights = np.repeat(cantor.measure.weights, grid_count ** 2) / grid_count ** 2
    spec = FractalSpec(kind="sharpness_A", dimension_target=s, level=level)
    return _finish(points, weights, cantor.resolution, 2.0 + s, spec)


def build_sharpness_B(s: float, level: int, cap: int = DEFAULT_ATOM_CAP) -> ConstructedSet:
    """Sharpness set B_s = {0} x C_s x {0} x C_s in R^4, nominal dimension 2s."""
    cantor = build_cantor(s, level, cap)
    count = cantor.measure.atom_count
    _check_cap(count * count, cap, "sharpness set B_s")

    first, second = np.meshgrid(cantor.measure.points[:, 0], cantor.measure.points[:, 0], indexing="ij")
    zeros = np.zeros(first.size)
    points = np.column_stack([zeros, first.ravel(), zeros, second.ravel()])
    weights = np.outer(cantor.measure.weights, cantor.measure.weights).ravel()
    spec = FractalSpec(kind="sharpness_B", dimension_target=s, level=level)
    return _finish(points, weights, cantor.resolution, 2.0 * s, spec)


def difference_dimension(source: ConstructedSet) -> float:
    """Analytic dimension of C - C.

    For a central Cantor set of ratio r the difference set is the attractor
    of three maps of ratio r, so its dimension is min(1, log 3 / log(1/r));
    for r >= 1/3 it is the whole interval [-1, 1]. Other inputs get the
    upper bound min(1, 2 dim C).
    """
    spec = source.provenance
    if spec.kind == "central_cantor":
        if spec.ratio >= 1.0 / 3.0 - 1e-12:
            return 1.0
        return min(1.0, math.log(3.0) / math.log(1.0 / spec.ratio))
    return min(1.0, 2.0 * source.nominal_dimension)


def difference_set(source: ConstructedSet, cap: int = DEFAULT_ATOM_CAP) -> ConstructedSet:
    """
    Pushforward of c x c under (x, y) -> x - y.

    Coincident differences are merged into one atom carrying their combined
    weight; the resolution doubles.

    Raises:
        LabError: ``dimension`` for inputs outside R^1, ``too_large`` above the cap
    """
    measure = source.measure
    if measure.ambient_dim != 1:
        raise LabError("dimension", f"difference_set needs a set in R^1, got R^{measure.ambient_dim}")
    _check_cap(measure.atom_count ** 2, cap, "difference set")

    x = measure.points[:, 0]
    diffs = (x[:, None] - x[None, :]).ravel()
    weights = np.outer(measure.weights, measure.weights).ravel()
    quantum = (source.resolution if source.resolution > 0 else 1.0) * 1e-6
    keys = np.round(diffs / quantum).astype(np.int64)
    _, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
    merged = np.bincount(inverse.ravel(), weights=weights)

    spec = FractalSpec(kind="difference_set", level=source.provenance.level,
                       children=[source.provenance])
    nominal = difference_dimension(source)
    logger.debug(f"Difference set: {diffs.size} pairs merged into {first.size} atoms")
    return _finish(diffs[first], merged, 2.0 * source.resolution, nominal, spec)


def product_set(first: ConstructedSet, second: ConstructedSet,
                cap: int = DEFAULT_PRODUCT_CAP) -> ConstructedSet:
    """Cartesian product; nominal dimensions add for these self-similar inputs."""
    measure = product_measure(first.measure, second.measure, cap=cap)
    spec = FractalSpec(kind="product", level=max(first.provenance.level, second.provenance.level),
                       children=[first.provenance, second.provenance])
    nominal = first.nominal_dimension + second.nominal_dimension
    return _finish(measure.points, measure.weights, measure.resolution, nominal, spec)


def affine_embed(source: ConstructedSet, matrix: Sequence[Sequence[float]],
                 offset: Optional[Sequence[float]] = None) -> ConstructedSet:
    """Image under x -> M x + b, typically into a higher-dimensional space.

    ``M`` must be injective for the nominal dimension to carry over.
    """
    mat = np.atleast_2d(np.asarray(matrix, dtype=float))
    if mat.shape[1] != source.measure.ambient_dim:
        raise LabError("map_dimension",
                       f"matrix has {mat.shape[1]} columns, set lives in R^{source.measure.ambient_dim}")
    if np.linalg.matrix_rank(mat) < mat.shape[1]:
        raise LabError("degenerate_input", "affine_embed needs an injective linear part")
    shift = np.zeros(mat.shape[0]) if offset is None else np.asarray(offset, dtype=float).reshape(-1)
    if shift.size != mat.shape[0]:
        raise LabError("map_dimension", f"offset has {shift.size} entries, matrix has {mat.shape[0]} rows")

    stretch = float(np.linalg.norm(mat, 2))
    image = pushforward(source.measure, lambda p: p @ mat.T + shift,
                        resolution=source.resolution * stretch)
    spec = FractalSpec(kind="affine_embed", level=source.provenance.level,
                       children=[source.provenance],
                       matrix=mat.tolist(), offset=shift.tolist())
    return _finish(image.points, image.weights, image.resolution, source.nominal_dimension, spec)


FRACTAL_BUILDERS: Dict[str, Callable[[FractalSpec, int], ConstructedSet]] = {
    "central_cantor": lambda spec, cap: build_cantor(spec.dimension_target, spec.level, cap),
    "sharpness_A": lambda spec, cap: build_sharpness_A(spec.dimension_target, spec.level, cap),
    "sharpness_B": lambda spec, cap: build_sharpness_B(spec.dimension_target, spec.level, cap),
    "difference_set": lambda spec, cap: difference_set(build_from_spec(spec.children[0], cap), cap),
    "product": lambda spec, cap: product_set(build_from_spec(spec.children[0], cap),
                                             build_from_spec(spec.children[1], cap), cap),
    "affine_embed": lambda spec, cap: affine_embed(build_from_spec(spec.children[0], cap),
                                                   spec.matrix, spec.offset),
}


def build_from_spec(spec: FractalSpec, cap: int = DEFAULT_ATOM_CAP) -> ConstructedSet:
    """Build any registered kind from its recipe."""
    builder = FRACTAL_BUILDERS.get(spec.kind)
    if builder is None:
        raise LabError("unknown_kind", f"no builder for '{spec.kind}'. Available: {list(FRACTAL_BUILDERS)}")
    logger.debug(f"Building {spec.kind} at level {spec.level}")
    built = builder(spec, cap)
    if spec.seed and built.provenance.seed != spec.seed:
        built = _finish(built.measure.points, built.measure.weights, built.resolution,
                        built.nominal_dimension, replace(built.provenance, seed=spec.seed))
    return built


def cantor_power_spec(s: float, level: int, copies: int) -> FractalSpec:
    """Recipe for the product of ``copies`` identical Cantor sets C_s."""
    factor = FractalSpec(kind="central_cantor", dimension_target=s, level=level)
    spec = factor
    for _ in range(copies - 1):
        spec = FractalSpec(kind="product", level=level, children=[spec, factor])
    return spec


# Reference measures with known closed forms, used as oracles

def uniform_interval(count: int) -> DiscreteMeasure:
    """Midpoint grid of ``count`` atoms on [0, 1], total mass 1."""
    points = (np.arange(count) + 0.5) / count
    return DiscreteMeasure(points, np.full(count, 1.0 / count), 1.0 / count,
                           {"construction": "uniform_interval"})


def uniform_cube(per_axis: int, dim: int) -> DiscreteMeasure:
    """Midpoint grid on [0, 1]^d with ``per_axis`` atoms per side, total mass 1."""
    axis = (np.arange(per_axis) + 0.5) / per_axis
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    points = np.column_stack([m.ravel() for m in mesh])
    return DiscreteMeasure(points, np.full(points.shape[0], 1.0 / points.shape[0]), 1.0 / per_axis,
                           {"construction": "uniform_cube"})


def uniform_segment(count: int, direction: Sequence[float]) -> DiscreteMeasure:
    """Midpoint grid on the segment from 0 to ``direction``."""
    vec = np.asarray(direction, dtype=float)
    t = (np.arange(count) + 0.5) / count
    return DiscreteMeasure(np.outer(t, vec), np.full(count, 1.0 / count),
                           float(np.linalg.norm(vec)) / count, {"construction": "uniform_segment"})


def uniform_circle(count: int, radius: float = 1.0) -> DiscreteMeasure:
    """Equally spaced atoms on the circle of ``radius``, total mass 1."""
    angles = 2.0 * np.pi * np.arange(count) / count
    points = radius * np.column_stack([np.cos(angles), np.sin(angles)])
    return DiscreteMeasure(points, np.full(count, 1.0 / count), 2.0 * np.pi * radius / count,
                           {"construction": "uniform_circle"})


def uniform_disk(count: int, seed: int = 0, radius: float = 1.0) -> DiscreteMeasure:
    """Independent uniform samples from the disk of ``radius``, total mass 1."""
    rng = np.random.default_rng(seed)
    r = radius * np.sqrt(rng.random(count))
    angles = 2.0 * np.pi * rng.random(count)
    points = np.column_stack([r * np.cos(angles), r * np.sin(angles)])
    return DiscreteMeasure(points, np.full(count, 1.0 / count), 0.0,
                           {"construction": "uniform_disk", "seed": seed})


def single_atom(point: Sequence[float], weight: float = 1.0) -> DiscreteMeasure:
    return DiscreteMeasure(np.atleast_2d(np.asarray(point, dtype=float)), [weight], 0.0,
                           {"construction": "single_atom"})
