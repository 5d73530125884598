"""
Base class for experiment scenarios.
A scenario turns one claim about projections of fractal sets into a
sampled check: it builds its inputs once, evaluates one parameter sample
at a time and finally applies its pass rule to the collected results.
"""

import os
import math
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.dimension import box_dimension
from core.errors import LabError
from core.export import ExportManager
from core.fractals import ConstructedSet, FractalSpec, build_from_spec
from core.measure import DiscreteMeasure

logger = logging.getLogger(__name__)

# Parameters every scenario accepts; None means "take the value from the app config"
COMMON_DEFAULTS: Dict[str, Any] = {
    "tolerance": None,
    "fraction": None,
    "box_scales": 8,
    "box_offsets": None,
}


@dataclass
class ScenarioContext:
    """Everything a scenario may read while preparing its inputs."""
    n: int
    seed: int
    params: Dict[str, Any]
    settings: Dict[str, Any]
    output_dir: str
    fractals: Dict[str, FractalSpec] = field(default_factory=dict)
    rotation_samples: Optional[int] = None
    scales: Optional[List[float]] = None
    radii: Optional[List[float]] = None
    exporter: ExportManager = field(default_factory=ExportManager)
    artifacts: List[str] = field(default_factory=list)

    @property
    def tolerance(self) -> float:
        value = self.params.get("tolerance")
        return float(self.settings["runner"]["slope_tolerance"] if value is None else value)

    @property
    def fraction(self) -> float:
        value = self.params.get("fraction")
        return float(self.settings["runner"]["almost_all_fraction"] if value is None else value)

    @property
    def box_offsets(self) -> int:
        value = self.params.get("box_offsets")
        return int(self.settings["estimators"]["box_offsets"] if value is None else value)

    def fractal(self, name: str, default: FractalSpec) -> FractalSpec:
        """The configured recipe for input ``name``, or the scenario's default."""
        return self.fractals.get(name, default)

    def build(self, name: str, default: FractalSpec) -> ConstructedSet:
        """Build input ``name`` and keep a copy of its measure among the artifacts."""
        built = build_from_spec(self.fractal(name, default), cap=int(self.settings["limits"]["atom_cap"]))
        logger.info(f"Input {name}: {built.provenance.kind}, {built.measure.atom_count} atoms, "
                    f"nominal dimension {built.nominal_dimension:.4f}")
        self.save_measure(name, built.measure)
        return built

    def artifact_path(self, filename: str) -> str:
        return os.path.join(self.output_dir, filename)

    def keep(self, result: Tuple[bool, str], path: str):
        success, message = result
        if success:
            self.artifacts.append(os.path.relpath(path, self.output_dir))
        else:
            logger.warning(message)

    def save_measure(self, name: str, measure: DiscreteMeasure) -> Optional[str]:
        limit = int(self.settings["limits"].get("export_atom_limit", 0))
        if measure.atom_count > limit:
            logger.info(f"Not writing measure {name}: {measure.atom_count} atoms exceed the export limit {limit}")
            return None
        path = self.artifact_path(os.path.join("measures", f"{name}.tbl"))
        self.keep(self.exporter.export_measure(measure, path), path)
        return path


@dataclass
class Check:
    """One pass rule evaluated on the collected samples."""
    label: str
    theorem_bound: float
    measured: float
    margin: float
    passed: bool
    exceptions: List[Any] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {"label": self.label, "theorem_bound": self.theorem_bound, "measured": self.measured,
                "margin": self.margin, "passed": self.passed, "exceptions": list(self.exceptions)}


@dataclass
class Verdict:
    checks: List[Check]
    notes: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def binding(self) -> Check:
        """The first failing check, otherwise the one with the smallest margin."""
        failing = [c for c in self.checks if not c.passed]
        if failing:
            return failing[0]
        return min(self.checks, key=lambda c: c.margin)


def _finite(value: Any) -> float:
    try:
        number = float(value)
    except (TypeError, ValueError):
        return -math.inf
    return number if math.isfinite(number) else -math.inf


def lower_quantile_check(label: str, values: Sequence[Any], bound: float, tolerance: float,
                         fraction: float, keys: Optional[Sequence[Any]] = None) -> Check:
    """
    At least ``fraction`` of the values must reach ``bound - tolerance``.

    ``measured`` is the value at that rank (for fraction 1 the minimum), so
    the check passes exactly when measured >= bound - tolerance. The margin is
    taken against bound - tolerance and is nonnegative exactly when the check
    passes. Missing or non-finite values count as failures.
    """
    numbers = [_finite(v) for v in values]
    if not numbers:
        raise LabError("empty_set", f"no samples for check '{label}'")
    keys = list(keys) if keys is not None else list(range(len(numbers)))
    needed = max(1, int(math.ceil(fraction * len(numbers) - 1e-9)))
    measured = sorted(numbers, reverse=True)[needed - 1]
    exceptions = [k for k, v in zip(keys, numbers) if v < bound - tolerance]
    threshold = bound - tolerance
    return Check(label, float(bound), measured, measured - threshold, measured >= threshold, exceptions)


def fraction_check(label: str, flags: Sequence[bool], fraction: float,
                   keys: Optional[Sequence[Any]] = None) -> Check:
    """The share of true flags must reach ``fraction``."""
    if not flags:
        raise LabError("empty_set", f"no samples for check '{label}'")
    keys = list(keys) if keys is not None else list(range(len(flags)))
    share = sum(bool(f) for f in flags) / len(flags)
    exceptions = [k for k, f in zip(keys, flags) if not f]
    return Check(label, float(fraction), share, share - fraction, share >= fraction - 1e-12, exceptions)


def upper_check(label: str, value: Any, bound: float) -> Check:
    """A single measured value that must not exceed ``bound``."""
    number = _finite(value)
    measured = math.inf if number == -math.inf else number
    return Check(label, float(bound), measured, bound - measured, measured <= bound)


def band_check(label: str, values: Sequence[Any], target: float, tolerance: float,
               keys: Optional[Sequence[Any]] = None) -> Check:
    """Every value within ``tolerance`` of ``target``; measured is the worst offender."""
    numbers = [_finite(v) for v in values]
    if not numbers:
        raise LabError("empty_set", f"no samples for check '{label}'")
    keys = list(keys) if keys is not None else list(range(len(numbers)))
    deviations = [abs(v - target) for v in numbers]
    worst = int(np.argmax(deviations))
    exceptions = [k for k, d in zip(keys, deviations) if d > tolerance]
    return Check(label, float(target), numbers[worst], tolerance - deviations[worst],
                 deviations[worst] <= tolerance, exceptions)


def require(condition: bool, message: str):
    """Refuse a configuration whose inputs do not satisfy the claim's hypothesis."""
    if not condition:
        raise LabError("hypothesis_not_met", message)


def projection_scales(points: np.ndarray, floor: float, count: int,
                      divisor: float = 4.0) -> np.ndarray:
    """Geometric scales from extent/divisor down to twice the image's resolution floor."""
    extent = float(np.ptp(points, axis=0).max()) or 1.0
    hi = extent / divisor
    lo = 2.0 * floor if floor > 0 else hi * 2.0 ** -10
    if lo >= hi:
        raise LabError("insufficient_scales", f"resolution floor {floor:.3g} leaves no room below {hi:.3g}")
    return np.geomspace(hi, lo, int(count))


def slope_summary(points: np.ndarray, scales: Sequence[float], offsets: int, seed: int) -> Dict[str, Any]:
    """Box-counting slope as a plain dict; estimator failures are recorded, not raised."""
    try:
        fit = box_dimension(points, scales=scales, offsets=offsets, seed=seed)
    except LabError as e:
        logger.warning(f"Box dimension failed: {e}")
        return {"slope": None, "error": e.code}
    return {"slope": fit.slope, "r_squared": fit.r_squared, "window": list(fit.scale_window)}


class BaseScenario(ABC):
    """Abstract base class defining the interface for experiment scenarios"""

    name: str = ""
    description: str = ""
    dims: Tuple[int, ...] = (2,)
    defaults: Dict[str, Any] = {}

    def resolve_params(self, overrides: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        """
        Merge configured parameters over the scenario's defaults

        Args:
            overrides: Parameters from the scenario configuration

        Returns:
            Complete parameter dictionary

        Raises:
            LabError: ``unknown_config_key`` for a parameter the scenario does not declare
        """
        params = dict(COMMON_DEFAULTS)
        params.update(self.defaults)
        unknown = sorted(set(overrides or {}) - set(params))
        if unknown:
            raise LabError("unknown_config_key",
                           f"scenario '{self.name}' has no parameters {unknown}. Available: {sorted(params)}")
        params.update(overrides or {})
        return params

    def check_dimension(self, n: int):
        if n not in self.dims:
            raise LabError("unsupported_dimension", f"scenario '{self.name}' runs for n in {self.dims}, got {n}")

    @abstractmethod
    def prepare(self, context: ScenarioContext) -> Dict[str, Any]:
        """
        Build the scenario's inputs

        Args:
            context: Configuration, settings and artifact location

        Returns:
            Prepared state shared (read-only) by every sample
        """
        pass

    @abstractmethod
    def sample_count(self, prepared: Dict[str, Any]) -> int:
        """
        Number of independent samples the scenario evaluates

        Args:
            prepared: State returned by ``prepare``

        Returns:
            Sample count
        """
        pass

    @abstractmethod
    def run_sample(self, prepared: Dict[str, Any], index: int, rng: np.random.Generator) -> Dict[str, Any]:
        """
        Evaluate one sample

        Args:
            prepared: State returned by ``prepare``
            index: Sample index
            rng: Generator owned by this sample

        Returns:
            JSON-compatible dictionary of results for this sample
        """
        pass

    @abstractmethod
    def evaluate(self, prepared: Dict[str, Any], results: List[Dict[str, Any]]) -> Verdict:
        """
        Apply the pass rule

        Args:
            prepared: State returned by ``prepare``
            results: Per-sample results in index order

        Returns:
            Verdict built only from ``results`` and the prepared bounds
        """
        pass

    def write_artifacts(self, prepared: Dict[str, Any], results: List[Dict[str, Any]],
                        context: ScenarioContext):
        """Write plot-ready tables; the default writes nothing."""
        return None
