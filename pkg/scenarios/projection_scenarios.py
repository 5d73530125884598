"""
Scenarios for the projection families S_g(x, y) = x - g(y) and pi_t(x, y) = x - t y.

Each sample draws one parameter (an element of O(n) or a real t), pushes
the input sets forward and measures the images, by box counting or by
the covered-volume test.
"""

import math
import logging
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.dimension import lebesgue_positivity
from core.errors import LabError
from core.fractals import (
    ConstructedSet,
    FractalSpec,
    build_cantor,
    cantor_power_spec,
    cantor_ratio,
    difference_dimension,
)
from core.measure import pushforward
from core.rotations import haar_sample, pi_map, s_map, subgroup_sample
from scenarios.base import (
    BaseScenario,
    Check,
    ScenarioContext,
    Verdict,
    band_check,
    fraction_check,
    lower_quantile_check,
    projection_scales,
    require,
    slope_summary,
)

logger = logging.getLogger(__name__)

SHARP_DIMENSION = math.log(2.0) / math.log(3.0)
# Coarsest scale as a fraction of the image's extent
SLOPE_DIVISOR = 4.0
POSITIVITY_DIVISOR = 16.0


def draw_rotation(n: int, rng: np.random.Generator, subgroup: bool = False) -> Tuple[List[float], Callable]:
    g = subgroup_sample(n, rng) if subgroup else haar_sample(n, rng)
    return g.to_row_major(), s_map(g)


def draw_t(rng: np.random.Generator, t_min: float, t_max: float) -> Tuple[float, Callable]:
    t = float(rng.uniform(t_min, t_max))
    return t, pi_map(t)


def image_points(built: ConstructedSet, point_map: Callable) -> np.ndarray:
    return pushforward(built.measure, point_map).points


class ProjectionScenario(BaseScenario):
    """
    Shared plumbing for the projection scenarios.

    Subclasses list their default ``inputs``; the default ``run_sample``
    measures every input under one drawn parameter with the scenario's
    ``measurement`` ("slope" or "positivity").
    """

    family = "S"
    measurement = "slope"
    inputs: Dict[str, FractalSpec] = {}

    def build_inputs(self, context: ScenarioContext) -> Dict[str, ConstructedSet]:
        self.check_dimension(context.n)
        sets = {name: context.build(name, spec) for name, spec in self.inputs.items()}
        for name, built in sets.items():
            if built.measure.ambient_dim != 2 * context.n:
                raise LabError("dimension", f"input {name} lives in R^{built.measure.ambient_dim}, "
                                            f"the projections need R^{2 * context.n}")
        return sets

    def base_state(self, context: ScenarioContext, sets: Dict[str, ConstructedSet]) -> Dict[str, Any]:
        params = context.params
        count = params["samples"]
        if self.family == "S" and context.rotation_samples:
            count = context.rotation_samples
        return {
            "n": context.n,
            "seed": context.seed,
            "sets": sets,
            "samples": int(count),
            "tolerance": context.tolerance,
            "fraction": context.fraction,
            "scales": context.scales,
            "box_scales": int(params["box_scales"]),
            "offsets": context.box_offsets,
            "positive_slope": float(context.settings["estimators"]["positive_slope"]),
            "null_slope": float(context.settings["estimators"]["null_slope"]),
            "t_range": (float(params.get("t_min", 0.25)), float(params.get("t_max", 2.0))),
        }

    def sample_count(self, prepared: Dict[str, Any]) -> int:
        return prepared["samples"]

    def draw(self, prepared: Dict[str, Any], rng: np.random.Generator) -> Tuple[Any, Callable]:
        if self.family == "pi":
            return draw_t(rng, *prepared["t_range"])
        return draw_rotation(prepared["n"], rng)

    def run_sample(self, prepared, index, rng):
        parameter, point_map = self.draw(prepared, rng)
        result: Dict[str, Any] = {"parameter": parameter}
        for name, built in prepared["sets"].items():
            if self.measurement == "positivity":
                result[name] = self.measure_positivity(prepared, built, point_map)
            else:
                result[name] = self.measure_slope(prepared, built, point_map)
        return result

    def _scales(self, prepared: Dict[str, Any], points: np.ndarray, built: ConstructedSet,
                divisor: float) -> np.ndarray:
        if prepared["scales"]:
            return np.asarray(prepared["scales"], dtype=float)
        return projection_scales(points, built.resolution, prepared["box_scales"], divisor)

    def measure_slope(self, prepared: Dict[str, Any], built: ConstructedSet,
                      point_map: Callable) -> Dict[str, Any]:
        points = image_points(built, point_map)
        try:
            scales = self._scales(prepared, points, built, SLOPE_DIVISOR)
        except LabError as e:
            return {"slope": None, "error": e.code}
        return slope_summary(points, scales, prepared["offsets"], prepared["seed"])

    def measure_positivity(self, prepared: Dict[str, Any], built: ConstructedSet,
                           point_map: Callable) -> Dict[str, Any]:
        points = image_points(built, point_map)
        try:
            scales = self._scales(prepared, points, built, POSITIVITY_DIVISOR)
            result = lebesgue_positivity(points, scales=scales, offsets=prepared["offsets"],
                                         seed=prepared["seed"], positive_slope=prepared["positive_slope"],
                                         null_slope=prepared["null_slope"])
        except LabError as e:
            logger.warning(f"Positivity test failed: {e}")
            return {"verdict": "error", "error": e.code}
        return result.to_dict()

    def write_artifacts(self, prepared: Dict[str, Any], results: List[Dict[str, Any]],
                        context: ScenarioContext):
        rows = []
        for index, result in enumerate(results):
            for name in prepared["sets"]:
                entry = result.get(name) or {}
                rows.append((index, name, _parameter_label(result.get("parameter")),
                             entry.get("slope", entry.get("box_slope")), entry.get("verdict", "")))
        path = context.artifact_path("profile_samples.csv")
        context.keep(context.exporter.export_table(path, ["sample", "input", "parameter", "slope", "verdict"],
                                                   rows, {"scenario": self.name}, "per-sample slopes"), path)


def _parameter_label(parameter: Any) -> str:
    if isinstance(parameter, (list, tuple)):
        return " ".join(f"{float(v):.6f}" for v in parameter)
    return "" if parameter is None else f"{float(parameter):.6f}"


def _slopes(results: Sequence[Dict[str, Any]], name: str) -> List[Optional[float]]:
    return [(r.get(name) or {}).get("slope") for r in results]


def _positive(results: Sequence[Dict[str, Any]], name: str) -> List[bool]:
    return [(r.get(name) or {}).get("verdict") == "positive" for r in results]


def _parameters(results: Sequence[Dict[str, Any]]) -> List[Any]:
    return [r.get("parameter") for r in results]


def _median(values: Sequence[Optional[float]]) -> float:
    return float(np.median([v if v is not None else -np.inf for v in values]))


class ThmPiAbsoluteContinuity(ProjectionScenario):
    name = "thm_pi_ac"
    description = "dim A > 2n - 1 implies pi_t(A) has positive Lebesgue measure for almost all t"
    family = "pi"
    measurement = "positivity"
    inputs = {"A": cantor_power_spec(0.8, 5, 4)}
    defaults = {"samples": 20, "t_min": 0.25, "t_max": 2.0}

    def prepare(self, context: ScenarioContext) -> Dict[str, Any]:
        sets = self.build_inputs(context)
        dim_a = sets["A"].nominal_dimension
        require(dim_a > 2 * context.n - 1, f"dim A = {dim_a:.4f} must exceed 2n - 1 = {2 * context.n - 1}")
        return self.base_state(context, sets)

    def evaluate(self, prepared, results):
        check = fraction_check("positive fraction", _positive(results, "A"), prepared["fraction"],
                               _parameters(results))
        return Verdict([check], [f"dim A = {prepared['sets']['A'].nominal_dimension:.4f} > 2n - 1"])


class ThmPiDimension(ProjectionScenario):
    name = "thm_pi_dim"
    description = "n <= dim A <= 2n - 1 implies dim pi_t(A) >= dim A - n + 1 for almost all t"
    family = "pi"
    inputs = {"A": cantor_power_spec(0.6, 5, 4)}
    defaults = {"samples": 20, "t_min": 0.25, "t_max": 2.0}

    def prepare(self, context: ScenarioContext) -> Dict[str, Any]:
        sets = self.build_inputs(context)
        n, dim_a = context.n, sets["A"].nominal_dimension
        require(n <= dim_a <= 2 * n - 1, f"dim A = {dim_a:.4f} must lie in [n, 2n - 1] = [{n}, {2 * n - 1}]")
        state = self.base_state(context, sets)
        state["bound"] = dim_a - n + 1
        return state

    def evaluate(self, prepared, results):
        check = lower_quantile_check("dim pi_t(A)", _slopes(results, "A"), prepared["bound"],
                                     prepared["tolerance"], prepared["fraction"], _parameters(results))
        notes = [f"Exceptional t (slope below bound - tolerance): {len(check.exceptions)} of {len(results)}"]
        return Verdict([check], notes)


class ThmPiSmall(ProjectionScenario):
    name = "thm_pi_small"
    description = "dim A <= n implies dim pi_t(A) >= min(dim A, 1) for almost all t"
    family = "pi"
    inputs = {"A": cantor_power_spec(0.4, 5, 4)}
    defaults = {"samples": 20, "t_min": 0.25, "t_max": 2.0}

    def prepare(self, context: ScenarioContext) -> Dict[str, Any]:
        sets = self.build_inputs(context)
        dim_a = sets["A"].nominal_dimension
        require(dim_a <= context.n, f"dim A = {dim_a:.4f} must not exceed n = {context.n}")
        state = self.base_state(context, sets)
        state["bound"] = min(dim_a, 1.0)
        return state

    def evaluate(self, prepared, results):
        check = lower_quantile_check("dim pi_t(A)", _slopes(results, "A"), prepared["bound"],
                                     prepared["tolerance"], prepared["fraction"], _parameters(results))
        return Verdict([check])


class _EveryParameter(ProjectionScenario):
    """dim of the image >= dim A - n for every sampled parameter and every input."""

    def prepare(self, context: ScenarioContext) -> Dict[str, Any]:
        state = self.base_state(context, self.build_inputs(context))
        state["bounds"] = {name: built.nominal_dimension - context.n for name, built in state["sets"].items()}
        return state

    def evaluate(self, prepared, results):
        label = "pi_t" if self.family == "pi" else "S_g"
        checks = [lower_quantile_check(f"dim {label}({name})", _slopes(results, name), bound,
                                       prepared["tolerance"], 1.0, _parameters(results))
                  for name, bound in prepared["bounds"].items()]
        return Verdict(checks)


class ThmPiTrivial(_EveryParameter):
    name = "thm_pi_trivial"
    description = "dim pi_t(A) >= dim A - n for every t, no exceptions allowed"
    family = "pi"
    inputs = {
        "A": cantor_power_spec(0.6, 4, 4),
        "A_sharp": FractalSpec(kind="sharpness_A", dimension_target=SHARP_DIMENSION, level=4),
    }
    defaults = {"samples": 20, "t_min": 0.25, "t_max": 2.0}


class ThmSTrivial(_EveryParameter):
    name = "thm_S_trivial"
    description = "dim S_g(A) >= dim A - n for every g, no exceptions allowed"
    inputs = {
        "A_ac": cantor_power_spec(0.8, 4, 4),
        "A_mid": cantor_power_spec(0.6, 4, 4),
        "B_sharp": FractalSpec(kind="sharpness_B", dimension_target=0.5, level=8),
    }
    defaults = {"samples": 50}


class ThmSAbsoluteContinuity(ProjectionScenario):
    name = "thm_S_ac"
    description = "dim A > n + 1 implies S_g(A) has positive Lebesgue measure for almost all g"
    measurement = "positivity"
    inputs = {"A": cantor_power_spec(0.8, 5, 4)}
    defaults = {"samples": 50}

    def prepare(self, context: ScenarioContext) -> Dict[str, Any]:
        sets = self.build_inputs(context)
        dim_a = sets["A"].nominal_dimension
        require(dim_a > context.n + 1, f"dim A = {dim_a:.4f} must exceed n + 1 = {context.n + 1}")
        return self.base_state(context, sets)

    def evaluate(self, prepared, results):
        check = fraction_check("positive fraction", _positive(results, "A"), prepared["fraction"],
                               _parameters(results))
        notes = [f"Exceptional g: {len(check.exceptions)} of {len(results)} sampled"]
        return Verdict([check], notes)


class ThmSDimension(ProjectionScenario):
    name = "thm_S_dim"
    description = ("n - 1 <= dim A <= n + 1 implies dim S_g(A) >= dim A - 1, and dim A <= n - 1 "
                   "implies dim S_g(A) >= dim A, for almost all g")
    inputs = {"A_mid": cantor_power_spec(0.6, 5, 4), "A_low": cantor_power_spec(0.2, 4, 4)}
    defaults = {"samples": 30}

    def prepare(self, context: ScenarioContext) -> Dict[str, Any]:
        sets = self.build_inputs(context)
        n = context.n
        mid, low = sets["A_mid"].nominal_dimension, sets["A_low"].nominal_dimension
        require(n - 1 <= mid <= n + 1, f"dim A_mid = {mid:.4f} must lie in [n - 1, n + 1]")
        require(low <= n - 1, f"dim A_low = {low:.4f} must not exceed n - 1 = {n - 1}")
        state = self.base_state(context, sets)
        state["bounds"] = {"A_mid": mid - 1.0, "A_low": low}
        return state

    def evaluate(self, prepared, results):
        checks = [lower_quantile_check(f"dim S_g({name})", _slopes(results, name), bound,
                                       prepared["tolerance"], prepared["fraction"], _parameters(results))
                  for name, bound in prepared["bounds"].items()]
        return Verdict(checks)


class SharpPi(ProjectionScenario):
    """
    pi_t(A_s) = {(c, u - t v)} is C_s times an interval, so its dimension
    is exactly 1 + s for every t and the slope must match from above and
    below. Scales follow the Cantor construction, ratio^1 .. ratio^level.
    """
    name = "sharp_pi"
    description = "dim pi_t(A_s) = 1 + s exactly: two-sided check on the sharpness set"
    family = "pi"
    inputs = {"A_s": FractalSpec(kind="sharpness_A", dimension_target=SHARP_DIMENSION, level=5)}
    defaults = {"samples": 20, "t_min": 0.25, "t_max": 2.0}

    def prepare(self, context: ScenarioContext) -> Dict[str, Any]:
        sets = self.build_inputs(context)
        spec = sets["A_s"].provenance
        require(spec.kind == "sharpness_A", "sharp_pi needs a sharpness_A input")
        state = self.base_state(context, sets)
        if not state["scales"]:
            ratio = cantor_ratio(spec.dimension_target)
            state["scales"] = [ratio ** j for j in range(1, spec.level + 1)]
        state["target"] = 1.0 + spec.dimension_target
        return state

    def evaluate(self, prepared, results):
        slopes = _slopes(results, "A_s")
        check = band_check("dim pi_t(A_s)", slopes, prepared["target"], prepared["tolerance"],
                           _parameters(results))
        finite = [s for s in slopes if s is not None]
        notes = [f"Mean slope {np.mean(finite):.4f} against 1 + s = {prepared['target']:.4f}"] if finite else []
        return Verdict([check], notes)


class SharpSSubgroup(ProjectionScenario):
    """
    For g in the embedded O(n-1), S_g(B_s) = {0} x (C_s - C_s), whose
    dimension is that of the difference set, while generic g see the full
    2s. Scales follow the Cantor ratio and stop two levels above the
    construction depth, where the finest grid would saturate.
    """
    name = "sharp_S_subgroup"
    description = "S_g(B_s) drops to dim(C_s - C_s) for g in O(n-1), against 2s for Haar g"
    inputs = {"B_s": FractalSpec(kind="sharpness_B", dimension_target=0.3, level=8)}
    defaults = {"samples": 20, "subgroup_samples": 10, "contrast": 0.05}

    def prepare(self, context: ScenarioContext) -> Dict[str, Any]:
        sets = self.build_inputs(context)
        spec = sets["B_s"].provenance
        require(spec.kind == "sharpness_B", "sharp_S_subgroup needs a sharpness_B input")
        require(spec.level >= 6, f"sharp_S_subgroup needs level >= 6 to leave four scales, got {spec.level}")
        state = self.base_state(context, sets)
        if not state["scales"]:
            ratio = cantor_ratio(spec.dimension_target)
            state["scales"] = [ratio ** j for j in range(1, spec.level - 1)]
        state["subgroup_samples"] = int(context.params["subgroup_samples"])
        state["contrast"] = float(context.params["contrast"])
        state["difference_dimension"] = difference_dimension(build_cantor(spec.dimension_target, 1))
        state["generic_dimension"] = 2.0 * spec.dimension_target
        return state

    def sample_count(self, prepared: Dict[str, Any]) -> int:
        return prepared["subgroup_samples"] + prepared["samples"]

    def run_sample(self, prepared, index, rng):
        subgroup = index < prepared["subgroup_samples"]
        g, point_map = draw_rotation(prepared["n"], rng, subgroup=subgroup)
        return {"parameter": g, "group": "subgroup" if subgroup else "haar",
                "B_s": self.measure_slope(prepared, prepared["sets"]["B_s"], point_map)}

    def evaluate(self, prepared, results):
        sub = [r for r in results if r["group"] == "subgroup"]
        haar = [r for r in results if r["group"] == "haar"]
        tolerance = prepared["tolerance"]
        sub_check = band_check("subgroup: dim = dim(C - C)", _slopes(sub, "B_s"),
                               prepared["difference_dimension"], tolerance, _parameters(sub))
        haar_check = lower_quantile_check("Haar: median dim >= 2s", _slopes(haar, "B_s"),
                                          prepared["generic_dimension"], tolerance, 0.5, _parameters(haar))
        sub_median, haar_median = _median(_slopes(sub, "B_s")), _median(_slopes(haar, "B_s"))
        gap = haar_median - sub_median
        contrast = Check("Haar - subgroup median gap", prepared["contrast"], gap,
                         gap - prepared["contrast"], gap >= prepared["contrast"])
        notes = [f"Subgroup median {sub_median:.4f}, Haar median {haar_median:.4f}"]
        return Verdict([sub_check, haar_check, contrast], notes)


class ProductTheorem(ProjectionScenario):
    """
    Product sets A x B with A, B in R^n. The positivity part needs
    dim A + dim B > n together with dim A + (n-1) dim B / n > n or
    dim A > (n+1)/2; the dimension part bounds dim S_g(A x B) from below by
    dim A + (n-1) dim B / n when that sum is at most n, and by dim A + dim B
    when additionally dim A + dim B <= n and dim B <= (n-1)/2.
    """
    name = "prod_thm3"
    description = "Positivity and dimension bounds for S_g(A x B) with A, B in R^n"
    inputs = {
        "AB_ac": FractalSpec(kind="product", level=5,
                             children=[cantor_power_spec(0.8, 5, 2), cantor_power_spec(0.7, 5, 2)]),
        "AB_dim": FractalSpec(kind="product", level=5,
                              children=[cantor_power_spec(0.5, 5, 2), cantor_power_spec(0.5, 5, 2)]),
    }
    defaults = {"samples": 30}

    def prepare(self, context: ScenarioContext) -> Dict[str, Any]:
        sets = self.build_inputs(context)
        n = context.n
        factor_dims = {}
        for name, built in sets.items():
            spec = built.provenance
            require(spec.kind == "product" and len(spec.children) == 2, f"input {name} must be a product A x B")
            factor_dims[name] = (nominal_dimension(spec.children[0]), nominal_dimension(spec.children[1]))
        a, b = factor_dims["AB_ac"]
        require(a + b > n and (a + (n - 1) * b / n > n or a > (n + 1) / 2.0),
                f"AB_ac: dim A = {a:.4f}, dim B = {b:.4f} do not meet the positivity hypothesis")
        a2, b2 = factor_dims["AB_dim"]
        weighted = a2 + (n - 1) * b2 / n
        require(weighted <= n, f"AB_dim: dim A + (n-1) dim B / n = {weighted:.4f} must not exceed n")
        state = self.base_state(context, sets)
        state["factor_dims"] = factor_dims
        state["bound"] = weighted
        if a2 + b2 <= n and b2 <= (n - 1) / 2.0:
            state["bound"] = max(weighted, a2 + b2)
        return state

    def run_sample(self, prepared, index, rng):
        g, point_map = self.draw(prepared, rng)
        sets = prepared["sets"]
        return {"parameter": g,
                "AB_ac": self.measure_positivity(prepared, sets["AB_ac"], point_map),
                "AB_dim": self.measure_slope(prepared, sets["AB_dim"], point_map)}

    def evaluate(self, prepared, results):
        positive = fraction_check("AB_ac positive fraction", _positive(results, "AB_ac"),
                                  prepared["fraction"], _parameters(results))
        dimension = lower_quantile_check("dim S_g(AB_dim)", _slopes(results, "AB_dim"), prepared["bound"],
                                         prepared["tolerance"], prepared["fraction"], _parameters(results))
        notes = [f"{name}: dim A = {a:.4f}, dim B = {b:.4f}" for name, (a, b) in prepared["factor_dims"].items()]
        notes.append("Exceptional-set bounds are reported descriptively through the exception lists")
        return Verdict([positive, dimension], notes)


def nominal_dimension(spec: FractalSpec) -> float:
    """Nominal dimension of a recipe without building it."""
    if spec.kind == "central_cantor":
        return float(spec.dimension_target)
    if spec.kind == "product":
        return nominal_dimension(spec.children[0]) + nominal_dimension(spec.children[1])
    if spec.kind == "sharpness_A":
        return 2.0 + spec.dimension_target
    if spec.kind == "sharpness_B":
        return 2.0 * spec.dimension_target
    if spec.kind == "affine_embed":
        return nominal_dimension(spec.children[0])
    if spec.kind == "difference_set":
        child = spec.children[0]
        if child.kind != "central_cantor":
            return min(1.0, 2.0 * nominal_dimension(child))
        return difference_dimension(build_cantor(child.dimension_target, 1))
    raise LabError("unknown_kind", f"no nominal dimension for '{spec.kind}'")
