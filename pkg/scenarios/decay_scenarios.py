"""
Fourier decay scenarios: spherical averages, the directional integral over
rotation measures and the cone identity.

Every sample is one named case; a case produces a spectral profile whose
log-log slope is compared with the predicted decay rate.
"""

import math
import logging
from abc import abstractmethod
from typing import Any, Dict, List

import numpy as np
from scipy.special import j0

from core.errors import LabError
from core.fractals import FractalSpec, affine_embed, build_cantor, product_set, uniform_circle
from core.measure import frostman_exponent, lazy_product
from core.rotations import haar_measure, subgroup_measure
from core.spectral import (
    SpectralProfile,
    cone_average,
    directional_decay,
    profile_from_estimates,
    spherical_profile,
)
from scenarios.base import BaseScenario, Check, ScenarioContext, Verdict, band_check, require, upper_check

logger = logging.getLogger(__name__)


def _seed_from(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**31 - 1))


def _monte_carlo(context: ScenarioContext) -> Dict[str, int]:
    spectral = context.settings["spectral"]
    return {"batch_size": int(spectral["mc_batch"]), "max_samples": int(spectral["mc_max_samples"])}


def _profile_result(profile: SpectralProfile) -> Dict[str, Any]:
    result: Dict[str, Any] = {"radii": list(profile.radii), "values": list(profile.values),
                              "stderr": list(profile.stderr), "nodes": list(profile.quadrature_nodes)}
    try:
        fit = profile.fit()
    except LabError as e:
        logger.warning(f"Profile fit failed: {e}")
        result.update({"slope": None, "error": e.code})
        return result
    result.update({"slope": fit.slope, "r_squared": fit.r_squared})
    return result


class DecayScenario(BaseScenario):
    """
    Shared plumbing: ``prepare`` returns a dict with a ``cases`` list of
    names; ``run_case`` computes one of them. Every case with a profile
    gets a ``profile_<case>.csv`` table.
    """

    kind = "spherical"

    def sample_count(self, prepared: Dict[str, Any]) -> int:
        return len(prepared["cases"])

    def run_sample(self, prepared, index, rng):
        case = prepared["cases"][index]
        logger.info(f"{self.name}: case {case}")
        result = self.run_case(prepared, case, rng)
        result["case"] = case
        return result

    @abstractmethod
    def run_case(self, prepared: Dict[str, Any], case: str, rng: np.random.Generator) -> Dict[str, Any]:
        pass

    def write_artifacts(self, prepared, results, context):
        for result in results:
            if not result.get("values"):
                continue
            profile = SpectralProfile(tuple(result["radii"]), tuple(result["values"]), self.kind,
                                      tuple(result["nodes"]), tuple(result["stderr"]))
            path = context.artifact_path(f"profile_{result['case']}.csv")
            meta = {"scenario": self.name, "case": result["case"], "bound": result.get("bound")}
            context.keep(context.exporter.export_profile(profile, path, meta), path)


class SphericalDecay(DecayScenario):
    """
    sigma(mu)(r) against r^{-s} (for s <= (n-1)/2) and r^{-(n-1)s/n}.

    A uniform circle with the exact oracle 2 pi J0(2 pi r)^2 checks the
    quadrature itself, sampled at integer radii where the cos^2 factor of
    J0's asymptotics is constant.
    """
    name = "decay_spherical"
    description = "Spherical averages of Cantor measures decay at the predicted rate; circle oracle"
    defaults = {"radii": np.geomspace(4.0, 64.0, 9).tolist(), "epsilon": 0.15,
                "line_dimension": 0.4, "line_level": 12, "square_dimension": 0.7, "square_level": 8,
                "circle_atoms": 4096, "oracle_tolerance": 1e-3}

    def prepare(self, context: ScenarioContext) -> Dict[str, Any]:
        self.check_dimension(context.n)
        p = context.params
        radii = [float(r) for r in (context.radii or p["radii"])]
        n = context.n

        line = context.build("cantor_line", FractalSpec(
            kind="affine_embed", level=int(p["line_level"]), matrix=[[1.0], [0.0]],
            children=[FractalSpec(kind="central_cantor", dimension_target=p["line_dimension"],
                                  level=int(p["line_level"]))]))
        s_line = line.nominal_dimension
        require(s_line <= (n - 1) / 2.0, f"the r^-s rate needs s <= (n-1)/2, got s = {s_line:.4f}")
        factor = build_cantor(float(p["square_dimension"]), int(p["square_level"]))
        square = lazy_product(factor.measure, factor.measure)
        s_square = 2.0 * factor.nominal_dimension

        return {
            "cases": ["cantor_line", "cantor_square", "circle"],
            "radii": radii,
            "measures": {"cantor_line": line.measure, "cantor_square": square,
                         "circle": uniform_circle(int(p["circle_atoms"]))},
            "bounds": {"cantor_line": -s_line + p["epsilon"],
                       "cantor_square": -(n - 1) * s_square / n + p["epsilon"]},
            "dimensions": {"cantor_line": s_line, "cantor_square": s_square},
            "epsilon": float(p["epsilon"]),
            "oracle_tolerance": float(p["oracle_tolerance"]),
        }

    def run_case(self, prepared, case, rng):
        mu = prepared["measures"][case]
        if case != "circle":
            result = _profile_result(spherical_profile(mu, prepared["radii"]))
            result["bound"] = prepared["bounds"][case]
            return result

        radii = sorted({float(max(2, round(r))) for r in prepared["radii"]})
        profile = spherical_profile(mu, radii)
        oracle = [2.0 * math.pi * float(j0(2.0 * math.pi * r)) ** 2 for r in radii]
        deviation = max(abs(v - o) / o for v, o in zip(profile.values, oracle))
        result = _profile_result(profile)
        result.update({"bound": -1.0, "oracle_deviation": deviation})
        return result

    def evaluate(self, prepared, results):
        by_case = {r["case"]: r for r in results}
        checks: List[Check] = []
        for case in ("cantor_line", "cantor_square"):
            checks.append(upper_check(f"slope of sigma({case})", by_case[case].get("slope"),
                                      prepared["bounds"][case]))
        circle = by_case["circle"]
        checks.append(band_check("slope of sigma(circle)", [circle.get("slope")], -1.0, prepared["epsilon"]))
        checks.append(upper_check("circle: deviation from 2 pi J0^2", circle["oracle_deviation"],
                                  prepared["oracle_tolerance"]))
        notes = [f"{case}: dimension {dim:.4f}, slope {by_case[case].get('slope')}"
                 for case, dim in prepared["dimensions"].items()]
        return Verdict(checks, notes)


class DirectionalDecay(DecayScenario):
    """
    The shell integral of |mu^(xi, -g^{-1} xi)|^2 over R <= |xi| <= 2R grows at
    most like R^{2n - s - beta}; Haar theta (beta = n - 1) against the
    embedded subgroup (beta = 0).
    """
    name = "decay_directional"
    description = "Directional integral over rotation measures grows at most like R^(2n - s - beta)"
    kind = "directional"
    defaults = {"radii": np.geomspace(4.0, 64.0, 5).tolist(), "dimension": 0.7, "level": 8,
                "rotations": 4096, "rel_tolerance": 0.1, "epsilon": 0.2}

    def prepare(self, context: ScenarioContext) -> Dict[str, Any]:
        self.check_dimension(context.n)
        p = context.params
        n = context.n
        factor = build_cantor(float(p["dimension"]), int(p["level"]))
        mu = lazy_product(*([factor.measure] * (2 * n)))
        centers = int(context.settings["estimators"]["frostman_centers"])
        s = 2 * n * frostman_exponent(factor.measure, centers=centers, seed=context.seed).exponent
        count = int(context.rotation_samples or p["rotations"])
        thetas = {"haar": haar_measure(n, count, context.seed), "subgroup": subgroup_measure(n, count, context.seed)}
        for label, theta in thetas.items():
            path = context.artifact_path(f"rotations_{label}.csv")
            context.keep(context.exporter.export_rotations(theta, path), path)
        return {
            "cases": list(thetas),
            "mu": mu,
            "thetas": thetas,
            "radii": [float(r) for r in (context.radii or p["radii"])],
            "s": s,
            "bounds": {label: 2 * n - s - theta.beta + float(p["epsilon"]) for label, theta in thetas.items()},
            "rel_tolerance": float(p["rel_tolerance"]),
            "monte_carlo": _monte_carlo(context),
        }

    def run_case(self, prepared, case, rng):
        seed = _seed_from(rng)
        theta = prepared["thetas"][case]
        estimates = [directional_decay(prepared["mu"], theta, R, seed=seed,
                                       rel_tolerance=prepared["rel_tolerance"], **prepared["monte_carlo"])
                     for R in prepared["radii"]]
        result = _profile_result(profile_from_estimates(self.kind, prepared["radii"], estimates))
        result.update({"bound": prepared["bounds"][case], "beta": theta.beta,
                       "converged": all(e.converged for e in estimates)})
        return result

    def evaluate(self, prepared, results):
        checks = [upper_check(f"growth exponent ({r['case']}, beta = {r['beta']:g})", r.get("slope"), r["bound"])
                  for r in results]
        notes = [f"Frostman exponent of the product: s = {prepared['s']:.4f}"]
        notes += [f"{r['case']}: Monte Carlo did not reach the requested tolerance at every radius"
                  for r in results if not r["converged"]]
        return Verdict(checks, notes)


class ConeDecay(DecayScenario):
    """
    Three cases. ``identity`` checks directional_decay(mu, Haar, R) = R^n
    cone_average(mu, R) on a Cantor product. ``product`` checks the faster
    cone decay R^{-s - (n-1)t/n} for mu x nu, mu and nu on two lines.
    ``general`` fits the cone decay of a measure that does not split over
    R^n x R^n against the general rate R^{1-s}, with slack ``general_slack``.
    """
    name = "decay_cone"
    description = "Cone identity against the directional integral, and cone decay of product and general measures"
    kind = "cone"
    defaults = {"identity_radii": [4.0, 16.0], "identity_dimension": 0.6, "identity_level": 6,
                "rotations": 4096, "rel_tolerance": 0.03, "identity_tolerance": 0.1,
                "radii": [4.0, 8.0, 16.0, 32.0], "product_dimension": 0.6, "product_level": 10,
                "epsilon": 0.3, "general_dimension": 0.6, "general_level": 4, "general_rel_tolerance": 0.1,
                "general_slack": 0.3}

    def prepare(self, context: ScenarioContext) -> Dict[str, Any]:
        self.check_dimension(context.n)
        p = context.params
        n = context.n
        factor = build_cantor(float(p["identity_dimension"]), int(p["identity_level"]))
        line = build_cantor(float(p["product_dimension"]), int(p["product_level"]))
        first = affine_embed(line, [[1.0], [0.0]])
        second = affine_embed(line, [[0.6], [0.8]])
        s = t = line.nominal_dimension

        # C x (tilted Cantor square in R^3): the tilt mixes x_2 with y_1
        cantor = build_cantor(float(p["general_dimension"]), int(p["general_level"]))
        tilted = affine_embed(product_set(cantor, cantor), [[0.6, 0.0], [0.8, 0.0], [0.0, 1.0]])
        general_s = cantor.nominal_dimension + tilted.nominal_dimension
        return {
            "cases": ["identity", "product", "general"],
            "identity_mu": lazy_product(*([factor.measure] * (2 * n))),
            "theta": haar_measure(n, int(context.rotation_samples or p["rotations"]), context.seed),
            "identity_radii": [float(r) for r in p["identity_radii"]],
            "product_mu": lazy_product(first.measure, second.measure),
            "general_mu": lazy_product(cantor.measure, tilted.measure),
            "radii": [float(r) for r in (context.radii or p["radii"])],
            "n": n,
            "bound": -(s + (n - 1) * t / n) + float(p["epsilon"]),
            "general_bound": 1.0 - general_s + float(p["general_slack"]),
            "rel_tolerance": float(p["rel_tolerance"]),
            "general_rel_tolerance": float(p["general_rel_tolerance"]),
            "identity_tolerance": float(p["identity_tolerance"]),
            "monte_carlo": _monte_carlo(context),
        }

    def run_case(self, prepared, case, rng):
        seed = _seed_from(rng)
        if case in ("product", "general"):
            options = dict(prepared["monte_carlo"])
            if case == "general":
                options["rel_tolerance"] = prepared["general_rel_tolerance"]
            mu = prepared[f"{case}_mu"]
            estimates = [cone_average(mu, R, seed=seed, **options) for R in prepared["radii"]]
            result = _profile_result(profile_from_estimates(self.kind, prepared["radii"], estimates))
            result["bound"] = prepared["bound" if case == "product" else "general_bound"]
            result["converged"] = all(e.converged for e in estimates)
            return result

        n = prepared["n"]
        ratios = []
        for R in prepared["identity_radii"]:
            direct = directional_decay(prepared["identity_mu"], prepared["theta"], R, seed=seed,
                                       rel_tolerance=prepared["rel_tolerance"], **prepared["monte_carlo"])
            cone = cone_average(prepared["identity_mu"], R, seed=seed, **prepared["monte_carlo"])
            ratios.append(direct.value / (R ** n * cone.value))
            logger.debug(f"Cone identity at R={R}: directional {direct.value:.6g}, R^n cone {R ** n * cone.value:.6g}")
        return {"ratios": ratios, "radii": prepared["identity_radii"]}

    def evaluate(self, prepared, results):
        by_case = {r["case"]: r for r in results}
        identity = band_check("directional / (R^n cone)", by_case["identity"]["ratios"], 1.0,
                              prepared["identity_tolerance"], by_case["identity"]["radii"])
        product = upper_check("cone decay exponent of mu x nu", by_case["product"].get("slope"), prepared["bound"])
        general = upper_check("cone decay exponent, general measure", by_case["general"].get("slope"),
                              prepared["general_bound"])
        notes = [] if by_case["general"]["converged"] else [
            "general: Monte Carlo did not reach the requested tolerance at every radius"]
        return Verdict([identity, product, general], notes)
