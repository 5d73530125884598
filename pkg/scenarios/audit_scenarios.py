"""
Audit batteries: rotation concentration, the Riesz energy identity and the
distance-measure chain.
"""

import math
import logging
from typing import Any, Dict, List

import numpy as np

from core.distances import consistency_triplet, distance_l2_indicator, distance_measure
from core.errors import LabError
from core.dimension import energy_dimension
from core.fractals import build_cantor, uniform_cube, uniform_disk, uniform_interval
from core.rotations import circle_concentration_exact, concentration_audit, haar_measure, sphere_concentration_exact
from core.spectral import EnergyReport, riesz_energy_fourier, riesz_energy_spatial
from scenarios.base import BaseScenario, Check, ScenarioContext, Verdict, fraction_check, upper_check

logger = logging.getLogger(__name__)

EXACT_FRACTIONS = {2: circle_concentration_exact, 3: sphere_concentration_exact}


class ConcentrationLemma(BaseScenario):
    """
    theta({g : |x - g(z)| < r}) <= C min((r/|z|)^beta, (r/|x|)^beta) for Haar theta.

    Each sample draws one (x, z, r). The Monte Carlo mass is compared with
    the constant times the bound, and with the exact arc or cap fraction
    within three standard errors of a Bernoulli mean at the exact
    probability. Three-sigma agreement misses about 0.3% of honest cases,
    so the agreement check asks for a fraction, not every case.
    """
    name = "lemma_concentration"
    description = "Concentration of Haar rotation measures around a point, against exact arc and cap fractions"
    dims = (2, 3)
    defaults = {"samples": 200, "rotations": 20000, "constant": 4.0, "norm_min": 0.5, "norm_max": 2.0,
                "radius_min": 0.05, "radius_max": 1.0, "sigmas": 3.0, "agreement": 0.98}

    def prepare(self, context: ScenarioContext) -> Dict[str, Any]:
        self.check_dimension(context.n)
        p = context.params
        count = int(context.rotation_samples or p["rotations"])
        theta = haar_measure(context.n, count, context.seed)
        if theta.sample_count <= int(context.settings["limits"]["export_atom_limit"]):
            path = context.artifact_path("rotations_haar.csv")
            context.keep(context.exporter.export_rotations(theta, path), path)
        return {"n": context.n, "theta": theta, "samples": int(p["samples"]),
                "constant": float(p["constant"]), "sigmas": float(p["sigmas"]),
                "agreement": float(p["agreement"]),
                "norms": (float(p["norm_min"]), float(p["norm_max"])),
                "log_radii": (math.log(p["radius_min"]), math.log(p["radius_max"]))}

    def sample_count(self, prepared: Dict[str, Any]) -> int:
        return prepared["samples"]

    def _vector(self, n: int, rng: np.random.Generator, norms) -> np.ndarray:
        direction = rng.standard_normal(n)
        return direction / np.linalg.norm(direction) * rng.uniform(*norms)

    def run_sample(self, prepared, index, rng):
        n = prepared["n"]
        x = self._vector(n, rng, prepared["norms"])
        z = self._vector(n, rng, prepared["norms"])
        r = float(math.exp(rng.uniform(*prepared["log_radii"])))
        row = concentration_audit(prepared["theta"], x, z, [r])[0]
        exact = EXACT_FRACTIONS[n](x, z, r)
        standard_error = math.sqrt(exact * (1.0 - exact) / prepared["theta"].sample_count)
        return {"x": x.tolist(), "z": z.tolist(), "radius": r, "measured": row.measured, "bound": row.bound,
                "exact": exact, "agrees": abs(row.measured - exact) <= prepared["sigmas"] * standard_error}

    def evaluate(self, prepared, results):
        keys = list(range(len(results)))
        constant = prepared["constant"]
        ratios = [r["measured"] / r["bound"] for r in results]
        worst = upper_check("max measured / bound", max(ratios), constant)
        worst.exceptions = [k for k, ratio in zip(keys, ratios) if ratio > constant]
        agreement = fraction_check("Monte Carlo agrees with the exact fraction",
                                   [r["agrees"] for r in results], prepared["agreement"], keys)
        notes = [f"beta = {prepared['theta'].beta:g}, {prepared['theta'].sample_count} Haar samples"]
        return Verdict([worst, agreement], notes)

    def write_artifacts(self, prepared, results, context):
        rows = [(i, r["radius"], r["measured"], r["bound"], r["exact"]) for i, r in enumerate(results)]
        path = context.artifact_path("concentration.csv")
        context.keep(context.exporter.export_table(path, ["case", "radius", "measured", "bound", "exact"], rows,
                                                   {"scenario": self.name}, "concentration audit"), path)


class ParsevalBattery(BaseScenario):
    """
    Spatial and Fourier sides of the s-energy of mollified reference measures.

    The off-diagonal energy of a finer uniform interval at s = 1/2 must land
    within ``closed_form_tolerance`` of 8/3, the energy of Lebesgue measure on
    [0, 1]. The discretisation error is about 2.9 N^{-1/2}, so N = 2^12 atoms
    clears 0.05 while the battery's coarser interval does not.
    """
    name = "parseval"
    description = "Riesz energy identity on uniform and Cantor measures"
    dims = (1, 2, 3)
    defaults = {"max_gap": 0.1, "interval_atoms": 1024, "cantor_level": 10, "cube_per_axis": 16,
                "closed_form_atoms": 4096, "closed_form_tolerance": 0.05,
                "energy_grid": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]}

    def prepare(self, context: ScenarioContext) -> Dict[str, Any]:
        p = context.params
        interval = uniform_interval(int(p["interval_atoms"]))
        built = build_cantor(math.log(2.0) / math.log(3.0), int(p["cantor_level"]))
        cantor = built.measure
        square = uniform_cube(int(p["cube_per_axis"]), 2)
        cases = [("interval", interval, 0.3), ("interval", interval, 0.5), ("interval", interval, 0.7),
                 ("cantor", cantor, 0.4), ("cantor", cantor, 0.5), ("square", square, 1.0)]
        context.save_measure("cantor", cantor)
        closed_form = riesz_energy_spatial(uniform_interval(int(p["closed_form_atoms"])), 0.5)
        sweep = energy_dimension(built, p["energy_grid"],
                                 factor=float(context.settings["estimators"]["energy_divergence_factor"]))
        return {"cases": cases, "max_gap": float(p["max_gap"]), "cantor_dimension": built.nominal_dimension,
                "energy_dimension": sweep, "closed_form": closed_form,
                "closed_form_tolerance": float(p["closed_form_tolerance"]),
                "truncation_threshold": float(context.settings["spectral"]["truncation_threshold"])}

    def sample_count(self, prepared: Dict[str, Any]) -> int:
        return len(prepared["cases"])

    def run_sample(self, prepared, index, rng):
        label, mu, s = prepared["cases"][index]
        result: Dict[str, Any] = {"case": f"{label} s={s:g}", "s": s}
        try:
            report = riesz_energy_fourier(mu, s, truncation_threshold=prepared["truncation_threshold"])
        except LabError as e:
            logger.warning(f"Energy identity for {result['case']} failed: {e}")
            result.update({"error": e.code, "relative_gap": None})
            if isinstance(e.detail, EnergyReport):
                result["report"] = e.detail.to_dict()
            return result
        result.update({"relative_gap": report.relative_gap, "report": report.to_dict()})
        return result

    def evaluate(self, prepared, results):
        gaps = [r["relative_gap"] if r["relative_gap"] is not None else math.inf for r in results]
        check = upper_check("max relative gap", max(gaps), prepared["max_gap"])
        check.exceptions = [r["case"] for r, gap in zip(results, gaps) if gap > prepared["max_gap"]]
        closed_form = prepared["closed_form"]
        interval = upper_check("interval s=0.5 vs 8/3", abs(closed_form.value - 8.0 / 3.0),
                               prepared["closed_form_tolerance"])
        notes = [f"Uniform interval, s = 1/2: energy {closed_form.value:.5f} against 8/3 = {8.0 / 3.0:.5f}"]
        for r in results:
            if "error" in r:
                notes.append(f"{r['case']}: {r['error']}")
        sweep = prepared["energy_dimension"]
        notes.append(f"Energy dimension of the middle-third Cantor measure: {sweep.value:g} ({sweep.flag}, levels "
                     f"{list(sweep.levels)}), nominal {prepared['cantor_dimension']:.4f}")
        return Verdict([check, interval], notes)

    def write_artifacts(self, prepared, results, context):
        reports = [EnergyReport(**r["report"]) for r in results if "report" in r]
        if reports:
            path = context.artifact_path("energy_reports.csv")
            context.keep(context.exporter.export_energy(reports, path, {"scenario": self.name}), path)


class DistanceConsistency(BaseScenario):
    """
    The distance-measure chain evaluated three ways at shrinking radii on two
    independent uniform disk samples; the L^2 indicator of the distance
    histogram is reported alongside.
    """
    name = "distance_consistency"
    description = "Three-way consistency of the distance-measure chain on uniform disks"
    defaults = {"atoms": 300, "rotations": 64, "radii": [0.1, 0.05], "factor": 2.0, "bins": 32}

    def prepare(self, context: ScenarioContext) -> Dict[str, Any]:
        self.check_dimension(context.n)
        p = context.params
        atoms = int(p["atoms"])
        mu = uniform_disk(atoms, seed=context.seed)
        nu = uniform_disk(atoms, seed=context.seed + 1)
        theta = haar_measure(context.n, int(context.rotation_samples or p["rotations"]), context.seed)
        histogram = distance_measure(mu, mu, int(p["bins"]))
        indicator = distance_l2_indicator(histogram)
        path = context.artifact_path("distance_mu.csv")
        context.keep(context.exporter.export_distance(histogram, path, {"scenario": self.name}), path)
        return {"mu": mu, "nu": nu, "theta": theta, "factor": float(p["factor"]),
                "radii": [float(r) for r in (context.radii or p["radii"])], "bins": int(p["bins"]),
                "indicator": indicator}

    def sample_count(self, prepared: Dict[str, Any]) -> int:
        return len(prepared["radii"])

    def run_sample(self, prepared, index, rng):
        r = prepared["radii"][index]
        triplet = consistency_triplet(prepared["mu"], prepared["nu"], r, prepared["theta"], bins=prepared["bins"])
        logger.info(f"Radius {r}: density {triplet.density_side:.5g}, middle {triplet.middle:.5g}, "
                    f"pairing {triplet.pairing:.5g}")
        result = triplet.to_dict()
        result["consistent"] = triplet.consistent(prepared["factor"])
        return result

    def evaluate(self, prepared, results):
        checks: List[Check] = []
        for r in results:
            checks.append(upper_check(f"spread at r = {r['radius']:g}", r["spread"], prepared["factor"]))
        indicator = prepared["indicator"]
        notes = [f"L^2 indicator of the distance histogram: {indicator.value:.4g}, refinement ratio "
                 f"{indicator.refinement_ratio:.3f} ({'stable' if indicator.stable else 'unstable'})"]
        return Verdict(checks, notes)
