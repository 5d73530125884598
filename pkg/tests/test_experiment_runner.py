import json
import os

import numpy as np
import pytest

from core.errors import LabError
from core.experiment_runner import (
    ExperimentRecord,
    ExperimentRunner,
    ScenarioConfig,
    load_records,
    report,
    run_scenario,
)
from core.fractals import cantor_power_spec
from scenarios import AVAILABLE_SCENARIOS, get_scenario
from scenarios.base import ScenarioContext, Verdict, band_check, fraction_check, lower_quantile_check, upper_check
from scenarios.projection_scenarios import nominal_dimension

QUICK_CONCENTRATION = {"samples": 20, "rotations": 2000, "agreement": 0.8}


def concentration_config(root, **overrides):
    data = {"scenario": "lemma_concentration", "output_dir": str(root), "seed": 3,
            "params": dict(QUICK_CONCENTRATION)}
    data.update(overrides)
    return ScenarioConfig.from_dict(data)


def test_registry_names_match_classes():
    assert len(AVAILABLE_SCENARIOS) == 16
    for name, cls in AVAILABLE_SCENARIOS.items():
        assert cls.name == name
        assert cls.description
    with pytest.raises(LabError) as e:
        get_scenario("thm_unknown")
    assert e.value.code == "unknown_scenario"


def test_config_is_strict():
    with pytest.raises(LabError) as e:
        ScenarioConfig.from_dict({"scenario": "parseval", "sead": 1})
    assert e.value.code == "unknown_config_key"
    with pytest.raises(LabError) as e:
        ScenarioConfig.from_dict({"scenario": "thm_missing"})
    assert e.value.code == "unknown_scenario"
    with pytest.raises(LabError) as e:
        ScenarioConfig.from_dict({"n": 2})
    assert e.value.code == "bad_config"
    with pytest.raises(LabError) as e:
        get_scenario("parseval").resolve_params({"atoms": 5})
    assert e.value.code == "unknown_config_key"


def test_config_hash_ignores_output_directory(tmp_path):
    first = concentration_config(tmp_path / "a")
    second = concentration_config(tmp_path / "b")
    assert first.config_hash() == second.config_hash()
    assert concentration_config(tmp_path, seed=4).config_hash() != first.config_hash()
    assert os.path.basename(first.run_directory()) == f"lemma_concentration_{first.config_hash()[:12]}"


def test_fractal_overrides_are_parsed():
    cfg = ScenarioConfig.from_dict({"scenario": "thm_pi_dim",
                                    "fractals": {"A": cantor_power_spec(0.6, 3, 4).to_dict()}})
    assert cfg.fractals["A"].kind == "product"
    assert nominal_dimension(cfg.fractals["A"]) == pytest.approx(2.4)


def test_context_falls_back_to_settings(settings, tmp_path):
    params = get_scenario("thm_S_trivial").resolve_params({"tolerance": 0.2})
    context = ScenarioContext(n=2, seed=0, params=params, settings=settings, output_dir=str(tmp_path))
    assert context.tolerance == 0.2
    assert context.fraction == settings["runner"]["almost_all_fraction"]
    assert context.box_offsets == settings["estimators"]["box_offsets"]
    context.params["box_offsets"] = 4
    assert context.box_offsets == 4


def test_check_helpers():
    check = lower_quantile_check("dim", [1.0, 0.95, 0.5, None], bound=1.0, tolerance=0.1, fraction=0.5)
    assert check.passed
    assert check.measured == 0.95
    assert check.theorem_bound == 1.0
    assert check.margin == pytest.approx(0.05)
    barely = lower_quantile_check("dim", [0.965, 0.98], bound=1.0, tolerance=0.1, fraction=1.0)
    assert barely.passed and barely.margin > 0.0
    assert check.exceptions == [2, 3]

    assert not fraction_check("share", [True, False, False], 0.5).passed
    assert upper_check("gap", 0.05, 0.1).margin == pytest.approx(0.05)
    assert not upper_check("gap", None, 0.1).passed

    band = band_check("ratio", [1.02, 0.85, 1.01], 1.0, 0.1, keys=["a", "b", "c"])
    assert not band.passed
    assert band.measured == 0.85
    assert band.exceptions == ["b"]

    verdict = Verdict([upper_check("loose", 0.1, 1.0), upper_check("tight", 0.9, 1.0)])
    assert verdict.passed
    assert verdict.binding.label == "tight"


def test_run_writes_record_and_artifacts(tmp_path, settings):
    cfg = concentration_config(tmp_path)
    record = ExperimentRunner(settings).run(cfg)
    assert record.passed
    assert len(record.results) == 20
    assert len(record.sample_seeds) == 20
    assert {"concentration.csv", "rotations_haar.csv"} <= set(record.artifacts)

    run_dir = cfg.run_directory()
    with open(os.path.join(run_dir, "record.json"), encoding="utf-8") as f:
        stored = json.load(f)
    assert stored["config_hash"] == cfg.config_hash()
    with open(os.path.join(run_dir, "concentration.csv.json"), encoding="utf-8") as f:
        assert json.load(f)["config_hash"] == cfg.config_hash()


def test_results_do_not_depend_on_thread_count(tmp_path, settings):
    serial = ExperimentRunner(settings, threads=1).run(concentration_config(tmp_path / "serial"))
    parallel = ExperimentRunner(settings, threads=4).run(concentration_config(tmp_path / "parallel"))
    assert serial.results == parallel.results


def test_determinism_check_passes(tmp_path, settings):
    cfg = concentration_config(tmp_path, verify_determinism=True)
    record = run_scenario(cfg, settings)
    assert record.config["verify_determinism"]


def test_progress_callback_reaches_total(tmp_path, settings):
    calls = []
    ExperimentRunner(settings).run(concentration_config(tmp_path), progress_callback=lambda d, t: calls.append((d, t)))
    assert calls[-1] == (20, 20)
    assert len(calls) == 20


def test_hypothesis_is_checked_before_sampling(tmp_path, settings):
    cfg = ScenarioConfig.from_dict({"scenario": "thm_pi_ac", "output_dir": str(tmp_path),
                                    "fractals": {"A": cantor_power_spec(0.5, 2, 4).to_dict()}})
    with pytest.raises(LabError) as e:
        ExperimentRunner(settings).run(cfg)
    assert e.value.code == "hypothesis_not_met"


def test_unsupported_dimension(tmp_path, settings):
    cfg = ScenarioConfig.from_dict({"scenario": "distance_consistency", "n": 3, "output_dir": str(tmp_path)})
    with pytest.raises(LabError) as e:
        ExperimentRunner(settings).run(cfg)
    assert e.value.code == "unsupported_dimension"


def test_report_aggregates_records(tmp_path, settings):
    assert report([])["status"] == "no_records"

    ExperimentRunner(settings).run(concentration_config(tmp_path))
    records = load_records(str(tmp_path))
    assert len(records) == 1
    failing = ExperimentRecord.from_dict({**records[0].to_dict(), "passed": False, "config_hash": "f" * 64})
    summary = report(records + [failing], str(tmp_path))
    assert summary["status"] == "fail"
    assert summary["passed"] == 1 and summary["failed"] == 1
    assert (tmp_path / "summary.txt").exists()
    assert json.loads((tmp_path / "summary.json").read_text())["total"] == 2


def test_distance_consistency_runs_at_defaults(tmp_path, settings):
    cfg = ScenarioConfig.from_dict({"scenario": "distance_consistency", "output_dir": str(tmp_path)})
    record = ExperimentRunner(settings).run(cfg)
    assert len(record.results) == 2
    assert all(r["density_side"] > 0 for r in record.results)
    assert record.passed
    assert "distance_mu.csv" in record.artifacts


def test_cone_decay_of_a_non_split_measure(settings, tmp_path):
    scenario = get_scenario("decay_cone")
    context = ScenarioContext(n=2, seed=0, params=scenario.resolve_params({}), settings=settings,
                              output_dir=str(tmp_path))
    prepared = scenario.prepare(context)
    assert prepared["general_mu"].split_at(2) is None
    assert prepared["general_bound"] == pytest.approx(1.0 - 1.8 + 0.3)

    result = scenario.run_case(prepared, "general", np.random.default_rng(0))
    assert result["slope"] <= prepared["general_bound"]

    failing = {**result, "case": "general", "slope": prepared["general_bound"] + 0.1}
    others = [{"case": "identity", "ratios": [1.0], "radii": [4.0]}, {"case": "product", "slope": -5.0}]
    verdict = scenario.evaluate(prepared, others + [failing])
    assert not verdict.passed
    assert verdict.binding.label == "cone decay exponent, general measure"


def test_parseval_binds_on_the_closed_form_interval(settings, tmp_path):
    scenario = get_scenario("parseval")
    params = scenario.resolve_params({"closed_form_atoms": 1024, "cantor_level": 6,
                                      "energy_grid": [0.3, 0.5, 0.7]})
    context = ScenarioContext(n=1, seed=0, params=params, settings=settings, output_dir=str(tmp_path))
    prepared = scenario.prepare(context)
    verdict = scenario.evaluate(prepared, [{"case": "interval s=0.5", "s": 0.5, "relative_gap": 0.01}])
    assert not verdict.passed
    assert verdict.binding.label == "interval s=0.5 vs 8/3"
    assert verdict.binding.measured == pytest.approx(0.0913, abs=2e-3)
