"""
Experiment runner: executes registered scenarios from a configuration
document, persists the record and aggregates records into a summary.

A run lives in ``<output_dir>/<scenario>_<hash12>``, where the hash covers
every configuration field except the output directory, so a changed
configuration always lands in a fresh directory.
"""

import os
import json
import time
import hashlib
import logging
import datetime
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field, fields
from typing import Any, Callable, Dict, List, Optional

from core.errors import LabError
from core.export import ExportManager, to_jsonable
from core.fractals import FractalSpec
from scenarios import AVAILABLE_SCENARIOS, get_scenario
from scenarios.base import BaseScenario, ScenarioContext
from utils.config import load_config
from utils.seeding import sample_rng, spawn_seeds

RECORD_FILE = "record.json"


@dataclass
class ScenarioConfig:
    """Configuration of one scenario run; ``from_dict`` rejects unknown keys."""
    scenario: str
    n: int = 2
    fractals: Dict[str, FractalSpec] = field(default_factory=dict)
    rotation_samples: Optional[int] = None
    seed: int = 0
    scales: Optional[List[float]] = None
    radii: Optional[List[float]] = None
    output_dir: str = "runs"
    params: Dict[str, Any] = field(default_factory=dict)
    verify_determinism: bool = False

    def __post_init__(self):
        if self.scenario not in AVAILABLE_SCENARIOS:
            raise LabError("unknown_scenario",
                           f"Scenario '{self.scenario}' not found. Available scenarios: {list(AVAILABLE_SCENARIOS)}")
        self.fractals = {name: spec if isinstance(spec, FractalSpec) else FractalSpec.from_dict(spec)
                         for name, spec in (self.fractals or {}).items()}
        if self.rotation_samples is not None and int(self.rotation_samples) < 1:
            raise LabError("bad_config", f"rotation_samples must be positive, got {self.rotation_samples}")
        for name in ("scales", "radii"):
            values = getattr(self, name)
            if values is not None:
                values = [float(v) for v in values]
                if not values or any(v <= 0 for v in values):
                    raise LabError("bad_config", f"{name} must be a nonempty list of positive numbers")
                setattr(self, name, values)
        self.n = int(self.n)
        self.seed = int(self.seed)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ScenarioConfig":
        """
        Build a configuration from a JSON document

        Args:
            data: Mapping whose keys are exactly the field names

        Returns:
            ScenarioConfig

        Raises:
            LabError: ``unknown_config_key`` for any other key, ``unknown_scenario``
                for an unregistered scenario name
        """
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise LabError("unknown_config_key", f"unknown configuration keys {unknown}. Available: {sorted(known)}")
        if "scenario" not in data:
            raise LabError("bad_config", "configuration needs a 'scenario' entry")
        return cls(**data)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "scenario": self.scenario,
            "n": self.n,
            "fractals": {name: spec.to_dict() for name, spec in sorted(self.fractals.items())},
            "rotation_samples": self.rotation_samples,
            "seed": self.seed,
            "scales": self.scales,
            "radii": self.radii,
            "output_dir": self.output_dir,
            "params": dict(self.params),
            "verify_determinism": self.verify_determinism,
        }

    def config_hash(self) -> str:
        """sha256 of the canonical JSON form without ``output_dir``."""
        data = self.to_dict()
        data.pop("output_dir")
        canonical = json.dumps(to_jsonable(data), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def run_directory(self) -> str:
        return os.path.join(self.output_dir, f"{self.scenario}_{self.config_hash()[:12]}")


@dataclass
class ExperimentRecord:
    """Outcome of one run. ``passed`` depends only on ``checks``."""
    scenario: str
    config_hash: str
    seed: int
    sample_seeds: List[int]
    results: List[Dict[str, Any]]
    theorem_bound: Optional[float]
    measured: Optional[float]
    margin: Optional[float]
    passed: bool
    runtime: float
    checks: List[Dict[str, Any]] = field(default_factory=list)
    exceptions: List[Any] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)
    artifacts: List[str] = field(default_factory=list)
    config: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return to_jsonable(dict(self.__dict__))

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentRecord":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})


def _canonical(value: Any) -> str:
    return json.dumps(to_jsonable(value), sort_keys=True)


class ExperimentRunner:
    """Runs scenarios sample by sample on a thread pool and writes their records."""

    def __init__(self, settings: Optional[Dict[str, Any]] = None, threads: Optional[int] = None):
        """
        Initialize the runner

        Args:
            settings: Application configuration (``load_config()`` when omitted)
            threads: Worker threads; defaults to ``settings["runner"]["threads"]``
        """
        self.logger = logging.getLogger(__name__)
        self.settings = settings or load_config()
        self.threads = max(1, int(threads or self.settings["runner"].get("threads", 1)))

    def _run_samples(self, scenario: BaseScenario, prepared: Dict[str, Any], seed: int, count: int,
                     progress_callback: Optional[Callable[[int, int], None]]) -> List[Dict[str, Any]]:
        results: List[Optional[Dict[str, Any]]] = [None] * count
        done = 0
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            futures = {pool.submit(scenario.run_sample, prepared, i, sample_rng(seed, i)): i for i in range(count)}
            for future in as_completed(futures):
                results[futures[future]] = to_jsonable(future.result())
                done += 1
                if progress_callback:
                    progress_callback(done, count)
        return results

    def _verify(self, scenario: BaseScenario, prepared: Dict[str, Any], seed: int, first: Dict[str, Any]):
        repeat = to_jsonable(scenario.run_sample(prepared, 0, sample_rng(seed, 0)))
        if _canonical(repeat) != _canonical(first):
            raise LabError("non_reproducible", f"sample 0 of {scenario.name} changed when re-run with seed {seed}",
                           detail={"first": first, "repeat": repeat})
        self.logger.info("Determinism check passed: sample 0 reproduced")

    def run(self, cfg: ScenarioConfig,
            progress_callback: Optional[Callable[[int, int], None]] = None) -> ExperimentRecord:
        """
        Execute a scenario and persist its record

        Args:
            cfg: Scenario configuration
            progress_callback: Called with (finished, total) after each sample

        Returns:
            ExperimentRecord, also written to ``record.json`` in the run directory

        Raises:
            LabError: ``unknown_scenario``, ``unknown_config_key``, ``hypothesis_not_met``,
                ``non_reproducible`` or any estimator error raised while preparing
        """
        start_time = time.time()
        scenario = get_scenario(cfg.scenario)
        params = scenario.resolve_params(cfg.params)
        config_hash = cfg.config_hash()
        run_dir = cfg.run_directory()
        os.makedirs(run_dir, exist_ok=True)
        exporter = ExportManager({"config_hash": config_hash, "scenario": cfg.scenario})
        self.logger.info(f"Running {cfg.scenario} (n={cfg.n}, seed={cfg.seed}) into {run_dir}")

        context = ScenarioContext(
            n=cfg.n,
            seed=cfg.seed,
            params=params,
            settings=self.settings,
            output_dir=run_dir,
            fractals=cfg.fractals,
            rotation_samples=cfg.rotation_samples,
            scales=cfg.scales,
            radii=cfg.radii,
            exporter=exporter,
        )
        prepared = scenario.prepare(context)
        count = scenario.sample_count(prepared)
        if count < 1:
            raise LabError("empty_set", f"scenario {cfg.scenario} scheduled no samples")
        self.logger.info(f"{cfg.scenario}: {count} samples on {self.threads} threads")

        results = self._run_samples(scenario, prepared, cfg.seed, count, progress_callback)
        if cfg.verify_determinism:
            self._verify(scenario, prepared, cfg.seed, results[0])

        verdict = scenario.evaluate(prepared, results)
        scenario.write_artifacts(prepared, results, context)
        binding = verdict.binding
        exceptions: List[Any] = []
        for check in verdict.checks:
            exceptions.extend({"check": check.label, "parameter": e} for e in check.exceptions)

        record = ExperimentRecord(
            scenario=cfg.scenario,
            config_hash=config_hash,
            seed=cfg.seed,
            sample_seeds=spawn_seeds(cfg.seed, count),
            results=results,
            theorem_bound=binding.theorem_bound,
            measured=binding.measured,
            margin=binding.margin,
            passed=verdict.passed,
            runtime=time.time() - start_time,
            checks=[c.to_dict() for c in verdict.checks],
            exceptions=exceptions,
            notes=list(verdict.notes),
            artifacts=sorted(context.artifacts),
            config=cfg.to_dict(),
        )
        record_path = os.path.join(run_dir, RECORD_FILE)
        success, message = exporter.export_json_report(record.to_dict(), record_path)
        if not success:
            self.logger.warning(message)
        status = "passed" if record.passed else "FAILED"
        self.logger.info(f"{cfg.scenario} {status} in {record.runtime:.1f} s (margin {record.margin})")
        return record


def run_scenario(cfg: ScenarioConfig, settings: Optional[Dict[str, Any]] = None,
                 threads: Optional[int] = None) -> ExperimentRecord:
    """Run one scenario with a fresh runner."""
    return ExperimentRunner(settings, threads).run(cfg)


def load_records(root: str) -> List[ExperimentRecord]:
    """
    Collect every ``record.json`` below ``root``

    Args:
        root: Output root to search

    Returns:
        Records sorted by scenario name, then config hash; unreadable files are logged and skipped
    """
    logger = logging.getLogger(__name__)
    records = []
    for dirpath, _, filenames in os.walk(root):
        if RECORD_FILE not in filenames:
            continue
        path = os.path.join(dirpath, RECORD_FILE)
        try:
            with open(path, 'r', encoding='utf-8') as f:
                records.append(ExperimentRecord.from_dict(json.load(f)))
        except (OSError, ValueError, TypeError) as e:
            logger.warning(f"Skipping unreadable record {path}: {e}")
    logger.info(f"Loaded {len(records)} records from {root}")
    return sorted(records, key=lambda r: (r.scenario, r.config_hash))


def report(records: List[ExperimentRecord], output_dir: Optional[str] = None) -> Dict[str, Any]:
    """
    Aggregate records into a pass/fail summary

    Args:
        records: Records to summarise
        output_dir: If given, ``summary.txt`` and ``summary.json`` are written there

    Returns:
        Summary document; ``status`` is ``no_records`` for an empty input,
        otherwise ``pass`` or ``fail``
    """
    rows = [{
        "scenario": r.scenario,
        "config_hash": r.config_hash[:12],
        "theorem_bound": r.theorem_bound,
        "measured": r.measured,
        "margin": r.margin,
        "passed": r.passed,
        "notes": list(r.notes),
    } for r in records]
    passed = sum(1 for r in records if r.passed)
    if not records:
        status = "no_records"
    else:
        status = "pass" if passed == len(records) else "fail"
    summary = {
        "generated": datetime.datetime.now().isoformat(timespec="seconds"),
        "status": status,
        "total": len(records),
        "passed": passed,
        "failed": len(records) - passed,
        "rows": rows,
    }

    if output_dir:
        exporter = ExportManager()
        for success, message in (exporter.export_text_summary(summary, os.path.join(output_dir, "summary.txt")),
                                 exporter.export_json_report(summary, os.path.join(output_dir, "summary.json"))):
            if not success:
                logging.getLogger(__name__).warning(message)
    return summary
