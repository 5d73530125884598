#!/usr/bin/env python3
"""
Fractal Projection Lab - command-line interface.
Builds fractal measures, runs the registered scenarios and reports their
pass/fail table.

Exit codes: 0 when every pass rule holds, 1 when a scenario fails, 2 for a
configuration or estimator error, 3 when ``report`` finds no records.
"""

import os
import sys
import json
import logging
import argparse
from typing import Any, Dict, List, Optional

from utils.logging_config import setup_logging
from utils.config import load_config
from utils.text_visualizer import TextVisualizer
from core.errors import LabError
from core.export import ExportManager
from core.fractals import FractalSpec, build_from_spec
from core.experiment_runner import ExperimentRunner, ScenarioConfig, load_records, report
from scenarios import AVAILABLE_SCENARIOS

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_ERROR = 2
EXIT_NO_RECORDS = 3


def _read_json(path_or_text: str) -> Dict[str, Any]:
    """A JSON document given either inline or as a file path."""
    if os.path.exists(path_or_text):
        with open(path_or_text, 'r', encoding='utf-8') as f:
            return json.load(f)
    try:
        return json.loads(path_or_text)
    except json.JSONDecodeError as e:
        raise LabError("bad_config", f"'{path_or_text}' is neither a file nor a JSON document: {e}") from e


def _parse_params(items: Optional[List[str]]) -> Dict[str, Any]:
    params: Dict[str, Any] = {}
    for item in items or []:
        key, sep, raw = item.partition("=")
        if not sep:
            raise LabError("bad_config", f"--param expects key=value, got '{item}'")
        try:
            params[key] = json.loads(raw)
        except json.JSONDecodeError:
            params[key] = raw
    return params


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Fractal Projection Lab - projection theorems on fractal measures")
    parser.add_argument("--config", "-c", help="Scenario configuration (JSON file)")
    parser.add_argument("--settings", help="Application settings file (default: config.json lookup)")
    parser.add_argument("--seed", type=int, help="Override the configured seed")
    parser.add_argument("--out", "-o", help="Output root directory")
    parser.add_argument("--threads", "-t", type=int, help="Worker threads for sampled scenarios")
    parser.add_argument("--verbose", "-v", help="Enable debug logging", action="store_true")
    parser.add_argument("--no-color", help="Disable colored output", action="store_true")
    parser.add_argument("--log-file", help="Also write the log to this file")

    subparsers = parser.add_subparsers(dest="command", required=True)
    subparsers.add_parser("list", help="List registered scenarios")

    build = subparsers.add_parser("build", help="Construct a fractal and write it as a measure table")
    build.add_argument("spec", help="Fractal spec as a JSON file or inline JSON")
    build.add_argument("--name", default="measure", help="Base name of the table (default: measure)")

    run = subparsers.add_parser("run", help="Run a scenario")
    run.add_argument("scenario", help=f"Scenario name {list(AVAILABLE_SCENARIOS)}")
    run.add_argument("--param", "-p", action="append", help="Scenario parameter key=value (repeatable)")
    run.add_argument("--verify-determinism", action="store_true", help="Re-run sample 0 and compare")

    subparsers.add_parser("report", help="Summarise every record under the output root")
    return parser


def command_list(visualizer: TextVisualizer) -> int:
    visualizer.display_registry({name: cls.description for name, cls in AVAILABLE_SCENARIOS.items()})
    return EXIT_PASS


def command_build(args, settings: Dict[str, Any], out_root: str) -> int:
    logger = logging.getLogger(__name__)
    spec = FractalSpec.from_dict(_read_json(args.spec))
    built = build_from_spec(spec, cap=int(settings["limits"]["atom_cap"]))
    measure = built.measure.with_metadata(provenance=spec.to_dict(), nominal_dimension=built.nominal_dimension)
    path = os.path.join(out_root, "measures", f"{args.name}.tbl")
    success, message = ExportManager().export_measure(measure, path)
    if not success:
        logger.error(message)
        print(f"ERROR: {message}")
        return EXIT_ERROR
    print(f"Built {spec.kind} at level {spec.level}: {measure.atom_count} atoms in R^{measure.ambient_dim}, "
          f"nominal dimension {built.nominal_dimension:.4f}")
    print(message)
    return EXIT_PASS


def command_run(args, settings: Dict[str, Any], visualizer: TextVisualizer, out_root: str) -> int:
    logger = logging.getLogger(__name__)
    data = _read_json(args.config) if args.config else {}
    if data.get("scenario", args.scenario) != args.scenario:
        raise LabError("bad_config", f"configuration is for '{data['scenario']}', not '{args.scenario}'")
    data["scenario"] = args.scenario
    data.setdefault("output_dir", out_root)
    if args.out:
        data["output_dir"] = args.out
    if args.seed is not None:
        data["seed"] = args.seed
    if args.param:
        data["params"] = {**data.get("params", {}), **_parse_params(args.param)}
    if args.verify_determinism:
        data["verify_determinism"] = True
    cfg = ScenarioConfig.from_dict(data)

    runner = ExperimentRunner(settings, threads=args.threads)

    def progress(done: int, total: int):
        end = "\n" if done == total else ""
        print("\r" + visualizer.display_progress(done, total, cfg.scenario), end=end, flush=True)

    record = runner.run(cfg, progress_callback=progress)
    visualizer.display_record(record.to_dict())
    logger.info(f"Record written to {cfg.run_directory()}")
    return EXIT_PASS if record.passed else EXIT_FAIL


def command_report(visualizer: TextVisualizer, out_root: str) -> int:
    records = load_records(out_root)
    summary = report(records, out_root)
    visualizer.display_summary(summary)
    if summary["status"] == "no_records":
        return EXIT_NO_RECORDS
    return EXIT_PASS if summary["status"] == "pass" else EXIT_FAIL


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for the lab CLI."""
    args = build_parser().parse_args(argv)

    settings = load_config(args.settings)
    configured = getattr(logging, str(settings["logging"].get("level", "INFO")).upper(), logging.INFO)
    log_level = logging.DEBUG if args.verbose else configured
    setup_logging(log_level, log_to_file=bool(settings["logging"].get("to_file")), log_file=args.log_file)
    logger = logging.getLogger(__name__)
    logger.info(f"Starting Fractal Projection Lab: {args.command}")

    visualizer = TextVisualizer(use_color=not args.no_color)
    out_root = args.out or settings["runner"]["output_root"]

    try:
        if args.command == "list":
            return command_list(visualizer)
        if args.command == "build":
            return command_build(args, settings, out_root)
        if args.command == "run":
            return command_run(args, settings, visualizer, out_root)
        return command_report(visualizer, out_root)
    except LabError as e:
        logger.debug("Lab error", exc_info=True)
        print(f"ERROR [{e.code}]: {e.message}")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
