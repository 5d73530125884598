"""
Export module for saving measures, profiles and experiment records.
"""

import os
import csv
import json
import logging
import datetime
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from core.dimension import BoxCount
from core.distances import DistanceMeasure
from core.errors import LabError
from core.measure import DiscreteMeasure
from core.rotations import RotationMeasure
from core.scaling import ScalingFit
from core.spectral import EnergyReport, SpectralProfile

TABLE_HEADER = "# ambient_dim atom_count resolution"


def to_jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if hasattr(value, "to_dict"):
        return to_jsonable(value.to_dict())
    return value


def _ensure_parent(path: str):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


class ExportManager:
    """Manager for writing lab artifacts to disk."""

    def __init__(self, stamp: Optional[Dict[str, Any]] = None):
        """
        Initialize the export manager

        Args:
            stamp: Entries added to every metadata sidecar (run config hash, scenario)
        """
        self.logger = logging.getLogger(__name__)
        self.stamp = dict(stamp or {})

    def _write_sidecar(self, path: str, metadata: Optional[Dict[str, Any]]):
        sidecar = dict(self.stamp)
        sidecar.update(metadata or {})
        with open(path + ".json", 'w', encoding='utf-8') as f:
            json.dump(to_jsonable(sidecar), f, indent=2, sort_keys=True)

    def export_table(self, path: str, header: Sequence[str], rows: Iterable[Sequence[Any]],
                     metadata: Optional[Dict[str, Any]] = None, what: str = "table") -> Tuple[bool, str]:
        """
        Write a CSV table plus its ``<path>.json`` metadata sidecar

        Args:
            path: Output CSV path
            header: Column names
            rows: Row sequences; floats are written with full precision
            metadata: Sidecar contents
            what: Name used in log messages

        Returns:
            Tuple of (success, message)
        """
        try:
            _ensure_parent(path)
            with open(path, 'w', encoding='utf-8', newline='') as f:
                writer = csv.writer(f)
                writer.writerow(header)
                for row in rows:
                    writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
            self._write_sidecar(path, metadata)
            self.logger.info(f"Exported {what} to {path}")
            return True, f"Exported {what} to {path}"
        except Exception as e:
            error_msg = f"Error exporting {what}: {e}"
            self.logger.error(error_msg)
            return False, error_msg

    def export_measure(self, measure: DiscreteMeasure, output_path: str) -> Tuple[bool, str]:
        """
        Write a measure table: a header line, then one row x_1 .. x_d w per atom

        Args:
            measure: Measure to save
            output_path: Path of the ``.tbl`` file; metadata goes to ``<path>.json``

        Returns:
            Tuple of (success, message)
        """
        try:
            _ensure_parent(output_path)
            table = np.column_stack([measure.points, measure.weights])
            header = (f"{TABLE_HEADER}\n{measure.ambient_dim} {measure.atom_count} "
                      f"{measure.resolution!r}")
            np.savetxt(output_path, table, fmt="%.17g", header=header, comments="")
            self._write_sidecar(output_path, measure.metadata)
            self.logger.info(f"Exported measure with {measure.atom_count} atoms to {output_path}")
            return True, f"Exported {measure.atom_count} atoms to {output_path}"
        except Exception as e:
            error_msg = f"Error exporting measure: {e}"
            self.logger.error(error_msg)
            return False, error_msg

    def export_rotations(self, theta: RotationMeasure, output_path: str) -> Tuple[bool, str]:
        """Write one row of n^2 row-major entries plus the weight per group element."""
        n = theta.dim
        header = [f"g{i}{j}" for i in range(n) for j in range(n)] + ["weight"]
        metadata = {"label": theta.label, "alpha": theta.alpha, "beta": theta.beta, "n": n}
        return self.export_table(output_path, header, theta.to_table().tolist(), metadata, "rotation measure")

    def export_profile(self, profile: SpectralProfile, output_path: str,
                       metadata: Optional[Dict[str, Any]] = None) -> Tuple[bool, str]:
        meta = {"kind": profile.kind}
        if len(profile.radii) >= 4 and all(v > 0 for v in profile.values):
            meta["slope"] = profile.fit().slope
        meta.update(metadata or {})
        return self.export_table(output_path, ["R", "value", "stderr", "nodes"], profile.rows(),
                               meta, f"{profile.kind} profile")

    def export_scaling(self, counts: Sequence[BoxCount], fit: ScalingFit, ambient_dim: int,
                       output_path: str, metadata: Optional[Dict[str, Any]] = None) -> Tuple[bool, str]:
        rows = [(c.scale, c.occupied, c.covered_volume(ambient_dim)) for c in counts]
        meta = {"slope": fit.slope, "intercept": fit.intercept, "r_squared": fit.r_squared,
                "scale_window": list(fit.scale_window)}
        meta.update(metadata or {})
        return self.export_table(output_path, ["scale", "count", "covered_volume"], rows, meta, "box counts")

    def export_energy(self, reports: Sequence[EnergyReport], output_path: str,
                      metadata: Optional[Dict[str, Any]] = None) -> Tuple[bool, str]:
        header = ["s", "spatial_value", "fourier_value", "relative_gap", "mollifier_width",
                  "atomic_value", "tail_estimate"]
        rows = [(r.s, r.spatial_value, r.fourier_value, r.relative_gap, r.mollifier_width,
                 r.atomic_value, r.tail_estimate) for r in reports]
        return self.export_table(output_path, header, rows, metadata, "energy reports")

    def export_distance(self, dm: DistanceMeasure, output_path: str,
                        metadata: Optional[Dict[str, Any]] = None) -> Tuple[bool, str]:
        rows = zip(dm.bin_edges[:-1].tolist(), dm.bin_edges[1:].tolist(), dm.masses.tolist())
        meta = {"diagonal_mass": dm.diagonal_mass, "overflow_mass": dm.overflow_mass,
                "source_mass": dm.source_mass}
        meta.update(metadata or {})
        return self.export_table(output_path, ["bin_lo", "bin_hi", "mass"], rows, meta, "distance histogram")

    def export_json_report(self, data: Dict[str, Any], output_path: str) -> Tuple[bool, str]:
        """
        Export a JSON document (records, summaries)

        Args:
            data: Dictionary to serialise
            output_path: Path to save the JSON file

        Returns:
            Tuple of (success, message)
        """
        try:
            _ensure_parent(output_path)
            with open(output_path, 'w', encoding='utf-8') as f:
                json.dump(to_jsonable(data), f, indent=2, sort_keys=True)

            self.logger.info(f"Successfully exported JSON report to {output_path}")
            return True, f"Successfully exported report to {output_path}"
        except Exception as e:
            error_msg = f"Error exporting JSON report: {e}"
            self.logger.error(error_msg)
            return False, error_msg

    def export_text_summary(self, summary: Dict[str, Any], output_path: str) -> Tuple[bool, str]:
        """
        Export the pass/fail table as plain text

        Args:
            summary: Summary document from ``report``
            output_path: Path to save the text file

        Returns:
            Tuple of (success, message)
        """
        try:
            _ensure_parent(output_path)
            rows: List[Dict[str, Any]] = summary.get("rows", [])
            lines = ["Fractal Projection Lab - Summary",
                     f"Generated: {summary.get('generated') or datetime.datetime.now().isoformat(timespec='seconds')}",
                     ""]
            if not rows:
                lines.append("No records.")
            else:
                width = max(len("scenario"), max(len(r["scenario"]) for r in rows)) + 2
                lines.append(f"{'scenario'.ljust(width)}{'bound':>14}{'measured':>14}{'margin':>14}  status")
                lines.append("-" * (width + 48))
                for row in rows:
                    status = {True: "PASS", False: "FAIL"}.get(row.get("passed"), "INFO")
                    lines.append(f"{row['scenario'].ljust(width)}{_cell(row.get('theorem_bound')):>14}"
                                 f"{_cell(row.get('measured')):>14}{_cell(row.get('margin')):>14}  {status}")
                lines.append("")
                lines.append(f"Passed: {summary.get('passed', 0)}/{summary.get('total', 0)}")
                for row in rows:
                    for note in row.get("notes", []):
                        lines.append(f"[{row['scenario']}] {note}")

            with open(output_path, 'w', encoding='utf-8') as f:
                f.write("\n".join(lines) + "\n")

            self.logger.info(f"Successfully exported text summary to {output_path}")
            return True, f"Successfully exported summary to {output_path}"
        except Exception as e:
            error_msg = f"Error exporting text summary: {e}"
            self.logger.error(error_msg)
            return False, error_msg


def _cell(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return "-" if value is None else str(value)


def load_measure(path: str) -> DiscreteMeasure:
    """
    Read a measure table written by ``ExportManager.export_measure``.

    Raises:
        LabError: ``bad_file`` if the file is missing or malformed
    """
    try:
        with open(path, 'r', encoding='utf-8') as f:
            first = f.readline().strip()
            shape = f.readline().split()
        if first != TABLE_HEADER or len(shape) != 3:
            raise LabError("bad_file", f"{path} is not a measure table")
        ambient_dim, atom_count, resolution = int(shape[0]), int(shape[1]), float(shape[2])
        table = np.loadtxt(path, skiprows=2, ndmin=2)
    except LabError:
        raise
    except (OSError, ValueError) as e:
        raise LabError("bad_file", f"cannot read measure table {path}: {e}") from e
    if table.shape != (atom_count, ambient_dim + 1):
        raise LabError("bad_file", f"{path}: expected {atom_count}x{ambient_dim + 1} table, got {table.shape}")

    metadata: Dict[str, Any] = {}
    sidecar = path + ".json"
    if os.path.exists(sidecar):
        with open(sidecar, 'r', encoding='utf-8') as f:
            metadata = json.load(f)
    return DiscreteMeasure(table[:, :ambient_dim], table[:, ambient_dim], resolution, metadata)
