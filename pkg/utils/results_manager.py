"""
Results Manager for delayshare

Writes allocation reports (JSON or CSV) and the artifacts of a conditional
study: run information with system details, summaries, the sign table and
the density data. Everything except run_info.json and the log depends only
on the inputs and the seed, so repeated runs produce identical files.
"""

import csv
import json
import math
import os
import platform
from dataclasses import asdict, dataclass
from datetime import datetime
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import psutil

from scheduling.errors import IoError
from utils.logger_config import DelayShareLogger, configure_logging, get_logger

ALLOCATION_COLUMNS = ["activity", "payment", "std_error", "rel_err_pct"]
SUMMARY_COLUMNS = ["activity", "mean_ssh", "mean_sh"]
SIGN_COLUMNS = ["rule", "activity", "non_negative_pct", "negative_pct"]
GRID_COLUMNS = ["rule", "activity", "grid_point", "density"]
SAMPLE_COLUMNS = ["rule", "activity", "run", "value"]


@dataclass
class SystemInfo:
    """Machine the study ran on."""
    cpu: str
    cpu_cores: Optional[int]
    logical_cpus: Optional[int]
    ram_gb: float
    os_name: str
    os_version: str
    architecture: str
    hostname: str
    python_version: str


def collect_system_info() -> SystemInfo:
    memory = psutil.virtual_memory()
    return SystemInfo(
        cpu=platform.processor() or "Unknown CPU",
        cpu_cores=psutil.cpu_count(logical=False),
        logical_cpus=psutil.cpu_count(logical=True),
        ram_gb=round(memory.total / (1024 ** 3), 1),
        os_name=platform.system(),
        os_version=platform.release(),
        architecture=platform.architecture()[0],
        hostname=platform.node(),
        python_version=platform.python_version(),
    )


def _clean(value):
    """JSON-safe number: nan and infinities become None."""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return "" if not math.isfinite(value) else repr(value)
    return str(value)


def _write_csv(path: str, columns: Sequence[str], rows: Iterable[Dict]) -> str:
    try:
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=list(columns), lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow({k: _fmt(row.get(k)) for k in columns})
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e
    return path


def _write_json(path: str, payload: Dict) -> str:
    try:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e
    return path


def allocation_payload(allocation) -> Dict:
    meta = {k: _clean(v) for k, v in sorted(allocation.meta.items())}
    return {
        "activities": [{k: _clean(v) for k, v in row.items()} for row in allocation.records()],
        "errors": {k: _clean(v) for k, v in allocation.error_summary().items()},
        "meta": meta,
        "total": allocation.total,
    }


def write_allocation(allocation, path: str) -> str:
    """JSON when the path ends in .json, CSV otherwise."""
    if path.lower().endswith(".json"):
        return _write_json(path, allocation_payload(allocation))
    return _write_csv(path, ALLOCATION_COLUMNS, allocation.records())


def write_density_files(grids, samples, directory: str) -> Tuple[str, str]:
    """density_grid.csv (one row per grid point) and density_samples.csv (one row per run)."""
    os.makedirs(directory, exist_ok=True)
    grid_rows = (
        {"rule": g.rule, "activity": g.activity, "grid_point": float(x), "density": float(d)}
        for g in grids for x, d in zip(g.grid, g.density)
    )
    sample_rows = (
        {"rule": s.rule, "activity": s.activity, "run": run, "value": float(v)}
        for s in samples for run, v in enumerate(s.values)
    )
    return (
        _write_csv(os.path.join(directory, "density_grid.csv"), GRID_COLUMNS, grid_rows),
        _write_csv(os.path.join(directory, "density_samples.csv"), SAMPLE_COLUMNS, sample_rows),
    )


class ResultsManager:
    """Manages the output directory of one conditional study."""

    def __init__(self, outdir: str):
        self.outdir = outdir
        self.system_info: Optional[SystemInfo] = None
        self.start_time: Optional[datetime] = None
        self.logger = get_logger(__name__)

    def start_study(self, settings: Dict) -> str:
        """
        Create the output directory, record run information and attach the study log.

        Args:
            settings: Study parameters recorded in run_info.json

        Returns:
            The output directory
        """
        try:
            os.makedirs(self.outdir, exist_ok=True)
        except OSError as e:
            raise IoError(f"cannot create {self.outdir}: {e}") from e
        self.start_time = datetime.now()
        self.system_info = collect_system_info()
        self._setup_study_logging()
        _write_json(os.path.join(self.outdir, "run_info.json"), {
            "started": self.start_time.strftime("%Y-%m-%dT%H:%M:%S"),
            "settings": settings,
            "system": asdict(self.system_info),
        })
        self.logger.info(f"Results directory: {self.outdir}")
        return self.outdir

    def write_study(self, outcome, grids) -> List[str]:
        """Write the summary, sign table and density files of a finished study."""
        result = outcome.result
        gaps = [
            max(abs(math.fsum(r.det.payments) - r.cost), abs(math.fsum(r.stoch.payments) - r.cost))
            for r in outcome.records
        ]
        summary_rows = [
            {"activity": label, "mean_ssh": float(result.mean_alloc[i]),
             "mean_sh": float(result.mean_det_alloc[i])}
            for i, label in enumerate(result.labels)
        ]
        summary = {
            "runs": result.runs,
            "seed": result.seed,
            "mean_cost": result.mean_cost,
            "mean_alloc": dict(zip(result.labels, map(float, result.mean_alloc))),
            "mean_det_alloc": dict(zip(result.labels, map(float, result.mean_det_alloc))),
            "rejection_count": result.rejection_count,
            "acceptance_rate": result.acceptance_rate,
            "adjustment": result.adjustment,
            "adjusted_runs": result.adjusted_runs,
            "max_efficiency_gap": max(gaps) if gaps else None,
        }
        written = [
            _write_json(os.path.join(self.outdir, "study_summary.json"), summary),
            _write_csv(os.path.join(self.outdir, "summary.csv"), SUMMARY_COLUMNS,
                       summary_rows),
            _write_csv(os.path.join(self.outdir, "sign_table.csv"), SIGN_COLUMNS,
                       outcome.signs.rows()),
        ]
        written.extend(write_density_files(grids, outcome.densities, self.outdir))
        if self.start_time:
            elapsed = datetime.now() - self.start_time
            self.logger.info(f"Study artifacts written in {elapsed.total_seconds():.1f} s")
        return written

    def _setup_study_logging(self) -> None:
        log_path = os.path.join(self.outdir, "study_log.log")
        configure_logging(log_file=log_path, console_level=DelayShareLogger.get_console_level(),
                          force_reconfigure=True)
        self.logger.info("=" * 60)
        self.logger.info(f"CONDITIONAL STUDY STARTED: {self.outdir}")
        self.logger.info("=" * 60)
