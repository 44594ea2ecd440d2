"""
Report store tool for the pinched flow lab.

This tool owns the run directory layout: it derives the directory name from
the configuration hash, writes every report, table and manifest, and reads
them back into the same models.
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Type, TypeVar

import pandas as pd
from pydantic import BaseModel

from lab import Tool
from schemas import CounterexampleRecord, FlowSample, SuiteReport, Trajectory

logger = logging.getLogger(__name__)

ModelT = TypeVar("ModelT", bound=BaseModel)

FLOAT_FORMAT = "%.17g"
TRAJECTORY_COLUMNS = ["t", "u", "H", "A2", "Ao2", "Q", "W", "f0", "vol_ratio", "log_volume_integral"]
SUMMARY_COLUMNS = ["suite_id", "dims", "trials", "pass", "worst_slack", "violations"]


class ReportStoreTool(Tool):
    """Run directories and their JSON/CSV artifacts."""

    def __init__(self, output_root: str = "runs"):
        """Initialize the report store tool."""
        super().__init__("report_store", "Run directory persistence")
        self.output_root = Path(output_root)
        logger.info(f"Report store initialized at {self.output_root}")

    def execute(self, operation: str, **kwargs) -> Any:
        """Execute report store operations."""
        if operation == "run_dir":
            return self.run_dir(**kwargs)
        elif operation == "save_reports":
            return self.save_reports(**kwargs)
        elif operation == "save_trajectories":
            return self.save_trajectories(**kwargs)
        elif operation == "save_model":
            return self.save_model(**kwargs)
        elif operation == "save_manifest":
            return self.save_manifest(**kwargs)
        elif operation == "save_timing":
            return self.save_timing(**kwargs)
        elif operation == "get_reports":
            return self.get_reports(**kwargs)
        elif operation == "get_counterexamples":
            return self.get_counterexamples(**kwargs)
        elif operation == "get_summary":
            return self.get_summary(**kwargs)
        elif operation == "get_trajectories":
            return self.get_trajectories(**kwargs)
        elif operation == "get_model":
            return self.get_model(**kwargs)
        elif operation == "get_manifest":
            return self.get_manifest(**kwargs)
        else:
            raise ValueError(f"Unknown operation: {operation}")

    # ------------------------------------------------------------------
    # Layout
    # ------------------------------------------------------------------

    @staticmethod
    def config_digest(config: BaseModel) -> str:
        """First 12 hex digits of the SHA-256 of the canonical config JSON; workers do not count."""
        canonical = json.dumps(
            config.model_dump(mode="json", exclude={"workers"}), sort_keys=True, separators=(",", ":")
        )
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]

    def run_dir(self, command: str, config: BaseModel) -> Path:
        """Create (or reuse) ``<root>/<command>-<digest>``."""
        path = self.output_root / f"{command}-{self.config_digest(config)}"
        path.mkdir(parents=True, exist_ok=True)
        logger.debug(f"Run directory {path}")
        return path

    @staticmethod
    def _write_json(path: Path, payload: Any) -> Path:
        path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        return path

    @staticmethod
    def _read_json(path: Path) -> Any:
        return json.loads(Path(path).read_text(encoding="utf-8"))

    # ------------------------------------------------------------------
    # Writers
    # ------------------------------------------------------------------

    def save_reports(self, run_dir: Path, reports: List[SuiteReport]) -> List[Path]:
        """
        Write reports.json, counterexamples.json and summary.csv.

        wall_time is left out so that repeated runs produce identical files.
        """
        run_dir = Path(run_dir)
        reports_path = self._write_json(
            run_dir / "reports.json", [report.model_dump(exclude={"wall_time"}) for report in reports]
        )
        counterexamples_path = self._write_json(
            run_dir / "counterexamples.json",
            [record.model_dump() for report in reports for record in report.violations],
        )
        summary = pd.DataFrame(
            [
                {
                    "suite_id": report.suite_id.value,
                    "dims": ";".join(f"{m}x{k}" for m, k in report.dims),
                    "trials": report.trials_run,
                    "pass": report.passed,
                    "worst_slack": report.worst_slack,
                    "violations": report.violation_count,
                }
                for report in reports
            ],
            columns=SUMMARY_COLUMNS,
        )
        summary_path = run_dir / "summary.csv"
        summary.to_csv(summary_path, index=False, float_format=FLOAT_FORMAT)
        logger.info(f"Saved {len(reports)} suite report(s) to {run_dir}")
        return [reports_path, counterexamples_path, summary_path]

    def save_trajectories(self, run_dir: Path, trajectories: List[Trajectory]) -> List[Path]:
        """One trajectory_NNN.csv per run, numbered in u0 order."""
        paths = []
        for index, trajectory in enumerate(trajectories):
            frame = pd.DataFrame([sample.model_dump() for sample in trajectory.samples], columns=TRAJECTORY_COLUMNS)
            path = Path(run_dir) / f"trajectory_{index:03d}.csv"
            frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
            paths.append(path)
        logger.info(f"Saved {len(paths)} trajectory table(s) to {run_dir}")
        return paths

    def save_model(self, run_dir: Path, name: str, model: BaseModel) -> Path:
        """Write one report model as ``<name>.json``."""
        return self._write_json(Path(run_dir) / f"{name}.json", model.model_dump())

    def save_manifest(
        self,
        run_dir: Path,
        command: str,
        config: BaseModel,
        files: List[Path],
        trajectories: Optional[List[Trajectory]] = None,
    ) -> Path:
        """manifest.json: command, config, written files and trajectory metadata."""
        payload: Dict[str, Any] = {
            "command": command,
            "config": config.model_dump(mode="json", exclude={"workers"}),
            "files": sorted(Path(path).name for path in files),
        }
        if trajectories is not None:
            payload["trajectories"] = [trajectory.model_dump(exclude={"samples"}) for trajectory in trajectories]
        return self._write_json(Path(run_dir) / "manifest.json", payload)

    def save_timing(self, run_dir: Path, timing: Dict[str, float]) -> Path:
        """timing.json, the only file whose content changes between identical runs."""
        return self._write_json(Path(run_dir) / "timing.json", timing)

    # ------------------------------------------------------------------
    # Readers
    # ------------------------------------------------------------------

    def get_reports(self, run_dir: Path) -> List[SuiteReport]:
        return [SuiteReport(**item) for item in self._read_json(Path(run_dir) / "reports.json")]

    def get_counterexamples(self, run_dir: Path) -> List[CounterexampleRecord]:
        return [CounterexampleRecord(**item) for item in self._read_json(Path(run_dir) / "counterexamples.json")]

    def get_summary(self, run_dir: Path) -> pd.DataFrame:
        return pd.read_csv(Path(run_dir) / "summary.csv", float_precision="round_trip")

    def get_manifest(self, run_dir: Path) -> Dict[str, Any]:
        return self._read_json(Path(run_dir) / "manifest.json")

    def get_model(self, run_dir: Path, name: str, model_type: Type[ModelT]) -> ModelT:
        return model_type(**self._read_json(Path(run_dir) / f"{name}.json"))

    def get_trajectories(self, run_dir: Path) -> List[Trajectory]:
        """Rebuild trajectories from the manifest metadata and the CSV tables."""
        run_dir = Path(run_dir)
        trajectories = []
        for index, meta in enumerate(self.get_manifest(run_dir).get("trajectories", [])):
            frame = pd.read_csv(run_dir / f"trajectory_{index:03d}.csv", float_precision="round_trip")
            samples = [FlowSample(**row) for row in frame.to_dict(orient="records")]
            trajectories.append(Trajectory(**meta, samples=samples))
        return trajectories
