"""
Main Orchestrator Agent for the pinched flow lab.

This agent runs one validated command end to end: it resolves the run
directory, dispatches to the verifier, the flow campaign or the flow tool,
persists every output and turns the result into an exit code.
"""

import logging
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from lab import (
    Agent,
    ConfigError,
    InadmissibleDimensionsError,
    InfeasibleConstraintError,
    NumericalFailure,
    RunSession,
    UnsupportedOperationError,
)
from schemas import (
    AmbientSpace,
    EvolutionCheckConfig,
    EvolutionReport,
    FlowConfig,
    InvarianceReport,
    MinimalConfig,
    MinimalSphereReport,
    PinchRangeConfig,
    PinchRangeReport,
    ReportConfig,
    RunOutcome,
    ScanConfig,
    SpaceKind,
    SphereModel,
    VerifyConfig,
)
from agents.flow_campaign import FlowCampaignAgent
from agents.pinch_verifier import PinchVerifierAgent
from tools import EquivariantFlowTool, ReportStoreTool

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

# Two routes to the same pinched-interval boundary must agree this closely
CROSS_ROUTE_TOLERANCE = 1e-8

USAGE_ERRORS = (ConfigError, InadmissibleDimensionsError, InfeasibleConstraintError, UnsupportedOperationError)


class OrchestratorAgent(Agent):
    """Main orchestrator agent that runs one command and persists its outputs."""

    def __init__(
        self,
        verifier: PinchVerifierAgent,
        flow_campaign: FlowCampaignAgent,
        store: ReportStoreTool,
    ):
        """Initialize the Orchestrator Agent."""
        super().__init__(
            name="orchestrator_agent",
            description="Dispatches lab commands and maps results to exit codes"
        )
        self.verifier = verifier
        self.flow_campaign = flow_campaign
        self.flow: EquivariantFlowTool = flow_campaign.flow
        self.store = store
        logger.info("Orchestrator Agent initialized")

    async def process(self, input_data: Any, session: RunSession) -> RunOutcome:
        """
        Execute one command.

        Args:
            input_data: A validated RunConfig member
            session: Run session; receives the run directory

        Returns:
            RunOutcome whose exit_code follows the 0/1/2/3 contract
        """
        command = input_data.command
        started = time.perf_counter()
        try:
            if isinstance(input_data, ReportConfig):
                logger.info(f"Step 1: Re-reading run directory {input_data.run_dir}")
                return self._report(input_data)

            run_dir = self.store.run_dir(command, input_data)
            session.run_dir = run_dir
            logger.info(f"Step 1: Running {command} into {run_dir}")

            if isinstance(input_data, (VerifyConfig, ScanConfig)):
                exit_code, files, data, trajectories = await self._verify(input_data, session, run_dir)
            elif isinstance(input_data, FlowConfig):
                exit_code, files, data, trajectories = await self._flow(input_data, session, run_dir)
            elif isinstance(input_data, PinchRangeConfig):
                exit_code, files, data, trajectories = self._pinch_range(input_data, run_dir)
            elif isinstance(input_data, EvolutionCheckConfig):
                exit_code, files, data, trajectories = self._evolution_check(input_data, run_dir)
            elif isinstance(input_data, MinimalConfig):
                exit_code, files, data, trajectories = self._minimal(input_data, run_dir)
            else:
                raise ConfigError([f"command: unsupported command {command!r}"])

            logger.info("Step 2: Writing manifest and timing")
            files.append(self.store.save_manifest(run_dir, command, input_data, files + [run_dir / "manifest.json"], trajectories))
            elapsed = time.perf_counter() - started
            self.store.save_timing(run_dir, {"wall_time": elapsed})

            message = "all assertions passed" if exit_code == EXIT_PASS else "violation found"
            logger.info(f"{command} finished in {elapsed:.3f}s: {message}")
            return RunOutcome(command=command, exit_code=exit_code, run_dir=str(run_dir), data=data, message=message)

        except USAGE_ERRORS as e:
            logger.error(f"Usage error in {command}: {e}")
            return RunOutcome(command=command, exit_code=EXIT_USAGE, error=str(e), message="usage or configuration error")
        except NumericalFailure as e:
            logger.error(f"Numerical failure in {command}: {e}")
            return RunOutcome(command=command, exit_code=EXIT_NUMERICAL, error=str(e), message="internal numerical failure")
        except Exception as e:
            logger.error(f"Unexpected error in {command}: {e}")
            return RunOutcome(command=command, exit_code=EXIT_NUMERICAL, error=f"{type(e).__name__}: {e}", message="internal failure")

    # ------------------------------------------------------------------
    # Commands
    # ------------------------------------------------------------------

    @staticmethod
    def _space(config: Any) -> AmbientSpace:
        return AmbientSpace(kind=config.space, n=config.n, c=config.c)

    async def _verify(self, config, session: RunSession, run_dir: Path) -> Tuple[int, List[Path], Dict[str, Any], None]:
        reports = await self.verifier.process(config, session)
        files = self.store.save_reports(run_dir, reports)
        data = self.verifier.summary(reports)
        data["worst"] = {report.suite_id.value: report.worst_slack for report in reports}
        exit_code = EXIT_PASS if all(report.passed for report in reports) else EXIT_VIOLATION
        return exit_code, files, data, None

    async def _flow(self, config: FlowConfig, session: RunSession, run_dir: Path):
        trajectories, report = await self.flow_campaign.process(config, session)
        files = self.store.save_trajectories(run_dir, trajectories)
        files.append(self.store.save_model(run_dir, "invariance", report))
        asserted = self._asserted_failures(config, report)
        data = {
            "runs": len(report.records),
            "extinct": sum(record.extinct for record in report.records),
            "failed": asserted,
        }
        return (EXIT_VIOLATION if asserted else EXIT_PASS), files, data, trajectories

    def _asserted_failures(self, config: FlowConfig, report: InvarianceReport) -> List[float]:
        """Failed runs that started pinched; unpinched starts are recorded without a claim."""
        space = self._space(config)
        failed = []
        for record in report.records:
            pinched = self.flow.pinch_test_closed_form(SphereModel(space=space, u=record.u0), config.eps) < 0.0
            if pinched and not record.passed:
                failed.append(record.u0)
            elif not pinched:
                logger.info(f"u0 = {record.u0!r} starts outside the pinched range; no claim asserted")
        return failed

    def _pinch_range(self, config: PinchRangeConfig, run_dir: Path):
        report = self.flow.pinch_range(self._space(config), config.eps)
        files = [self.store.save_model(run_dir, "pinch_range", report)]
        gap = self._cross_route_gap(report)
        data = {"intervals": report.intervals, "cross_route_gap": gap, "non_convex_witness": report.non_convex_witness}
        agree = gap is not None and gap <= CROSS_ROUTE_TOLERANCE
        return (EXIT_PASS if agree else EXIT_VIOLATION), files, data, None

    @staticmethod
    def _cross_route_gap(report: PinchRangeReport) -> Optional[float]:
        if len(report.boundaries) != len(report.cross_route_boundaries):
            return None
        return max((abs(a - b) for a, b in zip(report.boundaries, report.cross_route_boundaries)), default=0.0)

    def _evolution_check(self, config: EvolutionCheckConfig, run_dir: Path):
        space = AmbientSpace(kind=SpaceKind.COMPLEX_PROJECTIVE, n=config.n, c=config.c)
        report: EvolutionReport = self.flow.evolution_check(space, config.u, config.h_fd)
        files = [self.store.save_model(run_dir, "evolution_check", report)]
        data = {
            "orders": {entry.quantity: entry.order for entry in report.entries},
            "flagged": report.flagged,
            "shadows_hold": all(shadow.holds for shadow in report.shadows),
        }
        return (EXIT_PASS if report.passed else EXIT_VIOLATION), files, data, None

    def _minimal(self, config: MinimalConfig, run_dir: Path):
        report: MinimalSphereReport = self.flow.minimal_sphere_check(self._space(config))
        files = [self.store.save_model(run_dir, "minimal_sphere", report)]
        data = {"u_star": report.u_star, "A2": report.A2_at_u_star, "outside_pinch_range": report.outside_pinch_range}
        return (EXIT_PASS if report.passed else EXIT_VIOLATION), files, data, None

    def _report(self, config: ReportConfig) -> RunOutcome:
        """Reload a finished run through the readers and recompute its verdict."""
        run_dir = Path(config.run_dir)
        if not (run_dir / "manifest.json").is_file():
            raise ConfigError([f"run_dir: {run_dir} is not a run directory (no manifest.json)"])
        manifest = self.store.get_manifest(run_dir)
        command = manifest["command"]
        if command in ("verify", "scan"):
            reports = self.store.get_reports(run_dir)
            data = self.verifier.summary(reports)
            passed = all(report.passed for report in reports)
        elif command == "flow":
            trajectories = self.store.get_trajectories(run_dir)
            invariance = self.store.get_model(run_dir, "invariance", InvarianceReport)
            data = {"runs": len(trajectories), "extinct": sum(t.extinct for t in trajectories)}
            passed = not self._asserted_failures(FlowConfig(**manifest["config"]), invariance)
        elif command == "pinch-range":
            report = self.store.get_model(run_dir, "pinch_range", PinchRangeReport)
            gap = self._cross_route_gap(report)
            data = {"intervals": report.intervals, "cross_route_gap": gap}
            passed = gap is not None and gap <= CROSS_ROUTE_TOLERANCE
        elif command == "evolution-check":
            report = self.store.get_model(run_dir, "evolution_check", EvolutionReport)
            data = {"orders": {entry.quantity: entry.order for entry in report.entries}}
            passed = report.passed
        else:
            report = self.store.get_model(run_dir, "minimal_sphere", MinimalSphereReport)
            data = {"u_star": report.u_star, "A2": report.A2_at_u_star}
            passed = report.passed
        data["command"] = command
        exit_code = EXIT_PASS if passed else EXIT_VIOLATION
        return RunOutcome(
            command="report", exit_code=exit_code, run_dir=str(run_dir), data=data,
            message=f"{command} run {'passed' if passed else 'has violations'}",
        )
