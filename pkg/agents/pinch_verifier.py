"""
Pinch Verifier Agent for the pinched flow lab.

This agent runs the randomized inequality suites over admissible
dimensions, fans trials out over worker processes, merges the partial
reports in a fixed order, shrinks counterexamples and scans the
closed-form constants of the preservation argument.
"""

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from lab import Agent, InadmissibleDimensionsError, LabError, RunSession
from schemas import (
    CONSTRAINED_SUITES,
    ConstantValue,
    CounterexampleRecord,
    InequalityOutcome,
    PointData,
    Relation,
    ScanConfig,
    SuiteId,
    SuiteReport,
    SuiteSpec,
    VerifyConfig,
    admissibility_issue,
)
from tools.ambient_geometry import AmbientGeometryTool
from tools.curvature_algebra import CurvatureAlgebraTool
from tools.frames import FramesTool

from .suites import InequalitySuites, SuiteContext

logger = logging.getLogger(__name__)

PointCheck = Callable[[PointData], Optional[InequalityOutcome]]
ProjectedCheck = Callable[[PointData], Optional[Tuple[InequalityOutcome, PointData]]]

# Upper bound on full passes over the entries of h while shrinking
MAX_SHRINK_PASSES = 20


def _run_chunk(spec: SuiteSpec, dims_index: int, start: int, stop: int) -> SuiteReport:
    """Worker entry point: one contiguous block of trials of one (m, k)."""
    return PinchVerifierAgent().run_block(spec, dims_index, start, stop)


def _is_worse(slack: float, current: Optional[float]) -> bool:
    if current is None:
        return True
    if math.isnan(current):
        return False
    return math.isnan(slack) or slack > current


class PinchVerifierAgent(Agent):
    """Agent for the inequality campaigns and the constant scan."""

    def __init__(
        self,
        frames: Optional[FramesTool] = None,
        curvature: Optional[CurvatureAlgebraTool] = None,
        workers: int = 1,
        identity_trials: int = 100000,
        constrained_trials: int = 10000,
    ):
        """Initialize the Pinch Verifier Agent."""
        super().__init__(
            name="pinch_verifier_agent",
            description="Runs inequality suites, shrinks counterexamples and scans constants"
        )
        geometry = frames.geometry if frames else AmbientGeometryTool()
        self.frames = frames or FramesTool(geometry)
        self.curvature = curvature or CurvatureAlgebraTool(geometry)
        self.suites = InequalitySuites(self.frames, self.curvature)
        self.workers = workers
        self.identity_trials = identity_trials
        self.constrained_trials = constrained_trials
        logger.info(f"Pinch Verifier Agent initialized with {workers} worker(s)")

    # ------------------------------------------------------------------
    # Dimensions
    # ------------------------------------------------------------------

    @staticmethod
    def admissible_dims(n_max: int) -> List[Tuple[int, int, int]]:
        """
        All admissible (n, m, k) with 3 <= n <= n_max and m = 2n - k.

        Admissible means k = 1, or n >= 7 and 2 <= k < (2n-3)/5. The
        equivalent form k < (m-3)/4 is checked for every triple.

        Raises:
            ValueError: If n_max < 3
        """
        if n_max < 3:
            raise ValueError(f"n_max must be at least 3, got {n_max}")
        triples = []
        for n in range(3, n_max + 1):
            for k in range(1, n):
                m = 2 * n - k
                if admissibility_issue(m, k) is not None:
                    continue
                if k >= 2 and not 4 * k < m - 3:
                    raise LabError(f"(n, m, k) = ({n}, {m}, {k}) violates k < (m-3)/4")
                triples.append((n, m, k))
        return triples

    # ------------------------------------------------------------------
    # Suites
    # ------------------------------------------------------------------

    def default_trials(self, suite_id: SuiteId) -> int:
        return self.constrained_trials if suite_id in CONSTRAINED_SUITES else self.identity_trials

    def context(self, spec: SuiteSpec, m: int, k: int) -> SuiteContext:
        params = self.curvature.pinch_params(m, k, eps=spec.eps)
        return SuiteContext(
            suite_id=spec.suite_id, m=m, k=k, params=params,
            margin=spec.margin, mutant=spec.mutant, tolerance=spec.tolerance,
        )

    def run_block(self, spec: SuiteSpec, dims_index: int, start: int, stop: int) -> SuiteReport:
        """
        Evaluate trials [start, stop) of one (m, k); violations are kept unshrunk, capped.

        Raises:
            InfeasibleConstraintError: If a generator cannot meet its constraint
        """
        m, k = spec.dims[dims_index]
        ctx = self.context(spec, m, k)
        worst: Optional[float] = None
        worst_name: Optional[str] = None
        count = 0
        records: List[CounterexampleRecord] = []
        for trial in range(start, stop):
            for case in self.suites.run_trial(ctx, spec.seed, dims_index, trial):
                for outcome in case.outcomes:
                    slack = outcome.slack
                    if _is_worse(slack, worst):
                        worst, worst_name = slack, outcome.inequality_id
                    if not outcome.violated(spec.tolerance):
                        continue
                    count += 1
                    if len(records) < spec.max_counterexamples:
                        records.append(CounterexampleRecord(
                            suite_id=spec.suite_id, inequality_id=outcome.inequality_id,
                            m=m, k=k, dims_index=dims_index, trial=trial, seed=spec.seed,
                            tolerance=spec.tolerance, lhs=outcome.lhs, rhs=outcome.rhs,
                            relation=outcome.relation, slack=slack, mutant=spec.mutant,
                            branch=case.branch, point=case.point, params=case.params,
                        ))
        return SuiteReport(
            suite_id=spec.suite_id, dims=spec.dims, trials_run=stop - start,
            violation_count=count, violations=records, worst_slack=worst,
            worst_inequality=worst_name, mutant=spec.mutant,
        )

    def _rejection_report(self, spec: SuiteSpec) -> SuiteReport:
        """Negative test: every inadmissible (m, k) must be refused by the generator."""
        rejected: List[Tuple[int, int]] = []
        accepted: List[CounterexampleRecord] = []
        for index, (m, k) in enumerate(spec.dims):
            if admissibility_issue(m, k) is None:
                continue
            try:
                self.frames.random_point(m, k, np.random.SeedSequence(spec.seed, spawn_key=(index,)), margin=spec.margin)
            except InadmissibleDimensionsError as e:
                logger.debug(f"Generator rejected ({m}, {k}): {e}")
                rejected.append((m, k))
                continue
            accepted.append(CounterexampleRecord(
                suite_id=spec.suite_id, inequality_id="generator_rejection", m=m, k=k,
                dims_index=index, trial=0, seed=spec.seed, tolerance=spec.tolerance,
                lhs=1.0, rhs=0.0, relation=Relation.EQ, slack=1.0, mutant=spec.mutant,
            ))
        return SuiteReport(
            suite_id=spec.suite_id, dims=spec.dims, violation_count=len(accepted),
            violations=accepted, rejected_dims=rejected, mutant=spec.mutant,
        )

    def run_suite(self, spec: SuiteSpec, workers: Optional[int] = None) -> SuiteReport:
        """
        Run one suite campaign.

        Trials of each admissible (m, k) are split into contiguous blocks, one
        per worker. Every trial draws from its own seed sub-stream, so the
        merged report does not depend on the number of workers.

        Args:
            spec: Suite campaign
            workers: Worker processes, defaults to the agent's setting

        Returns:
            SuiteReport with the first max_counterexamples violations shrunk
        """
        started = time.perf_counter()
        if spec.suite_id == SuiteId.CONSTANT_SCAN:
            report = self.constant_scan(spec.n_max, spec.mutant)
            return report.model_copy(update={"wall_time": time.perf_counter() - started})

        workers = workers or self.workers
        report = SuiteReport(suite_id=spec.suite_id, dims=spec.dims, mutant=spec.mutant)
        if spec.allow_inadmissible:
            report = report.absorb(self._rejection_report(spec))

        jobs = []
        block = max(1, math.ceil(spec.trials / workers))
        for index, (m, k) in enumerate(spec.dims):
            if admissibility_issue(m, k) is not None:
                continue
            jobs.extend((index, start, min(start + block, spec.trials)) for start in range(0, spec.trials, block))

        logger.info(f"Running {spec.suite_id.value}: {len(jobs)} block(s), {spec.trials} trial(s) per (m, k), {workers} worker(s)")
        if workers == 1 or len(jobs) == 1:
            partials = [self.run_block(spec, index, start, stop) for index, start, stop in jobs]
        else:
            with ProcessPoolExecutor(max_workers=workers) as executor:
                futures = [executor.submit(_run_chunk, spec, index, start, stop) for index, start, stop in jobs]
                partials = [future.result() for future in futures]

        for partial in partials:
            report = report.absorb(partial)

        kept = report.violations[:spec.max_counterexamples]
        shrunk = [self.shrink_counterexample(record) if record.point is not None else record for record in kept]
        elapsed = time.perf_counter() - started
        if report.violation_count:
            logger.warning(f"{spec.suite_id.value}: {report.violation_count} violation(s), worst slack {report.worst_slack!r}")
        else:
            logger.info(f"{spec.suite_id.value}: passed, worst slack {report.worst_slack!r} ({report.worst_inequality})")
        return report.model_copy(update={"violations": shrunk, "wall_time": elapsed})

    # ------------------------------------------------------------------
    # Shrinking
    # ------------------------------------------------------------------

    def _suite_check(self, record: CounterexampleRecord) -> ProjectedCheck:
        spec = SuiteSpec(
            suite_id=record.suite_id, dims=[(record.m, record.k)], seed=record.seed,
            eps=record.params.eps if record.params else 0.0, mutant=record.mutant,
            allow_inadmissible=True, tolerance=record.tolerance,
        )
        ctx = self.context(spec, record.m, record.k)

        def check(point: PointData) -> Optional[Tuple[InequalityOutcome, PointData]]:
            projected = self.suites.reproject(ctx, record.branch, point)
            if projected is None:
                return None
            for outcome in self.suites.evaluate(ctx, record.branch, projected):
                if outcome.inequality_id == record.inequality_id:
                    return outcome, projected
            return None

        return check

    def shrink_counterexample(
        self,
        record: CounterexampleRecord,
        evaluate: Optional[PointCheck] = None,
    ) -> CounterexampleRecord:
        """
        Greedily simplify a violating input while the violation persists.

        Moves, in order: replace the frames by the coordinate frame, then zero
        single entries h^a_ij (with their symmetric partner). A move is kept
        only if the inequality is still violated with a slack at least as large
        as before, so the output slack is never smaller than the input slack.

        Args:
            record: Violating record with its point
            evaluate: Check of a single inequality on a point; the record's
                suite inequality (with re-projection onto its input family)
                when None

        Returns:
            The simplified record, or the input itself when no move applies
        """
        if record.point is None:
            return record
        if evaluate is None:
            suite_check = self._suite_check(record)
        else:
            def suite_check(point: PointData) -> Optional[Tuple[InequalityOutcome, PointData]]:
                outcome = evaluate(point)
                return None if outcome is None else (outcome, point)

        point = record.point
        slack = record.slack
        best: Optional[InequalityOutcome] = None
        steps = 0

        def attempt(candidate: PointData) -> bool:
            nonlocal point, slack, best, steps
            try:
                result = suite_check(candidate)
            except (LabError, ValueError) as e:
                logger.debug(f"Shrinking move rejected: {e}")
                return False
            if result is None:
                return False
            outcome, projected = result
            if not outcome.violated(record.tolerance) or not outcome.slack >= slack:
                return False
            point, slack, best = projected, outcome.slack, outcome
            steps += 1
            return True

        identity = np.eye(point.space.realdim)
        if not np.array_equal(point.frame, identity):
            attempt(PointData(
                space=point.space, m=point.m, k=point.k,
                tangent=identity[:point.m], normal=identity[point.m:], h=point.h,
            ))

        for _ in range(MAX_SHRINK_PASSES):
            changed = False
            for a, i, j in zip(*np.nonzero(np.triu(point.h))):
                h = np.array(point.h)
                if h[a, i, j] == 0.0:
                    continue
                h[a, i, j] = 0.0
                h[a, j, i] = 0.0
                changed |= attempt(point.with_h(h))
            if not changed:
                break

        if steps == 0:
            return record
        logger.info(f"Shrunk {record.inequality_id} counterexample in {steps} move(s), slack {record.slack!r} -> {slack!r}")
        return record.model_copy(update={
            "point": point, "lhs": best.lhs, "rhs": best.rhs, "slack": slack,
            "shrink_steps": record.shrink_steps + steps,
        })

    # ------------------------------------------------------------------
    # Constant scan
    # ------------------------------------------------------------------

    def _constants(self, m: int, k: int, mutant: bool) -> List[Tuple[str, float, bool]]:
        """(name, value, strict) of every closed-form constant at eps = 0 and c = 1."""
        params = self.curvature.pinch_params(m, k)
        if k == 1:
            return [
                ("hypersurface_c1", 3.0 / (m + 2) - 1.0 / m - params.alpha, True),
                ("chain_upper", 2.0 / params.a - (2.0 * m - 2.0), False),
                ("chain_lower", (2.0 * m - 2.0) - (m + 3.0), False),
            ]
        gap = m - 3.0 - 4.0 * k
        bracket = 2.0 / 9.0 * (m + 1) - (48.0 if mutant else 24.0) / (m + 2)
        return [
            ("grad_bracket", bracket, True),
            ("fs_c1", 16.0 / (9.0 * (m + 2)) - (4.0 * m - 10.0) / (3.0 * m * m), True),
            ("codimension_gap", gap, True),
            ("beta_margin", gap / 4.0 - params.beta, False),
            ("alpha", params.alpha, True),
        ]

    def constant_scan(self, n_max: int, mutant: bool = False, tolerance: float = 1e-9) -> SuiteReport:
        """
        Evaluate every closed-form constant over all admissible dimensions up to n_max.

        Strict constants must be positive; the others (equalities at eps = 0,
        e.g. 2/a = 2m-2 = m+3 at m = 5) are compared with slack.
        """
        triples = self.admissible_dims(n_max)
        values: List[ConstantValue] = []
        records: List[CounterexampleRecord] = []
        worst: Optional[float] = None
        worst_name: Optional[str] = None
        for index, (n, m, k) in enumerate(triples):
            for name, value, strict in self._constants(m, k, mutant):
                outcome = InequalityOutcome(inequality_id=name, lhs=value, rhs=0.0, relation=Relation.GE)
                positive = value > 0.0 if strict else not outcome.violated(tolerance)
                values.append(ConstantValue(name=name, n=n, m=m, k=k, value=value, positive=positive))
                if _is_worse(outcome.slack, worst):
                    worst, worst_name = outcome.slack, name
                if not positive:
                    records.append(CounterexampleRecord(
                        suite_id=SuiteId.CONSTANT_SCAN, inequality_id=name, m=m, k=k,
                        dims_index=index, trial=0, seed=0, tolerance=tolerance, lhs=value, rhs=0.0,
                        relation=Relation.GE, slack=outcome.slack, mutant=mutant, branch="constant",
                    ))
        logger.info(f"Constant scan up to n = {n_max}: {len(triples)} triple(s), {len(records)} failing constant(s)")
        return SuiteReport(
            suite_id=SuiteId.CONSTANT_SCAN, dims=[(m, k) for _, m, k in triples],
            trials_run=len(triples), violation_count=len(records), violations=records,
            worst_slack=worst, worst_inequality=worst_name, constants=values, mutant=mutant,
        )

    # ------------------------------------------------------------------
    # Agent interface
    # ------------------------------------------------------------------

    def specs(self, config: VerifyConfig) -> List[SuiteSpec]:
        """One SuiteSpec per requested suite."""
        return [
            SuiteSpec(
                suite_id=suite_id, dims=config.dims,
                trials=config.trials or self.default_trials(suite_id),
                seed=config.seed, margin=config.margin, eps=config.eps, mutant=config.mutant,
                allow_inadmissible=config.allow_inadmissible, n_max=config.n_max,
                max_counterexamples=config.max_counterexamples, tolerance=config.tolerance,
            )
            for suite_id in config.suites
        ]

    async def process(self, input_data: Union[VerifyConfig, ScanConfig], session: RunSession) -> List[SuiteReport]:
        """Run a verify or scan campaign and keep the reports on the session."""
        if isinstance(input_data, ScanConfig):
            logger.info(f"Step 1: Scanning constants up to n = {input_data.n_max}")
            started = time.perf_counter()
            report = self.constant_scan(input_data.n_max, input_data.mutant, input_data.tolerance)
            reports = [report.model_copy(update={"wall_time": time.perf_counter() - started})]
        else:
            specs = self.specs(input_data)
            reports = []
            for number, spec in enumerate(specs, start=1):
                logger.info(f"Step {number}: Running suite {spec.suite_id.value} on {len(spec.dims)} dimension pair(s)")
                reports.append(self.run_suite(spec, workers=input_data.workers))
        session.set("reports", reports)
        return reports

    @staticmethod
    def summary(reports: List[SuiteReport]) -> Dict[str, int]:
        return {
            "suites": len(reports),
            "passed": sum(report.passed for report in reports),
            "violations": sum(report.violation_count for report in reports),
        }
