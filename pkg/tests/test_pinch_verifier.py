"""
Tests for the Pinch Verifier Agent: dimensions, suites, mutants, shrinking and the constant scan.
"""

import numpy as np
import pytest

from agents.pinch_verifier import PinchVerifierAgent
from lab import RunSession
from schemas import (
    CounterexampleRecord,
    InequalityOutcome,
    Relation,
    SuiteId,
    SuiteSpec,
    VerifyConfig,
)

RANDOM_SUITES = [suite for suite in SuiteId if suite != SuiteId.CONSTANT_SCAN]


class TestDimensions:
    """Admissible dimension triples."""

    def test_admissible_dims_up_to_seven(self):
        assert PinchVerifierAgent.admissible_dims(7) == [
            (3, 5, 1), (4, 7, 1), (5, 9, 1), (6, 11, 1), (7, 13, 1), (7, 12, 2),
        ]

    def test_n_max_below_three(self):
        with pytest.raises(ValueError, match="at least 3"):
            PinchVerifierAgent.admissible_dims(2)

    def test_codimension_two_and_three_appear(self):
        triples = PinchVerifierAgent.admissible_dims(20)
        assert (9, 16, 2) in triples
        assert (15, 27, 3) in triples
        assert all(k == 1 or 4 * k < m - 3 for _, m, k in triples)


class TestConstantScan:
    """Closed-form constants over admissible dimensions."""

    @pytest.fixture
    def verifier(self):
        return PinchVerifierAgent()

    def test_small_scan_passes(self, verifier):
        report = verifier.constant_scan(7)
        assert report.passed
        fs_c1 = [value for value in report.constants if value.name == "fs_c1" and value.m == 12]
        assert len(fs_c1) == 1
        assert fs_c1[0].value == pytest.approx(0.039021, abs=1e-6)

    @pytest.mark.slow
    def test_scan_to_one_hundred_passes(self, verifier):
        report = verifier.constant_scan(100)
        assert report.passed
        assert all(value.positive for value in report.constants)
        assert report.trials_run == len(PinchVerifierAgent.admissible_dims(100))

    def test_mutant_fails_gradient_bracket(self, verifier):
        report = verifier.constant_scan(7, mutant=True)
        assert not report.passed
        failing = {(record.inequality_id, record.m, record.k) for record in report.violations}
        assert ("grad_bracket", 12, 2) in failing

    def test_scan_through_run_suite(self, verifier):
        report = verifier.run_suite(SuiteSpec(suite_id=SuiteId.CONSTANT_SCAN, n_max=10))
        assert report.passed
        assert report.wall_time is not None


class TestSuites:
    """Randomized suites on small budgets."""

    @pytest.fixture
    def verifier(self):
        return PinchVerifierAgent()

    @pytest.mark.parametrize("suite_id", RANDOM_SUITES)
    def test_suite_passes(self, verifier, suite_id):
        spec = SuiteSpec(suite_id=suite_id, dims=[(5, 1), (12, 2)], trials=10, seed=3)
        report = verifier.run_suite(spec)
        assert report.passed, report.violations[:1]
        assert report.trials_run == 20
        assert report.worst_slack is not None

    @pytest.mark.parametrize("suite_id", [SuiteId.AMBIENT_SYMMETRIES, SuiteId.PFT_CHAINS, SuiteId.R2_IDENTITY])
    def test_mutant_detected(self, verifier, suite_id):
        spec = SuiteSpec(suite_id=suite_id, dims=[(5, 1), (12, 2)], trials=6, mutant=True)
        report = verifier.run_suite(spec)
        assert not report.passed
        assert 0 < len(report.violations) <= spec.max_counterexamples
        assert all(record.mutant for record in report.violations)

    def test_ambient_suite_sweeps_cp2_to_cp10(self, verifier):
        spec = SuiteSpec(suite_id=SuiteId.AMBIENT_SYMMETRIES, dims=[(5, 1)], trials=9, seed=5)
        assert verifier.run_suite(spec).passed
        mutant = verifier.run_suite(spec.model_copy(update={"mutant": True}))
        assert mutant.violation_count == 9
        assert all(record.inequality_id == "einstein_constant" for record in mutant.violations)

    def test_amw_mutant_detected(self, verifier):
        spec = SuiteSpec(suite_id=SuiteId.AMW_BOUND, dims=[(5, 1)], trials=20, mutant=True)
        report = verifier.run_suite(spec)
        assert report.violation_count > 0
        assert report.violations[0].inequality_id == "amw"

    def test_inadmissible_dims_only_checked_for_rejection(self, verifier):
        spec = SuiteSpec(
            suite_id=SuiteId.R2_IDENTITY, dims=[(5, 1), (11, 3)], trials=3, allow_inadmissible=True,
        )
        report = verifier.run_suite(spec)
        assert report.rejected_dims == [(11, 3)]
        assert report.passed
        assert report.trials_run == 3

    def test_inadmissible_dims_refused_without_flag(self):
        with pytest.raises(ValueError, match=r"k < \(2n-3\)/5"):
            SuiteSpec(suite_id=SuiteId.R2_IDENTITY, dims=[(11, 3)])

    def test_worker_count_does_not_change_results(self, verifier):
        spec = SuiteSpec(suite_id=SuiteId.PFT_CHAINS, dims=[(5, 1), (12, 2)], trials=4, mutant=True, max_counterexamples=3)
        serial = verifier.run_suite(spec, workers=1)
        parallel = verifier.run_suite(spec, workers=2)
        assert serial.model_dump_json(exclude={"wall_time"}) == parallel.model_dump_json(exclude={"wall_time"})

    def test_same_seed_same_report(self, verifier):
        spec = SuiteSpec(suite_id=SuiteId.SIMONS_Z_BOUND, dims=[(5, 1)], trials=5, seed=11)
        first = verifier.run_suite(spec)
        second = verifier.run_suite(spec)
        assert first.worst_slack == second.worst_slack
        assert first.worst_inequality == second.worst_inequality


class TestShrinking:
    """Greedy simplification of counterexamples."""

    @pytest.fixture
    def verifier(self):
        return PinchVerifierAgent()

    @staticmethod
    def _false_bound(point):
        return InequalityOutcome(inequality_id="false_bound", lhs=1.0, rhs=0.01 * point.A2 + point.H2, relation=Relation.LE)

    @pytest.fixture
    def record(self, verifier):
        h = np.zeros((1, 5, 5))
        h[0] = np.diag([2.0, -1.0, -1.0, 0.0, 0.0])
        h[0, 0, 1] = h[0, 1, 0] = 0.5
        h[0, 2, 3] = h[0, 3, 2] = 0.5
        point = verifier.frames.random_point(5, 1, seed=2).with_h(h)
        outcome = self._false_bound(point)
        return CounterexampleRecord(
            suite_id=SuiteId.AMW_BOUND, inequality_id="false_bound", m=5, k=1, trial=0, seed=0,
            lhs=outcome.lhs, rhs=outcome.rhs, relation=outcome.relation, slack=outcome.slack, point=point,
        )

    def test_injected_violation_is_simplified(self, verifier, record):
        shrunk = verifier.shrink_counterexample(record, evaluate=self._false_bound)
        assert shrunk.shrink_steps == 3
        assert shrunk.slack >= record.slack
        assert np.array_equal(shrunk.point.frame, np.eye(6))
        assert np.count_nonzero(np.triu(shrunk.point.h[0])) <= 5
        assert self._false_bound(shrunk.point).violated()

    def test_shrinking_is_idempotent(self, verifier, record):
        shrunk = verifier.shrink_counterexample(record, evaluate=self._false_bound)
        assert verifier.shrink_counterexample(shrunk, evaluate=self._false_bound) is shrunk

    def test_record_without_point_is_returned(self, verifier, record):
        bare = record.model_copy(update={"point": None})
        assert verifier.shrink_counterexample(bare) is bare

    def test_suite_counterexample_keeps_its_violation(self, verifier):
        spec = SuiteSpec(suite_id=SuiteId.PFT_CHAINS, dims=[(5, 1)], trials=2, mutant=True)
        unshrunk = verifier.run_block(spec, 0, 0, 2).violations[0]
        shrunk = verifier.shrink_counterexample(unshrunk)
        assert shrunk.inequality_id == unshrunk.inequality_id
        assert shrunk.slack >= unshrunk.slack
        assert shrunk.slack > shrunk.tolerance


class TestPinchVerifierAgent:
    """Agent interface."""

    @pytest.fixture
    def verifier(self):
        return PinchVerifierAgent(identity_trials=7, constrained_trials=3)

    def test_default_budgets(self, verifier):
        assert verifier.default_trials(SuiteId.R2_IDENTITY) == 7
        assert verifier.default_trials(SuiteId.LEST_BOUNDS) == 3

    def test_specs_follow_config(self, verifier):
        config = VerifyConfig(suites=[SuiteId.R2_IDENTITY, SuiteId.Q_ZERO_NEGATIVITY], dims=[(5, 1)], seed=4)
        specs = verifier.specs(config)
        assert [spec.trials for spec in specs] == [7, 3]
        assert all(spec.seed == 4 for spec in specs)

    @pytest.mark.asyncio
    async def test_process_keeps_reports_on_session(self, verifier):
        session = RunSession()
        config = VerifyConfig(suites=[SuiteId.R2_IDENTITY], dims=[(5, 1)], trials=3)
        reports = await verifier.process(config, session)
        assert session.get("reports") == reports
        assert verifier.summary(reports) == {"suites": 1, "passed": 1, "violations": 0}
