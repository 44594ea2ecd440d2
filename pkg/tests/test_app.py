"""
Test suite for the pinched flow lab application.

This file contains unit tests of the configuration layer and integration
tests that run every command end to end into a temporary output root.
"""

import math
from pathlib import Path
from unittest.mock import patch

import pytest
from click.testing import CliRunner

from app import PinchLabApp, cli
from lab import Config, ConfigError, FlowIntegrationError, RunSession
from schemas import MinimalConfig, ScanConfig, SuiteId, VerifyConfig
from tools.report_store import ReportStoreTool

VERIFY_TEXT = """
command: verify
suite: r2_identity
dims: [[5, 1]]
trials: 20
"""


class TestPinchLabApp:
    """Application wiring and configuration parsing."""

    @pytest.fixture
    def app(self, tmp_path):
        """Create a test application writing into a temporary root."""
        with patch.dict('os.environ', {'PINCHLAB_OUTPUT_ROOT': str(tmp_path)}):
            return PinchLabApp()

    def test_app_initialization(self, app, tmp_path):
        assert app.name == "pinchlab"
        assert set(app.tools) == {"ambient_geometry", "frames", "curvature_algebra", "equivariant_flow", "report_store"}
        assert set(app.agents) == {"pinch_verifier_agent", "flow_campaign_agent", "orchestrator_agent"}
        assert app.get_tool("report_store").output_root == tmp_path

    def test_budgets_from_configuration(self, app):
        verifier = app.get_agent("pinch_verifier_agent")
        assert verifier.identity_trials == 100000
        assert verifier.constrained_trials == 10000

    def test_defaults_merge_common_keys(self, app):
        defaults = app.defaults("flow")
        assert defaults["seed"] == 0
        assert defaults["grid_points"] == 100
        assert "margin" not in defaults

    def test_parse_minimal_verify_config(self, app):
        config = app.parse_config(VERIFY_TEXT)
        assert isinstance(config, VerifyConfig)
        assert config.suites == [SuiteId.R2_IDENTITY]
        assert config.dims == [(5, 1)]
        assert config.margin == 0.1

    def test_inadmissible_dims_cite_the_bound(self, app):
        with pytest.raises(ConfigError) as excinfo:
            app.parse_config("command: verify\ndims: [[11, 3]]\n")
        assert any(error.startswith("dims:") and "k < (2n-3)/5" in error for error in excinfo.value.errors)

    def test_every_problem_is_reported(self, app):
        with pytest.raises(ConfigError) as excinfo:
            app.parse_config("command: verify\neps: 1.0\ntrials: 0\n")
        keys = sorted(error.split(":")[0] for error in excinfo.value.errors)
        assert keys == ["eps", "trials"]

    def test_yaml_error_names_the_line(self, app):
        with pytest.raises(ConfigError) as excinfo:
            app.parse_config("command: verify\ntrials: [1, 2\n")
        assert excinfo.value.errors[0].startswith("line ")

    def test_unknown_key_rejected(self, app):
        with pytest.raises(ConfigError, match="bogus"):
            app.parse_config("command: verify\nbogus: 1\n")

    def test_missing_command_rejected(self, app):
        with pytest.raises(ConfigError) as excinfo:
            app.parse_config("seed: 3\n")
        assert excinfo.value.errors[0].startswith("command:")

    def test_non_mapping_rejected(self, app):
        with pytest.raises(ConfigError, match="mapping"):
            app.parse_config("- verify\n")

    def test_suite_and_suites_are_exclusive(self, app):
        with pytest.raises(ConfigError, match="either suite or suites"):
            app.parse_config("command: verify\nsuite: r2_identity\nsuites: [amw_bound]\n")

    def test_radius_outside_range_rejected(self, app):
        with pytest.raises(ConfigError, match="u0"):
            app.parse_config("command: flow\nu0: [2.0]\n")


class TestCommands:
    """Every command end to end."""

    @pytest.fixture
    def app(self, tmp_path):
        with patch.dict('os.environ', {'PINCHLAB_OUTPUT_ROOT': str(tmp_path)}):
            return PinchLabApp()

    def test_verify_writes_reports(self, app):
        outcome = app.run_text(VERIFY_TEXT)
        assert outcome.exit_code == 0
        run_dir = Path(outcome.run_dir)
        names = {path.name for path in run_dir.iterdir()}
        assert names == {"reports.json", "counterexamples.json", "summary.csv", "manifest.json", "timing.json"}

        store = app.get_tool("report_store")
        reports = store.get_reports(run_dir)
        assert reports[0].suite_id == SuiteId.R2_IDENTITY
        assert reports[0].trials_run == 20
        summary = store.get_summary(run_dir)
        assert bool(summary.loc[0, "pass"])
        assert summary.loc[0, "worst_slack"] == reports[0].worst_slack
        assert store.get_manifest(run_dir)["command"] == "verify"

    def test_outputs_are_reproducible(self, tmp_path):
        first = PinchLabApp(output_root=str(tmp_path / "first")).run_text(VERIFY_TEXT)
        second = PinchLabApp(output_root=str(tmp_path / "second")).run_text(VERIFY_TEXT)
        assert Path(first.run_dir).name == Path(second.run_dir).name
        for name in ["reports.json", "counterexamples.json", "summary.csv", "manifest.json"]:
            assert (Path(first.run_dir) / name).read_bytes() == (Path(second.run_dir) / name).read_bytes()

    def test_mutant_violation_exits_one(self, app):
        outcome = app.run_text("command: verify\nsuite: pft_chains\ndims: [[5, 1]]\ntrials: 4\nmutant: true\n")
        assert outcome.exit_code == 1
        records = app.get_tool("report_store").get_counterexamples(outcome.run_dir)
        assert records
        assert {record.inequality_id for record in records} == {"p_t_sum"}
        assert all(record.point is not None for record in records)

    def test_malformed_config_exits_two_without_outputs(self, app, tmp_path):
        outcome = app.run_text("command: verify\neps: 1.5\n")
        assert outcome.exit_code == 2
        assert outcome.run_dir is None
        assert list(tmp_path.iterdir()) == []

    def test_scan(self, app):
        outcome = app.execute(ScanConfig(n_max=20))
        assert outcome.exit_code == 0
        assert outcome.data["passed"] == 1

    def test_report_recomputes_verdict(self, app):
        outcome = app.run_text(VERIFY_TEXT)
        report = app.execute(app.validate_config({"command": "report", "run_dir": outcome.run_dir}))
        assert report.exit_code == 0
        assert report.data["command"] == "verify"

    def test_report_needs_a_run_directory(self, app, tmp_path):
        outcome = app.execute(app.validate_config({"command": "report", "run_dir": str(tmp_path / "missing")}))
        assert outcome.exit_code == 2
        assert "manifest.json" in outcome.error

    def test_flow_round_trips_trajectories(self, app):
        outcome = app.execute(app.validate_config({"command": "flow", "u0": [0.5]}))
        assert outcome.exit_code == 0
        assert outcome.data == {"runs": 1, "extinct": 1, "failed": []}

        store = app.get_tool("report_store")
        trajectories = store.get_trajectories(outcome.run_dir)
        assert len(trajectories) == 1
        assert trajectories[0].extinct
        assert trajectories[0].samples[0].u == 0.5
        assert app.execute(app.validate_config({"command": "report", "run_dir": outcome.run_dir})).exit_code == 0

    def test_flow_outside_pinched_range_is_not_asserted(self, app):
        outcome = app.execute(app.validate_config({"command": "flow", "u0": [1.3]}))
        assert outcome.exit_code == 0
        assert outcome.data["extinct"] == 0

    def test_pinch_range(self, app):
        outcome = app.execute(app.validate_config({"command": "pinch-range", "n": 3}))
        assert outcome.exit_code == 0
        assert len(outcome.data["intervals"]) == 1
        assert outcome.data["cross_route_gap"] < 1e-8

    def test_minimal_sphere_in_quaternionic_space(self, app):
        outcome = app.execute(app.validate_config({"command": "minimal", "space": "HP", "n": 3}))
        assert outcome.exit_code == 0
        assert outcome.data["A2"] == pytest.approx(8.0, rel=1e-9)

    def test_evolution_check(self, app):
        outcome = app.execute(app.validate_config({"command": "evolution-check"}))
        assert outcome.exit_code == 0
        assert set(outcome.data["orders"]) == {"H2", "A2", "Ao2", "H4"}

    @pytest.mark.asyncio
    async def test_orchestrator_sets_session_run_dir(self, app):
        session = app.create_session()
        outcome = await app.get_agent("orchestrator_agent").process(MinimalConfig(n=3), session)
        assert outcome.exit_code == 0
        assert str(session.run_dir) == outcome.run_dir
        assert outcome.data["u_star"] == pytest.approx(math.atan(math.sqrt(5.0)), abs=1e-10)

    def test_integration_failure_exits_three(self, app):
        flow = app.get_tool("equivariant_flow")
        with patch.object(flow, "minimal_sphere_check", side_effect=FlowIntegrationError("step size too small", 0.1, 0.5)):
            outcome = app.execute(MinimalConfig(n=3))
        assert outcome.exit_code == 3
        assert "last good state" in outcome.error

    def test_unexpected_error_exits_three(self, app, mocker):
        flow = app.get_tool("equivariant_flow")
        mocker.patch.object(flow, "pinch_range", side_effect=RuntimeError("boom"))
        outcome = app.execute(app.validate_config({"command": "pinch-range"}))
        assert outcome.exit_code == 3
        assert outcome.error == "RuntimeError: boom"


class TestCommandLine:
    """Click front end."""

    @pytest.fixture
    def runner(self):
        return CliRunner()

    def test_verify_with_overrides(self, runner, tmp_path):
        with patch.dict('os.environ', {'PINCHLAB_OUTPUT_ROOT': str(tmp_path)}):
            result = runner.invoke(cli, ["verify", "--set", "suite=r2_identity", "--set", "dims=[[5, 1]]", "--set", "trials=5"])
        assert result.exit_code == 0, result.output
        assert "verify: PASS" in result.output

    def test_bad_dims_exit_two(self, runner, tmp_path):
        with patch.dict('os.environ', {'PINCHLAB_OUTPUT_ROOT': str(tmp_path)}):
            result = runner.invoke(cli, ["verify", "--set", "dims=[[11, 3]]"])
        assert result.exit_code == 2
        assert "k < (2n-3)/5" in result.output

    def test_malformed_override_exits_two(self, runner, tmp_path):
        with patch.dict('os.environ', {'PINCHLAB_OUTPUT_ROOT': str(tmp_path)}):
            result = runner.invoke(cli, ["scan", "--set", "n_max"])
        assert result.exit_code == 2
        assert "expected key=value" in result.output

    def test_run_takes_command_from_file(self, runner, tmp_path):
        path = tmp_path / "minimal.yaml"
        path.write_text("command: minimal\nn: 3\n", encoding="utf-8")
        with patch.dict('os.environ', {'PINCHLAB_OUTPUT_ROOT': str(tmp_path / "runs")}):
            result = runner.invoke(cli, ["run", str(path)])
        assert result.exit_code == 0, result.output
        assert "minimal: PASS" in result.output

    def test_config_file_for_another_command(self, runner, tmp_path):
        path = tmp_path / "minimal.yaml"
        path.write_text("command: minimal\n", encoding="utf-8")
        with patch.dict('os.environ', {'PINCHLAB_OUTPUT_ROOT': str(tmp_path / "runs")}):
            result = runner.invoke(cli, ["scan", "-c", str(path)])
        assert result.exit_code == 2


class TestLabCore:
    """Config layer, sessions and the run-directory digest."""

    def test_placeholders_expand_from_environment(self, tmp_path):
        path = tmp_path / "lab.yaml"
        path.write_text("output:\n  root: \"${PINCHLAB_TEST_ROOT:fallback}\"\n", encoding="utf-8")
        with patch.dict('os.environ', {'PINCHLAB_TEST_ROOT': '/data/runs'}):
            assert Config.from_yaml(path).get("output.root") == "/data/runs"
        with patch.dict('os.environ', {}, clear=True):
            assert Config.from_yaml(path).get("output.root") == "fallback"

    def test_dotted_get_and_set(self):
        config = Config()
        config.set("flow.root_grid", 100)
        assert config.get("flow.root_grid") == 100
        assert config.get("flow.missing", "default") == "default"

    def test_session_data(self):
        session = RunSession()
        session.set("reports", [])
        assert session.get("reports") == []
        assert session.get("missing") is None
        assert session.id

    def test_digest_ignores_workers(self):
        digest = ReportStoreTool.config_digest
        assert digest(VerifyConfig(workers=1)) == digest(VerifyConfig(workers=4))
        assert digest(VerifyConfig(seed=1)) != digest(VerifyConfig(seed=2))
        assert len(digest(ScanConfig())) == 12
