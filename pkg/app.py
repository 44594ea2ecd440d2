"""
Main application for the pinched flow lab.

This file wires the tools and agents together, parses and validates run
configurations, executes commands and exposes the command-line front end.
"""

import asyncio
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Iterable, Optional

import click
import yaml
from dotenv import load_dotenv
from pydantic import TypeAdapter, ValidationError

# Load environment variables from .env file
load_dotenv()

from lab import Agent, Config, ConfigError, LabApp, Tool

# Import our agents
from agents.flow_campaign import FlowCampaignAgent
from agents.orchestrator import EXIT_USAGE, OrchestratorAgent
from agents.pinch_verifier import PinchVerifierAgent

# Import all our tools
from tools.ambient_geometry import AmbientGeometryTool
from tools.curvature_algebra import CurvatureAlgebraTool
from tools.equivariant_flow import EquivariantFlowTool
from tools.frames import FramesTool
from tools.report_store import ReportStoreTool

from schemas import Command, RunConfig, RunOutcome

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = Path(__file__).with_name("config.yaml")
RUN_CONFIG_ADAPTER = TypeAdapter(RunConfig)


class PinchLabApp(LabApp):
    """Main application of the pinched flow lab."""

    def __init__(self, config_path: Optional[Path] = None, output_root: Optional[str] = None):
        """
        Initialize the lab application.

        Args:
            config_path: Lab defaults file; config.yaml next to this file when None
            output_root: Overrides the configured output root
        """
        super().__init__(
            name="pinchlab",
            description="Numerical lab for mean curvature flow of pinched submanifolds"
        )

        # Configuration
        self.config = self._load_configuration(config_path)
        if output_root is not None:
            self.config.set("output.root", output_root)

        # Initialize and register tools, then the agents built on them
        for tool in self._initialize_tools().values():
            self.add_tool(tool)
        for agent in self._initialize_agents().values():
            self.add_agent(agent)

        logger.info("Pinched flow lab initialized")

    def _load_configuration(self, config_path: Optional[Path]) -> Config:
        """Load lab defaults; environment placeholders are already expanded."""
        path = Path(config_path) if config_path else DEFAULT_CONFIG_PATH
        if path.is_file():
            config = Config.from_yaml(path)
        else:
            logger.warning(f"Lab config {path} not found; using built-in defaults")
            config = Config()
        if not config.get("output.root"):
            config.set("output.root", "runs")
        logger.info(f"Loaded configuration from {path}")
        logger.info(f"  Output root: {config.get('output.root')}")
        return config

    def _initialize_tools(self) -> Dict[str, Tool]:
        """Initialize all tools for the application."""
        tolerance = float(self.config.get("frames.orthonormality_tolerance", 1e-9))
        geometry = AmbientGeometryTool(tolerance=tolerance)
        curvature = CurvatureAlgebraTool(geometry)
        tools: Dict[str, Tool] = {
            "geometry": geometry,
            "frames": FramesTool(
                geometry,
                tolerance=tolerance,
                degenerate_threshold=float(self.config.get("frames.degenerate_threshold", 1e-8)),
            ),
            "curvature": curvature,
            "flow": EquivariantFlowTool(curvature, root_grid=int(self.config.get("flow.root_grid", 4000))),
            "store": ReportStoreTool(str(self.config.get("output.root"))),
        }
        logger.info(f"Initialized {len(tools)} tools")
        return tools

    def _initialize_agents(self) -> Dict[str, Agent]:
        """Initialize all agents for the application."""
        verifier = PinchVerifierAgent(
            frames=self.get_tool("frames"),
            curvature=self.get_tool("curvature_algebra"),
            identity_trials=int(self.config.get("budgets.identity_trials", 100000)),
            constrained_trials=int(self.config.get("budgets.constrained_trials", 10000)),
        )
        campaign = FlowCampaignAgent(flow=self.get_tool("equivariant_flow"))
        agents: Dict[str, Agent] = {
            "verifier": verifier,
            "flow_campaign": campaign,
            "orchestrator": OrchestratorAgent(verifier, campaign, self.get_tool("report_store")),
        }
        logger.info(f"Initialized {len(agents)} agents")
        return agents

    # ------------------------------------------------------------------
    # Configuration
    # ------------------------------------------------------------------

    def defaults(self, command: Any) -> Dict[str, Any]:
        """Configured defaults for one command, shared keys first."""
        merged = dict(self.config.get("defaults.common", {}) or {})
        if isinstance(command, str):
            merged.update(self.config.get(f"defaults.{command}", {}) or {})
        return merged

    @staticmethod
    def load_config_text(text: str) -> Dict[str, Any]:
        """
        Parse YAML run-config text into a mapping.

        Raises:
            ConfigError: On a syntax error (with its line number) or a non-mapping document
        """
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            where = f"line {mark.line + 1}" if mark is not None else "config"
            problem = getattr(e, "problem", None) or str(e)
            raise ConfigError([f"{where}: {problem}"]) from e
        if data is None:
            return {}
        if not isinstance(data, dict):
            raise ConfigError([f"config: expected a mapping of keys to values, got {type(data).__name__}"])
        return data

    def validate_config(self, data: Dict[str, Any]) -> Any:
        """
        Validate a mapping into a RunConfig member.

        Raises:
            ConfigError: With every validation problem, each prefixed by its key
        """
        command = data.get("command")
        merged = {**self.defaults(command), **data}
        try:
            return RUN_CONFIG_ADAPTER.validate_python(merged)
        except ValidationError as e:
            raise ConfigError([self._format_error(error, command) for error in e.errors()]) from e

    @staticmethod
    def _format_error(error: Dict[str, Any], command: Any) -> str:
        loc = list(error.get("loc", ()))
        if loc and loc[0] == command:
            loc = loc[1:]
        if not loc:
            key = "command" if error.get("type", "").startswith("union_tag") else "config"
        else:
            key = ".".join(str(part) for part in loc)
        return f"{key}: {error['msg']}"

    def parse_config(self, text: str) -> Any:
        """Parse and validate run-config text."""
        return self.validate_config(self.load_config_text(text))

    # ------------------------------------------------------------------
    # Execution
    # ------------------------------------------------------------------

    def execute(self, config: Any) -> RunOutcome:
        """Run one validated command in a fresh session."""
        orchestrator = self.get_agent("orchestrator_agent")
        session = self.create_session()
        return asyncio.run(orchestrator.process(config, session))

    def run_text(self, text: str) -> RunOutcome:
        """Parse, validate and execute; configuration errors become exit code 2."""
        try:
            config = self.parse_config(text)
        except ConfigError as e:
            logger.error(f"Invalid configuration: {e}")
            return RunOutcome(command="unknown", exit_code=EXIT_USAGE, error=str(e), message="usage or configuration error")
        return self.execute(config)


# ----------------------------------------------------------------------
# Command line
# ----------------------------------------------------------------------

def _parse_overrides(overrides: Iterable[str]) -> Dict[str, Any]:
    """``key=value`` pairs; values are read as YAML scalars or lists."""
    parsed: Dict[str, Any] = {}
    errors = []
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            errors.append(f"--set {item!r}: expected key=value")
            continue
        try:
            parsed[key.strip()] = yaml.safe_load(value)
        except yaml.YAMLError as e:
            errors.append(f"{key.strip()}: cannot parse value {value!r} ({e})")
    if errors:
        raise ConfigError(errors)
    return parsed


def _echo_outcome(outcome: RunOutcome) -> None:
    status = "PASS" if outcome.success else f"FAIL (exit {outcome.exit_code})"
    click.echo(f"{outcome.command}: {status} - {outcome.message}")
    if outcome.run_dir:
        click.echo(f"run directory: {outcome.run_dir}")
    if outcome.data:
        click.echo(json.dumps(outcome.data, indent=2, default=str))
    if outcome.error:
        click.echo(f"error: {outcome.error}", err=True)


def _run(
    command: Optional[str],
    config_path: Optional[str],
    overrides: Iterable[str],
    workers: Optional[int],
    verbose: bool,
) -> None:
    if verbose:
        logging.getLogger().setLevel(logging.DEBUG)

    try:
        app = PinchLabApp()
        data: Dict[str, Any] = {}
        if config_path:
            data = app.load_config_text(Path(config_path).read_text(encoding="utf-8"))
        if command is not None:
            if data.get("command", command) != command:
                raise ConfigError([f"command: config file is for {data['command']!r}, not {command!r}"])
            data["command"] = command
        data.update(_parse_overrides(overrides))
        if workers is not None:
            data["workers"] = workers
        config = app.validate_config(data)
    except ConfigError as e:
        for error in e.errors:
            click.echo(f"error: {error}", err=True)
        sys.exit(EXIT_USAGE)

    outcome = app.execute(config)
    _echo_outcome(outcome)
    sys.exit(outcome.exit_code)


@click.group()
def cli() -> None:
    """Numerical lab for mean curvature flow of pinched submanifolds of CP^n and HP^n."""


def _shared_options(func):
    func = click.option("--verbose", is_flag=True, help="Log at DEBUG level.")(func)
    func = click.option("--workers", type=click.IntRange(min=1), default=None, help="Worker processes.")(func)
    func = click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE", help="Override one config key.")(func)
    return func


COMMAND_HELP = {
    Command.VERIFY: "Run the randomized inequality suites.",
    Command.SCAN: "Scan the closed-form constants over admissible dimensions.",
    Command.FLOW: "Integrate the flow of geodesic spheres over a radius grid.",
    Command.PINCH_RANGE: "Locate the pinched radii of geodesic spheres.",
    Command.EVOLUTION_CHECK: "Compare analytic and finite-difference time derivatives.",
    Command.MINIMAL: "Check the minimal geodesic sphere against the pinching bound.",
    Command.REPORT: "Re-read a run directory and recompute its verdict.",
}


def _make_command(command: Command) -> None:
    @cli.command(name=command.value, help=COMMAND_HELP[command])
    @click.option("-c", "--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
                  help="YAML run configuration.")
    @_shared_options
    def run_command(config_path, overrides, workers, verbose):
        _run(command.value, config_path, overrides, workers, verbose)


for _command in Command:
    _make_command(_command)


@cli.command(name="run")
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@_shared_options
def run_file(config_path, overrides, workers, verbose):
    """Run the command named inside CONFIG_PATH."""
    _run(None, config_path, overrides, workers, verbose)


if __name__ == "__main__":
    cli()
