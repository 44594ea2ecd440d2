"""
Core lab module: base classes shared by tools, agents and the application.

Tools wrap one functional area (ambient geometry, frames, curvature algebra,
equivariant flow, report storage) behind an ``execute(operation, **kwargs)``
dispatcher. Agents orchestrate tools into campaigns. ``LabApp`` keeps the
registries and the run sessions. The exception hierarchy below is what the
command line maps onto exit codes.
"""

import os
import re
import uuid
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml


class LabError(Exception):
    """Base class for every error raised by the lab."""


class ConfigError(LabError):
    """Invalid run configuration; carries every problem found, not just the first."""

    def __init__(self, errors: List[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors) if self.errors else "invalid configuration")


class UnsupportedOperationError(LabError, ValueError):
    """Operation not defined for the given input (HP^n curvature, k > m, ...)."""


class InadmissibleDimensionsError(LabError, ValueError):
    """Dimensions (m, k) outside the admissible set."""


class InfeasibleConstraintError(LabError, ValueError):
    """A generator cannot satisfy the requested constraint."""


class NumericalFailure(LabError):
    """Internal numerical failure."""


class FrameConstructionError(NumericalFailure):
    """Frame could not be orthonormalized."""

    def __init__(self, message: str, condition_number: float):
        self.condition_number = condition_number
        super().__init__(f"{message} (condition number {condition_number:.3e})")


class FlowIntegrationError(NumericalFailure):
    """ODE integration failed; keeps the last good state."""

    def __init__(self, message: str, last_t: float, last_u: float):
        self.last_t = last_t
        self.last_u = last_u
        super().__init__(f"{message} (last good state t={last_t!r}, u={last_u!r})")


class RunSession:
    """State of one command execution: its id and its output directory."""

    def __init__(self, session_id: Optional[str] = None, run_dir: Optional[Path] = None):
        self.id = session_id or str(uuid.uuid4())
        self.run_dir = run_dir
        self.data: Dict[str, Any] = {}

    def get(self, key: str, default: Any = None) -> Any:
        """Get session data."""
        return self.data.get(key, default)

    def set(self, key: str, value: Any) -> None:
        """Set session data."""
        self.data[key] = value


class Tool(ABC):
    """Base class of the lab tools."""

    def __init__(self, name: str, description: str = ""):
        self.name = name
        self.description = description

    @abstractmethod
    def execute(self, operation: str, **kwargs) -> Any:
        """Execute one named operation of the tool."""


class Agent(ABC):
    """Base class of the orchestration agents."""

    def __init__(self, name: str, description: str = ""):
        self.name = name
        self.description = description

    @abstractmethod
    async def process(self, input_data: Any, session: RunSession) -> Any:
        """Process input data within a run session."""


class LabApp:
    """Registry of tools, agents and sessions."""

    def __init__(self, name: str, description: str = ""):
        self.name = name
        self.description = description
        self.tools: Dict[str, Tool] = {}
        self.agents: Dict[str, Agent] = {}
        self.sessions: Dict[str, RunSession] = {}

    def add_tool(self, tool: Tool) -> None:
        """Add a tool to the application."""
        self.tools[tool.name] = tool

    def add_agent(self, agent: Agent) -> None:
        """Add an agent to the application."""
        self.agents[agent.name] = agent

    def get_tool(self, name: str) -> Optional[Tool]:
        """Get a tool by name."""
        return self.tools.get(name)

    def get_agent(self, name: str) -> Optional[Agent]:
        """Get an agent by name."""
        return self.agents.get(name)

    def create_session(self, session_id: Optional[str] = None, run_dir: Optional[Path] = None) -> RunSession:
        """Create and register a new run session."""
        session = RunSession(session_id=session_id, run_dir=run_dir)
        self.sessions[session.id] = session
        return session


_PLACEHOLDER = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)(?::([^}]*))?\}")


def _expand_placeholders(value: Any) -> Any:
    if isinstance(value, dict):
        return {key: _expand_placeholders(item) for key, item in value.items()}
    if isinstance(value, list):
        return [_expand_placeholders(item) for item in value]
    if isinstance(value, str):
        return _PLACEHOLDER.sub(lambda match: os.getenv(match.group(1), match.group(2) or ""), value)
    return value


class Config:
    """Lab defaults loaded from YAML, with ``${VAR:default}`` environment placeholders."""

    def __init__(self, config_dict: Optional[Dict[str, Any]] = None):
        self.data = config_dict or {}

    @classmethod
    def from_yaml(cls, path: Path) -> "Config":
        """Load a YAML file and expand its environment placeholders."""
        with open(path, "r", encoding="utf-8") as handle:
            raw = yaml.safe_load(handle) or {}
        return cls(_expand_placeholders(raw))

    def get(self, key: str, default: Any = None) -> Any:
        """Get a value by dotted key, e.g. ``tolerances.slack``."""
        node: Any = self.data
        for part in key.split("."):
            if not isinstance(node, dict) or part not in node:
                return default
            node = node[part]
        return node

    def set(self, key: str, value: Any) -> None:
        """Set a value by dotted key."""
        parts = key.split(".")
        node = self.data
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value


__all__ = [
    "LabError", "ConfigError", "UnsupportedOperationError", "InadmissibleDimensionsError",
    "InfeasibleConstraintError", "NumericalFailure", "FrameConstructionError",
    "FlowIntegrationError", "RunSession", "Tool", "Agent", "LabApp", "Config",
]
