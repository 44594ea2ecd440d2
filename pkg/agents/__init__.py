"""
Agents package initialization.

This module exports the agents that orchestrate the lab's tools.
"""

from .suites import InequalitySuites, SuiteContext
from .pinch_verifier import PinchVerifierAgent
from .flow_campaign import FlowCampaignAgent
from .orchestrator import OrchestratorAgent

__all__ = [
    "InequalitySuites",
    "SuiteContext",
    "PinchVerifierAgent",
    "FlowCampaignAgent",
    "OrchestratorAgent"
]
