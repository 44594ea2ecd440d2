"""
Tools package initialization.

This module exports all tools used in the pinched flow lab.
"""

from .ambient_geometry import AmbientGeometryTool
from .frames import FramesTool
from .curvature_algebra import CurvatureAlgebraTool
from .equivariant_flow import EquivariantFlowTool
from .report_store import ReportStoreTool

__all__ = [
    "AmbientGeometryTool",
    "FramesTool",
    "CurvatureAlgebraTool",
    "EquivariantFlowTool",
    "ReportStoreTool"
]
