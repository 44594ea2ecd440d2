"""
Schema definitions for the pinched flow lab.

This module exports all data models used by the tools, agents and the command line.
"""

# Base enums and models
from .base_models import (
    FloatArray,
    SpaceKind,
    SuiteId,
    Command,
    AmbientSpace,
    admissibility_issue
)

from .point_models import (
    FRAME_TOLERANCE,
    PointData,
    KahlerAngles
)

from .curvature_models import (
    PinchParams,
    CurvatureScalars,
    ReactionTerms,
    OmegaNorms,
    PFTNorms
)

from .suite_models import (
    CONSTRAINED_SUITES,
    DEFAULT_SLACK,
    Relation,
    InequalityOutcome,
    CounterexampleRecord,
    ConstantValue,
    SuiteSpec,
    SuiteReport
)

from .flow_models import (
    SphereModel,
    StepPolicy,
    FlowSample,
    Trajectory,
    EvolutionEntry,
    InequalityShadow,
    EvolutionReport,
    PinchRangeReport,
    InvarianceRecord,
    InvarianceReport,
    MinimalSphereReport
)

from .config_models import (
    DEFAULT_DIMS,
    CommandConfig,
    VerifyConfig,
    ScanConfig,
    FlowConfig,
    PinchRangeConfig,
    EvolutionCheckConfig,
    MinimalConfig,
    ReportConfig,
    RunConfig,
    RunOutcome
)

__all__ = [
    # Base enums and models
    "FloatArray",
    "SpaceKind",
    "SuiteId",
    "Command",
    "AmbientSpace",
    "admissibility_issue",

    # Point models
    "FRAME_TOLERANCE",
    "PointData",
    "KahlerAngles",

    # Curvature models
    "PinchParams",
    "CurvatureScalars",
    "ReactionTerms",
    "OmegaNorms",
    "PFTNorms",

    # Suite models
    "CONSTRAINED_SUITES",
    "DEFAULT_SLACK",
    "Relation",
    "InequalityOutcome",
    "CounterexampleRecord",
    "ConstantValue",
    "SuiteSpec",
    "SuiteReport",

    # Flow models
    "SphereModel",
    "StepPolicy",
    "FlowSample",
    "Trajectory",
    "EvolutionEntry",
    "InequalityShadow",
    "EvolutionReport",
    "PinchRangeReport",
    "InvarianceRecord",
    "InvarianceReport",
    "MinimalSphereReport",

    # Config models
    "DEFAULT_DIMS",
    "CommandConfig",
    "VerifyConfig",
    "ScanConfig",
    "FlowConfig",
    "PinchRangeConfig",
    "EvolutionCheckConfig",
    "MinimalConfig",
    "ReportConfig",
    "RunConfig",
    "RunOutcome"
]
