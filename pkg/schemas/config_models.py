"""
Run configuration models, one per command, and the run outcome.
"""

import math
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationInfo, field_validator, model_validator
from typing_extensions import Annotated

from .base_models import SpaceKind, SuiteId, admissibility_issue

DEFAULT_DIMS: List[Tuple[int, int]] = [(5, 1), (13, 1), (12, 2), (16, 2), (27, 3)]


class CommandConfig(BaseModel):
    """Keys shared by every command."""
    model_config = ConfigDict(extra="forbid")

    seed: int = Field(0, ge=0, lt=2 ** 64, description="Root seed")
    workers: int = Field(1, ge=1, description="Worker processes; does not affect outputs")
    tolerance: float = Field(1e-9, gt=0.0, description="Relative inequality slack")


def _check_radii(values: List[float], c: float) -> None:
    limit = math.pi / (2.0 * math.sqrt(c))
    bad = [u for u in values if not 0.0 < u < limit]
    if bad:
        raise ValueError(f"u0 values {bad} outside (0, pi/(2 sqrt c)) = (0, {limit})")


class VerifyConfig(CommandConfig):
    command: Literal["verify"] = "verify"
    suites: List[SuiteId] = Field(default_factory=lambda: [s for s in SuiteId if s != SuiteId.CONSTANT_SCAN])
    allow_inadmissible: bool = Field(False, description="Negative test: inadmissible dims are only checked for rejection")
    dims: List[Tuple[int, int]] = Field(default_factory=lambda: list(DEFAULT_DIMS))
    trials: Optional[int] = Field(None, ge=1, description="Per (m, k); suite default budget when None")
    margin: float = Field(0.1, gt=0.0, le=1.0, description="Relative pinching margin of generated points")
    eps: float = Field(0.0, ge=0.0, lt=1.0, description="Strictness parameter in [0, 1)")
    mutant: bool = False
    n_max: int = Field(100, ge=3)
    max_counterexamples: int = Field(5, ge=0)

    @model_validator(mode="before")
    @classmethod
    def _single_suite(cls, data: Any) -> Any:
        # `suite: r2_identity` is shorthand for `suites: [r2_identity]`
        if isinstance(data, dict) and "suite" in data:
            data = dict(data)
            suite = data.pop("suite")
            if "suites" in data:
                raise ValueError("give either suite or suites, not both")
            data["suites"] = [suite]
        return data

    @field_validator("dims")
    @classmethod
    def _check_dims(cls, dims: List[Tuple[int, int]], info: ValidationInfo) -> List[Tuple[int, int]]:
        if not dims:
            raise ValueError("at least one (m, k) pair is required")
        if not info.data.get("allow_inadmissible", False):
            issues = [issue for issue in (admissibility_issue(m, k) for m, k in dims) if issue]
            if issues:
                raise ValueError("; ".join(issues))
        return dims

    @model_validator(mode="after")
    def _check_campaign(self) -> "VerifyConfig":
        if self.margin < self.eps:
            raise ValueError(f"margin = {self.margin} must be at least eps = {self.eps}")
        return self


class ScanConfig(CommandConfig):
    command: Literal["scan"] = "scan"
    n_max: int = Field(100, ge=3)
    mutant: bool = False


class FlowConfig(CommandConfig):
    command: Literal["flow"] = "flow"
    space: SpaceKind = SpaceKind.COMPLEX_PROJECTIVE
    n: int = Field(3, ge=2)
    c: float = Field(1.0, gt=0.0)
    eps: float = Field(0.0, ge=0.0, lt=1.0)
    u0: Optional[List[float]] = Field(None, description="Explicit radii; the pinched grid is used when None")
    grid_points: int = Field(100, ge=1)
    rtol: float = Field(1e-10, gt=0.0)
    atol: float = Field(1e-14, gt=0.0)
    u_stop: float = Field(1e-6, gt=0.0)
    t_max: Optional[float] = Field(None, gt=0.0)

    @model_validator(mode="after")
    def _check_u0(self) -> "FlowConfig":
        if self.u0 is not None:
            _check_radii(self.u0, self.c)
        return self


class PinchRangeConfig(CommandConfig):
    command: Literal["pinch-range"] = "pinch-range"
    space: SpaceKind = SpaceKind.COMPLEX_PROJECTIVE
    n: int = Field(3, ge=3)
    c: float = Field(1.0, gt=0.0)
    eps: float = Field(0.0, ge=0.0, lt=1.0)


class EvolutionCheckConfig(CommandConfig):
    command: Literal["evolution-check"] = "evolution-check"
    n: int = Field(3, ge=2)
    c: float = Field(1.0, gt=0.0)
    u: float = Field(math.pi / 4.0, gt=0.0)
    h_fd: float = Field(1e-3, gt=0.0)

    @model_validator(mode="after")
    def _check_u(self) -> "EvolutionCheckConfig":
        _check_radii([self.u], self.c)
        return self


class MinimalConfig(CommandConfig):
    command: Literal["minimal"] = "minimal"
    space: SpaceKind = SpaceKind.COMPLEX_PROJECTIVE
    n: int = Field(3, ge=3)
    c: float = Field(1.0, gt=0.0)


class ReportConfig(CommandConfig):
    command: Literal["report"] = "report"
    run_dir: str = Field(..., description="Existing run directory to re-read and summarize")


RunConfig = Annotated[
    Union[VerifyConfig, ScanConfig, FlowConfig, PinchRangeConfig, EvolutionCheckConfig, MinimalConfig, ReportConfig],
    Field(discriminator="command"),
]


class RunOutcome(BaseModel):
    """Standard result of executing one command."""
    command: str = Field(..., description="Executed command")
    exit_code: int = Field(..., description="0 pass, 1 violation, 2 usage/config error, 3 numerical failure")
    run_dir: Optional[str] = Field(None, description="Output directory, if outputs were written")
    data: Optional[Dict[str, Any]] = Field(None, description="Command summary")
    message: Optional[str] = None
    error: Optional[str] = Field(None, description="Error message if unsuccessful")

    @property
    def success(self) -> bool:
        return self.exit_code == 0
