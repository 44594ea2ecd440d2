"""
Inequality suite models: specs, per-trial outcomes, counterexamples and reports.
"""

import math
from enum import Enum
from typing import List, Optional, Tuple

from pydantic import BaseModel, Field, model_validator

from .base_models import SuiteId, admissibility_issue
from .curvature_models import PinchParams
from .point_models import PointData

DEFAULT_SLACK = 1e-9

# Suites whose inputs are Q = 0 constructions get the smaller budget
CONSTRAINED_SUITES = frozenset({SuiteId.LEST_BOUNDS, SuiteId.Q_ZERO_NEGATIVITY, SuiteId.H_ZERO_BRANCH})


class Relation(str, Enum):
    """How the two sides of an inequality are compared."""
    LE = "le"
    GE = "ge"
    EQ = "eq"


class InequalityOutcome(BaseModel):
    """One evaluated inequality (or identity) at one input."""
    inequality_id: str = Field(..., description="Name of the checked inequality")
    lhs: float
    rhs: float
    relation: Relation = Relation.LE
    tolerance: Optional[float] = Field(None, description="Relative slack; suite default when None")

    @property
    def scale(self) -> float:
        return max(1.0, abs(self.lhs), abs(self.rhs))

    @property
    def slack(self) -> float:
        """Signed distance to violation relative to the dominant term; positive means violated before tolerance."""
        if self.relation == Relation.LE:
            raw = self.lhs - self.rhs
        elif self.relation == Relation.GE:
            raw = self.rhs - self.lhs
        else:
            raw = abs(self.lhs - self.rhs)
        return raw / self.scale

    def violated(self, default_tolerance: float = DEFAULT_SLACK) -> bool:
        tolerance = default_tolerance if self.tolerance is None else self.tolerance
        # NaN slack counts as a violation
        return not (self.slack <= tolerance)


class CounterexampleRecord(BaseModel):
    """A violating input, with everything needed to replay it."""
    suite_id: SuiteId
    inequality_id: str
    m: int
    k: int
    dims_index: int = Field(0, description="Position of (m, k) in the suite's dims")
    trial: int = Field(..., description="Trial index within its (m, k) block")
    seed: int = Field(..., description="Root seed of the suite")
    tolerance: float = DEFAULT_SLACK
    lhs: float
    rhs: float
    relation: Relation
    slack: float
    mutant: bool = False
    branch: str = Field("generic", description="Input family: generic, q_zero, h_zero, angles, sphere")
    point: Optional[PointData] = None
    params: Optional[PinchParams] = None
    shrink_steps: int = Field(0, description="Accepted shrinking moves")


class ConstantValue(BaseModel):
    """One closed-form constant evaluated at one admissible dimension triple."""
    name: str
    n: int
    m: int
    k: int
    value: float
    positive: bool = Field(..., description="Whether the constant has the sign the argument needs")


class SuiteSpec(BaseModel):
    """A single suite campaign."""
    suite_id: SuiteId
    dims: List[Tuple[int, int]] = Field(default_factory=list, description="(m, k) pairs")
    trials: int = Field(1000, ge=1)
    seed: int = Field(0, ge=0, lt=2 ** 64)
    margin: float = Field(0.1, gt=0.0, le=1.0)
    eps: float = Field(0.0, ge=0.0, lt=1.0)
    mutant: bool = Field(False, description="Run the catalogued wrong-constant variant")
    allow_inadmissible: bool = Field(False, description="Negative test: only generator rejection is asserted")
    n_max: int = Field(100, ge=3, description="Upper n for constant_scan")
    max_counterexamples: int = Field(5, ge=0)
    tolerance: float = Field(DEFAULT_SLACK, gt=0.0)

    @model_validator(mode="after")
    def _check_dims(self) -> "SuiteSpec":
        if self.suite_id == SuiteId.CONSTANT_SCAN:
            return self
        if not self.dims:
            raise ValueError(f"suite {self.suite_id.value} needs at least one (m, k) pair")
        if not self.allow_inadmissible:
            issues = [issue for issue in (admissibility_issue(m, k) for m, k in self.dims) if issue]
            if issues:
                raise ValueError("; ".join(issues))
        return self


class SuiteReport(BaseModel):
    """Result of one suite campaign; wall_time is the only non-reproducible field."""
    suite_id: SuiteId
    dims: List[Tuple[int, int]] = Field(default_factory=list)
    trials_run: int = 0
    violation_count: int = 0
    violations: List[CounterexampleRecord] = Field(default_factory=list, description="Shrunk records, capped")
    worst_slack: Optional[float] = Field(None, description="Largest signed slack over all evaluations")
    worst_inequality: Optional[str] = None
    constants: List[ConstantValue] = Field(default_factory=list)
    rejected_dims: List[Tuple[int, int]] = Field(default_factory=list, description="Inadmissible dims the generator refused")
    mutant: bool = False
    wall_time: Optional[float] = Field(None, description="Seconds; excluded from persisted reports")

    @property
    def passed(self) -> bool:
        return self.violation_count == 0

    def absorb(self, other: "SuiteReport") -> "SuiteReport":
        """Merge another partial report into a new one; associative in the counts and slack."""
        slacks = [(s, name) for s, name in ((self.worst_slack, self.worst_inequality), (other.worst_slack, other.worst_inequality)) if s is not None]
        worst = max(slacks, key=lambda item: (math.isnan(item[0]), item[0])) if slacks else (None, None)
        return SuiteReport(
            suite_id=self.suite_id,
            dims=self.dims,
            trials_run=self.trials_run + other.trials_run,
            violation_count=self.violation_count + other.violation_count,
            violations=self.violations + other.violations,
            worst_slack=worst[0],
            worst_inequality=worst[1],
            constants=self.constants + other.constants,
            rejected_dims=self.rejected_dims + other.rejected_dims,
            mutant=self.mutant or other.mutant,
        )
