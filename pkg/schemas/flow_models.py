"""
Equivariant flow models: geodesic spheres, trajectories and flow reports.
"""

import math
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .base_models import AmbientSpace, SpaceKind


class SphereModel(BaseModel):
    """Geodesic sphere of radius u in KP^n(4c), described by its two principal curvatures."""
    model_config = ConfigDict(frozen=True)

    space: AmbientSpace
    u: float = Field(..., gt=0.0, description="Radius, 0 < u < pi/(2 sqrt c)")

    @model_validator(mode="after")
    def _check_radius(self) -> "SphereModel":
        if not self.u < self.max_radius:
            raise ValueError(f"radius u = {self.u} must lie in (0, {self.max_radius})")
        return self

    @property
    def max_radius(self) -> float:
        return math.pi / (2.0 * math.sqrt(self.space.c))

    @property
    def mu1(self) -> int:
        return 1 if self.space.kind == SpaceKind.COMPLEX_PROJECTIVE else 3

    @property
    def mu2(self) -> int:
        n = self.space.n
        return 2 * (n - 1) if self.space.kind == SpaceKind.COMPLEX_PROJECTIVE else 4 * (n - 1)

    @property
    def m(self) -> int:
        return self.mu1 + self.mu2

    @property
    def lambda1(self) -> float:
        root = math.sqrt(self.space.c)
        return 2.0 * root / math.tan(2.0 * root * self.u)

    @property
    def lambda2(self) -> float:
        root = math.sqrt(self.space.c)
        return root / math.tan(root * self.u)

    @property
    def H(self) -> float:
        """Scalar mean curvature; positive on the shrinking branch."""
        return self.mu1 * self.lambda1 + self.mu2 * self.lambda2

    @property
    def A2(self) -> float:
        return self.mu1 * self.lambda1 ** 2 + self.mu2 * self.lambda2 ** 2

    @property
    def Ao2(self) -> float:
        # mu1 mu2 (l1 - l2)^2 / m, exact and nonnegative
        return self.mu1 * self.mu2 * (self.lambda1 - self.lambda2) ** 2 / self.m


class StepPolicy(BaseModel):
    """Adaptive embedded Runge-Kutta contract of the radius ODE."""
    method: str = Field("DOP853", description="scipy.integrate.solve_ivp method")
    rtol: float = Field(1e-10, gt=0.0)
    atol: float = Field(1e-14, gt=0.0)
    u_stop: float = Field(1e-6, gt=0.0, description="Extinction floor on u")
    t_max: Optional[float] = Field(None, gt=0.0, description="Integration horizon; unbounded when None")
    stationary_threshold: float = Field(1e-12, gt=0.0, description="|H| below this marks a stationary sphere")


class FlowSample(BaseModel):
    """Diagnostics at one accepted step."""
    t: float
    u: float
    H: float
    A2: float
    Ao2: float
    Q: float
    W: float
    f0: float
    vol_ratio: float
    log_volume_integral: float = Field(..., description="-int |H|^2 dt from the ODE state")


class Trajectory(BaseModel):
    """One equivariant MCF run."""
    space: AmbientSpace
    u0: float
    eps: float = 0.0
    policy: StepPolicy = Field(default_factory=StepPolicy)
    samples: List[FlowSample] = Field(default_factory=list)
    stationary: bool = False
    extinct: bool = False
    focal_collapse: bool = Field(False, description="Expanding branch reached the focal radius")
    extinction_time: Optional[float] = Field(None, description="t at which u reached u_stop")
    extinction_time_extrapolated: Optional[float] = Field(None, description="t_stop + u_stop^2/(2m)")
    extinction_time_quadrature: Optional[float] = Field(None, description="int_0^u0 du / H(u)")

    @property
    def volume_law_error(self) -> float:
        """Largest relative gap between log V(u)/V(u0) and -int |H|^2 dt."""
        return max(
            (abs(math.log(s.vol_ratio) - s.log_volume_integral) / max(1.0, abs(s.log_volume_integral)) for s in self.samples),
            default=0.0,
        )


class EvolutionEntry(BaseModel):
    """Finite-difference check of one time derivative."""
    quantity: str
    analytic: float
    fd_coarse: float
    fd_fine: float
    error_coarse: float
    error_fine: float
    order: float = Field(..., description="log2(error_coarse / error_fine)")


class InequalityShadow(BaseModel):
    """An evolution inequality with its gradient terms dropped, evaluated on a sphere."""
    name: str
    lhs: float
    rhs: float
    holds: bool


class EvolutionReport(BaseModel):
    space: AmbientSpace
    u: float
    h_fd: float
    entries: List[EvolutionEntry] = Field(default_factory=list)
    shadows: List[InequalityShadow] = Field(default_factory=list)
    flagged: bool = Field(False, description="h_fd in the cancellation regime or order off the plateau")
    message: Optional[str] = None

    @property
    def passed(self) -> bool:
        return not self.flagged and all(shadow.holds for shadow in self.shadows)


class PinchRangeReport(BaseModel):
    space: AmbientSpace
    eps: float = 0.0
    intervals: List[Tuple[float, float]] = Field(default_factory=list)
    boundaries: List[float] = Field(default_factory=list, description="Roots of the closed form")
    cross_route_boundaries: List[float] = Field(default_factory=list, description="Sign changes of Q on sphere data")
    non_convex_witness: Optional[float] = Field(None, description="Pinched radius with lambda1 < 0 < lambda2")
    diagnostic: Optional[str] = None


class InvarianceRecord(BaseModel):
    u0: float
    extinct: bool
    extinction_time: Optional[float] = None
    max_Q: float
    final_roundness: float = Field(..., description="Ao2/H2 at the last sample")
    roundness_monotone_tail: bool
    final_ratio: float = Field(..., description="lambda1/lambda2 at the last sample")
    f0_tail_monotone: bool
    volume_law_error: float
    shadows_hold: bool

    @property
    def passed(self) -> bool:
        return (
            self.extinct and self.max_Q < 0.0 and self.roundness_monotone_tail
            and self.f0_tail_monotone and self.shadows_hold
        )


class InvarianceReport(BaseModel):
    space: AmbientSpace
    eps: float = 0.0
    records: List[InvarianceRecord] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(record.passed for record in self.records)


class MinimalSphereReport(BaseModel):
    space: AmbientSpace
    u_star: float
    A2_at_u_star: float
    bound: float = Field(..., description="2c")
    bound_holds: bool
    outside_pinch_range: bool

    @property
    def passed(self) -> bool:
        return self.bound_holds and self.outside_pinch_range
