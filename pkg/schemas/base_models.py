"""
Core data models for the pinched mean curvature flow lab.
"""

from enum import Enum
from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, PlainSerializer
from typing_extensions import Annotated


def _as_float_array(value: Any) -> np.ndarray:
    array = np.array(value, dtype=float)
    array.setflags(write=False)
    return array


# Read-only float ndarray; serialized as nested lists.
FloatArray = Annotated[
    np.ndarray,
    BeforeValidator(_as_float_array),
    PlainSerializer(lambda array: array.tolist(), return_type=list),
]


class SpaceKind(str, Enum):
    """Projective spaces KP^n(4c) supported by the lab."""
    COMPLEX_PROJECTIVE = "CP"
    QUATERNIONIC_PROJECTIVE = "HP"


class SuiteId(str, Enum):
    """Inequality suites run by the verifier."""
    AMBIENT_SYMMETRIES = "ambient_symmetries"
    B2_FRAME_RELATIONS = "b2_frame_relations"
    OMEGA_DUAL_ROUTE = "omega_dual_route"
    PFT_CHAINS = "pft_chains"
    R2_IDENTITY = "r2_identity"
    LEST_BOUNDS = "lest_bounds"
    REACTION_BOUNDS = "reaction_bounds"
    Q_ZERO_NEGATIVITY = "q_zero_negativity"
    H_ZERO_BRANCH = "h_zero_branch"
    SIMONS_Z_BOUND = "simons_z_bound"
    GAUSS_POSITIVITY = "gauss_positivity"
    AMW_BOUND = "amw_bound"
    CONSTANT_SCAN = "constant_scan"


class Command(str, Enum):
    """Commands of the command-line front end."""
    VERIFY = "verify"
    SCAN = "scan"
    FLOW = "flow"
    PINCH_RANGE = "pinch-range"
    EVOLUTION_CHECK = "evolution-check"
    MINIMAL = "minimal"
    REPORT = "report"


class AmbientSpace(BaseModel):
    """The ambient space KP^n(4c), modeled at one tangent space."""
    model_config = ConfigDict(frozen=True)

    kind: SpaceKind = Field(SpaceKind.COMPLEX_PROJECTIVE, description="Complex or quaternionic projective space")
    n: int = Field(..., ge=1, description="Complex or quaternionic dimension")
    c: float = Field(1.0, gt=0, description="Curvature scale; sectional curvature lies in [c, 4c]")

    @property
    def realdim(self) -> int:
        return 2 * self.n if self.kind == SpaceKind.COMPLEX_PROJECTIVE else 4 * self.n

    @property
    def einstein_constant(self) -> float:
        if self.kind == SpaceKind.COMPLEX_PROJECTIVE:
            return 2.0 * (self.n + 1) * self.c
        return 4.0 * (self.n + 2) * self.c

    @classmethod
    def cp(cls, n: int, c: float = 1.0) -> "AmbientSpace":
        return cls(kind=SpaceKind.COMPLEX_PROJECTIVE, n=n, c=c)

    @classmethod
    def hp(cls, n: int, c: float = 1.0) -> "AmbientSpace":
        return cls(kind=SpaceKind.QUATERNIONIC_PROJECTIVE, n=n, c=c)


def admissibility_issue(m: int, k: int) -> Optional[str]:
    """
    Check the dimension hypotheses for submanifolds of CP^n.

    Admissible means either n >= 3 and k = 1, or n >= 7 and 2 <= k < (2n-3)/5,
    where 2n = m + k.

    Returns:
        None when admissible, otherwise a message naming the violated bound
    """
    if m < 1 or k < 1:
        return f"(m, k) = ({m}, {k}): dimensions must be positive"
    if (m + k) % 2:
        return f"(m, k) = ({m}, {k}): m + k must be even (m + k = 2n)"
    n = (m + k) // 2
    if k == 1:
        if n < 3:
            return f"(m, k) = ({m}, {k}): hypersurfaces need n >= 3, got n = {n}"
        return None
    if n < 7:
        return f"(m, k) = ({m}, {k}): codimension k >= 2 needs n >= 7, got n = {n}"
    if 5 * k >= 2 * n - 3:
        return f"(m, k) = ({m}, {k}): codimension must satisfy k < (2n-3)/5 = {(2 * n - 3) / 5:g} for n = {n}"
    return None
