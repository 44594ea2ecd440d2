"""
Pointwise submanifold data: frames, second fundamental form and Kähler angles.
"""

from typing import List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .base_models import AmbientSpace, FloatArray

FRAME_TOLERANCE = 1e-9


class PointData(BaseModel):
    """
    First and second order data of a submanifold at one point.

    Frames are stored row-wise: ``tangent[i]`` and ``normal[alpha]`` are
    coordinate vectors of length ``space.realdim`` in the J-adapted ambient
    frame. ``h[alpha]`` is the symmetric m x m matrix h^alpha_ij.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    space: AmbientSpace = Field(..., description="Ambient projective space")
    m: int = Field(..., ge=1, description="Submanifold dimension")
    k: int = Field(..., ge=1, description="Codimension")
    tangent: FloatArray = Field(..., description="Tangent frame, shape (m, realdim)")
    normal: FloatArray = Field(..., description="Normal frame, shape (k, realdim)")
    h: FloatArray = Field(..., description="Second fundamental form, shape (k, m, m)")

    @model_validator(mode="after")
    def _check_consistency(self) -> "PointData":
        dim = self.space.realdim
        if self.m + self.k != dim:
            raise ValueError(f"m + k = {self.m + self.k} does not match real dimension {dim}")
        if self.tangent.shape != (self.m, dim):
            raise ValueError(f"tangent frame has shape {self.tangent.shape}, expected {(self.m, dim)}")
        if self.normal.shape != (self.k, dim):
            raise ValueError(f"normal frame has shape {self.normal.shape}, expected {(self.k, dim)}")
        if self.h.shape != (self.k, self.m, self.m):
            raise ValueError(f"h has shape {self.h.shape}, expected {(self.k, self.m, self.m)}")
        scale = max(1.0, float(np.max(np.abs(self.h), initial=0.0)))
        if np.max(np.abs(self.h - np.swapaxes(self.h, 1, 2)), initial=0.0) > FRAME_TOLERANCE * scale:
            raise ValueError("h matrices must be symmetric")
        gram = self.frame @ self.frame.T
        deviation = float(np.max(np.abs(gram - np.eye(dim))))
        if deviation > FRAME_TOLERANCE:
            raise ValueError(f"tangent and normal frames are not orthonormal (Gram deviation {deviation:.3e})")
        return self

    @property
    def frame(self) -> np.ndarray:
        """Full frame, tangent rows first."""
        return np.vstack([self.tangent, self.normal])

    @property
    def mean_curvature(self) -> np.ndarray:
        """Components H^alpha = tr h^alpha."""
        return np.trace(self.h, axis1=1, axis2=2)

    @property
    def mean_curvature_vector(self) -> np.ndarray:
        """H = sum_alpha H^alpha e_alpha as an ambient coordinate vector."""
        return self.mean_curvature @ self.normal

    @property
    def H2(self) -> float:
        return float(np.sum(self.mean_curvature ** 2))

    @property
    def A2(self) -> float:
        return float(np.sum(self.h ** 2))

    def with_h(self, h: np.ndarray) -> "PointData":
        """Same frames, new second fundamental form."""
        return PointData(space=self.space, m=self.m, k=self.k, tangent=self.tangent, normal=self.normal, h=h)


class KahlerAngles(BaseModel):
    """The (tau_r, nu_r) pairs of a J-adapted normal frame."""
    taus: List[float] = Field(default_factory=list, description="tau_r for r = 1..floor(k/2)")
    nus: List[float] = Field(default_factory=list, description="nu_r for r = 1..floor(k/2)")
    odd_tail: bool = Field(False, description="k odd: the last normal vector has tau = 1, nu = 0")

    @model_validator(mode="after")
    def _check_pairs(self) -> "KahlerAngles":
        if len(self.taus) != len(self.nus):
            raise ValueError("taus and nus must have the same length")
        for tau, nu in zip(self.taus, self.nus):
            if not (-FRAME_TOLERANCE <= tau <= 1 + FRAME_TOLERANCE and -FRAME_TOLERANCE <= nu <= 1 + FRAME_TOLERANCE):
                raise ValueError(f"Kähler angle pair ({tau}, {nu}) outside [0, 1]")
            if abs(tau * tau + nu * nu - 1.0) > FRAME_TOLERANCE:
                raise ValueError(f"Kähler angle pair ({tau}, {nu}) violates tau^2 + nu^2 = 1")
        return self

    @property
    def omega_closed_form(self) -> float:
        """|omega|^2 = 18 sum_r tau_r^2 nu_r^2."""
        return 18.0 * sum((tau * nu) ** 2 for tau, nu in zip(self.taus, self.nus))

    @property
    def tau_square_sum(self) -> float:
        return sum(tau * tau for tau in self.taus)
