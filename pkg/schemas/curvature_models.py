"""
Pinching constants and pointwise curvature scalars.
"""

from typing import Optional

from pydantic import BaseModel, Field, model_validator

from .point_models import KahlerAngles


class PinchParams(BaseModel):
    """Constants of the pinching condition |A|^2 <= a|H|^2 + b and of W = alpha|H|^2 + beta."""
    m: int = Field(..., ge=2, description="Submanifold dimension")
    k: int = Field(..., ge=1, description="Codimension")
    a: float = Field(..., description="Coefficient of |H|^2")
    b: float = Field(..., description="Additive constant")
    eps: float = Field(0.0, ge=0.0, lt=1.0, description="Strictness parameter in [0, 1)")
    alpha: float = Field(..., description="Coefficient of |H|^2 in W")
    beta: float = Field(..., description="Additive constant of W")
    sigma: float = Field(0.0, ge=0.0, description="Exponent of f_sigma")

    @model_validator(mode="after")
    def _check_ranges(self) -> "PinchParams":
        if self.a <= 1.0 / self.m:
            raise ValueError(f"a = {self.a} must exceed 1/m = {1.0 / self.m}")
        if self.k >= 2 and (self.b <= 0 or self.beta <= 0):
            raise ValueError(f"codimension {self.k} needs m > 4k + 3 so that b, beta > 0")
        return self


class CurvatureScalars(BaseModel):
    """Pointwise scalars; fields not computed by an operation stay None."""
    A2: Optional[float] = Field(None, description="|A|^2")
    H2: Optional[float] = Field(None, description="|H|^2")
    Ao2: Optional[float] = Field(None, description="|Å|^2")
    h1o2: Optional[float] = Field(None, description="Traceless part of h in the H direction, squared")
    hminus2: Optional[float] = Field(None, description="Traceless part orthogonal to H, squared")
    R1: Optional[float] = None
    R2: Optional[float] = None
    Z: Optional[float] = None
    Q: Optional[float] = Field(None, description="|A|^2 - a|H|^2 - b")
    W: Optional[float] = Field(None, description="alpha|H|^2 + beta")
    f_sigma: Optional[float] = Field(None, description="|Å|^2 / W^(1-sigma)")
    amw_margin: Optional[float] = Field(None, description="2mW - |A|^2")


class ReactionTerms(BaseModel):
    """The three curvature contractions of the reaction term of Q."""
    I: float
    II: float
    III: float

    @property
    def total(self) -> float:
        return self.I + self.II + self.III


class OmegaNorms(BaseModel):
    """|omega|^2 by curvature contraction and by Kähler angles."""
    direct: float
    closed_form: float
    angles: Optional[KahlerAngles] = Field(None, description="Angles of the B2 frame used")


class PFTNorms(BaseModel):
    """Squared norms of the tangential and normal parts of J."""
    P2: float = Field(..., description="sum_i |tangential part of Je_i|^2")
    t2: float = Field(..., description="sum_alpha |tangential part of Je_alpha|^2")
    FP2: float = Field(..., description="sum_i |normal part of J P e_i|^2")
