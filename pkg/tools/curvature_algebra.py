"""
Curvature algebra tool for the pinched flow lab.

Every pointwise scalar of the pinching argument is computed here from a
PointData: the traceless split of A, the quartic quantities R1, R2 and Z,
the curvature contractions I, II, III of the reaction term, the pinching
quantities Q, W, f_sigma, intrinsic sectional curvatures by the Gauss
equation, and the right-hand sides of the algebraic estimates.
"""

import logging
import math
from typing import Any, Dict, Optional, Tuple

import numpy as np

from lab import InfeasibleConstraintError, Tool, UnsupportedOperationError
from schemas import CurvatureScalars, PinchParams, PointData, ReactionTerms
from tools.ambient_geometry import AmbientGeometryTool

logger = logging.getLogger(__name__)

# |H| below this (relative to |A|) is treated as H = 0
ZERO_MEAN_TOLERANCE = 1e-12


class CurvatureAlgebraTool(Tool):
    """Pointwise curvature scalars, reaction terms and proof constants."""

    def __init__(self, geometry: Optional[AmbientGeometryTool] = None):
        """Initialize the curvature algebra tool."""
        super().__init__("curvature_algebra", "Pointwise curvature scalars and estimates")
        self.geometry = geometry or AmbientGeometryTool()
        logger.info("Curvature algebra tool initialized")

    def execute(self, operation: str, **kwargs) -> Any:
        """Execute curvature algebra operations."""
        if operation == "pinch_params":
            return self.pinch_params(**kwargs)
        elif operation == "traceless_split":
            return self.traceless_split(**kwargs)
        elif operation == "r1_r2":
            return self.r1_r2(**kwargs)
        elif operation == "reaction_terms":
            return self.reaction_terms(**kwargs)
        elif operation == "hypersurface_reaction":
            return self.hypersurface_reaction(**kwargs)
        elif operation == "reaction_total":
            return self.reaction_total(**kwargs)
        elif operation == "simons_z":
            return self.simons_z(**kwargs)
        elif operation == "pinch_quantities":
            return self.pinch_quantities(**kwargs)
        elif operation == "gauss_sectional":
            return self.gauss_sectional(**kwargs)
        elif operation == "q_zero_point":
            return self.q_zero_point(**kwargs)
        else:
            raise ValueError(f"Unknown operation: {operation}")

    # ------------------------------------------------------------------
    # Constants
    # ------------------------------------------------------------------

    def pinch_params(
        self,
        m: int,
        k: int,
        eps: float = 0.0,
        c: float = 1.0,
        sigma: float = 0.0,
        rbar: Optional[float] = None,
    ) -> PinchParams:
        """
        Pinching constants a, b and the constants alpha, beta of W.

        For k = 1: a = 1/(m-1+eps), b = 2c(1-eps), beta = 2c,
        alpha = 2/((m-1+eps)(2 + rbar/c - 2eps)) with rbar = (m+3)c on CP^n.
        For k >= 2: a = 1/(m-1+eps), b = c(m-3-4k)(1-eps)/m,
        alpha = (m-10)/(3m^2), beta = c(m-3-4k)/m.

        Args:
            m: Submanifold dimension
            k: Codimension
            eps: Strictness parameter in [0, 1)
            c: Curvature scale
            sigma: Exponent of f_sigma
            rbar: Ricci curvature in the normal direction (k = 1), defaults to CP^n

        Returns:
            PinchParams
        """
        a = 1.0 / (m - 1 + eps)
        if k == 1:
            rbar_unit = (m + 3.0) if rbar is None else rbar / c
            return PinchParams(
                m=m, k=k, a=a, b=2.0 * c * (1.0 - eps), eps=eps,
                alpha=2.0 / ((m - 1 + eps) * (2.0 + rbar_unit - 2.0 * eps)),
                beta=2.0 * c, sigma=sigma,
            )
        gap = (m - 3.0 - 4.0 * k) / m
        return PinchParams(
            m=m, k=k, a=a, b=c * gap * (1.0 - eps), eps=eps,
            alpha=(m - 10.0) / (3.0 * m * m), beta=c * gap, sigma=sigma,
        )

    @staticmethod
    def sez_pos_constant(m: int, eps: float, alpha: float, beta: float) -> float:
        """c(m) with 2K_ij >= eps c(m) W for pinched hypersurfaces."""
        return min(1.0 / ((m - 1) * (m - 1 + eps) * alpha), 2.0 / beta)

    @staticmethod
    def z_lemma_rho(params: PinchParams) -> float:
        """
        rho with Z + 2mb|Å|^2 >= rho eps |Å|^2 W.

        k = 1 uses the eigenvalue chain of the hypersurface case. For k >= 2 the
        constant is the minimum over the H != 0 interpolation between the two
        lower bounds of Z and the H = 0 branch.
        """
        m, eps, b = params.m, params.eps, params.b
        alpha, beta = params.alpha, params.beta
        inverse_eps = math.inf if eps == 0.0 else 1.0 / eps
        if params.k == 1:
            return min(m / (2.0 * (m - 1) * (m - 1 + eps) * alpha), 1.5 * m * b * inverse_eps / beta)
        rho1 = min(
            m / (2.0 * (1.0 - eps)),
            (m - 3.0 + 3.0 * eps) * inverse_eps / (2.0 * (1.0 - eps)),
            (m - 2.0 + eps * (m + 2.0)) * inverse_eps / (4.0 * (1.0 - eps)),
        )
        rho2 = 1.0 / (2.0 * (m - 1))
        rho3 = m / 2.0
        cbar_over_eps = rho1 / (eps * rho1 + rho3)
        return min(
            cbar_over_eps * rho2 / alpha,
            2.0 * m * b * cbar_over_eps / beta,
            (2.0 * m - 1.5) * b * inverse_eps / beta,
        )

    # ------------------------------------------------------------------
    # Pointwise scalars
    # ------------------------------------------------------------------

    @staticmethod
    def mean_direction(p: PointData) -> Optional[np.ndarray]:
        """Unit vector H/|H| in normal coordinates, or None when H vanishes."""
        mean = p.mean_curvature
        norm = float(np.linalg.norm(mean))
        if norm <= ZERO_MEAN_TOLERANCE * max(1.0, math.sqrt(p.A2)):
            return None
        return mean / norm

    def traceless_split(self, p: PointData) -> CurvatureScalars:
        """
        |A|^2, |H|^2, |Å|^2 and the split |Å|^2 = |h1°|^2 + |h-|^2 along H.

        At H = 0 the split is |h1°|^2 = 0, |h-|^2 = |Å|^2.
        """
        traceless = p.h - np.einsum("a,ij->aij", p.mean_curvature / p.m, np.eye(p.m))
        ao2 = float(np.sum(traceless ** 2))
        direction = self.mean_direction(p)
        if direction is None:
            h1o2, hminus2 = 0.0, ao2
        else:
            along = np.einsum("a,aij->ij", direction, traceless)
            h1o2 = float(np.sum(along ** 2))
            hminus2 = float(np.sum((traceless - np.einsum("a,ij->aij", direction, along)) ** 2))
        return CurvatureScalars(A2=p.A2, H2=p.H2, Ao2=ao2, h1o2=h1o2, hminus2=hminus2)

    def r1_r2(self, p: PointData) -> Tuple[float, float]:
        """R1 and R2 by direct index sums."""
        h = p.h
        gram = np.einsum("aij,bij->ab", h, h)
        products = np.einsum("aip,bjp->abij", h, h)
        commutators = products - np.swapaxes(products, 0, 1)
        r1 = float(np.sum(gram ** 2) + np.sum(commutators ** 2))
        r2 = float(np.sum(np.einsum("a,aij->ij", p.mean_curvature, h) ** 2))
        return r1, r2

    def r2_closed_form(self, p: PointData) -> float:
        """R2 = |h1°|^2 |H|^2 + |H|^4/m, and 0 at H = 0."""
        scalars = self.traceless_split(p)
        if self.mean_direction(p) is None:
            return 0.0
        return scalars.h1o2 * scalars.H2 + scalars.H2 ** 2 / p.m

    def reaction_terms(self, p: PointData, a: float) -> ReactionTerms:
        """
        The contractions I, II, III of the Fubini-Study curvature against A.

        The sums are frame-invariant and are evaluated in the frame stored in ``p``.
        With w = omega blocks of the frame (T tangent, N normal):

            I   = 4c [(|H|^2 - |A|^2 - 3 sum tr(w_T h w_T h)) - ((m-1)|A|^2 - 3 sum tr(w_T^2 h^2))]
            II  = 2 sum M_ab <h^a, h^b> - 2a H^T M H,  M = c(m Id + 3 w_TN^T w_TN)
            III = -8c [sum X^a_ib X^b_ia - sum_i (sum_a X^a_ia)^2 + 2 sum w_N[a,b] tr(w_T h^a h^b)],
                  X^a = h^a w_TN

        Args:
            p: Point data on CP^n
            a: Coefficient of |H|^2 in Q, used by II
        """
        m, c = p.m, p.space.c
        omega = self.geometry.kahler_matrix(p.space, p.frame)
        w_t, w_tn, w_n = omega[:m, :m], omega[:m, m:], omega[m:, m:]
        h = p.h
        mean = p.mean_curvature
        a2, h2 = p.A2, p.H2
        gram = np.einsum("aij,bij->ab", h, h)

        twisted = w_t @ h
        first = 4.0 * c * (
            (h2 - a2 - 3.0 * np.einsum("aij,aji->", twisted, twisted))
            - ((m - 1) * a2 - 3.0 * np.einsum("ij,aji->", w_t @ w_t, h @ h))
        )
        mixed = c * (m * np.eye(p.k) + 3.0 * w_tn.T @ w_tn)
        second = 2.0 * np.sum(mixed * gram) - 2.0 * a * float(mean @ mixed @ mean)
        x = h @ w_tn
        diagonal = np.einsum("aia->i", x)
        traces = np.einsum("aij,bji->ab", twisted, h)
        third = -8.0 * c * (np.einsum("aib,bia->", x, x) - float(diagonal @ diagonal) + 2.0 * np.sum(w_n * traces))
        return ReactionTerms(I=float(first), II=float(second), III=float(third))

    def hypersurface_reaction(self, p: PointData) -> float:
        """
        -2 sum_{j,l} (lambda_j - lambda_l)^2 K_jl over the principal frame of a hypersurface.

        Raises:
            UnsupportedOperationError: If k != 1
        """
        if p.k != 1:
            raise UnsupportedOperationError(f"hypersurface reaction needs k = 1, got k = {p.k}")
        eigenvalues, eigenvectors = np.linalg.eigh(p.h[0])
        principal = eigenvectors.T @ p.tangent
        jmat = self.geometry.complex_structure(p.space)
        kahler = principal @ jmat @ principal.T
        sectional = p.space.c * (1.0 + 3.0 * kahler ** 2)
        gaps = (eigenvalues[:, None] - eigenvalues[None, :]) ** 2
        return float(-2.0 * np.sum(gaps * sectional))

    def reaction_total(self, p: PointData, params: PinchParams) -> float:
        """R = 2R1 - 2aR2 + I + II + III, the reaction term in the evolution of Q."""
        r1, r2 = self.r1_r2(p)
        terms = self.reaction_terms(p, params.a)
        return 2.0 * r1 - 2.0 * params.a * r2 + terms.total

    def simons_z(self, p: PointData) -> float:
        """Z = sum H^a h^a_ip h^b_pj h^b_ij - R1."""
        r1, _ = self.r1_r2(p)
        squares = np.sum(p.h @ p.h, axis=0)
        cubic = p.mean_curvature @ np.einsum("aij,ji->a", p.h, squares)
        return float(cubic) - r1

    @staticmethod
    def simons_z_eigen(p: PointData) -> float:
        """Z = sum_{i<j} lambda_i lambda_j (lambda_i - lambda_j)^2 for hypersurfaces."""
        if p.k != 1:
            raise UnsupportedOperationError(f"eigenvalue form of Z needs k = 1, got k = {p.k}")
        lam = np.linalg.eigvalsh(p.h[0])
        products = np.outer(lam, lam) * (lam[:, None] - lam[None, :]) ** 2
        return float(np.sum(np.triu(products, 1)))

    def pinch_quantities(self, p: PointData, params: PinchParams) -> CurvatureScalars:
        """Q = |A|^2 - a|H|^2 - b, W = alpha|H|^2 + beta, f_sigma = |Å|^2 / W^(1-sigma) and 2mW - |A|^2."""
        scalars = self.traceless_split(p)
        w = params.alpha * scalars.H2 + params.beta
        return scalars.model_copy(update={
            "Q": scalars.A2 - params.a * scalars.H2 - params.b,
            "W": w,
            "f_sigma": scalars.Ao2 / w ** (1.0 - params.sigma),
            "amw_margin": 2.0 * p.m * w - scalars.A2,
        })

    def gauss_sectional(self, p: PointData, i: int, j: int) -> float:
        """
        Intrinsic sectional curvature of the plane (e_i, e_j): K = K_bar + sum_a (h_ii h_jj - h_ij^2).

        Raises:
            ValueError: If i == j or an index is out of range
        """
        if not (0 <= i < p.m and 0 <= j < p.m) or i == j:
            raise ValueError(f"tangent indices must be distinct and in [0, {p.m}), got ({i}, {j})")
        ambient = self.geometry.sectional(p.space, p.tangent[i], p.tangent[j])
        h = p.h
        return float(ambient + np.sum(h[:, i, i] * h[:, j, j] - h[:, i, j] ** 2))

    def gauss_matrix(self, p: PointData) -> np.ndarray:
        """K_ij for every pair of tangent frame vectors at once; the diagonal is meaningless."""
        jmat = self.geometry.complex_structure(p.space)
        kahler = p.tangent @ jmat @ p.tangent.T
        diagonal = np.einsum("aii->ai", p.h)
        products = np.einsum("ai,aj->ij", diagonal, diagonal) - np.einsum("aij,aij->ij", p.h, p.h)
        return p.space.c * (1.0 + 3.0 * kahler ** 2) + products

    # ------------------------------------------------------------------
    # Estimates
    # ------------------------------------------------------------------

    def lest_first_bound(self, p: PointData, a: float) -> float:
        """
        Upper bound for 2R1 - 2aR2 at a point with H != 0, valid for any a.

        Raises:
            UnsupportedOperationError: At H = 0
        """
        if self.mean_direction(p) is None:
            raise UnsupportedOperationError("the first R1/R2 estimate needs H != 0")
        s = self.traceless_split(p)
        m = p.m
        return (
            2.0 * s.h1o2 ** 2 - 2.0 * (a - 2.0 / m) * s.h1o2 * s.H2 - (2.0 / m) * (a - 1.0 / m) * s.H2 ** 2
            + 8.0 * s.h1o2 * s.hminus2 + 3.0 * s.hminus2 ** 2
        )

    def lest_second_bound(self, p: PointData, a: float, b: float) -> float:
        """Upper bound for 2R1 - 2aR2 at a point with |A|^2 = a|H|^2 + b, a > 1/m."""
        m = p.m
        if a <= 1.0 / m:
            raise ValueError(f"the second R1/R2 estimate needs a > 1/m, got a = {a}")
        s = self.traceless_split(p)
        denom = m * a - 1.0
        return (
            (6.0 - 2.0 / denom) * s.Ao2 * s.hminus2 - 3.0 * s.hminus2 ** 2
            + 2.0 * m * a * b / denom * s.h1o2 + 4.0 * b / denom * s.hminus2 - 2.0 * b * b / denom
        )

    def prop_alg_residual(self, p: PointData, i: int, j: int) -> Dict[str, float]:
        """
        Both sides of |A|^2 - |H|^2/(m-1) = -2 l_i l_j + (l_i + l_j - |H|/(m-1))^2 + sum_{l != i,j} (l_l - |H|/(m-1))^2.

        Principal curvatures are sorted ascending after orienting the normal so that their sum is nonnegative.
        """
        if p.k != 1:
            raise UnsupportedOperationError(f"the principal-curvature identity needs k = 1, got k = {p.k}")
        lam = np.linalg.eigvalsh(p.h[0])
        if np.sum(lam) < 0.0:
            lam = np.sort(-lam)
        m = p.m
        shift = float(np.sum(lam)) / (m - 1)
        others = np.delete(lam, [i, j])
        lhs = float(np.sum(lam ** 2)) - float(np.sum(lam)) ** 2 / (m - 1)
        rhs = -2.0 * lam[i] * lam[j] + (lam[i] + lam[j] - shift) ** 2 + float(np.sum((others - shift) ** 2))
        return {"lhs": lhs, "rhs": float(rhs), "lower": float(-2.0 * lam[i] * lam[j])}

    def andrews_baker_bound(self, p: PointData) -> float:
        """Lower bound of Z at H != 0 in terms of |h1°|^2, |h-|^2 and |H|^2."""
        s = self.traceless_split(p)
        m = p.m
        return (
            -0.5 * m * s.h1o2 ** 2 - 1.5 * s.hminus2 ** 2 - 0.5 * (m + 2) * s.h1o2 * s.hminus2
            + (s.h1o2 + s.hminus2) * s.H2 / (2.0 * (m - 1))
        )

    def q_zero_point(self, p: PointData, params: PinchParams, trace_scale: float = 1.0) -> PointData:
        """
        Rescale the traceless part by s and the trace part by r so that Q = 0.

        Solves s^2 |Å|^2 + r^2 |H|^2 / m - a r^2 |H|^2 - b = 0 for s at the given r.

        Raises:
            InfeasibleConstraintError: If |Å| = 0 or the required s^2 is negative
        """
        mean = p.mean_curvature
        trace_part = np.einsum("a,ij->aij", mean / p.m, np.eye(p.m))
        traceless = p.h - trace_part
        ao2 = float(np.sum(traceless ** 2))
        h2 = trace_scale ** 2 * p.H2
        if self.mean_direction(p) is None:
            h2 = 0.0
            trace_part = np.zeros_like(trace_part)
        numerator = params.b + (params.a - 1.0 / p.m) * h2
        if ao2 <= 0.0 or numerator < 0.0:
            raise InfeasibleConstraintError(f"no Q = 0 rescaling: |Å|^2 = {ao2:g}, required s^2 |Å|^2 = {numerator:g}")
        scale = math.sqrt(numerator / ao2)
        return p.with_h(scale * traceless + trace_scale * trace_part)
