"""
Adapted frames tool for the pinched flow lab.

This tool builds the two adapted frames used throughout the curvature
estimates at a point of a submanifold of CP^n:

* B1, whose first normal vector is H/|H|;
* B2, which puts the skew form phi(X, Y) = <JX, Y> of the normal space in
  canonical 2x2 block form and pairs every normal vector with a tangent
  partner, yielding the Kähler angles (tau_r, nu_r).

It also computes |omega|^2, |P|^2, |t|^2, |FP|^2 and generates seeded random
pinched points for the inequality suites.
"""

import logging
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import null_space, orth
from scipy.stats import ortho_group, unitary_group

from lab import (
    FrameConstructionError,
    InadmissibleDimensionsError,
    InfeasibleConstraintError,
    Tool,
    UnsupportedOperationError,
)
from schemas import AmbientSpace, KahlerAngles, OmegaNorms, PFTNorms, PointData, SpaceKind, admissibility_issue
from tools.ambient_geometry import AmbientGeometryTool

logger = logging.getLogger(__name__)

SeedLike = Union[int, np.random.SeedSequence]

# Tangential parts of J e_alpha below this are rounding noise
PARTNER_FLOOR = 1e-15


class FramesTool(Tool):
    """B1/B2 frame construction, Kähler angles and random pinched points."""

    def __init__(
        self,
        geometry: Optional[AmbientGeometryTool] = None,
        tolerance: float = 1e-9,
        degenerate_threshold: float = 1e-8,
    ):
        """Initialize the frames tool."""
        super().__init__("frames", "Adapted frames and Kähler angles")
        self.geometry = geometry or AmbientGeometryTool(tolerance=tolerance)
        self.tolerance = tolerance
        self.degenerate_threshold = degenerate_threshold
        logger.info(f"Frames tool initialized (degenerate threshold {degenerate_threshold:g})")

    def execute(self, operation: str, **kwargs) -> Any:
        """Execute frame operations."""
        if operation == "build_b1":
            return self.build_b1(**kwargs)
        elif operation == "build_b2":
            return self.build_b2(**kwargs)
        elif operation == "omega_norm2":
            return self.omega_norm2(**kwargs)
        elif operation == "pft_norms":
            return self.pft_norms(**kwargs)
        elif operation == "random_point":
            return self.random_point(**kwargs)
        elif operation == "point_with_angles":
            return self.point_with_angles(**kwargs)
        elif operation == "b2_residuals":
            return self.b2_residuals(**kwargs)
        elif operation == "check_admissible":
            return self.check_admissible(**kwargs)
        else:
            raise ValueError(f"Unknown operation: {operation}")

    # ------------------------------------------------------------------
    # Frame changes
    # ------------------------------------------------------------------

    def reexpress(self, p: PointData, tangent: np.ndarray, normal: np.ndarray) -> PointData:
        """
        Express the second fundamental form of ``p`` in new tangent and normal frames.

        The new frames must span the same tangent and normal spaces as the old ones.
        """
        tangent = np.asarray(tangent, dtype=float)
        normal = np.asarray(normal, dtype=float)
        frame = np.vstack([tangent, normal])
        deviation = float(np.max(np.abs(frame @ frame.T - np.eye(frame.shape[0]))))
        if deviation > self.tolerance:
            raise FrameConstructionError(
                f"rotated frame is not orthonormal (Gram deviation {deviation:.3e})",
                float(np.linalg.cond(frame)),
            )
        tangent_change = p.tangent @ tangent.T
        normal_change = p.normal @ normal.T
        h = tangent_change.T @ np.tensordot(normal_change, p.h, axes=(0, 0)) @ tangent_change
        h = 0.5 * (h + np.swapaxes(h, 1, 2))
        tangent, normal = tangent.copy(), normal.copy()
        for array in (tangent, normal, h):
            array.setflags(write=False)
        # frames were checked above; skip revalidation in the trial loop
        return PointData.model_construct(space=p.space, m=p.m, k=p.k, tangent=tangent, normal=normal, h=h)

    def build_b1(self, p: PointData, diagonalize: bool = False) -> PointData:
        """
        Rotate the normal frame so that its first vector is H/|H|.

        The remaining normal vectors come from Gram-Schmidt on the old normals
        projected off H, skipping the old normal with the largest H-component.

        Args:
            p: Point data
            diagonalize: Also rotate the tangent frame to diagonalize h^1

        Returns:
            Equivalent point with tr h^1 = |H| and tr h^alpha = 0 for alpha >= 2

        Raises:
            UnsupportedOperationError: If H vanishes
        """
        mean = p.mean_curvature
        norm = float(np.linalg.norm(mean))
        if norm <= self.tolerance:
            raise UnsupportedOperationError(f"no B1 frame at a point with H = 0 (|H| = {norm:.3e})")

        direction = mean / norm
        first = p.mean_curvature_vector / norm
        dropped = int(np.argmax(np.abs(direction)))
        vectors = [first]
        for alpha in range(p.k):
            if alpha == dropped:
                continue
            candidate = p.normal[alpha].copy()
            for chosen in vectors:
                candidate -= np.dot(candidate, chosen) * chosen
            vectors.append(candidate / np.linalg.norm(candidate))
        normal = np.vstack(vectors)

        tangent = np.array(p.tangent)
        if diagonalize:
            _, eigenvectors = np.linalg.eigh(np.einsum("a,aij->ij", direction, p.h))
            tangent = eigenvectors.T @ p.tangent

        logger.debug(f"B1 frame built for (m, k) = ({p.m}, {p.k}), |H| = {norm:.6g}")
        return self.reexpress(p, tangent, normal)

    def build_b2(self, p: PointData) -> Tuple[PointData, KahlerAngles]:
        """
        Build a J-adapted frame putting phi(X, Y) = <JX, Y> in canonical form.

        The normal space is reduced by greedy deflation: on the remaining normal
        subspace the top singular pair of phi gives e_{m+2r-1}, e_{m+2r} and
        nu_r. Tangent partners are the tangential parts of J e_alpha divided
        by tau_r. When nu_r is within the degenerate threshold of 1 the first
        partner T is the normalized tangential part of J e_alpha, or any
        admissible unit tangent vector once that part is rounding noise, and
        the second partner is the normalized tangential part of -JT. The rest
        of the tangent space is completed by pairs (e, Je).

        Args:
            p: Point data on CP^n with k <= m

        Returns:
            The point re-expressed in the B2 frame and its Kähler angles

        Raises:
            UnsupportedOperationError: If k > m or the space is not CP^n
            FrameConstructionError: If the frame cannot be orthonormalized
        """
        if p.k > p.m:
            raise UnsupportedOperationError(f"B2 frames need k <= m, got (m, k) = ({p.m}, {p.k})")
        jmat = self.geometry.complex_structure(p.space)
        phi = p.normal @ jmat.T @ p.normal.T

        pairs: List[Tuple[np.ndarray, np.ndarray, float]] = []
        basis = np.eye(p.k)
        while basis.shape[1] >= 2:
            block = basis.T @ phi @ basis
            _, eigenvectors = np.linalg.eigh(block.T @ block)
            top = eigenvectors[:, -1]
            image = block.T @ top
            nu = float(np.linalg.norm(image))
            partner = image / nu if nu >= 1e-12 else eigenvectors[:, -2]
            pairs.append((basis @ top, basis @ partner, min(nu, 1.0)))
            basis = basis @ null_space(np.vstack([top, partner]))
        tail = basis[:, 0] if basis.shape[1] == 1 else None

        normal_rows: List[np.ndarray] = []
        for x, y, _ in pairs:
            normal_rows.extend([x @ p.normal, y @ p.normal])
        if tail is not None:
            normal_rows.append(tail @ p.normal)
        normal = np.vstack(normal_rows)

        projector = p.tangent.T @ p.tangent
        tangential_j = (projector @ jmat @ normal.T).T
        partners: List[np.ndarray] = []
        taus: List[float] = []
        nus: List[float] = []
        for r, (_, _, nu) in enumerate(pairs):
            first, second = tangential_j[2 * r], tangential_j[2 * r + 1]
            if 1.0 - nu < self.degenerate_threshold:
                # tau may be tiny but nonzero: follow P_T J e_alpha while it is resolvable
                others = np.delete(tangential_j, [2 * r, 2 * r + 1], axis=0)
                vector = self._orthonormalize(first, list(orth(others.T).T) + partners if others.size else partners)
                if vector is None:
                    vector = self._free_tangent_vector(p.tangent, np.vstack([tangential_j] + partners))
                    tau, nu = 0.0, 1.0
                else:
                    tau = float(np.linalg.norm(first))
                companion = self._orthonormalize(-(projector @ jmat @ vector), partners + [vector])
                if companion is None:
                    raise FrameConstructionError("J-partner of a degenerate Kähler pair left the tangent space", 1.0 / PARTNER_FLOOR)
                partners.extend([vector, companion])
                taus.append(tau)
                nus.append(nu)
            else:
                tau = float(np.linalg.norm(first))
                partners.extend([first / tau, second / float(np.linalg.norm(second))])
                taus.append(tau)
                nus.append(nu)
        if tail is not None:
            partners.append(tangential_j[-1] / float(np.linalg.norm(tangential_j[-1])))

        tangent_rows = partners + self._complete_j_pairs(p.tangent, partners, jmat)
        tangent = np.vstack(tangent_rows)

        frame = np.vstack([tangent, normal])
        deviation = float(np.max(np.abs(frame @ frame.T - np.eye(frame.shape[0]))))
        if deviation > self.tolerance:
            raise FrameConstructionError(
                f"B2 frame is not orthonormal (Gram deviation {deviation:.3e})",
                float(np.linalg.cond(frame)),
            )

        angles = KahlerAngles(taus=taus, nus=nus, odd_tail=tail is not None)
        logger.debug(f"B2 frame built for (m, k) = ({p.m}, {p.k}), nu = {nus}")
        return self.reexpress(p, tangent, normal), angles

    @staticmethod
    def _orthonormalize(vector: np.ndarray, chosen: Sequence[np.ndarray]) -> Optional[np.ndarray]:
        """Gram-Schmidt against orthonormal ``chosen``; None when nothing above rounding level is left."""
        residual = np.array(vector, dtype=float)
        for row in chosen:
            residual -= np.dot(residual, row) * row
        norm = float(np.linalg.norm(residual))
        if norm <= PARTNER_FLOOR:
            return None
        return residual / norm

    def _free_tangent_vector(self, tangent: np.ndarray, constraints: np.ndarray) -> np.ndarray:
        coordinates = null_space(constraints @ tangent.T)
        if coordinates.shape[1] == 0:
            raise FrameConstructionError("no tangent vector left for a degenerate Kähler pair", float(np.linalg.cond(constraints)))
        return coordinates[:, 0] @ tangent

    @staticmethod
    def _complete_j_pairs(tangent: np.ndarray, partners: List[np.ndarray], jmat: np.ndarray) -> List[np.ndarray]:
        """Orthonormal pairs (e, Je) spanning the tangent complement of the partners."""
        rows: List[np.ndarray] = []
        chosen = list(partners)
        while len(chosen) < tangent.shape[0]:
            coordinates = null_space(np.vstack(chosen) @ tangent.T) if chosen else np.eye(tangent.shape[0])
            vector = coordinates[:, 0] @ tangent
            rows.extend([vector, jmat @ vector])
            chosen.extend([vector, jmat @ vector])
        return rows

    # ------------------------------------------------------------------
    # Invariants of J along the submanifold
    # ------------------------------------------------------------------

    def b2_residuals(self, p: PointData, angles: KahlerAngles) -> Dict[str, float]:
        """
        Largest componentwise residual of each B2 relation on a point already in B2 form.

        Returns:
            Residuals keyed by relation: base01, base02, base03 and odd_tail
        """
        jmat = self.geometry.complex_structure(p.space)
        tangent, normal, m = p.tangent, p.normal, p.m
        residuals = {"base01": 0.0, "base02": 0.0, "base03": 0.0, "odd_tail": 0.0}
        for r, (tau, nu) in enumerate(zip(angles.taus, angles.nus)):
            e_odd, e_even = tangent[2 * r], tangent[2 * r + 1]
            n_odd, n_even = normal[2 * r], normal[2 * r + 1]
            residuals["base01"] = max(
                residuals["base01"],
                float(np.max(np.abs(jmat @ n_odd - tau * e_odd - nu * n_even))),
                float(np.max(np.abs(jmat @ n_even - tau * e_even + nu * n_odd))),
            )
            residuals["base03"] = max(
                residuals["base03"],
                float(np.max(np.abs(jmat @ e_odd + nu * e_even + tau * n_odd))),
                float(np.max(np.abs(jmat @ e_even - nu * e_odd + tau * n_even))),
            )
        if angles.odd_tail:
            residuals["odd_tail"] = float(np.max(np.abs(jmat @ normal[-1] - tangent[p.k - 1])))
        for i in range(p.k, m - 1, 2):
            residuals["base02"] = max(residuals["base02"], float(np.max(np.abs(jmat @ tangent[i] - tangent[i + 1]))))
        return residuals

    def omega_norm2(self, p: PointData) -> OmegaNorms:
        """
        |omega|^2 by two routes: curvature contraction over the B2 frame and 18 sum tau^2 nu^2.

        Returns:
            OmegaNorms with the Kähler angles used
        """
        b2_point, angles = self.build_b2(p)
        kahler = self.geometry.kahler_matrix(p.space, b2_point.frame)
        m = p.m
        # sum_j R(e_alpha, e_j, e_i, e_j) = -3c (w_NT w_T)_{alpha i}
        omega = -3.0 * p.space.c * kahler[m:, :m] @ kahler[:m, :m]
        direct = float(np.sum(omega ** 2))
        return OmegaNorms(direct=direct, closed_form=angles.omega_closed_form, angles=angles)

    def pft_norms(self, p: PointData) -> PFTNorms:
        """
        Squared norms of P, t and FP, where JX = PX + FX on tangent and JV = tV + fV on normal vectors.
        """
        jmat = self.geometry.complex_structure(p.space)
        j_tangent = p.tangent @ jmat.T
        j_normal = p.normal @ jmat.T
        tangent_part = j_tangent @ p.tangent.T
        normal_part = j_tangent @ p.normal.T
        return PFTNorms(
            P2=float(np.sum(tangent_part ** 2)),
            t2=float(np.sum((j_normal @ p.tangent.T) ** 2)),
            FP2=float(np.sum((tangent_part @ normal_part) ** 2)),
        )

    # ------------------------------------------------------------------
    # Generators
    # ------------------------------------------------------------------

    def check_admissible(self, m: int, k: int) -> int:
        """
        Validate (m, k) against the dimension hypotheses.

        Returns:
            The complex dimension n = (m + k) / 2

        Raises:
            InadmissibleDimensionsError: With the violated bound in the message
        """
        issue = admissibility_issue(m, k)
        if issue:
            raise InadmissibleDimensionsError(issue)
        return (m + k) // 2

    def random_point(
        self,
        m: int,
        k: int,
        seed: SeedLike,
        margin: float = 0.1,
        zero_mean: bool = False,
        allow_inadmissible: bool = False,
        c: float = 1.0,
    ) -> PointData:
        """
        Seeded random point satisfying |A|^2 <= (1 - margin)(|H|^2/(m-1) + b0).

        Frames are a Haar-random rotation of the coordinate frame. The trace part
        and the traceless part of h are drawn separately and scaled so that the
        pinching bound holds with the requested relative margin.

        Args:
            m: Submanifold dimension
            k: Codimension
            seed: Integer seed or SeedSequence
            margin: Relative margin in (0, 1]
            zero_mean: Force H = 0
            allow_inadmissible: Skip the dimension check (negative tests)
            c: Curvature scale of the ambient CP^n

        Returns:
            Pinched point data

        Raises:
            InadmissibleDimensionsError: If (m, k) is not admissible
            InfeasibleConstraintError: If no h can satisfy the bound
        """
        if (m + k) % 2 or m < 2 or k < 1:
            raise InadmissibleDimensionsError(f"(m, k) = ({m}, {k}): need m >= 2, k >= 1 and m + k even (m + k = 2n)")
        if not allow_inadmissible:
            self.check_admissible(m, k)
        if not 0.0 < margin <= 1.0:
            raise ValueError(f"margin must lie in (0, 1], got {margin}")
        space = AmbientSpace(kind=SpaceKind.COMPLEX_PROJECTIVE, n=(m + k) // 2, c=c)
        rng = np.random.default_rng(seed)
        rotation = ortho_group.rvs(dim=space.realdim, random_state=rng)
        h = self._pinched_h(m, k, rng, margin, zero_mean, c)
        return PointData(space=space, m=m, k=k, tangent=rotation[:m], normal=rotation[m:], h=h)

    def point_with_angles(
        self,
        m: int,
        k: int,
        taus: Sequence[float],
        seed: SeedLike,
        margin: float = 0.1,
    ) -> PointData:
        """
        Seeded random point whose normal space has prescribed Kähler angles.

        The normal pair r is spanned by E_a and nu_r JE_a + tau_r E_b for
        coordinate vectors chosen so that different pairs do not interact; the
        configuration is then moved by a random unitary transformation, which
        preserves the angles.

        Args:
            m: Submanifold dimension (k <= m)
            k: Codimension
            taus: tau_r in [0, 1] for r = 1..floor(k/2)
            seed: Integer seed or SeedSequence
            margin: Relative pinching margin of the random h

        Returns:
            Point data with the requested angles
        """
        if len(taus) != k // 2:
            raise ValueError(f"expected {k // 2} values of tau for k = {k}, got {len(taus)}")
        if k > m or (m + k) % 2:
            raise UnsupportedOperationError(f"prescribed angles need k <= m and m + k even, got ({m}, {k})")
        dim = m + k
        identity = np.eye(dim)
        rows: List[np.ndarray] = []
        for r, tau in enumerate(taus):
            if not 0.0 <= tau <= 1.0:
                raise ValueError(f"tau must lie in [0, 1], got {tau}")
            nu = float(np.sqrt(1.0 - tau * tau))
            spare = dim - 2 - 2 * r
            rows.append(identity[2 * r])
            rows.append(nu * identity[2 * r + 1] + tau * identity[spare])
        if k % 2:
            rows.append(identity[k - 1])
        normal = np.vstack(rows)

        rng = np.random.default_rng(seed)
        unitary = unitary_group.rvs(dim // 2, random_state=rng)
        real_unitary = np.zeros((dim, dim))
        real_unitary[0::2, 0::2] = unitary.real
        real_unitary[0::2, 1::2] = -unitary.imag
        real_unitary[1::2, 0::2] = unitary.imag
        real_unitary[1::2, 1::2] = unitary.real
        normal = normal @ real_unitary.T
        tangent = ortho_group.rvs(dim=m, random_state=rng) @ null_space(normal).T if m > 1 else null_space(normal).T
        h = self._pinched_h(m, k, rng, margin, False, 1.0)
        space = AmbientSpace(kind=SpaceKind.COMPLEX_PROJECTIVE, n=dim // 2)
        return PointData(space=space, m=m, k=k, tangent=tangent, normal=normal, h=h)

    def _pinched_h(
        self,
        m: int,
        k: int,
        rng: np.random.Generator,
        margin: float,
        zero_mean: bool,
        c: float,
    ) -> np.ndarray:
        a0 = 1.0 / (m - 1)
        b0 = c * (2.0 if k == 1 else (m - 3.0 - 4.0 * k) / m)
        keep = 1.0 - margin
        slope = keep * a0 - 1.0 / m

        if zero_mean:
            if b0 <= 0.0:
                raise InfeasibleConstraintError(f"H = 0 points need b0 > 0, got b0 = {b0:g} for (m, k) = ({m}, {k})")
            h2 = 0.0
        elif slope > 0.0:
            h2 = max(0.0, -keep * b0 / slope) + rng.exponential(scale=10.0 * m)
        else:
            if keep * b0 < 0.0 or (keep * b0 == 0.0 and slope == 0.0):
                raise InfeasibleConstraintError(
                    f"margin {margin:g} leaves no room for |A|^2 <= (1 - margin)(a0|H|^2 + b0) with b0 = {b0:g}"
                )
            h2 = rng.exponential(scale=10.0 * m) if slope == 0.0 else rng.uniform() * keep * b0 / (-slope)
        bound = keep * b0 + slope * h2
        if bound < 0.0:
            raise InfeasibleConstraintError(f"pinching bound is negative ({bound:g}) for (m, k) = ({m}, {k})")
        traceless_norm2 = rng.uniform() * bound

        raw = rng.standard_normal((k, m, m))
        traceless = 0.5 * (raw + np.swapaxes(raw, 1, 2))
        traceless -= np.einsum("a,ij->aij", np.trace(traceless, axis1=1, axis2=2) / m, np.eye(m))
        traceless /= np.linalg.norm(traceless)
        direction = rng.standard_normal(k)
        direction /= np.linalg.norm(direction)
        trace_part = np.einsum("a,ij->aij", np.sqrt(h2) * direction / m, np.eye(m))
        return np.sqrt(traceless_norm2) * traceless + trace_part
