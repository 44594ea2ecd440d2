"""
Ambient geometry tool for the pinched flow lab.

This tool models KP^n(4c) at a single tangent space: the J-adapted
orthonormal coordinate frame, the Fubini-Study curvature tensor of CP^n,
sectional and Ricci curvatures, and the constants table shared by CP^n and HP^n.
"""

import logging
from typing import Any, Dict, Optional

import numpy as np

from lab import Tool, UnsupportedOperationError
from schemas import AmbientSpace, SpaceKind

logger = logging.getLogger(__name__)


class AmbientGeometryTool(Tool):
    """Pointwise curvature of complex projective space with the Fubini-Study metric."""

    def __init__(self, tolerance: float = 1e-9):
        """Initialize the ambient geometry tool with the orthonormality tolerance."""
        super().__init__("ambient_geometry", "Curvature of KP^n(4c) at one tangent space")
        self.tolerance = tolerance
        logger.info(f"Ambient geometry tool initialized (orthonormality tolerance {tolerance:g})")

    def execute(self, operation: str, **kwargs) -> Any:
        """Execute ambient geometry operations."""
        if operation == "apply_j":
            return self.apply_j(**kwargs)
        elif operation == "riemann":
            return self.riemann(**kwargs)
        elif operation == "sectional":
            return self.sectional(**kwargs)
        elif operation == "ricci":
            return self.ricci(**kwargs)
        elif operation == "ambient_constants":
            return self.ambient_constants(**kwargs)
        elif operation == "frame_curvature":
            return self.frame_curvature(**kwargs)
        else:
            raise ValueError(f"Unknown operation: {operation}")

    def complex_structure(self, space: AmbientSpace) -> np.ndarray:
        """
        Matrix of J in the coordinate frame: J e_{2i-1} = e_{2i}, J e_{2i} = -e_{2i-1}.

        Args:
            space: Complex projective space

        Returns:
            realdim x realdim skew orthogonal matrix
        """
        self._require_complex(space, "complex structure")
        dim = space.realdim
        jmat = np.zeros((dim, dim))
        even = np.arange(0, dim, 2)
        jmat[even + 1, even] = 1.0
        jmat[even, even + 1] = -1.0
        return jmat

    def apply_j(self, space: AmbientSpace, v: Any) -> np.ndarray:
        """Apply the complex structure to a coordinate vector."""
        vector = self._vector(space, v, "v")
        self._require_complex(space, "apply_j")
        result = np.empty_like(vector)
        result[0::2] = -vector[1::2]
        result[1::2] = vector[0::2]
        return result

    def kahler_form(self, space: AmbientSpace, x: Any, z: Any) -> float:
        """g(X, JZ)."""
        return float(np.dot(self._vector(space, x, "X"), self.apply_j(space, z)))

    def riemann(self, space: AmbientSpace, x: Any, y: Any, z: Any, w: Any) -> float:
        """
        Fubini-Study curvature R(X, Y, Z, W), normalized so that R(X, Y, X, Y) is the sectional curvature.

        Args:
            space: Complex projective space
            x, y, z, w: Coordinate vectors of length realdim

        Returns:
            c times the unit-scale curvature of CP^n
        """
        self._require_complex(space, "riemann")
        x, y, z, w = (self._vector(space, vec, name) for vec, name in ((x, "X"), (y, "Y"), (z, "Z"), (w, "W")))
        value = (
            np.dot(x, z) * np.dot(y, w) - np.dot(x, w) * np.dot(y, z)
            + self.kahler_form(space, x, z) * self.kahler_form(space, y, w)
            - self.kahler_form(space, x, w) * self.kahler_form(space, y, z)
            + 2.0 * self.kahler_form(space, x, y) * self.kahler_form(space, z, w)
        )
        return float(space.c * value)

    def sectional(self, space: AmbientSpace, x: Any, y: Any) -> float:
        """
        Sectional curvature c(1 + 3 g(X, JY)^2) of the plane spanned by orthonormal X, Y.

        Raises:
            ValueError: If X, Y are not orthonormal within tolerance
        """
        self._require_complex(space, "sectional")
        x = self._vector(space, x, "X")
        y = self._vector(space, y, "Y")
        gram = np.array([[x @ x, x @ y], [y @ x, y @ y]])
        deviation = float(np.max(np.abs(gram - np.eye(2))))
        if deviation > self.tolerance:
            raise ValueError(f"X and Y must be orthonormal (Gram deviation {deviation:.3e})")
        return float(space.c * (1.0 + 3.0 * self.kahler_form(space, x, y) ** 2))

    def ricci(self, space: AmbientSpace, x: Any) -> float:
        """Ricci curvature of a unit vector, traced over the coordinate frame."""
        self._require_complex(space, "ricci")
        x = self._vector(space, x, "X")
        norm = float(np.linalg.norm(x))
        if norm == 0.0:
            raise ValueError("Ricci curvature needs a nonzero vector")
        if abs(norm - 1.0) > self.tolerance:
            raise ValueError(f"X must be a unit vector, |X| = {norm!r}")
        basis = np.eye(space.realdim)
        return float(sum(self.riemann(space, x, e, x, e) for e in basis))

    def ambient_constants(self, space: AmbientSpace, m: Optional[int] = None) -> Dict[str, float]:
        """
        Constants table of KP^n(4c).

        Args:
            space: CP^n or HP^n
            m: Intended submanifold dimension (informational)

        Returns:
            rbar (Ricci curvature in the normal direction) and sectional bounds [c, 4c]
        """
        constants = {"rbar": space.einstein_constant, "kmin": space.c, "kmax": 4.0 * space.c}
        logger.debug(f"Ambient constants for {space.kind.value}^{space.n}(c={space.c}), m={m}: {constants}")
        return constants

    def kahler_matrix(self, space: AmbientSpace, frame: np.ndarray) -> np.ndarray:
        """
        omega[a, b] = <f_a, J f_b> for the rows of an orthonormal frame.

        In such a frame R_abcd = c(d_ac d_bd - d_ad d_bc + w_ac w_bd - w_ad w_bc + 2 w_ab w_cd),
        so every contraction of the curvature reduces to products of blocks of omega.
        """
        self._require_complex(space, "kahler_matrix")
        frame = np.asarray(frame, dtype=float)
        if frame.ndim != 2 or frame.shape[1] != space.realdim:
            raise ValueError(f"frame rows must have length {space.realdim}, got shape {frame.shape}")
        # J permutes coordinate pairs, so J f_b is a signed column swap of f_b
        rotated = np.empty_like(frame)
        rotated[:, 0::2] = -frame[:, 1::2]
        rotated[:, 1::2] = frame[:, 0::2]
        return frame @ rotated.T

    def frame_curvature(self, space: AmbientSpace, frame: np.ndarray) -> np.ndarray:
        """
        Curvature tensor expressed in an orthonormal frame.

        Dense realdim^4 array; the curvature contractions use ``kahler_matrix`` instead.

        Args:
            space: Complex projective space
            frame: Rows are orthonormal coordinate vectors

        Returns:
            Array R[a, b, c, d] = R(f_a, f_b, f_c, f_d)
        """
        frame = np.asarray(frame, dtype=float)
        gram = frame @ frame.T
        omega = self.kahler_matrix(space, frame)
        tensor = (
            np.einsum("ac,bd->abcd", gram, gram) - np.einsum("ad,bc->abcd", gram, gram)
            + np.einsum("ac,bd->abcd", omega, omega) - np.einsum("ad,bc->abcd", omega, omega)
            + 2.0 * np.einsum("ab,cd->abcd", omega, omega)
        )
        return space.c * tensor

    def _vector(self, space: AmbientSpace, v: Any, name: str) -> np.ndarray:
        vector = np.asarray(v, dtype=float)
        if vector.shape != (space.realdim,):
            raise ValueError(f"{name} must have length {space.realdim}, got shape {vector.shape}")
        return vector

    @staticmethod
    def _require_complex(space: AmbientSpace, what: str) -> None:
        if space.kind != SpaceKind.COMPLEX_PROJECTIVE:
            raise UnsupportedOperationError(f"{what} is only available on CP^n, not {space.kind.value}^{space.n}")
