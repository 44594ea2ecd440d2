"""
Tests for pointwise curvature scalars, reaction terms and the algebraic estimates.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lab import InfeasibleConstraintError, UnsupportedOperationError
from tools.curvature_algebra import CurvatureAlgebraTool
from tools.frames import FramesTool


class TestPinchParams:
    """Closed-form pinching constants."""

    @pytest.fixture
    def curvature(self):
        return CurvatureAlgebraTool()

    def test_hypersurface_constants(self, curvature):
        params = curvature.pinch_params(5, 1)
        assert params.a == pytest.approx(0.25)
        assert params.b == pytest.approx(2.0)
        assert params.alpha == pytest.approx(0.05)
        assert params.beta == pytest.approx(2.0)

    def test_codimension_two_constants(self, curvature):
        params = curvature.pinch_params(12, 2)
        assert params.a == pytest.approx(1.0 / 11.0)
        assert params.b == pytest.approx(1.0 / 12.0)
        assert params.alpha == pytest.approx(1.0 / 216.0)
        assert params.beta == pytest.approx(1.0 / 12.0)

    def test_strictness_shrinks_b(self, curvature):
        params = curvature.pinch_params(12, 2, eps=0.5)
        assert params.a == pytest.approx(1.0 / 11.5)
        assert params.b == pytest.approx(1.0 / 24.0)

    def test_small_dimension_rejected(self, curvature):
        with pytest.raises(ValueError, match="m > 4k \\+ 3"):
            curvature.pinch_params(10, 2)


class TestScalars:
    """Traceless split, R1, R2 and Z."""

    @pytest.fixture
    def curvature(self):
        return CurvatureAlgebraTool()

    @pytest.fixture
    def frames(self, curvature):
        return FramesTool(curvature.geometry)

    def test_traceless_split_adds_up(self, curvature, frames):
        point = frames.random_point(16, 2, seed=5)
        scalars = curvature.traceless_split(point)
        assert scalars.Ao2 == pytest.approx(scalars.A2 - scalars.H2 / 16, rel=1e-10)
        assert scalars.Ao2 == pytest.approx(scalars.h1o2 + scalars.hminus2, rel=1e-10)

    def test_zero_mean_split(self, curvature, frames):
        point = frames.random_point(12, 2, seed=5, zero_mean=True)
        scalars = curvature.traceless_split(point)
        assert scalars.h1o2 == 0.0
        assert scalars.hminus2 == scalars.Ao2

    def test_r2_closed_form(self, curvature, frames):
        point = frames.random_point(27, 3, seed=12)
        _, r2 = curvature.r1_r2(point)
        assert r2 == pytest.approx(curvature.r2_closed_form(point), rel=1e-10)

    def test_umbilic_point_has_zero_z(self, curvature, frames):
        point = frames.random_point(5, 1, seed=0)
        umbilic = point.with_h(1.5 * np.eye(5)[None, :, :])
        assert abs(curvature.simons_z(umbilic)) < 1e-10

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=2 ** 32 - 1))
    def test_z_eigenvalue_form_for_hypersurfaces(self, seed):
        curvature = CurvatureAlgebraTool()
        point = FramesTool(curvature.geometry).random_point(7, 1, seed=seed)
        z = curvature.simons_z(point)
        assert z == pytest.approx(curvature.simons_z_eigen(point), rel=1e-9, abs=1e-9)

    def test_z_eigenvalue_form_needs_hypersurface(self, curvature, frames):
        with pytest.raises(UnsupportedOperationError, match="k = 1"):
            curvature.simons_z_eigen(frames.random_point(12, 2, seed=1))

    def test_pinch_quantities(self, curvature, frames):
        params = curvature.pinch_params(5, 1)
        point = frames.random_point(5, 1, seed=3)
        scalars = curvature.pinch_quantities(point, params)
        assert scalars.Q == pytest.approx(point.A2 - 0.25 * point.H2 - 2.0)
        assert scalars.W == pytest.approx(0.05 * point.H2 + 2.0)
        assert scalars.Q < 0.0
        assert scalars.amw_margin > 0.0


class TestGauss:
    """Intrinsic sectional curvature by the Gauss equation."""

    @pytest.fixture
    def curvature(self):
        return CurvatureAlgebraTool()

    def test_matrix_matches_pairwise(self, curvature):
        point = FramesTool(curvature.geometry).random_point(12, 2, seed=2)
        matrix = curvature.gauss_matrix(point)
        assert matrix[0, 1] == pytest.approx(curvature.gauss_sectional(point, 0, 1), rel=1e-12)
        assert matrix[3, 7] == pytest.approx(curvature.gauss_sectional(point, 3, 7), rel=1e-12)

    def test_same_index_rejected(self, curvature):
        point = FramesTool(curvature.geometry).random_point(5, 1, seed=2)
        with pytest.raises(ValueError, match="distinct"):
            curvature.gauss_sectional(point, 2, 2)

    def test_principal_curvature_identity(self, curvature):
        point = FramesTool(curvature.geometry).random_point(9, 1, seed=4)
        sides = curvature.prop_alg_residual(point, 0, 1)
        assert sides["lhs"] == pytest.approx(sides["rhs"], rel=1e-10, abs=1e-10)


class TestEstimates:
    """Reaction terms and the R1/R2 bounds on pinched and Q = 0 points."""

    @pytest.fixture
    def curvature(self):
        return CurvatureAlgebraTool()

    @pytest.fixture
    def frames(self, curvature):
        return FramesTool(curvature.geometry)

    def test_first_estimate_holds(self, curvature, frames):
        params = curvature.pinch_params(12, 2)
        for seed in range(5):
            point = frames.random_point(12, 2, seed=seed)
            r1, r2 = curvature.r1_r2(point)
            bound = curvature.lest_first_bound(point, params.a)
            assert 2.0 * r1 - 2.0 * params.a * r2 <= bound + 1e-9 * max(1.0, abs(bound))

    def test_first_estimate_needs_mean_curvature(self, curvature, frames):
        point = frames.random_point(12, 2, seed=0, zero_mean=True)
        with pytest.raises(UnsupportedOperationError, match="H != 0"):
            curvature.lest_first_bound(point, 0.1)

    def test_q_zero_projection(self, curvature, frames):
        params = curvature.pinch_params(16, 2)
        point = curvature.q_zero_point(frames.random_point(16, 2, seed=7), params)
        q = curvature.pinch_quantities(point, params).Q
        assert abs(q) < 1e-10 * max(1.0, point.A2)

    def test_q_zero_projection_infeasible_for_umbilic(self, curvature, frames):
        params = curvature.pinch_params(5, 1)
        umbilic = frames.random_point(5, 1, seed=0).with_h(np.eye(5)[None, :, :])
        with pytest.raises(InfeasibleConstraintError):
            curvature.q_zero_point(umbilic, params)

    def test_hypersurface_reaction_matches_first_contraction(self, curvature, frames):
        point = frames.random_point(7, 1, seed=9)
        terms = curvature.reaction_terms(point, curvature.pinch_params(7, 1).a)
        assert terms.I == pytest.approx(curvature.hypersurface_reaction(point), rel=1e-9, abs=1e-9)

    def test_second_contraction_is_ricci_weighted(self, curvature, frames):
        point = frames.random_point(5, 1, seed=13)
        terms = curvature.reaction_terms(point, 0.25)
        assert terms.II == pytest.approx(16.0 * point.A2 - 4.0 * point.H2, rel=1e-10)

    @pytest.mark.parametrize("m,k", [(5, 1), (12, 2), (16, 2), (27, 3)])
    def test_contractions_match_full_curvature_tensor(self, curvature, frames, m, k):
        point = frames.random_point(m, k, seed=4)
        a = curvature.pinch_params(m, k).a
        tensor = curvature.geometry.frame_curvature(point.space, point.frame)
        h, mean = point.h, point.mean_curvature
        gram = np.einsum("aij,bij->ab", h, h)
        tangential, mixed, normal_pair = tensor[:m, :m, :m, :m], tensor[:m, m:, :m, m:], tensor[:m, :m, m:, m:]
        first = 4.0 * np.einsum("ipjq,apq,aij->", tangential, h, h) - 4.0 * np.einsum("sjsp,api,aij->", tangential, h, h)
        second = 2.0 * np.einsum("sasb,ab->", mixed, gram) - 2.0 * a * np.einsum("sasb,a,b->", mixed, mean, mean)
        third = -8.0 * np.einsum("jpab,aip,bij->", normal_pair, h, h)

        terms = curvature.reaction_terms(point, a)
        scale = max(1.0, point.A2 ** 2)
        assert terms.I == pytest.approx(first, abs=1e-10 * scale)
        assert terms.II == pytest.approx(second, abs=1e-10 * scale)
        assert terms.III == pytest.approx(third, abs=1e-10 * scale)

    def test_omega_matches_full_curvature_tensor(self, curvature, frames):
        point = frames.random_point(16, 2, seed=8)
        b2, _ = frames.build_b2(point)
        tensor = curvature.geometry.frame_curvature(point.space, b2.frame)
        reference = float(np.sum(np.einsum("ajij->ia", tensor[16:, :16, :16, :16]) ** 2))
        assert frames.omega_norm2(point).direct == pytest.approx(reference, rel=1e-10, abs=1e-12)

    def test_execute_dispatch(self, curvature):
        assert curvature.execute("pinch_params", m=5, k=1).b == pytest.approx(2.0)
        with pytest.raises(ValueError, match="Unknown operation"):
            curvature.execute("scalar_curvature")
