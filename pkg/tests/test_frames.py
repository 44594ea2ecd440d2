"""
Tests for adapted frames, Kähler angles and the seeded pinched-point generators.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lab import InadmissibleDimensionsError, UnsupportedOperationError
from schemas import AmbientSpace, KahlerAngles, PointData
from tools.frames import FramesTool


class TestGenerators:
    """random_point and point_with_angles."""

    @pytest.fixture
    def frames(self):
        return FramesTool()

    def test_admissible_dimensions(self, frames):
        assert frames.check_admissible(5, 1) == 3
        assert frames.check_admissible(12, 2) == 7

    def test_inadmissible_codimension_cites_bound(self, frames):
        with pytest.raises(InadmissibleDimensionsError, match=r"k < \(2n-3\)/5"):
            frames.check_admissible(11, 3)

    def test_odd_real_dimension_rejected(self, frames):
        with pytest.raises(InadmissibleDimensionsError, match="even"):
            frames.random_point(6, 1, seed=0)

    def test_inadmissible_allowed_for_negative_tests(self, frames):
        with pytest.raises(InadmissibleDimensionsError, match="n >= 3"):
            frames.random_point(3, 1, seed=0)
        point = frames.random_point(3, 1, seed=0, allow_inadmissible=True)
        assert (point.m, point.k) == (3, 1)

    def test_same_seed_same_point(self, frames):
        first = frames.random_point(12, 2, seed=np.random.SeedSequence(9, spawn_key=(0, 3, 0)))
        second = frames.random_point(12, 2, seed=np.random.SeedSequence(9, spawn_key=(0, 3, 0)))
        assert np.array_equal(first.h, second.h)
        assert np.array_equal(first.frame, second.frame)

    def test_different_trials_differ(self, frames):
        first = frames.random_point(5, 1, seed=np.random.SeedSequence(9, spawn_key=(0, 0, 0)))
        second = frames.random_point(5, 1, seed=np.random.SeedSequence(9, spawn_key=(0, 1, 0)))
        assert not np.array_equal(first.h, second.h)

    @pytest.mark.parametrize("m,k", [(5, 1), (13, 1), (12, 2), (27, 3)])
    def test_points_are_pinched_with_margin(self, frames, m, k):
        b0 = 2.0 if k == 1 else (m - 3.0 - 4.0 * k) / m
        for seed in range(10):
            point = frames.random_point(m, k, seed=seed, margin=0.1)
            assert point.A2 <= 0.9 * (point.H2 / (m - 1) + b0) * (1.0 + 1e-12)

    def test_zero_mean_point(self, frames):
        point = frames.random_point(12, 2, seed=4, zero_mean=True)
        assert point.H2 < 1e-24

    def test_frames_are_orthonormal(self, frames):
        point = frames.random_point(16, 2, seed=2)
        np.testing.assert_allclose(point.frame @ point.frame.T, np.eye(18), atol=1e-12)

    def test_prescribed_angles_are_recovered(self, frames):
        point = frames.point_with_angles(12, 2, [0.3], seed=1)
        _, angles = frames.build_b2(point)
        assert angles.taus[0] == pytest.approx(0.3, abs=1e-8)
        assert angles.nus[0] == pytest.approx(np.sqrt(1.0 - 0.09), abs=1e-8)

    def test_prescribed_angle_count_checked(self, frames):
        with pytest.raises(ValueError, match="expected 1"):
            frames.point_with_angles(12, 2, [0.3, 0.4], seed=1)


class TestB1Frame:
    """The frame whose first normal is H/|H|."""

    @pytest.fixture
    def frames(self):
        return FramesTool()

    def test_mean_curvature_aligned(self, frames):
        point = frames.random_point(16, 2, seed=3)
        b1 = frames.build_b1(point)
        assert b1.mean_curvature[0] == pytest.approx(np.sqrt(point.H2), rel=1e-10)
        assert np.max(np.abs(b1.mean_curvature[1:])) < 1e-10 * max(1.0, np.sqrt(point.H2))

    def test_first_normal_is_unit_mean_curvature_vector(self, frames):
        point = frames.random_point(12, 2, seed=6)
        b1 = frames.build_b1(point)
        expected = point.mean_curvature_vector / np.linalg.norm(point.mean_curvature)
        assert np.allclose(b1.normal[0], expected, atol=1e-12)
        assert np.allclose(b1.mean_curvature_vector, point.mean_curvature_vector, atol=1e-10)

    def test_norms_preserved(self, frames):
        point = frames.random_point(12, 2, seed=8)
        b1 = frames.build_b1(point, diagonalize=True)
        assert b1.A2 == pytest.approx(point.A2, rel=1e-12)
        assert b1.H2 == pytest.approx(point.H2, rel=1e-12)
        off_diagonal = b1.h[0] - np.diag(np.diag(b1.h[0]))
        assert np.max(np.abs(off_diagonal)) < 1e-10 * max(1.0, np.sqrt(point.A2))

    def test_zero_mean_has_no_b1_frame(self, frames):
        point = frames.random_point(12, 2, seed=4, zero_mean=True)
        with pytest.raises(UnsupportedOperationError, match="H = 0"):
            frames.build_b1(point)


class TestB2Frame:
    """The J-adapted frame and the invariants of J."""

    @pytest.fixture
    def frames(self):
        return FramesTool()

    @pytest.mark.parametrize("m,k", [(5, 1), (12, 2), (27, 3)])
    def test_relations_hold(self, frames, m, k):
        point = frames.random_point(m, k, seed=21)
        b2, angles = frames.build_b2(point)
        residuals = frames.b2_residuals(b2, angles)
        assert max(residuals.values()) < 1e-10
        assert b2.A2 == pytest.approx(point.A2, rel=1e-12)
        assert angles.odd_tail == (k % 2 == 1)

    @pytest.mark.parametrize("tau", [0.0, 1e-6, 1e-4])
    def test_nearly_complex_normal_plane(self, frames, tau):
        point = frames.point_with_angles(12, 2, [tau], seed=0)
        b2, angles = frames.build_b2(point)
        assert np.allclose(b2.frame @ b2.frame.T, np.eye(14), atol=1e-12)
        assert max(frames.b2_residuals(b2, angles).values()) < 1e-10
        assert angles.taus[0] == pytest.approx(tau, rel=1e-6, abs=1e-12)

    def test_nearly_complex_pair_next_to_generic_pair(self, frames):
        point = frames.point_with_angles(16, 4, [1e-5, 0.6], seed=3)
        b2, angles = frames.build_b2(point)
        assert max(frames.b2_residuals(b2, angles).values()) < 1e-10
        assert sorted(angles.taus) == pytest.approx([1e-5, 0.6], rel=1e-6)

    def test_omega_two_routes_agree(self, frames):
        point = frames.random_point(16, 2, seed=6)
        norms = frames.omega_norm2(point)
        assert norms.direct == pytest.approx(norms.closed_form, rel=1e-9, abs=1e-10)

    def test_omega_closed_form_from_angles(self):
        angles = KahlerAngles(taus=[0.6], nus=[0.8])
        assert angles.omega_closed_form == pytest.approx(18.0 * 0.2304)

    def test_angle_pairs_validated(self):
        with pytest.raises(ValueError, match="tau"):
            KahlerAngles(taus=[0.6], nus=[0.6])

    def test_codimension_above_dimension_unsupported(self, frames):
        space = AmbientSpace.cp(2)
        identity = np.eye(space.realdim)
        point = PointData(space=space, m=1, k=3, tangent=identity[:1], normal=identity[1:], h=np.zeros((3, 1, 1)))
        with pytest.raises(UnsupportedOperationError, match="k <= m"):
            frames.build_b2(point)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=2 ** 32 - 1))
    def test_p_and_t_add_up_to_m(self, seed):
        frames = FramesTool()
        point = frames.random_point(12, 2, seed=seed)
        norms = frames.pft_norms(point)
        assert norms.P2 + norms.t2 == pytest.approx(12.0, rel=1e-12)
        assert norms.FP2 == pytest.approx(frames.omega_norm2(point).direct / 9.0, rel=1e-9, abs=1e-10)

    def test_execute_dispatch(self, frames):
        assert frames.execute("check_admissible", m=5, k=1) == 3
        with pytest.raises(ValueError, match="Unknown operation"):
            frames.execute("parallel_transport")
