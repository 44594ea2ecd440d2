"""
Tests for geodesic spheres, their pinched radii and the radius ODE.
"""

import math

import pytest

from lab import UnsupportedOperationError
from schemas import AmbientSpace, SphereModel, StepPolicy
from tools.equivariant_flow import EquivariantFlowTool


class TestSphereData:
    """Principal curvatures and their realization as point data."""

    @pytest.fixture
    def flow(self):
        return EquivariantFlowTool()

    def test_radius_bounds(self):
        with pytest.raises(ValueError, match="radius"):
            SphereModel(space=AmbientSpace.cp(3), u=2.0)

    def test_multiplicities(self):
        assert SphereModel(space=AmbientSpace.cp(3), u=0.5).m == 5
        assert SphereModel(space=AmbientSpace.hp(3), u=0.5).m == 11

    def test_point_data_matches_model(self, flow):
        model = SphereModel(space=AmbientSpace.cp(4), u=0.6)
        point = flow.sphere_point_data(model)
        assert point.A2 == pytest.approx(model.A2, rel=1e-12)
        assert point.H2 == pytest.approx(model.H ** 2, rel=1e-12)
        scalars = flow.curvature.traceless_split(point)
        assert scalars.Ao2 == pytest.approx(model.Ao2, rel=1e-9, abs=1e-12)

    def test_hopf_direction_is_j_of_normal(self, flow):
        space = AmbientSpace.cp(3)
        point = flow.sphere_point_data(SphereModel(space=space, u=0.4))
        hopf = flow.geometry.apply_j(space, point.normal[0])
        assert abs(float(hopf @ point.tangent[0]) - 1.0) < 1e-15

    def test_quaternionic_point_data_unsupported(self, flow):
        with pytest.raises(UnsupportedOperationError):
            flow.sphere_point_data(SphereModel(space=AmbientSpace.hp(3), u=0.4))

    @pytest.mark.parametrize("space,factor", [(AmbientSpace.cp(3), 2.0), (AmbientSpace.hp(3), 2.5)])
    @pytest.mark.parametrize("u", [0.3, 0.7, 1.2])
    def test_closed_form_is_scaled_q(self, flow, space, factor, u):
        model = SphereModel(space=space, u=u)
        closed = flow.pinch_test_closed_form(model)
        q = flow.sphere_scalars(model).Q
        assert closed == pytest.approx(factor * q, rel=1e-9, abs=1e-9)


class TestPinchRange:
    """Pinched radii located by two routes."""

    @pytest.fixture
    def flow(self):
        return EquivariantFlowTool()

    def test_complex_projective_three(self, flow):
        report = flow.pinch_range(AmbientSpace.cp(3))
        assert len(report.intervals) == 1
        lower, upper = report.intervals[0]
        assert lower == 0.0
        assert upper == pytest.approx(1.0185, abs=1e-3)
        assert report.diagnostic is None

    def test_routes_agree(self, flow):
        report = flow.pinch_range(AmbientSpace.cp(5))
        assert len(report.boundaries) == len(report.cross_route_boundaries) >= 1
        for closed, pipeline in zip(report.boundaries, report.cross_route_boundaries):
            assert abs(closed - pipeline) < 1e-8

    def test_quaternionic_routes_agree(self, flow):
        report = flow.pinch_range(AmbientSpace.hp(3))
        assert report.intervals
        for closed, pipeline in zip(report.boundaries, report.cross_route_boundaries):
            assert abs(closed - pipeline) < 1e-8

    def test_strictness_shrinks_the_range(self, flow):
        loose = flow.pinch_range(AmbientSpace.cp(3)).intervals[0][1]
        strict = flow.pinch_range(AmbientSpace.cp(3), eps=0.3).intervals[0][1]
        assert strict < loose

    def test_pinched_grid_inside_range(self, flow):
        upper = flow.pinch_range(AmbientSpace.cp(3)).intervals[0][1]
        grid = flow.pinched_grid(AmbientSpace.cp(3), 5)
        assert len(grid) == 5
        assert all(0.0 < u < upper for u in grid)
        assert grid == sorted(grid)


class TestIntegration:
    """Radius ODE runs."""

    @pytest.fixture
    def flow(self):
        return EquivariantFlowTool()

    def test_pinched_sphere_becomes_extinct(self, flow):
        space = AmbientSpace.cp(3)
        trajectory = flow.integrate(space, 0.5)
        assert trajectory.extinct
        assert not trajectory.focal_collapse
        assert trajectory.extinction_time_extrapolated == pytest.approx(trajectory.extinction_time_quadrature, rel=1e-6)
        assert trajectory.volume_law_error < 1e-8
        assert trajectory.samples[0].u == 0.5
        assert all(s.Q < 0.0 for s in trajectory.samples)

    def test_invariance_record_passes(self, flow):
        record = flow.invariance_record(flow.integrate(AmbientSpace.cp(3), 0.5))
        assert record.passed
        assert record.final_roundness < 1e-6
        assert record.final_ratio == pytest.approx(1.0, abs=1e-6)

    def test_minimal_sphere_is_stationary(self, flow):
        policy = StepPolicy(t_max=1.0)
        trajectory = flow.integrate(AmbientSpace.cp(3), math.atan(math.sqrt(5.0)), policy=policy)
        assert trajectory.stationary
        assert [s.t for s in trajectory.samples] == [0.0, 1.0]

    def test_expanding_sphere_collapses_to_focal_set(self, flow):
        trajectory = flow.integrate(AmbientSpace.cp(3), 1.3)
        assert trajectory.focal_collapse
        assert not trajectory.extinct
        assert trajectory.samples[-1].u > 1.3

    def test_pinching_invariance_run(self, flow):
        space = AmbientSpace.cp(3)
        report = flow.pinching_invariance_run(space, flow.pinched_grid(space, 3))
        assert len(report.records) == 3
        assert report.passed

    def test_shadows_hold_down_to_extinction(self, flow):
        trajectory = flow.integrate(AmbientSpace.cp(3), 0.5)
        last = SphereModel(space=AmbientSpace.cp(3), u=trajectory.samples[-1].u)
        assert last.u < 1e-5
        assert all(shadow.holds for shadow in flow.evolution_shadows(last))

    @pytest.mark.slow
    def test_hundred_pinched_starts(self, flow):
        space = AmbientSpace.cp(3)
        report = flow.pinching_invariance_run(space, flow.pinched_grid(space, 100))
        assert len(report.records) == 100
        assert report.passed
        assert all(record.extinct and record.shadows_hold for record in report.records)


class TestEvolutionAndMinimal:
    """Evolution equations along exact solutions and the minimal sphere."""

    @pytest.fixture
    def flow(self):
        return EquivariantFlowTool()

    def test_second_order_agreement(self, flow):
        report = flow.evolution_check(AmbientSpace.cp(3), math.pi / 4.0, 1e-3)
        assert not report.flagged
        assert report.passed
        assert {entry.quantity for entry in report.entries} == {"H2", "A2", "Ao2", "H4"}
        by_name = {entry.quantity: entry for entry in report.entries}
        assert by_name["A2"].analytic == pytest.approx(64.0, rel=1e-10)
        assert by_name["H2"].analytic == pytest.approx(384.0, rel=1e-10)

    @pytest.mark.parametrize("u", [0.3, 0.9])
    def test_traceless_rate_matches_difference_of_rates(self, flow, u):
        model = SphereModel(space=AmbientSpace.cp(3), u=u)
        entries = {entry.quantity: entry.analytic for entry in flow.evolution_check(model.space, u).entries}
        assert entries["Ao2"] == pytest.approx(entries["A2"] - entries["H2"] / model.m, rel=1e-9, abs=1e-9)

    def test_traceless_rate_near_extinction(self, flow):
        model = SphereModel(space=AmbientSpace.cp(3), u=1e-6)
        shadow = next(s for s in flow.evolution_shadows(model) if s.name == "traceless_growth")
        assert shadow.lhs < 0.0
        assert shadow.lhs == pytest.approx(-2.0 * 4 * 1e-6 * model.H / 5, rel=1e-6)
        assert shadow.holds

    def test_tiny_step_is_flagged(self, flow):
        report = flow.evolution_check(AmbientSpace.cp(3), math.pi / 4.0, 1e-7)
        assert report.flagged
        assert "cancellation" in report.message

    def test_evolution_check_needs_complex_space(self, flow):
        with pytest.raises(UnsupportedOperationError):
            flow.evolution_check(AmbientSpace.hp(3), 0.5)

    def test_complex_minimal_sphere(self, flow):
        report = flow.minimal_sphere_check(AmbientSpace.cp(3))
        assert report.u_star == pytest.approx(math.atan(math.sqrt(5.0)), abs=1e-10)
        assert report.A2_at_u_star == pytest.approx(4.0, rel=1e-9)
        assert report.passed

    def test_quaternionic_minimal_sphere(self, flow):
        report = flow.minimal_sphere_check(AmbientSpace.hp(3))
        assert report.A2_at_u_star == pytest.approx(8.0, rel=1e-9)
        assert report.outside_pinch_range
