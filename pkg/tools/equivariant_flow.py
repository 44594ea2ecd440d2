"""
Equivariant flow tool for the pinched flow lab.

Geodesic spheres of KP^n(4c) stay geodesic spheres under mean curvature
flow, so the flow reduces to the radius ODE du/dt = -H(u). This tool
realizes the spheres as point data, locates the pinched radii, integrates
the ODE with the extinction floor, and checks the evolution equations and
their inequality shadows along the exact solutions.
"""

import logging
import math
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq

from lab import FlowIntegrationError, Tool, UnsupportedOperationError
from schemas import (
    AmbientSpace,
    CurvatureScalars,
    EvolutionEntry,
    EvolutionReport,
    FlowSample,
    InequalityShadow,
    InvarianceRecord,
    InvarianceReport,
    MinimalSphereReport,
    PinchParams,
    PinchRangeReport,
    PointData,
    SpaceKind,
    SphereModel,
    StepPolicy,
    Trajectory,
)
from tools.curvature_algebra import CurvatureAlgebraTool

logger = logging.getLogger(__name__)

# Finite differences below this step are dominated by cancellation
CANCELLATION_FLOOR = 1e-5
ORDER_PLATEAU = (1.9, 2.1)


class EquivariantFlowTool(Tool):
    """Mean curvature flow of geodesic spheres in CP^n and HP^n."""

    def __init__(
        self,
        curvature: Optional[CurvatureAlgebraTool] = None,
        policy: Optional[StepPolicy] = None,
        root_grid: int = 4000,
    ):
        """Initialize the equivariant flow tool."""
        super().__init__("equivariant_flow", "Radius ODE of geodesic spheres")
        self.curvature = curvature or CurvatureAlgebraTool()
        self.geometry = self.curvature.geometry
        self.policy = policy or StepPolicy()
        self.root_grid = root_grid
        logger.info(f"Equivariant flow tool initialized ({self.policy.method}, rtol {self.policy.rtol:g})")

    def execute(self, operation: str, **kwargs) -> Any:
        """Execute equivariant flow operations."""
        if operation == "sphere_point_data":
            return self.sphere_point_data(**kwargs)
        elif operation == "sphere_scalars":
            return self.sphere_scalars(**kwargs)
        elif operation == "pinch_test_closed_form":
            return self.pinch_test_closed_form(**kwargs)
        elif operation == "pinch_range":
            return self.pinch_range(**kwargs)
        elif operation == "integrate":
            return self.integrate(**kwargs)
        elif operation == "evolution_check":
            return self.evolution_check(**kwargs)
        elif operation == "pinching_invariance_run":
            return self.pinching_invariance_run(**kwargs)
        elif operation == "minimal_sphere_check":
            return self.minimal_sphere_check(**kwargs)
        else:
            raise ValueError(f"Unknown operation: {operation}")

    # ------------------------------------------------------------------
    # Sphere data
    # ------------------------------------------------------------------

    def sphere_params(self, space: AmbientSpace, eps: float = 0.0) -> PinchParams:
        """Hypersurface pinching constants of KP^n(4c), with rbar the Einstein constant."""
        m = SphereModel(space=space, u=0.5 * math.pi / (2.0 * math.sqrt(space.c))).m
        return self.curvature.pinch_params(m, 1, eps=eps, c=space.c, rbar=space.einstein_constant)

    def sphere_point_data(self, model: SphereModel) -> PointData:
        """
        Point data of a geodesic sphere in CP^n.

        The normal is the last coordinate vector, e_1 = J(normal) is the Hopf
        direction with principal curvature lambda1, and the remaining coordinate
        vectors carry lambda2.

        Raises:
            UnsupportedOperationError: On HP^n, which has scalar data only
        """
        space = model.space
        if space.kind != SpaceKind.COMPLEX_PROJECTIVE:
            raise UnsupportedOperationError(f"sphere frames are only realized on CP^n, not {space.kind.value}^{space.n}")
        dim = space.realdim
        identity = np.eye(dim)
        normal = identity[dim - 1]
        hopf = self.geometry.apply_j(space, normal)
        tangent = np.vstack([hopf, identity[: dim - 2]])
        h = np.diag([model.lambda1] + [model.lambda2] * model.mu2)[None, :, :]
        return PointData(space=space, m=model.m, k=1, tangent=tangent, normal=normal[None, :], h=h)

    def sphere_scalars(self, model: SphereModel, params: Optional[PinchParams] = None) -> CurvatureScalars:
        """|A|^2, |H|^2, |Å|^2 and the pinching quantities from the principal curvatures alone."""
        params = params or self.sphere_params(model.space)
        h2 = model.H ** 2
        w = params.alpha * h2 + params.beta
        return CurvatureScalars(
            A2=model.A2,
            H2=h2,
            Ao2=model.Ao2,
            Q=model.A2 - params.a * h2 - params.b,
            W=w,
            f_sigma=model.Ao2 / w ** (1.0 - params.sigma),
            amw_margin=2.0 * model.m * w - model.A2,
        )

    def pinch_test_closed_form(self, model: SphereModel, eps: float = 0.0) -> float:
        """
        Closed-form pinching test of a geodesic sphere; negative means pinched.

        At eps = 0 this is c(2(2n-3)cot^2(2x) - 2(n-1)cot^2(x)) on CP^n and
        c(3(4n-5)cot^2(2x) - 4(n-1)cot^2(x) + 4n - 5) on HP^n, with x = sqrt(c) u.
        For eps > 0 it is the eps-pinching Q times the factor that turns Q into
        the eps = 0 expression: n - 1 on CP^n, (2n - 1)/2 on HP^n.
        """
        space = model.space
        n, c = space.n, space.c
        complex_case = space.kind == SpaceKind.COMPLEX_PROJECTIVE
        if eps > 0.0:
            factor = (n - 1.0) if complex_case else (2.0 * n - 1.0) / 2.0
            return factor * self.sphere_scalars(model, self.sphere_params(space, eps)).Q
        x = math.sqrt(c) * model.u
        cot2 = 1.0 / math.tan(2.0 * x) ** 2
        cot1 = 1.0 / math.tan(x) ** 2
        if complex_case:
            return c * (2.0 * (2 * n - 3) * cot2 - 2.0 * (n - 1) * cot1)
        return c * (3.0 * (4 * n - 5) * cot2 - 4.0 * (n - 1) * cot1 + 4 * n - 5)

    def _pipeline_q(self, space: AmbientSpace, eps: float) -> Callable[[float], float]:
        params = self.sphere_params(space, eps)

        def q_of(u: float) -> float:
            model = SphereModel(space=space, u=u)
            if space.kind == SpaceKind.COMPLEX_PROJECTIVE:
                return self.curvature.pinch_quantities(self.sphere_point_data(model), params).Q
            return self.sphere_scalars(model, params).Q

        return q_of

    def pinch_range(self, space: AmbientSpace, eps: float = 0.0) -> PinchRangeReport:
        """
        Radii at which the closed-form pinching test is negative, as open intervals.

        Boundaries are bracketed on a uniform grid and refined with Brent's method;
        each one is located a second time as a sign change of Q from the point-data
        pipeline (scalar data on HP^n).
        """
        limit = math.pi / (2.0 * math.sqrt(space.c))
        grid = limit * (np.arange(self.root_grid) + 0.5) / self.root_grid

        def closed(u: float) -> float:
            return self.pinch_test_closed_form(SphereModel(space=space, u=u), eps)

        values = np.array([closed(u) for u in grid])
        q_of = self._pipeline_q(space, eps)
        boundaries: List[float] = []
        cross: List[float] = []
        for left, right, f_left, f_right in zip(grid[:-1], grid[1:], values[:-1], values[1:]):
            if np.sign(f_left) != np.sign(f_right):
                boundaries.append(brentq(closed, left, right, xtol=1e-14))
                cross.append(brentq(q_of, left, right, xtol=1e-14))

        intervals: List[Tuple[float, float]] = []
        pinched = values[0] < 0.0
        start = 0.0
        for boundary in boundaries:
            if pinched:
                intervals.append((start, boundary))
            start = boundary
            pinched = not pinched
        if pinched:
            intervals.append((start, limit))

        diagnostic = None
        if not boundaries:
            diagnostic = f"no sign change on (0, {limit:.12g}); test is {'negative' if values[0] < 0 else 'nonnegative'} throughout"
            logger.warning(f"pinch_range {space.kind.value}^{space.n}: {diagnostic}")

        witness = None
        quarter = limit / 2.0
        for lower, upper in intervals:
            low = max(lower, quarter)
            if low < upper:
                candidate = 0.5 * (low + upper)
                model = SphereModel(space=space, u=candidate)
                if model.lambda1 < 0.0 < model.lambda2 and closed(candidate) < 0.0:
                    witness = candidate
                    break

        logger.debug(f"pinch_range {space.kind.value}^{space.n}, eps={eps}: {intervals}")
        return PinchRangeReport(
            space=space, eps=eps, intervals=intervals, boundaries=boundaries,
            cross_route_boundaries=cross, non_convex_witness=witness, diagnostic=diagnostic,
        )

    def pinched_grid(self, space: AmbientSpace, points: int, eps: float = 0.0) -> List[float]:
        """Evenly spaced radii strictly inside the pinched interval starting at 0."""
        report = self.pinch_range(space, eps)
        first = next((interval for interval in report.intervals if interval[0] == 0.0), None)
        if first is None:
            return []
        upper = first[1]
        return [upper * (i + 1) / (points + 1) for i in range(points)]

    # ------------------------------------------------------------------
    # Radius ODE
    # ------------------------------------------------------------------

    @staticmethod
    def _mean_curvature_fn(space: AmbientSpace) -> Callable[[float], float]:
        reference = SphereModel(space=space, u=0.5 * math.pi / (2.0 * math.sqrt(space.c)))
        mu1, mu2, root = reference.mu1, reference.mu2, math.sqrt(space.c)

        def mean(u: float) -> float:
            return mu1 * 2.0 * root / math.tan(2.0 * root * u) + mu2 * root / math.tan(root * u)

        return mean

    @staticmethod
    def _log_volume(model: SphereModel) -> float:
        """log V(u) with V = sin^mu2(sqrt(c) u) sin^mu1(2 sqrt(c) u)."""
        x = math.sqrt(model.space.c) * model.u
        return model.mu2 * math.log(math.sin(x)) + model.mu1 * math.log(math.sin(2.0 * x))

    def extinction_quadrature(self, space: AmbientSpace, u0: float) -> float:
        """Extinction time int_0^u0 du / H(u) of a shrinking sphere."""
        mean = self._mean_curvature_fn(space)
        value, _ = quad(lambda u: 1.0 / mean(u), 0.0, u0, limit=200, epsabs=1e-13, epsrel=1e-12)
        return float(value)

    def integrate(
        self,
        space: AmbientSpace,
        u0: float,
        eps: float = 0.0,
        policy: Optional[StepPolicy] = None,
    ) -> Trajectory:
        """
        Integrate du/dt = -H(u) together with L' = -H^2 from u0.

        Samples are taken at every accepted step. The run stops when u reaches
        u_stop (extinction), when an expanding sphere reaches the focal radius
        up to u_stop, or at t_max.

        Args:
            space: CP^n or HP^n
            u0: Initial radius in (0, pi/(2 sqrt c))
            eps: Strictness of the pinching quantities recorded in the samples
            policy: Step policy; the tool default when None

        Returns:
            Trajectory

        Raises:
            FlowIntegrationError: If the integrator fails
        """
        policy = policy or self.policy
        start = SphereModel(space=space, u=u0)
        params = self.sphere_params(space, eps)
        mean = self._mean_curvature_fn(space)
        log_volume0 = self._log_volume(start)

        def sample(t: float, u: float, log_integral: float) -> FlowSample:
            model = SphereModel(space=space, u=u)
            scalars = self.sphere_scalars(model, params)
            return FlowSample(
                t=t, u=u, H=model.H, A2=scalars.A2, Ao2=scalars.Ao2, Q=scalars.Q, W=scalars.W,
                f0=scalars.Ao2 / scalars.W, vol_ratio=math.exp(self._log_volume(model) - log_volume0),
                log_volume_integral=log_integral,
            )

        if abs(start.H) < policy.stationary_threshold:
            logger.info(f"u0 = {u0!r} is a minimal sphere (|H| = {abs(start.H):.3e}); stationary run")
            samples = [sample(0.0, u0, 0.0)]
            if policy.t_max is not None:
                samples.append(sample(policy.t_max, u0, 0.0))
            return Trajectory(space=space, u0=u0, eps=eps, policy=policy, samples=samples, stationary=True)

        shrinking = start.H > 0.0
        horizon = policy.t_max
        if horizon is None:
            target = policy.u_stop if shrinking else start.max_radius - policy.u_stop
            estimate, _ = quad(lambda u: 1.0 / abs(mean(u)), min(u0, target), max(u0, target), limit=200)
            horizon = 2.0 * estimate + 1.0 if math.isfinite(estimate) else 1e6

        def rhs(t: float, y: np.ndarray) -> List[float]:
            value = mean(y[0])
            return [-value, -value * value]

        def floor(t: float, y: np.ndarray) -> float:
            return y[0] - policy.u_stop

        def focal(t: float, y: np.ndarray) -> float:
            return y[0] - (start.max_radius - policy.u_stop)

        floor.terminal, floor.direction = True, -1.0
        focal.terminal, focal.direction = True, 1.0

        solution = solve_ivp(
            rhs, (0.0, horizon), [u0, 0.0], method=policy.method,
            rtol=policy.rtol, atol=policy.atol, events=[floor, focal],
        )
        if solution.status < 0:
            raise FlowIntegrationError(solution.message, float(solution.t[-1]), float(solution.y[0, -1]))

        samples = [sample(float(t), float(u), float(log_integral)) for t, u, log_integral in zip(solution.t, *solution.y)]
        trajectory = Trajectory(space=space, u0=u0, eps=eps, policy=policy, samples=samples)
        if len(solution.t_events[0]):
            t_stop = float(solution.t_events[0][0])
            trajectory.extinct = True
            trajectory.extinction_time = t_stop
            trajectory.extinction_time_extrapolated = t_stop + policy.u_stop ** 2 / (2.0 * start.m)
            trajectory.extinction_time_quadrature = self.extinction_quadrature(space, u0)
        elif len(solution.t_events[1]):
            trajectory.focal_collapse = True
        logger.debug(
            f"{space.kind.value}^{space.n} u0={u0:.6g}: {len(samples)} samples, "
            f"extinct={trajectory.extinct}, T={trajectory.extinction_time}"
        )
        return trajectory

    # ------------------------------------------------------------------
    # Evolution equations
    # ------------------------------------------------------------------

    def _time_derivatives(self, model: SphereModel) -> Dict[str, float]:
        """d/dt of |H|^2, |A|^2, |Å|^2, |H|^4 from the evolution equations with gradient-free sphere data."""
        p = self.sphere_point_data(model)
        c, m = model.space.c, model.m
        rbar = self.geometry.ricci(model.space, p.normal[0])
        reaction = self.curvature.hypersurface_reaction(p)
        # |nabla A|^2 of a geodesic sphere
        gradient2 = 2.0 * (m - 1) * c * c
        h2, a2 = p.H2, p.A2
        d_h2 = 2.0 * h2 * (a2 + rbar)
        d_a2 = 2.0 * a2 * (a2 + rbar) + reaction - 2.0 * gradient2
        return {"H2": d_h2, "A2": d_a2, "Ao2": self._traceless_rate(model), "H4": 2.0 * h2 * d_h2}

    @staticmethod
    def _traceless_rate(model: SphereModel) -> float:
        """
        d|Å|^2/dt along du/dt = -H, without cancellation between d|A|^2 and d|H|^2/m.

        lambda1 - lambda2 = -sqrt(c) tan(sqrt(c) u), so every factor is evaluated directly.
        """
        root = math.sqrt(model.space.c)
        slope = math.tan(root * model.u)
        gap = -root * slope
        gap_rate = -model.space.c * (1.0 + slope * slope) * -model.H
        return 2.0 * model.mu1 * model.mu2 * gap * gap_rate / model.m

    def evolution_shadows(self, model: SphereModel) -> List[InequalityShadow]:
        """
        The |Å|^2 and |H|^4 evolution inequalities with vanishing gradient terms.

        HP^n has no curvature tensor here, so only the |H|^4 shadow is evaluated there.
        """
        m = model.m
        h2 = model.H ** 2
        if model.space.kind == SpaceKind.COMPLEX_PROJECTIVE:
            rates = self._time_derivatives(model)
            shadows = [InequalityShadow(
                name="traceless_growth", lhs=rates["Ao2"], rhs=4.0 * model.A2 * model.Ao2,
                holds=rates["Ao2"] <= 4.0 * model.A2 * model.Ao2 * (1.0 + 1e-12) + 1e-12,
            )]
            d_h4 = rates["H4"]
        else:
            shadows = []
            d_h4 = 4.0 * h2 * h2 * (model.A2 + model.space.einstein_constant)
        bound = 4.0 / m * h2 ** 3
        shadows.append(InequalityShadow(
            name="mean_quartic_growth", lhs=d_h4, rhs=bound,
            holds=d_h4 >= bound * (1.0 - 1e-12) - 1e-12,
        ))
        return shadows

    def _propagate(self, space: AmbientSpace, u: float, dt: float) -> float:
        mean = self._mean_curvature_fn(space)
        solution = solve_ivp(lambda t, y: [-mean(y[0])], (0.0, dt), [u], method="DOP853", rtol=1e-13, atol=1e-15)
        if solution.status < 0:
            raise FlowIntegrationError(solution.message, float(solution.t[-1]), float(solution.y[0, -1]))
        return float(solution.y[0, -1])

    def evolution_check(self, space: AmbientSpace, u: float, h_fd: float = 1e-3) -> EvolutionReport:
        """
        Compare centered finite differences along the flow with the evolution equations.

        Each derivative is differenced with steps h_fd and h_fd/2; the Richardson
        order is log2 of the ratio of the two errors.

        Raises:
            UnsupportedOperationError: On HP^n
        """
        model = SphereModel(space=space, u=u)
        if space.kind != SpaceKind.COMPLEX_PROJECTIVE:
            raise UnsupportedOperationError("evolution_check needs the CP^n curvature tensor")
        analytic = self._time_derivatives(model)

        def observables(radius: float) -> Dict[str, float]:
            sphere = SphereModel(space=space, u=radius)
            h2 = sphere.H ** 2
            return {"H2": h2, "A2": sphere.A2, "Ao2": sphere.Ao2, "H4": h2 * h2}

        def centered(step: float) -> Dict[str, float]:
            ahead = observables(self._propagate(space, u, step))
            behind = observables(self._propagate(space, u, -step))
            return {key: (ahead[key] - behind[key]) / (2.0 * step) for key in ahead}

        coarse, fine = centered(h_fd), centered(h_fd / 2.0)
        entries = []
        for key, value in analytic.items():
            error_coarse = abs(coarse[key] - value)
            error_fine = abs(fine[key] - value)
            order = math.log2(error_coarse / error_fine) if error_fine > 0.0 and error_coarse > 0.0 else float("nan")
            entries.append(EvolutionEntry(
                quantity=key, analytic=value, fd_coarse=coarse[key], fd_fine=fine[key],
                error_coarse=error_coarse, error_fine=error_fine, order=order,
            ))

        messages = []
        if h_fd < CANCELLATION_FLOOR:
            messages.append(f"h_fd = {h_fd:g} is below the cancellation floor {CANCELLATION_FLOOR:g}")
        off_plateau = [e.quantity for e in entries if not ORDER_PLATEAU[0] <= e.order <= ORDER_PLATEAU[1]]
        if off_plateau:
            messages.append(f"Richardson order outside {ORDER_PLATEAU} for {off_plateau}")
        for message in messages:
            logger.warning(f"evolution_check u={u}: {message}")
        return EvolutionReport(
            space=space, u=u, h_fd=h_fd, entries=entries, shadows=self.evolution_shadows(model),
            flagged=bool(messages), message="; ".join(messages) or None,
        )

    # ------------------------------------------------------------------
    # Campaign reports
    # ------------------------------------------------------------------

    @staticmethod
    def _non_increasing(values: Sequence[float]) -> bool:
        return all(b <= a + 1e-12 * abs(a) for a, b in zip(values[:-1], values[1:]))

    def invariance_record(self, trajectory: Trajectory) -> InvarianceRecord:
        """Pinching, roundness and volume diagnostics of one run."""
        samples = trajectory.samples
        tail = samples[len(samples) // 2:]
        roundness = [s.Ao2 / (s.H * s.H) if s.H != 0.0 else math.inf for s in tail]
        last = SphereModel(space=trajectory.space, u=samples[-1].u)
        shadows_hold = all(
            shadow.holds
            for s in samples
            for shadow in self.evolution_shadows(SphereModel(space=trajectory.space, u=s.u))
        )
        return InvarianceRecord(
            u0=trajectory.u0,
            extinct=trajectory.extinct,
            extinction_time=trajectory.extinction_time,
            max_Q=max(s.Q for s in samples),
            final_roundness=roundness[-1],
            roundness_monotone_tail=self._non_increasing(roundness),
            final_ratio=last.lambda1 / last.lambda2,
            f0_tail_monotone=self._non_increasing([s.f0 for s in tail]),
            volume_law_error=trajectory.volume_law_error,
            shadows_hold=shadows_hold,
        )

    def pinching_invariance_run(
        self,
        space: AmbientSpace,
        u0_grid: Sequence[float],
        eps: float = 0.0,
    ) -> InvarianceReport:
        """Integrate every radius of the grid and record whether pinching and roundness behave."""
        records = [self.invariance_record(self.integrate(space, u0, eps)) for u0 in u0_grid]
        return InvarianceReport(space=space, eps=eps, records=records)

    def minimal_sphere_check(self, space: AmbientSpace) -> MinimalSphereReport:
        """Locate the minimal geodesic sphere and test |A|^2 >= 2c and that it is not pinched."""
        limit = math.pi / (2.0 * math.sqrt(space.c))
        mean = self._mean_curvature_fn(space)
        u_star = brentq(mean, limit * 1e-6, limit * (1.0 - 1e-6), xtol=1e-14)
        a2 = SphereModel(space=space, u=u_star).A2
        intervals = self.pinch_range(space).intervals
        outside = not any(lower < u_star < upper for lower, upper in intervals)
        logger.info(f"{space.kind.value}^{space.n}: minimal radius {u_star:.12g}, |A|^2 = {a2:.12g}")
        return MinimalSphereReport(
            space=space, u_star=u_star, A2_at_u_star=a2, bound=2.0 * space.c,
            bound_holds=a2 >= 2.0 * space.c, outside_pinch_range=outside,
        )
