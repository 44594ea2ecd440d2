"""
Flow Campaign Agent for the pinched flow lab.

This agent integrates the equivariant flow of geodesic spheres over a grid
of initial radii and collects the pinching-invariance diagnostics.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from typing import List, Optional, Tuple

from lab import Agent, InfeasibleConstraintError, RunSession
from schemas import (
    AmbientSpace,
    FlowConfig,
    InvarianceRecord,
    InvarianceReport,
    StepPolicy,
    Trajectory,
)
from tools.equivariant_flow import EquivariantFlowTool

logger = logging.getLogger(__name__)


def _integrate_one(space: AmbientSpace, u0: float, eps: float, policy: StepPolicy) -> Tuple[Trajectory, InvarianceRecord]:
    """Worker entry point: one radius."""
    flow = EquivariantFlowTool(policy=policy)
    trajectory = flow.integrate(space, u0, eps, policy)
    return trajectory, flow.invariance_record(trajectory)


class FlowCampaignAgent(Agent):
    """Agent for pinching-invariance runs over grids of initial radii."""

    def __init__(self, flow: Optional[EquivariantFlowTool] = None, workers: int = 1):
        """Initialize the Flow Campaign Agent."""
        super().__init__(
            name="flow_campaign_agent",
            description="Integrates geodesic-sphere flows over radius grids"
        )
        self.flow = flow or EquivariantFlowTool()
        self.workers = workers
        logger.info("Flow Campaign Agent initialized")

    @staticmethod
    def space_of(config: FlowConfig) -> AmbientSpace:
        return AmbientSpace(kind=config.space, n=config.n, c=config.c)

    @staticmethod
    def policy_of(config: FlowConfig) -> StepPolicy:
        return StepPolicy(rtol=config.rtol, atol=config.atol, u_stop=config.u_stop, t_max=config.t_max)

    def radii(self, config: FlowConfig) -> List[float]:
        """
        Explicit u0 values, or an even grid inside the pinched interval at 0.

        Raises:
            InfeasibleConstraintError: If the space has no pinched radii
        """
        if config.u0 is not None:
            return list(config.u0)
        space = self.space_of(config)
        grid = self.flow.pinched_grid(space, config.grid_points, config.eps)
        if not grid:
            raise InfeasibleConstraintError(
                f"{space.kind.value}^{space.n} has no pinched geodesic spheres at eps = {config.eps}"
            )
        return grid

    def run(self, config: FlowConfig, workers: Optional[int] = None) -> Tuple[List[Trajectory], InvarianceReport]:
        """
        Integrate every radius; results are merged in u0 order whatever the worker count.

        Returns:
            Trajectories and the invariance report, both ordered like the radii
        """
        space = self.space_of(config)
        policy = self.policy_of(config)
        radii = self.radii(config)
        workers = workers or self.workers

        if workers == 1 or len(radii) == 1:
            results = [_integrate_one(space, u0, config.eps, policy) for u0 in radii]
        else:
            with ProcessPoolExecutor(max_workers=workers) as executor:
                results = list(executor.map(
                    _integrate_one, [space] * len(radii), radii, [config.eps] * len(radii), [policy] * len(radii),
                ))

        trajectories = [trajectory for trajectory, _ in results]
        report = InvarianceReport(space=space, eps=config.eps, records=[record for _, record in results])
        failed = [record.u0 for record in report.records if not record.passed]
        if failed:
            logger.warning(f"{len(failed)} of {len(radii)} run(s) failed the invariance checks: {failed}")
        else:
            logger.info(f"All {len(radii)} run(s) stayed pinched and became round")
        return trajectories, report

    async def process(self, input_data: FlowConfig, session: RunSession) -> Tuple[List[Trajectory], InvarianceReport]:
        """Run a flow campaign and keep the results on the session."""
        logger.info(f"Step 1: Integrating {input_data.space.value}^{input_data.n} geodesic spheres")
        trajectories, report = self.run(input_data, workers=input_data.workers)
        session.set("trajectories", trajectories)
        session.set("invariance", report)
        return trajectories, report
