"""
Inequality suites of the pinch verifier.

Each suite turns one seeded trial into a list of cases: an input (a point,
possibly projected onto Q = 0 or H = 0) together with the outcomes of every
inequality the suite owns on that input. Every suite also carries one
catalogued wrong-constant mutant, switched on by ``SuiteContext.mutant``.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from lab import InfeasibleConstraintError
from schemas import (
    AmbientSpace,
    InequalityOutcome,
    PinchParams,
    PointData,
    Relation,
    SuiteId,
)
from tools.curvature_algebra import CurvatureAlgebraTool
from tools.frames import FramesTool

logger = logging.getLogger(__name__)

IDENTITY_TOLERANCE = 1e-12
FRAME_RESIDUAL_TOLERANCE = 1e-10

# The ambient suite cycles CP^n through these n, independent of (m, k)
AMBIENT_DIMENSIONS = tuple(range(2, 11))


def _le(name: str, lhs: float, rhs: float, tolerance: Optional[float] = None) -> InequalityOutcome:
    return InequalityOutcome(inequality_id=name, lhs=float(lhs), rhs=float(rhs), relation=Relation.LE, tolerance=tolerance)


def _ge(name: str, lhs: float, rhs: float, tolerance: Optional[float] = None) -> InequalityOutcome:
    return InequalityOutcome(inequality_id=name, lhs=float(lhs), rhs=float(rhs), relation=Relation.GE, tolerance=tolerance)


def _eq(name: str, lhs: float, rhs: float, tolerance: Optional[float] = None) -> InequalityOutcome:
    return InequalityOutcome(inequality_id=name, lhs=float(lhs), rhs=float(rhs), relation=Relation.EQ, tolerance=tolerance)


@dataclass(frozen=True)
class SuiteContext:
    """Everything a suite needs to evaluate one (m, k) block."""
    suite_id: SuiteId
    m: int
    k: int
    params: PinchParams
    margin: float = 0.1
    mutant: bool = False
    tolerance: float = 1e-9

    @property
    def n(self) -> int:
        return (self.m + self.k) // 2


@dataclass
class TrialCase:
    """One evaluated input of a trial."""
    branch: str
    point: Optional[PointData]
    params: PinchParams
    outcomes: List[InequalityOutcome] = field(default_factory=list)


class InequalitySuites:
    """Generators, checks and mutants of the thirteen suites (constant_scan lives in the verifier)."""

    def __init__(self, frames: FramesTool, curvature: CurvatureAlgebraTool):
        self.frames = frames
        self.curvature = curvature
        self.geometry = frames.geometry
        self._inputs: Dict[SuiteId, Callable[[SuiteContext, int, int, int], List[Tuple[str, PointData]]]] = {
            SuiteId.B2_FRAME_RELATIONS: self._generic_inputs,
            SuiteId.OMEGA_DUAL_ROUTE: self._generic_inputs,
            SuiteId.PFT_CHAINS: self._pft_inputs,
            SuiteId.R2_IDENTITY: self._r2_inputs,
            SuiteId.LEST_BOUNDS: self._lest_inputs,
            SuiteId.REACTION_BOUNDS: self._generic_inputs,
            SuiteId.Q_ZERO_NEGATIVITY: self._q_zero_inputs,
            SuiteId.H_ZERO_BRANCH: self._h_zero_inputs,
            SuiteId.SIMONS_Z_BOUND: self._simons_inputs,
            SuiteId.GAUSS_POSITIVITY: self._generic_inputs,
            SuiteId.AMW_BOUND: self._generic_inputs,
        }
        self._checks: Dict[SuiteId, Callable[[SuiteContext, str, PointData], List[InequalityOutcome]]] = {
            SuiteId.B2_FRAME_RELATIONS: self._check_b2,
            SuiteId.OMEGA_DUAL_ROUTE: self._check_omega,
            SuiteId.PFT_CHAINS: self._check_pft,
            SuiteId.R2_IDENTITY: self._check_r2,
            SuiteId.LEST_BOUNDS: self._check_lest,
            SuiteId.REACTION_BOUNDS: self._check_reaction,
            SuiteId.Q_ZERO_NEGATIVITY: self._check_q_zero,
            SuiteId.H_ZERO_BRANCH: self._check_h_zero,
            SuiteId.SIMONS_Z_BOUND: self._check_simons,
            SuiteId.GAUSS_POSITIVITY: self._check_gauss,
            SuiteId.AMW_BOUND: self._check_amw,
        }

    # ------------------------------------------------------------------
    # Public entry points
    # ------------------------------------------------------------------

    def run_trial(self, ctx: SuiteContext, seed: int, dims_index: int, trial: int) -> List[TrialCase]:
        """Generate and evaluate every input of one trial."""
        if ctx.suite_id == SuiteId.AMBIENT_SYMMETRIES:
            outcomes = self._ambient_outcomes(ctx, self._seed(seed, dims_index, trial), trial)
            return [TrialCase("vectors", None, ctx.params, outcomes)]
        cases = []
        for branch, point in self._inputs[ctx.suite_id](ctx, seed, dims_index, trial):
            cases.append(TrialCase(branch, point, self.branch_params(ctx, branch), self.evaluate(ctx, branch, point)))
        return cases

    def evaluate(self, ctx: SuiteContext, branch: str, point: PointData) -> List[InequalityOutcome]:
        """Outcomes of the suite's inequalities on one input."""
        return self._checks[ctx.suite_id](ctx, branch, point)

    def branch_params(self, ctx: SuiteContext, branch: str) -> PinchParams:
        """Pinching constants used to build and check a branch; the q_zero mutant inflates b on H = 0 inputs."""
        if ctx.mutant and ctx.suite_id == SuiteId.Q_ZERO_NEGATIVITY and branch == "h_zero":
            m, k = ctx.m, ctx.k
            return ctx.params.model_copy(update={"b": 8.0 * m * k + 4.0 * k * k + 1.0})
        return ctx.params

    def reproject(self, ctx: SuiteContext, branch: str, point: PointData) -> Optional[PointData]:
        """
        Put a modified input back into its family, or None if it left it.

        Generic inputs must stay pinched; Q = 0 and H = 0 inputs are projected again.
        """
        params = self.branch_params(ctx, branch)
        if branch in ("h_zero", "h_zero_raw"):
            point = point.with_h(point.h - np.einsum("a,ij->aij", point.mean_curvature / point.m, np.eye(point.m)))
        if branch in ("q_zero", "h_zero"):
            try:
                return self.curvature.q_zero_point(point, params)
            except InfeasibleConstraintError:
                return None
        if self.curvature.pinch_quantities(point, params).Q > ctx.tolerance * max(1.0, point.A2):
            return None
        return point

    # ------------------------------------------------------------------
    # Inputs
    # ------------------------------------------------------------------

    @staticmethod
    def _seed(seed: int, dims_index: int, trial: int, slot: int = 0) -> np.random.SeedSequence:
        return np.random.SeedSequence(seed, spawn_key=(dims_index, trial, slot))

    def _random(self, ctx: SuiteContext, seed: int, dims_index: int, trial: int, zero_mean: bool = False) -> PointData:
        return self.frames.random_point(
            ctx.m, ctx.k, self._seed(seed, dims_index, trial), margin=ctx.margin, zero_mean=zero_mean,
        )

    def _generic_inputs(self, ctx, seed, dims_index, trial):
        return [("generic", self._random(ctx, seed, dims_index, trial))]

    def _pft_inputs(self, ctx, seed, dims_index, trial):
        if trial % 2 == 0:
            return [("generic", self._random(ctx, seed, dims_index, trial))]
        step = trial // 2
        taus = [((step + 3 * r) % 11) / 10.0 for r in range(ctx.k // 2)]
        point = self.frames.point_with_angles(ctx.m, ctx.k, taus, self._seed(seed, dims_index, trial), margin=ctx.margin)
        return [("angles", point)]

    def _r2_inputs(self, ctx, seed, dims_index, trial):
        zero_mean = trial % 10 == 9
        return [("h_zero_raw" if zero_mean else "generic", self._random(ctx, seed, dims_index, trial, zero_mean))]

    def _lest_inputs(self, ctx, seed, dims_index, trial):
        point = self._random(ctx, seed, dims_index, trial)
        return [("generic", point), ("q_zero", self.curvature.q_zero_point(point, ctx.params))]

    def _q_zero_inputs(self, ctx, seed, dims_index, trial):
        if trial % 4 == 0:
            point = self._random(ctx, seed, dims_index, trial, zero_mean=True)
            return [("h_zero", self.curvature.q_zero_point(point, self.branch_params(ctx, "h_zero")))]
        point = self._random(ctx, seed, dims_index, trial)
        return [("q_zero", self.curvature.q_zero_point(point, ctx.params))]

    def _h_zero_inputs(self, ctx, seed, dims_index, trial):
        point = self._random(ctx, seed, dims_index, trial, zero_mean=True)
        return [("h_zero_raw", point), ("h_zero", self.curvature.q_zero_point(point, ctx.params))]

    def _simons_inputs(self, ctx, seed, dims_index, trial):
        zero_mean = trial % 5 == 0
        return [("h_zero_raw" if zero_mean else "generic", self._random(ctx, seed, dims_index, trial, zero_mean))]

    # ------------------------------------------------------------------
    # Checks
    # ------------------------------------------------------------------

    def _ambient_outcomes(self, ctx: SuiteContext, sequence: np.random.SeedSequence, trial: int) -> List[InequalityOutcome]:
        n = AMBIENT_DIMENSIONS[trial % len(AMBIENT_DIMENSIONS)]
        space = AmbientSpace.cp(n)
        geometry = self.geometry
        rng = np.random.default_rng(sequence)
        dim, c = space.realdim, space.c
        x, y, z, w = (v / np.linalg.norm(v) for v in rng.standard_normal((4, dim)))

        def riemann(*vectors: np.ndarray) -> float:
            return geometry.riemann(space, *vectors)

        value = riemann(x, y, z, w)
        outcomes = [
            _eq("antisymmetry_first_pair", value, -riemann(y, x, z, w), IDENTITY_TOLERANCE),
            _eq("antisymmetry_second_pair", value, -riemann(x, y, w, z), IDENTITY_TOLERANCE),
            _eq("pair_symmetry", value, riemann(z, w, x, y), IDENTITY_TOLERANCE),
            _eq("first_bianchi", value + riemann(y, z, x, w) + riemann(z, x, y, w), 0.0, IDENTITY_TOLERANCE),
        ]

        first, second = np.linalg.qr(rng.standard_normal((dim, 2)))[0].T
        sectional = geometry.sectional(space, first, second)
        outcomes += [
            _ge("sectional_lower", sectional, c),
            _le("sectional_upper", sectional, 4.0 * c),
            _eq("sectional_matches_riemann", sectional, riemann(first, second, first, second), IDENTITY_TOLERANCE),
        ]

        holomorphic = geometry.apply_j(space, first)
        totally_real = second - (second @ first) * first - (second @ holomorphic) * holomorphic
        totally_real /= np.linalg.norm(totally_real)
        outcomes += [
            _eq("holomorphic_witness", geometry.sectional(space, first, holomorphic), 4.0 * c, IDENTITY_TOLERANCE),
            _eq("totally_real_witness", geometry.sectional(space, first, totally_real), c, IDENTITY_TOLERANCE),
        ]

        einstein = (2 * n + 1) * c if ctx.mutant else space.einstein_constant
        outcomes.append(_eq("einstein_constant", geometry.ricci(space, first), einstein, IDENTITY_TOLERANCE))
        return outcomes

    def _check_b2(self, ctx, branch, point):
        b2_point, angles = self.frames.build_b2(point)
        residuals = self.frames.b2_residuals(b2_point, angles)
        if ctx.mutant:
            residuals["base01"] = self._flipped_tau_residual(b2_point, angles)
        outcomes = [_le(f"{name}_residual", value, 0.0, FRAME_RESIDUAL_TOLERANCE) for name, value in residuals.items()]
        deviation = max((abs(tau * tau + nu * nu - 1.0) for tau, nu in zip(angles.taus, angles.nus)), default=0.0)
        outcomes.append(_le("angle_normalization", deviation, 0.0, IDENTITY_TOLERANCE))
        before = self.curvature.traceless_split(point)
        after = self.curvature.traceless_split(b2_point)
        outcomes += [
            _eq("A2_preserved", after.A2, before.A2, IDENTITY_TOLERANCE),
            _eq("H2_preserved", after.H2, before.H2, IDENTITY_TOLERANCE),
            _eq("Ao2_preserved", after.Ao2, before.Ao2, IDENTITY_TOLERANCE),
        ]
        return outcomes

    def _flipped_tau_residual(self, point: PointData, angles) -> float:
        jmat = self.geometry.complex_structure(point.space)
        tangent, normal = point.tangent, point.normal
        worst = 0.0
        for r, (tau, nu) in enumerate(zip(angles.taus, angles.nus)):
            gap = jmat @ normal[2 * r] + tau * tangent[2 * r] - nu * normal[2 * r + 1]
            worst = max(worst, float(np.max(np.abs(gap))))
        if angles.odd_tail:
            worst = max(worst, float(np.max(np.abs(jmat @ normal[-1] + tangent[point.k - 1]))))
        return worst

    def _check_omega(self, ctx, branch, point):
        norms = self.frames.omega_norm2(point)
        closed = norms.closed_form / 2.0 if ctx.mutant else norms.closed_form
        pft = self.frames.pft_norms(point)
        return [
            _eq("omega_dual_route", norms.direct, closed, FRAME_RESIDUAL_TOLERANCE),
            _eq("fp_omega", pft.FP2, norms.direct / 9.0, FRAME_RESIDUAL_TOLERANCE),
        ]

    def _check_pft(self, ctx, branch, point):
        m, k = ctx.m, ctx.k
        pft = self.frames.pft_norms(point)
        norms = self.frames.omega_norm2(point)
        omega = norms.direct
        coefficient = (m if k % 2 == 0 else m + 2) / 9.0
        t_from_angles = 2.0 * norms.angles.tau_square_sum + (1.0 if norms.angles.odd_tail else 0.0)
        return [
            _ge("pt_chain", pft.P2 * pft.t2, coefficient * omega),
            _eq("p_t_sum", pft.P2 + pft.t2, m - 1 if ctx.mutant else m, IDENTITY_TOLERANCE),
            _eq("t_angles", pft.t2, t_from_angles, FRAME_RESIDUAL_TOLERANCE),
            _eq("fp_omega", pft.FP2, omega / 9.0, FRAME_RESIDUAL_TOLERANCE),
        ]

    def _check_r2(self, ctx, branch, point):
        m = ctx.m
        split = self.curvature.traceless_split(point)
        _, r2 = self.curvature.r1_r2(point)
        closed = self.curvature.r2_closed_form(point)
        has_mean = self.curvature.mean_direction(point) is not None
        claimed = split.h1o2 * split.H2 + split.H2 ** 2 / (m - 1) if ctx.mutant and has_mean else closed
        outcomes = [
            _eq("r2_identity", r2, claimed, IDENTITY_TOLERANCE),
            _eq("traceless_norm", split.Ao2, split.A2 - split.H2 / m, FRAME_RESIDUAL_TOLERANCE),
            _eq("traceless_split", split.Ao2, split.h1o2 + split.hminus2, FRAME_RESIDUAL_TOLERANCE),
        ]
        if has_mean:
            b1_point = self.frames.build_b1(point)
            _, r2_b1 = self.curvature.r1_r2(b1_point)
            outcomes += [
                _eq("r2_identity_b1", r2_b1, closed, IDENTITY_TOLERANCE),
                _le("b1_alignment", float(np.linalg.norm(b1_point.mean_curvature[1:])), 0.0, FRAME_RESIDUAL_TOLERANCE),
            ]
        return outcomes

    def _check_lest(self, ctx, branch, point):
        m, a, b = ctx.m, ctx.params.a, ctx.params.b
        r1, r2 = self.curvature.r1_r2(point)
        quartic = 2.0 * r1 - 2.0 * a * r2
        if branch == "q_zero":
            return [
                _eq("q_zero_constraint", point.A2, a * point.H2 + b),
                _le("lest_second", quartic, self.curvature.lest_second_bound(point, a, b)),
            ]
        bound = self.curvature.lest_first_bound(point, a)
        if ctx.mutant:
            bound -= 2.0 / (m * m) * point.H2 ** 2
        return [_le("lest_first", quartic, bound)]

    def _check_reaction(self, ctx, branch, point):
        m, k, c = ctx.m, ctx.k, point.space.c
        terms = self.curvature.reaction_terms(point, ctx.params.a)
        ao2 = self.curvature.traceless_split(point).Ao2
        outcomes = [
            _le("reaction_first", terms.I, (-8.0 if ctx.mutant else -4.0) * m * c * ao2),
            _le("reaction_second", terms.II, 2.0 * (m + 3) * c * ao2),
            _le("reaction_third", terms.III, 8.0 * k * c * ao2),
        ]
        if k == 2:
            outcomes.append(_le("reaction_third_k2", terms.III, 16.0 * c * ao2))
        if k == 1:
            hypersurface = self.curvature.hypersurface_reaction(point)
            outcomes += [
                _eq("hypersurface_route", terms.I, hypersurface, FRAME_RESIDUAL_TOLERANCE),
                _le("hypersurface_bound", hypersurface, -4.0 * m * c * ao2),
            ]
        return outcomes

    def _hypersurface_chain(self, point: PointData, params: PinchParams, prefix: str) -> List[InequalityOutcome]:
        m, c = point.m, point.space.c
        split = self.curvature.traceless_split(point)
        rbar = self.geometry.ambient_constants(point.space, m)["rbar"]
        growth = 2.0 * params.b * (split.A2 + rbar)
        return [
            _le(f"{prefix}_chain", growth - 4.0 * m * c * split.Ao2, 0.0),
            _le(f"{prefix}_reaction_sign", growth + self.curvature.hypersurface_reaction(point), 0.0),
        ]

    def _check_q_zero(self, ctx, branch, point):
        params = self.branch_params(ctx, branch)
        if ctx.k == 1:
            return self._hypersurface_chain(point, params, "hypersurface")
        return [_le("reaction_negative", self.curvature.reaction_total(point, params), 0.0)]

    def _check_h_zero(self, ctx, branch, point):
        m, k, c = ctx.m, ctx.k, point.space.c
        if branch == "h_zero_raw":
            r1, _ = self.curvature.r1_r2(point)
            bound = point.A2 ** 2 / k if ctx.mutant else 3.0 * point.A2 ** 2
            return [_le("h_zero_r1", 2.0 * r1, bound)]
        params = ctx.params
        if k == 1:
            return self._hypersurface_chain(point, params, "h_zero_hypersurface")
        total = self.curvature.reaction_total(point, params)
        b = params.b
        return [
            _le("h_zero_reaction_bound", total, 3.0 * b * b - 2.0 * (m - 3 - 4 * k) * c * b),
            _le("h_zero_reaction_negative", total, 0.0),
        ]

    def _check_simons(self, ctx, branch, point):
        params = ctx.params
        m = ctx.m
        z = self.curvature.simons_z(point)
        scalars = self.curvature.pinch_quantities(point, params)
        rho = self.curvature.z_lemma_rho(params)
        lhs = z if ctx.mutant else z + 2.0 * m * params.b * scalars.Ao2
        outcomes = [_ge("z_lemma", lhs, rho * params.eps * scalars.Ao2 * scalars.W)]
        if ctx.k == 1:
            outcomes.append(_eq("z_eigen_route", z, self.curvature.simons_z_eigen(point), FRAME_RESIDUAL_TOLERANCE))
        if self.curvature.mean_direction(point) is None:
            outcomes.append(_ge("z_h_zero", z, -1.5 * point.A2 ** 2))
        else:
            outcomes.append(_ge("z_andrews_baker", z, self.curvature.andrews_baker_bound(point)))
        return outcomes

    def _check_gauss(self, ctx, branch, point):
        m, c = ctx.m, point.space.c
        params = ctx.params
        frame = self.frames.build_b1(point, diagonalize=True)
        doubled = 2.0 * self.curvature.gauss_matrix(frame)
        upper = np.triu_indices(m, 1)
        weakest = float(np.min(doubled[upper]))
        split = self.curvature.traceless_split(frame)
        slope = 1.0 / (m - 1) if ctx.mutant else 1.0 / (m * (m - 1))
        outcomes = [
            _ge("gauss2", weakest, 2.0 * c + slope * split.H2 - 2.0 * split.Ao2),
            _eq("gauss_routes", 2.0 * self.curvature.gauss_sectional(frame, 0, 1), doubled[0, 1], IDENTITY_TOLERANCE),
        ]
        if ctx.k == 1:
            constant = self.curvature.sez_pos_constant(m, params.eps, params.alpha, params.beta)
            w = params.alpha * split.H2 + params.beta
            outcomes.append(_ge("sectional_positivity", weakest, params.eps * constant * w))
            residuals = [self.curvature.prop_alg_residual(frame, i, j) for i, j in zip(*upper)]
            worst = max(residuals, key=lambda item: abs(item["lhs"] - item["rhs"]))
            outcomes.append(_eq("prop_alg_identity", worst["lhs"], worst["rhs"], IDENTITY_TOLERANCE))
        return outcomes

    def _check_amw(self, ctx, branch, point):
        scalars = self.curvature.pinch_quantities(point, ctx.params)
        factor = 2.0 if ctx.mutant else 2.0 * ctx.m
        return [
            _ge("amw", factor * scalars.W, scalars.A2),
            _ge("weight_positive", scalars.W, 0.0),
        ]
