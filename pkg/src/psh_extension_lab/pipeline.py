"""End-to-end extension run for one scenario (u, φ, z₀, E).

For each δ the run builds v_δ = φ − u + δ‖z − z₀‖² − δ³ on a grid centred at
z₀, takes its constrained convex envelope Γ, picks a contact node z_δ off E,
and follows the circle-mean chain

    b·r² = u_gap + Γ_gap + excess − contact_gap − δr²

where b = (mean φ − φ(z_δ))/r². Each of u_gap, Γ_gap and excess must be
nonnegative up to tolerance, which bounds b from below by −δ. The complex
Hessian of φ at z_δ is then compared with −δ, and the per-δ bounds are
extrapolated linearly to δ = 0.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from psh_extension_lab.abp import AbpReport, abp_quantities, poisson_rhs
from psh_extension_lab.calculus import (
    circle_mean,
    circle_offsets,
    complex_hessian,
    direction_sample,
    min_eigenvalue,
    psd_tolerance,
)
from psh_extension_lab.config import settings
from psh_extension_lab.envelope import (
    EnvelopeConvergenceError,
    EnvelopeSolution,
    build_obstacle,
    convex_envelope_iterative,
    default_stencil,
)
from psh_extension_lab.errors import LabError
from psh_extension_lab.functions import Constant, Expression, FunctionDescriptor, norm_squared_about
from psh_extension_lab.geometry import (
    ComplexPoint,
    GridConfigurationError,
    GridDomain,
    ScalarField,
    as_coords,
    interpolate,
    make_grid,
    sample,
)
from psh_extension_lab.singular_sets import SingularSet, grid_fraction_on_set, unit_sphere
from psh_extension_lab.viscosity import Status, Verdict, certify_psh, certify_subharmonic

logger = logging.getLogger(__name__)

TOUCH_TOL = 1e-10


class ScenarioError(LabError):
    """Raised when a scenario breaks the touching or majorant condition."""

    exit_code = 2

    def __init__(self, reason: str, node_index: int | None = None):
        self.reason = reason
        self.node_index = node_index
        where = "" if node_index is None else f" at node {node_index}"
        super().__init__(f"Invalid scenario{where}: {reason}")


class ContactSelectionError(LabError):
    """Raised when every contact node lies within the margin of E."""

    exit_code = 2

    def __init__(self, delta: float, fraction_on_set: float):
        self.delta = delta
        self.fraction_on_set = fraction_on_set
        super().__init__(
            f"No contact node off E at delta={delta:g} (grid fraction within margin of E: {fraction_on_set:.3f})"
        )


class ChainInconsistencyError(LabError):
    """Raised when a chain record contradicts its own decomposition."""

    exit_code = 2


class ExtensionVerdict(str, Enum):
    CERTIFIED = "Certified"
    REFUTED = "Refuted"
    PRECONDITION_VIOLATED = "PreconditionViolated"
    INCONCLUSIVE = "Inconclusive"

    @property
    def exit_code(self) -> int:
        return {
            ExtensionVerdict.CERTIFIED: 0,
            ExtensionVerdict.REFUTED: 1,
            ExtensionVerdict.PRECONDITION_VIOLATED: 2,
            ExtensionVerdict.INCONCLUSIVE: 2,
        }[self]

    @property
    def note(self) -> str:
        return _VERDICT_NOTES[self]


_VERDICT_NOTES = {
    ExtensionVerdict.CERTIFIED: "all per-delta bounds and the limit fit hold within tolerance",
    ExtensionVerdict.REFUTED: (
        "preconditions and contact selection succeeded but a per-delta Hessian bound, a chain conclusion, "
        "the extrapolated bound, the limit consistency or the contact trend failed"
    ),
    ExtensionVerdict.PRECONDITION_VIOLATED: (
        "u fails the subharmonic or psh-off-E guard, phi is not a touching majorant, or v_delta < 0 on the collar"
    ),
    ExtensionVerdict.INCONCLUSIVE: "a per-delta stage could not finish, e.g. no contact node off E",
}


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    n: int
    u: FunctionDescriptor
    phi: FunctionDescriptor
    z0: ComplexPoint
    E: SingularSet
    delta0: float
    expected: ExtensionVerdict | None = None
    notes: str = ""
    smooth_phi: bool = True

    def describe(self) -> dict:
        return {
            "name": self.name,
            "n": self.n,
            "u": self.u.describe(),
            "phi": self.phi.describe(),
            "z0": list(self.z0.coords),
            "E": self.E.describe(),
            "delta0": self.delta0,
            "smooth_phi": self.smooth_phi,
        }


@dataclass(frozen=True)
class PipelineParams:
    deltas: tuple[float, ...] = (0.2, 0.1, 0.05)
    radius_factors: tuple[float, ...] = field(default_factory=lambda: tuple(settings.radius_factors))
    directions: tuple[ComplexPoint, ...] | None = None
    m: int = field(default_factory=lambda: settings.quadrature_nodes)
    margin_factor: float = field(default_factory=lambda: settings.margin_factor)
    guard_margin_factor: float = field(default_factory=lambda: settings.psh_margin_factor)
    points_per_axis: int = field(default_factory=lambda: settings.points_per_axis)
    envelope_tol: float = field(default_factory=lambda: settings.envelope_tol)
    contact_tol: float | None = None
    chain_tol: float = field(default_factory=lambda: settings.chain_tol)
    psd_tol: float | None = None
    certify_tol: float = field(default_factory=lambda: settings.certify_tol)
    final_tol: float = field(default_factory=lambda: settings.final_tol)
    collar_tol: float = field(default_factory=lambda: settings.collar_tol)
    direction_count: int = field(default_factory=lambda: settings.direction_count)
    seed: int = field(default_factory=lambda: settings.seed)

    def validate(self, scenario: Scenario) -> None:
        if len(self.deltas) < 2:
            raise GridConfigurationError("deltas", f"need at least two deltas for the limit fit, got {len(self.deltas)}")
        if any(b >= a for a, b in zip(self.deltas, self.deltas[1:])):
            raise GridConfigurationError("deltas", f"must be strictly decreasing, got {list(self.deltas)}")
        if not all(0 < d < scenario.delta0 / 2 for d in self.deltas):
            raise GridConfigurationError(
                "deltas", f"every delta must lie in (0, {scenario.delta0 / 2:g}), got {list(self.deltas)}"
            )
        if not self.radius_factors or any(f <= 0 for f in self.radius_factors):
            raise GridConfigurationError("radius_factors", f"must be positive, got {list(self.radius_factors)}")

    def direction_list(self, n: int) -> list[ComplexPoint]:
        if self.directions is not None:
            return list(self.directions)
        return direction_sample(n, self.direction_count, self.seed)


@dataclass(frozen=True)
class CollarCheck:
    ok: bool
    worst_node: int | None
    worst_value: float | None


@dataclass(frozen=True)
class ChainRecord:
    delta: float
    r: float
    T_index: int
    u_gap: float
    gamma_gap: float
    excess: float
    contact_gap: float
    phi_bound: float
    floor: float
    u_ok: bool
    gamma_ok: bool
    excess_ok: bool
    conclusion_ok: bool

    @property
    def steps_ok(self) -> bool:
        return self.u_ok and self.gamma_ok and self.excess_ok

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class HessianBound:
    form_min: float
    min_eigenvalue: float
    direction_index: int


@dataclass
class DeltaRecord:
    delta: float
    h: float
    collar: CollarCheck
    envelope_iterations: int | None = None
    envelope_residual: float | None = None
    abp: AbpReport | None = None
    z_delta: ComplexPoint | None = None
    z_delta_node: int | None = None
    dist_to_z0: float | None = None
    dist_to_E: float | None = None
    chain_records: list[ChainRecord] = field(default_factory=list)
    skipped_radii: list[float] = field(default_factory=list)
    hessian: HessianBound | None = None
    hessian_psd: bool | None = None
    hessian_tol: float | None = None
    failure: str | None = None

    @property
    def hessian_form_min(self) -> float | None:
        return None if self.hessian is None else self.hessian.form_min

    def as_dict(self) -> dict:
        return {
            "delta": self.delta,
            "h": self.h,
            "collar_ok": self.collar.ok,
            "collar_worst_node": self.collar.worst_node,
            "collar_worst_value": self.collar.worst_value,
            "envelope_iterations": self.envelope_iterations,
            "envelope_residual": self.envelope_residual,
            "abp": None if self.abp is None else self.abp.as_dict(),
            "z_delta": None if self.z_delta is None else list(self.z_delta.coords),
            "z_delta_node": self.z_delta_node,
            "dist_to_z0": self.dist_to_z0,
            "dist_to_E": self.dist_to_E,
            "chain_records": [c.as_dict() for c in self.chain_records],
            "skipped_radii": self.skipped_radii,
            "hessian_form_min": self.hessian_form_min,
            "hessian_min_eigenvalue": None if self.hessian is None else self.hessian.min_eigenvalue,
            "hessian_psd": self.hessian_psd,
            "hessian_tol": self.hessian_tol,
            "failure": self.failure,
        }


@dataclass
class ExtensionReport:
    scenario: Scenario
    verdict: ExtensionVerdict
    guard: dict[str, Verdict] = field(default_factory=dict)
    records: list[DeltaRecord] = field(default_factory=list)
    extrapolated_bound: float | None = None
    slope: float | None = None
    hessian_at_z0: float | None = None
    reasons: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "scenario": self.scenario.describe(),
            "verdict": self.verdict.value,
            "verdict_exit_code": self.verdict.exit_code,
            "verdict_note": self.verdict.note,
            "guard": {name: v.as_dict() for name, v in self.guard.items()},
            "records": [r.as_dict() for r in self.records],
            "extrapolated_bound": self.extrapolated_bound,
            "slope": self.slope,
            "hessian_at_z0": self.hessian_at_z0,
            "reasons": self.reasons,
        }


def validate_scenario(scenario: Scenario, domain: GridDomain) -> None:
    """Touching at z₀ and φ ≥ u at every node of the working grid."""
    z0 = scenario.z0.as_array()[None, :]
    gap0 = float(scenario.phi(z0)[0] - scenario.u(z0)[0])
    if abs(gap0) > TOUCH_TOL:
        raise ScenarioError(f"phi(z0) - u(z0) = {gap0:.3e}, expected touching")
    gap = scenario.phi(domain.coordinates) - scenario.u(domain.coordinates)
    worst = int(np.argmin(gap))
    if gap[worst] < -TOUCH_TOL:
        raise ScenarioError(f"phi < u by {-gap[worst]:.3e}; phi is not a majorant", worst)


def build_v_delta(scenario: Scenario, delta: float, domain: GridDomain) -> ScalarField:
    v = (scenario.phi - scenario.u) + delta * norm_squared_about(scenario.z0.as_array()) - delta**3
    return sample(v, domain)


def verify_collar_nonnegative(v_delta: ScalarField, domain: GridDomain, tol: float | None = None) -> CollarCheck:
    tol = settings.collar_tol if tol is None else tol
    collar = np.flatnonzero(domain.collar_mask)
    if collar.size == 0:
        return CollarCheck(ok=True, worst_node=None, worst_value=None)
    values = v_delta.values[collar]
    k = int(np.argmin(values))
    worst = float(values[k])
    check = CollarCheck(ok=worst >= -tol, worst_node=int(collar[k]), worst_value=worst)
    if not check.ok:
        logger.warning("v_delta is negative on the collar: %.3e at node %d", worst, check.worst_node)
    return check


def pick_contact_node(solution: EnvelopeSolution, E: SingularSet, margin: float, domain: GridDomain) -> int:
    """Contact node nearest z₀ that is farther than ``margin`` from E; ties go to the lower index."""
    contact = np.flatnonzero(solution.contact_mask)
    if contact.size:
        off_set = contact[~E.contains_many(domain.coordinates[contact], margin)]
    else:
        off_set = contact
    if off_set.size == 0:
        fraction = grid_fraction_on_set(E, domain, margin)
        logger.error("Contact selection failed at delta=%g (%d contact nodes)", domain.delta, contact.size)
        raise ContactSelectionError(domain.delta, fraction)
    order = np.lexsort((off_set, domain.distance[off_set]))
    return int(off_set[order[0]])


def pick_contact_point(solution: EnvelopeSolution, E: SingularSet, margin: float, domain: GridDomain) -> ComplexPoint:
    return domain.node_point(pick_contact_node(solution, E, margin, domain))


def _circle_mean_of(f: FunctionDescriptor, center: np.ndarray, r: float, T: ComplexPoint, m: int) -> float:
    points = center[None, :] + circle_offsets(r, T, m, center.size // 2)
    return float(np.mean(f(points)))


def chain_bound(
    scenario: Scenario,
    z_delta: ComplexPoint,
    solution: EnvelopeSolution,
    delta: float,
    r: float,
    T: ComplexPoint,
    m: int | None = None,
    *,
    T_index: int = 0,
    tol: float | None = None,
) -> ChainRecord:
    """Assemble the circle-mean chain for phi at z_delta along T at radius r.

    run_extension sweeps r over ``radius_factors`` times h, which defaults to
    {h, 2h, 4h}. With 17 points per axis the box half-width is 2δ = 8h, so a
    radius of 8h around a contact node inside B_δ would leave the box.
    ``tol`` is in units of r², matching ``phi_bound``.
    """
    m = settings.quadrature_nodes if m is None else m
    tol = settings.chain_tol if tol is None else tol
    z = as_coords(z_delta)
    z_row = z[None, :]
    gamma = solution.as_field()
    v = (scenario.phi - scenario.u) + delta * norm_squared_about(scenario.z0.as_array()) - delta**3
    r2 = r * r

    u_gap = _circle_mean_of(scenario.u, z, r, T, m) - float(scenario.u(z_row)[0])
    phi_gap = _circle_mean_of(scenario.phi, z, r, T, m) - float(scenario.phi(z_row)[0])
    gamma_mean = circle_mean(gamma, z, r, T, m, resample=False)
    gamma_at = interpolate(gamma, z)
    v_mean = _circle_mean_of(v, z, r, T, m)
    v_at = float(v(z_row)[0])

    gamma_gap = gamma_mean - gamma_at
    excess = v_mean - gamma_mean
    contact_gap = v_at - gamma_at
    phi_bound = phi_gap / r2

    assembled = u_gap + gamma_gap + excess - contact_gap - delta * r2
    scale = 1.0 + abs(u_gap) + abs(gamma_gap) + abs(excess) + abs(contact_gap) + abs(phi_gap)
    if abs(phi_gap - assembled) > 1e-9 * scale:
        raise ChainInconsistencyError(
            f"chain identity broken at delta={delta:g}, r={r:g}: "
            f"phi gap {phi_gap:.6e} vs assembled {assembled:.6e}"
        )

    u_ok = u_gap >= -tol * r2
    gamma_ok = gamma_gap >= -tol * r2
    excess_ok = excess >= -tol * r2
    floor = -delta - 3.0 * tol - contact_gap / r2
    if u_ok and gamma_ok and excess_ok and phi_bound < floor - 1e-9 * scale / r2:
        raise ChainInconsistencyError(
            f"phi bound {phi_bound:.6e} below the chain floor {floor:.6e} at delta={delta:g}, r={r:g}"
        )
    record = ChainRecord(
        delta=float(delta),
        r=float(r),
        T_index=int(T_index),
        u_gap=u_gap,
        gamma_gap=gamma_gap,
        excess=excess,
        contact_gap=contact_gap,
        phi_bound=phi_bound,
        floor=floor,
        u_ok=u_ok,
        gamma_ok=gamma_ok,
        excess_ok=excess_ok,
        conclusion_ok=phi_bound >= -delta - tol,
    )
    logger.debug("Chain delta=%g r=%g T=%d: b=%.6f floor=%.6f", delta, r, T_index, phi_bound, floor)
    return record


def hessian_form_min(phi: ScalarField, z_delta: ComplexPoint | int, directions: Sequence[ComplexPoint]) -> HessianBound:
    """min over the sampled T of T*·H·T, plus the smallest eigenvalue of H."""
    node = z_delta if isinstance(z_delta, (int, np.integer)) else _node_of(phi.domain, z_delta)
    H = complex_hessian(phi, int(node))
    forms = [H.quadratic_form(T) for T in directions]
    k = int(np.argmin(forms))
    return HessianBound(form_min=float(forms[k]), min_eigenvalue=min_eigenvalue(H), direction_index=k)


def _node_of(domain: GridDomain, p: ComplexPoint) -> int:
    local = (as_coords(p) - domain.center.as_array()) / domain.h + domain.mid
    multi = np.rint(local).astype(np.int64)
    if np.max(np.abs(local - multi)) > 1e-6:
        raise GridConfigurationError("z_delta", f"{list(p.coords)} is not a grid node")
    return domain.flat_index(multi)


def distance_to_set(E: SingularSet, p: ComplexPoint, upper: float, steps: int = 40) -> float | None:
    """Smallest margin at which ``p`` is within E, by bisection; None beyond ``upper``."""
    if not E.contains(p, upper):
        return None
    lo, hi = 0.0, upper
    if E.contains(p, 0.0):
        return 0.0
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if E.contains(p, mid):
            hi = mid
        else:
            lo = mid
    return hi


def _guard(scenario: Scenario, params: PipelineParams, directions: list[ComplexPoint]) -> tuple[dict[str, Verdict], list[str]]:
    domain = make_grid(scenario.n, scenario.z0, scenario.delta0 / 2, params.points_per_axis)
    reasons: list[str] = []
    try:
        validate_scenario(scenario, domain)
    except ScenarioError as e:
        logger.warning("Scenario %s rejected: %s", scenario.name, e)
        reasons.append(str(e))
    u_field = sample(scenario.u, domain)
    guard = {
        "subharmonic": certify_subharmonic(u_field, tol=params.certify_tol, directions=directions),
        "psh_off_E": certify_psh(
            u_field, scenario.E, params.guard_margin_factor * domain.h,
            directions=directions, tol=params.certify_tol,
        ),
    }
    if guard["subharmonic"].status is Status.FAIL:
        reasons.append("u is not subharmonic on the working ball; subharmonicity on the whole domain is essential")
    if guard["psh_off_E"].status is Status.FAIL:
        reasons.append("u is not plurisubharmonic off E")
    return guard, reasons


def _run_delta(
    scenario: Scenario,
    params: PipelineParams,
    delta: float,
    directions: list[ComplexPoint],
) -> DeltaRecord:
    domain = make_grid(scenario.n, scenario.z0, delta, params.points_per_axis)
    h = domain.h
    v = build_v_delta(scenario, delta, domain)
    record = DeltaRecord(delta=delta, h=h, collar=verify_collar_nonnegative(v, domain, params.collar_tol))
    if not record.collar.ok:
        record.failure = "collar"
        return record

    obstacle = build_obstacle(v, domain)
    try:
        solution = convex_envelope_iterative(
            obstacle, default_stencil(scenario.n), params.envelope_tol, contact_tol=params.contact_tol
        )
    except EnvelopeConvergenceError as e:
        record.failure = str(e)
        return record
    record.envelope_iterations = solution.iterations
    record.envelope_residual = solution.final_residual

    phi_field = sample(scenario.phi, domain)
    record.abp = abp_quantities(v, solution, poisson_rhs(phi_field, delta, scenario.n), delta)

    try:
        node = pick_contact_node(solution, scenario.E, params.margin_factor * h, domain)
    except ContactSelectionError as e:
        record.failure = str(e)
        return record
    z_delta = domain.node_point(node)
    record.z_delta, record.z_delta_node = z_delta, node
    record.dist_to_z0 = float(domain.distance[node])
    record.dist_to_E = distance_to_set(scenario.E, z_delta, 4.0 * delta)

    # Γ is only trusted on cells inside B_{2δ}.
    reach = 2.0 * delta - record.dist_to_z0 - h * math.sqrt(domain.dim)
    for factor in params.radius_factors:
        r = factor * h
        if r > reach:
            record.skipped_radii.append(r)
            logger.warning("Skipping r=%g at delta=%g: circle would leave the trusted ball", r, delta)
            continue
        for ti, T in enumerate(directions):
            record.chain_records.append(
                chain_bound(scenario, z_delta, solution, delta, r, T, params.m, T_index=ti, tol=params.chain_tol)
            )
    if not record.chain_records:
        record.failure = "no admissible radius"
        return record

    record.hessian = hessian_form_min(phi_field, node, directions)
    record.hessian_tol = psd_tolerance(phi_field, node) if params.psd_tol is None else params.psd_tol
    record.hessian_psd = record.hessian.min_eigenvalue >= -record.hessian_tol
    if not all(c.steps_ok for c in record.chain_records):
        record.failure = "chain step failed"
    return record


def run_extension(scenario: Scenario, params: PipelineParams | None = None) -> ExtensionReport:
    params = PipelineParams() if params is None else params
    params.validate(scenario)
    directions = params.direction_list(scenario.n)
    logger.info("Extension run %s: n=%d deltas=%s", scenario.name, scenario.n, list(params.deltas))

    guard, reasons = _guard(scenario, params, directions)
    report = ExtensionReport(scenario=scenario, verdict=ExtensionVerdict.INCONCLUSIVE, guard=guard)
    if reasons:
        report.verdict = ExtensionVerdict.PRECONDITION_VIOLATED
        report.reasons = reasons
        logger.warning("Scenario %s: %s", scenario.name, report.verdict.value)
        return report

    for delta in params.deltas:
        record = _run_delta(scenario, params, delta, directions)
        report.records.append(record)
        if record.failure == "collar":
            report.verdict = ExtensionVerdict.PRECONDITION_VIOLATED
            report.reasons.append(f"v_delta negative on the collar at delta={delta:g}")
            return report
        if record.failure:
            report.reasons.append(f"delta={delta:g}: {record.failure}")

    if report.reasons:
        logger.warning("Scenario %s inconclusive: %s", scenario.name, "; ".join(report.reasons))
        return report

    deltas = np.array([r.delta for r in report.records])
    bounds = np.array([r.hessian_form_min for r in report.records])
    slope, intercept = np.polyfit(deltas, bounds, 1)
    report.slope, report.extrapolated_bound = float(slope), float(intercept)

    finest = make_grid(scenario.n, scenario.z0, params.deltas[-1], params.points_per_axis)
    report.hessian_at_z0 = hessian_form_min(sample(scenario.phi, finest), finest.center_index, directions).form_min

    refuted: list[str] = []
    for record in report.records:
        floor = -record.delta - record.hessian_tol
        if record.hessian_form_min < floor:
            refuted.append(f"Hessian bound {record.hessian_form_min:.4g} below {floor:.4g} at delta={record.delta:g}")
        elif record.hessian.min_eigenvalue < floor:
            refuted.append(
                f"Hessian eigenvalue {record.hessian.min_eigenvalue:.4g} below {floor:.4g} at delta={record.delta:g}"
            )
        if not all(c.conclusion_ok for c in record.chain_records):
            refuted.append(f"chain conclusion failed at delta={record.delta:g}")
    if report.extrapolated_bound < -params.final_tol:
        refuted.append(f"extrapolated bound {report.extrapolated_bound:.4g} below -{params.final_tol:g}")
    gap = abs(report.hessian_at_z0 - report.extrapolated_bound)
    if scenario.smooth_phi and gap > 2.0 * params.final_tol:
        refuted.append(f"Hessian at z0 {report.hessian_at_z0:.4g} disagrees with the limit fit by {gap:.4g}")
    for larger, smaller in zip(report.records, report.records[1:]):
        if smaller.dist_to_z0 > larger.dist_to_z0 + 2.0 * larger.h:
            refuted.append(f"contact point moved away from z0 at delta={smaller.delta:g}")

    report.reasons = refuted
    report.verdict = ExtensionVerdict.REFUTED if refuted else ExtensionVerdict.CERTIFIED
    logger.info(
        "Scenario %s: %s (extrapolated bound %.4f)", scenario.name, report.verdict.value, report.extrapolated_bound
    )
    return report


def intro_counterexample(n: int = 2) -> Scenario:
    """u = min(‖z‖², 1): psh off the unit sphere, not subharmonic across it."""
    z0 = ComplexPoint.from_complex([1.0] + [0.0] * (n - 1))
    return Scenario(
        name="precondition-violation",
        n=n,
        u=Expression("min(r2, 1)"),
        phi=Constant(1.0),
        z0=z0,
        E=unit_sphere(n),
        delta0=0.5,
        expected=ExtensionVerdict.PRECONDITION_VIOLATED,
        notes="touching majorant phi = 1 at a point of the unit sphere",
    )


@dataclass
class DemoReport:
    n: int
    h: float
    margin: float
    psh_off: Verdict
    subharmonic: Verdict
    witness_distance_to_sphere: float | None
    extension: ExtensionReport
    checks: dict[str, bool]

    @property
    def verdict(self) -> ExtensionVerdict:
        return self.extension.verdict

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "h": self.h,
            "margin": self.margin,
            "psh_off_E": self.psh_off.as_dict(),
            "subharmonic": self.subharmonic.as_dict(),
            "witness_distance_to_sphere": self.witness_distance_to_sphere,
            "extension": self.extension.as_dict(),
            "checks": self.checks,
            "verdict": self.verdict.value,
        }


def counterexample_demo(
    n: int = 2,
    grid_radius: float = 1.5,
    points_per_axis: int | None = None,
    margin_factor: float | None = None,
) -> DemoReport:
    points_per_axis = settings.points_per_axis if points_per_axis is None else points_per_axis
    margin_factor = settings.psh_margin_factor if margin_factor is None else margin_factor
    domain = make_grid(n, None, grid_radius / 2, points_per_axis)
    u = sample(Expression("min(r2, 1)"), domain)
    sphere = unit_sphere(n)
    margin = margin_factor * domain.h

    psh_off = certify_psh(u, sphere, margin)
    subharmonic = certify_subharmonic(u)
    distance = None
    if subharmonic.witnesses:
        distance = abs(math.sqrt(sum(c * c for c in subharmonic.witnesses[0].point)) - 1.0)
    extension = run_extension(
        intro_counterexample(n), PipelineParams(deltas=(0.2, 0.1), points_per_axis=points_per_axis)
    )
    checks = {
        "psh_off_E_passes": psh_off.status is Status.PASS,
        "subharmonic_fails": subharmonic.status is Status.FAIL,
        "witness_near_sphere": distance is not None and distance < 2.0 * domain.h,
        "precondition_violated": extension.verdict is ExtensionVerdict.PRECONDITION_VIOLATED,
    }
    for name, ok in checks.items():
        if not ok:
            logger.error("Counterexample demo check %s failed", name)
    return DemoReport(
        n=n,
        h=domain.h,
        margin=margin,
        psh_off=psh_off,
        subharmonic=subharmonic,
        witness_distance_to_sphere=distance,
        extension=extension,
        checks=checks,
    )
