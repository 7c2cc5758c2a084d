"""Tests for the per-δ extension pipeline and the counterexample demo."""

import dataclasses

import numpy as np
import pytest

from psh_extension_lab.calculus import direction_sample
from psh_extension_lab.catalog import catalog_entry, scenario
from psh_extension_lab.envelope import build_obstacle, convex_envelope_iterative
from psh_extension_lab.functions import Constant, Expression
from psh_extension_lab.geometry import ComplexPoint, GridConfigurationError, ScalarField, make_grid, sample
from psh_extension_lab.pipeline import (
    ContactSelectionError,
    ExtensionVerdict,
    PipelineParams,
    Scenario,
    ScenarioError,
    build_v_delta,
    chain_bound,
    counterexample_demo,
    distance_to_set,
    hessian_form_min,
    pick_contact_node,
    pick_contact_point,
    run_extension,
    validate_scenario,
    verify_collar_nonnegative,
)
from psh_extension_lab.singular_sets import empty_set, hyperplane_re_z1, hypersurface_set

E1 = ComplexPoint((1.0, 0.0))


@pytest.fixture(scope="module")
def trivial_run():
    sc = scenario("trivial", 1)
    domain = make_grid(1, sc.z0, 0.2, 17)
    solution = convex_envelope_iterative(build_obstacle(build_v_delta(sc, 0.2, domain), domain))
    return sc, domain, solution


def _assert_consistent(report, params):
    """Per-delta Hessian floors, nonempty contact sets and the limit check."""
    for record in report.records:
        assert record.abp is not None and record.abp.contact_count >= 1
        assert record.hessian_tol is not None and record.hessian_tol > 0
        assert record.hessian_form_min >= -record.delta - record.hessian_tol
        assert record.hessian_psd
    assert abs(report.hessian_at_z0 - report.extrapolated_bound) <= 2 * params.final_tol


class TestValidateScenario:
    def test_negative_control_is_not_a_majorant(self):
        sc = scenario("negative-control", 1)
        with pytest.raises(ScenarioError, match="majorant") as info:
            validate_scenario(sc, make_grid(1, sc.z0, 0.25, 17))
        assert info.value.node_index is not None
        assert info.value.exit_code == 2

    def test_requires_touching(self):
        sc = Scenario("lifted", 1, Expression("r2"), Expression("r2 + 1"), ComplexPoint.origin(1), empty_set(), 0.5)
        with pytest.raises(ScenarioError, match="touching"):
            validate_scenario(sc, make_grid(1, None, 0.25, 17))

    def test_accepts_catalog_scenario(self, smooth_psh_n1):
        validate_scenario(smooth_psh_n1, make_grid(1, None, 0.25, 17))


class TestVDelta:
    def test_value_at_z0(self, trivial_n1):
        domain = make_grid(1, trivial_n1.z0, 0.1, 17)
        v = build_v_delta(trivial_n1, 0.1, domain)
        assert v.values[domain.center_index] == pytest.approx(-1e-3)

    def test_collar_nonnegative(self, smooth_psh_n1):
        domain = make_grid(1, None, 0.1, 17)
        check = verify_collar_nonnegative(build_v_delta(smooth_psh_n1, 0.1, domain), domain)
        assert check.ok
        assert check.worst_value >= -1e-12

    def test_collar_violation(self, grid_n1):
        values = np.where(grid_n1.collar_mask, -1.0, 0.0)
        check = verify_collar_nonnegative(ScalarField(grid_n1, values), grid_n1)
        assert not check.ok
        assert check.worst_value == -1.0
        assert grid_n1.collar_mask[check.worst_node]


class TestContactSelection:
    def test_nearest_contact_is_the_center(self, trivial_run):
        _, domain, solution = trivial_run
        assert pick_contact_node(solution, empty_set(), 0.0, domain) == domain.center_index

    def test_margin_pushes_off_the_hyperplane(self, trivial_run):
        _, domain, solution = trivial_run
        node = pick_contact_node(solution, hyperplane_re_z1(1), 1.5 * domain.h, domain)
        # both (±2h, 0) are nearest; the lower index wins
        assert domain.coordinates[node] == pytest.approx([-2 * domain.h, 0.0])

    def test_contact_point(self, trivial_run):
        sc, domain, solution = trivial_run
        point = pick_contact_point(solution, empty_set(), 0.0, domain)
        assert point.coords == pytest.approx(sc.z0.coords)

    def test_everything_on_the_set(self, trivial_run):
        _, domain, solution = trivial_run
        with pytest.raises(ContactSelectionError) as info:
            pick_contact_node(solution, hyperplane_re_z1(1), 100.0, domain)
        assert info.value.fraction_on_set == 1.0
        assert info.value.delta == 0.2


class TestChainBound:
    def test_trivial_scenario_at_center(self, trivial_run):
        sc, domain, solution = trivial_run
        z = domain.node_point(domain.center_index)
        record = chain_bound(sc, z, solution, 0.2, domain.h, E1)
        assert record.phi_bound == pytest.approx(0.0, abs=1e-12)
        assert record.contact_gap == pytest.approx(0.0, abs=1e-10)
        assert record.steps_ok
        assert record.conclusion_ok

    def test_identity_holds(self, trivial_run):
        sc, domain, solution = trivial_run
        z = domain.node_point(domain.flat_index((6, 8)))
        record = chain_bound(sc, z, solution, 0.2, 2 * domain.h, E1, T_index=3)
        assembled = record.u_gap + record.gamma_gap + record.excess - record.contact_gap - 0.2 * record.r**2
        assert record.phi_bound * record.r**2 == pytest.approx(assembled, abs=1e-12)
        assert record.T_index == 3
        assert set(record.as_dict()) >= {"u_gap", "gamma_gap", "excess", "contact_gap", "phi_bound"}


class TestHessianAndDistance:
    def test_hessian_finds_concave_direction(self, small_grid_n2):
        phi = sample(catalog_entry("sh-not-psh").function, small_grid_n2)
        bound = hessian_form_min(phi, small_grid_n2.center_index, direction_sample(2, 16))
        assert bound.form_min == pytest.approx(-1.0)
        assert bound.min_eigenvalue == pytest.approx(-1.0)
        assert bound.direction_index == 1

    def test_hessian_at_point(self, grid_n1):
        phi = sample(Expression("r2"), grid_n1)
        bound = hessian_form_min(phi, ComplexPoint((0.25, -0.125)), [E1])
        assert bound.form_min == pytest.approx(1.0)

    def test_hessian_off_node(self, grid_n1):
        phi = sample(Expression("r2"), grid_n1)
        with pytest.raises(GridConfigurationError, match="not a grid node"):
            hessian_form_min(phi, ComplexPoint((0.2, 0.0)), [E1])

    def test_distance_to_hyperplane(self):
        E = hyperplane_re_z1(1)
        assert distance_to_set(E, ComplexPoint((0.3, 0.0)), 1.0) == pytest.approx(0.3, abs=1e-9)
        assert distance_to_set(E, ComplexPoint((0.3, 0.0)), 0.1) is None
        assert distance_to_set(E, ComplexPoint((0.0, 0.5)), 1.0) == 0.0


class TestPipelineParams:
    @pytest.mark.parametrize(
        "kwargs, message",
        [
            ({"deltas": (0.1,)}, "at least two"),
            ({"deltas": (0.1, 0.2)}, "strictly decreasing"),
            ({"deltas": (0.3, 0.1)}, "must lie in"),
            ({"radius_factors": ()}, "positive"),
        ],
    )
    def test_validate(self, trivial_n1, kwargs, message):
        with pytest.raises(GridConfigurationError, match=message):
            PipelineParams(**kwargs).validate(trivial_n1)

    def test_radius_sweep_stays_in_the_box(self):
        params = PipelineParams()
        assert params.radius_factors == (1.0, 2.0, 4.0)
        # the box spans 4δ, so h = 4δ / (ppa - 1); r <= δ keeps circles about B_δ inside B_{2δ}
        h_over_delta = 4 / (params.points_per_axis - 1)
        assert max(params.radius_factors) * h_over_delta <= 1.0

    def test_directions_default_to_sample(self):
        params = PipelineParams(seed=4)
        assert params.direction_list(2) == direction_sample(2, params.direction_count, 4)

    def test_verdict_exit_codes(self):
        assert ExtensionVerdict.CERTIFIED.exit_code == 0
        assert ExtensionVerdict.REFUTED.exit_code == 1
        assert ExtensionVerdict.PRECONDITION_VIOLATED.exit_code == 2
        assert ExtensionVerdict.INCONCLUSIVE.exit_code == 2


class TestRunExtension:
    def test_trivial(self, trivial_n1):
        report = run_extension(trivial_n1)
        assert report.verdict is ExtensionVerdict.CERTIFIED
        assert len(report.records) == 3
        assert report.extrapolated_bound == pytest.approx(0.0, abs=1e-9)
        assert all(r.abp is not None and r.abp.lower_bound_ok for r in report.records)
        _assert_consistent(report, PipelineParams())

    def test_smooth_psh(self, smooth_psh_n1):
        report = run_extension(smooth_psh_n1)
        assert report.verdict is ExtensionVerdict.CERTIFIED, report.reasons
        assert report.extrapolated_bound >= 0.9
        for record in report.records:
            assert record.hessian_form_min >= 1.0 - 1e-9
            assert record.hessian_psd
            assert record.dist_to_E is not None and record.dist_to_E > 1.5 * record.h
            assert all(c.steps_ok and c.conclusion_ok for c in record.chain_records)
        assert report.as_dict()["verdict"] == "Certified"

    @pytest.mark.parametrize("name", ["negative-control", "precondition-violation"])
    def test_precondition_violated(self, name):
        report = run_extension(scenario(name, 1))
        assert report.verdict is ExtensionVerdict.PRECONDITION_VIOLATED
        assert report.records == []
        assert report.reasons

    def test_exceptional_set_covers_everything(self, trivial_n1):
        everywhere = dataclasses.replace(trivial_n1, E=hypersurface_set(Constant(0.0), 1.0))
        report = run_extension(everywhere, PipelineParams(deltas=(0.2, 0.1)))
        assert report.verdict is ExtensionVerdict.INCONCLUSIVE
        assert any("No contact node off E" in reason for reason in report.reasons)
        assert report.guard["psh_off_E"].status.value == "Inconclusive"

    @pytest.mark.slow
    @pytest.mark.parametrize("name", ["smooth-psh", "smooth-psh-cantor"])
    def test_dimension_two(self, name):
        report = run_extension(scenario(name, 2))
        assert report.verdict is ExtensionVerdict.CERTIFIED, report.reasons
        assert [r.delta for r in report.records] == [0.2, 0.1, 0.05]
        assert abs(report.extrapolated_bound - 1.0) <= 0.05
        _assert_consistent(report, PipelineParams())


class TestLimitBehaviour:
    @pytest.fixture(scope="class", params=["smooth-psh", "smooth-psh-cantor"])
    def report(self, request):
        return run_extension(scenario(request.param, 1))

    def test_certified(self, report):
        assert report.verdict is ExtensionVerdict.CERTIFIED, report.reasons

    def test_extrapolated_bound_near_one(self, report):
        assert abs(report.extrapolated_bound - 1.0) <= 0.05

    def test_per_delta_checks(self, report):
        _assert_consistent(report, PipelineParams())

    def test_contact_points_approach_z0(self, report):
        for larger, smaller in zip(report.records, report.records[1:]):
            assert smaller.dist_to_z0 <= larger.dist_to_z0 + 2 * larger.h

    def test_limit_mismatch_is_refuted(self, smooth_psh_n1):
        report = run_extension(smooth_psh_n1, PipelineParams(final_tol=1e-4))
        assert report.verdict is ExtensionVerdict.REFUTED
        assert any("disagrees with the limit fit" in reason for reason in report.reasons)

    def test_rough_phi_skips_the_limit_check(self, smooth_psh_n1):
        rough = dataclasses.replace(smooth_psh_n1, smooth_phi=False)
        report = run_extension(rough, PipelineParams(final_tol=1e-4))
        assert not any("disagrees with the limit fit" in reason for reason in report.reasons)

    def test_report_documents_the_verdict(self, report):
        data = report.as_dict()
        assert data["verdict_exit_code"] == 0
        assert data["verdict_note"] == ExtensionVerdict.CERTIFIED.note

    def test_every_verdict_has_a_note(self):
        assert "Hessian" in ExtensionVerdict.REFUTED.note
        assert all(verdict.note for verdict in ExtensionVerdict)


class TestCounterexampleDemo:
    def test_dimension_one(self):
        demo = counterexample_demo(1)
        assert all(demo.checks.values()), demo.checks
        assert demo.verdict is ExtensionVerdict.PRECONDITION_VIOLATED
        assert demo.as_dict()["psh_off_E"]["status"] == "Pass"

    @pytest.mark.slow
    def test_dimension_two(self):
        demo = counterexample_demo(2)
        assert all(demo.checks.values()), demo.checks
        assert demo.verdict is ExtensionVerdict.PRECONDITION_VIOLATED
        assert demo.h == pytest.approx(0.1875)
        assert demo.witness_distance_to_sphere < 2 * demo.h
