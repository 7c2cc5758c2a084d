"""Tests for the constrained convex envelope and its LP oracle."""

import numpy as np
import pytest

from psh_extension_lab.catalog import scenario
from psh_extension_lab.envelope import (
    EnvelopeConvergenceError,
    Obstacle,
    build_obstacle,
    contact_set,
    convex_envelope_iterative,
    convex_envelope_lp,
    default_stencil,
    double_well_obstacle,
    nonvoid_witness,
)
from psh_extension_lab.geometry import GridConfigurationError, make_grid
from psh_extension_lab.pipeline import build_v_delta

DELTA = 0.2


@pytest.fixture(scope="module")
def trivial_obstacle():
    sc = scenario("trivial", 1)
    domain = make_grid(1, sc.z0, DELTA, 17)
    return build_obstacle(build_v_delta(sc, DELTA, domain), domain)


@pytest.fixture(scope="module")
def trivial_solution(trivial_obstacle):
    return convex_envelope_iterative(trivial_obstacle)


@pytest.fixture(scope="module")
def double_well():
    return double_well_obstacle(17)


def _oracle_obstacle(which, points_per_axis):
    if which == "double_well":
        return double_well_obstacle(points_per_axis)
    sc = scenario("trivial", 1)
    domain = make_grid(1, sc.z0, DELTA, points_per_axis)
    return build_obstacle(build_v_delta(sc, DELTA, domain), domain)


def _midpoint_defect(solution, obstacle):
    """Largest γ(x) − ½(γ(x+e) + γ(x−e)) over stencil triples inside the ball."""
    domain = obstacle.domain
    grid = solution.gamma.reshape(domain.shape)
    worst = -np.inf
    for e in default_stencil(domain.n):
        for node in obstacle.support:
            multi = np.array(domain.multi_index(node))
            plus, minus = multi + e, multi - e
            if np.any(plus < 0) or np.any(minus < 0):
                continue
            if np.any(plus >= domain.points_per_axis) or np.any(minus >= domain.points_per_axis):
                continue
            a, b = grid[tuple(plus)], grid[tuple(minus)]
            if np.isnan(a) or np.isnan(b):
                continue
            worst = max(worst, grid[tuple(multi)] - 0.5 * (a + b))
    return worst


class TestBuildObstacle:
    def test_collar_zero_outside_nan(self, trivial_obstacle):
        domain = trivial_obstacle.domain
        assert np.all(trivial_obstacle.w[domain.collar_mask] == 0.0)
        assert np.all(np.isnan(trivial_obstacle.w[domain.outer_mask]))
        assert trivial_obstacle.w[domain.center_index] == pytest.approx(-(DELTA**3))

    def test_different_grid(self, trivial_obstacle):
        sc = scenario("trivial", 1)
        other = make_grid(1, None, 0.1, 17)
        with pytest.raises(GridConfigurationError, match="different grid"):
            build_obstacle(build_v_delta(sc, 0.1, other), trivial_obstacle.domain)

    def test_wrong_size(self, grid_n1):
        with pytest.raises(GridConfigurationError, match="expected 289"):
            Obstacle(grid_n1, np.zeros(5))

    def test_non_finite_on_ball(self, grid_n1):
        values = np.zeros(grid_n1.node_count)
        values[grid_n1.center_index] = np.inf
        with pytest.raises(GridConfigurationError, match="finite"):
            Obstacle(grid_n1, values)


class TestNonvoidWitness:
    def test_trivial(self, trivial_obstacle):
        witness = nonvoid_witness(trivial_obstacle)
        assert witness.b == pytest.approx(-(DELTA**3))
        assert witness.a == (0.0, 0.0)

    def test_nonnegative_obstacle(self, double_well):
        assert nonvoid_witness(double_well).b == 0.0

    def test_deep_minimum(self, grid_n1):
        values = np.zeros(grid_n1.node_count)
        values[grid_n1.center_index] = -5.0
        witness = nonvoid_witness(Obstacle(grid_n1, values))
        assert witness.b == -5.0
        assert witness(grid_n1.coordinates[:3]) == pytest.approx([-5.0] * 3)


class TestStencil:
    def test_default_in_dimension_one(self):
        assert default_stencil(1) == [(1, 0), (0, 1), (1, 1), (1, -1)]

    def test_width(self):
        stencil = default_stencil(1, width=2)
        assert len(stencil) == 8
        assert (2, -2) in stencil

    def test_dimension_two_size(self):
        # 4 axes plus 2 diagonals for each of the 6 axis pairs
        assert len(default_stencil(2)) == 16

    def test_width_zero(self):
        with pytest.raises(GridConfigurationError, match="width"):
            default_stencil(1, width=0)

    def test_missing_axis(self, trivial_obstacle):
        with pytest.raises(GridConfigurationError, match="missing axis direction 1"):
            convex_envelope_iterative(trivial_obstacle, stencil=[(1, 0), (1, 1)])

    def test_non_positive_tol(self, trivial_obstacle):
        with pytest.raises(GridConfigurationError, match="must be > 0"):
            convex_envelope_iterative(trivial_obstacle, tol=0.0)


class TestIterativeEnvelope:
    def test_zero_obstacle_is_fixed(self, grid_n1):
        solution = convex_envelope_iterative(Obstacle(grid_n1, np.zeros(grid_n1.node_count)))
        assert solution.iterations == 1
        assert np.all(solution.gamma[grid_n1.support_mask] == 0.0)

    def test_iteration_budget(self, trivial_obstacle):
        with pytest.raises(EnvelopeConvergenceError) as info:
            convex_envelope_iterative(trivial_obstacle, max_iter=1)
        assert info.value.iterations == 1
        assert info.value.exit_code == 2

    def test_below_obstacle(self, trivial_obstacle, trivial_solution):
        support = trivial_obstacle.support
        assert np.all(trivial_solution.gamma[support] <= trivial_obstacle.w[support] + 1e-12)
        assert np.all(np.isnan(trivial_solution.gamma[trivial_obstacle.domain.outer_mask]))

    def test_midpoint_convex(self, trivial_obstacle, trivial_solution):
        assert _midpoint_defect(trivial_solution, trivial_obstacle) <= 1e-10

    def test_center_value(self, trivial_obstacle, trivial_solution):
        center = trivial_obstacle.domain.center_index
        assert trivial_solution.gamma[center] == pytest.approx(-(DELTA**3), abs=1e-10)

    @pytest.mark.parametrize("which", ["trivial", "double_well"])
    def test_idempotent(self, which):
        obstacle = _oracle_obstacle(which, 17)
        solution = convex_envelope_iterative(obstacle)
        again = convex_envelope_iterative(Obstacle.from_values(obstacle.domain, solution.gamma))
        support = obstacle.support
        assert np.allclose(again.gamma[support], solution.gamma[support], atol=1e-8)

    @pytest.mark.parametrize("which", ["trivial", "double_well"])
    def test_monotone_in_obstacle(self, which):
        obstacle = _oracle_obstacle(which, 17)
        solution = convex_envelope_iterative(obstacle)
        domain = obstacle.domain
        raised = np.where(np.isnan(obstacle.w), 0.0, obstacle.w) + 0.01 * np.abs(domain.coordinates[:, 0])
        higher = convex_envelope_iterative(Obstacle(domain, raised))
        support = obstacle.support
        assert np.all(solution.gamma[support] <= higher.gamma[support] + 1e-9)

    def test_as_field_fills_outside(self, trivial_solution):
        field = trivial_solution.as_field()
        assert np.all(np.isfinite(field.values))

    def test_double_well_center(self, double_well):
        solution = convex_envelope_iterative(double_well)
        assert solution.gamma[double_well.domain.center_index] == pytest.approx(0.0, abs=1e-8)


class TestLinearProgramOracle:
    def test_trivial_center(self, trivial_obstacle):
        value = convex_envelope_lp(trivial_obstacle, trivial_obstacle.domain.center_index)
        assert value == pytest.approx(-(DELTA**3), abs=1e-6)

    def test_double_well_center(self, double_well):
        assert convex_envelope_lp(double_well, double_well.domain.center_index) == pytest.approx(0.0, abs=1e-6)

    def test_node_outside_ball(self, trivial_obstacle):
        corner = trivial_obstacle.domain.flat_index((0, 0))
        with pytest.raises(GridConfigurationError, match="outside"):
            convex_envelope_lp(trivial_obstacle, corner)

    @pytest.mark.parametrize("points_per_axis", [17, 33])
    @pytest.mark.parametrize("which", ["trivial", "double_well"])
    def test_iteration_matches_oracle(self, which, points_per_axis, c0):
        obstacle = _oracle_obstacle(which, points_per_axis)
        solution = convex_envelope_iterative(obstacle)
        domain = obstacle.domain
        bound = c0[which] * (domain.h + solution.final_residual)
        for node in np.flatnonzero(domain.inner_mask):
            exact = convex_envelope_lp(obstacle, int(node))
            # the LP envelope is convex, hence below every midpoint-convex minorant
            assert exact <= solution.gamma[node] + 1e-6
            assert abs(solution.gamma[node] - exact) <= bound


class TestContactSet:
    def test_trivial_contains_center(self, trivial_obstacle, trivial_solution):
        contact = contact_set(trivial_solution, trivial_obstacle)
        h = trivial_obstacle.domain.h
        assert contact.mask[trivial_obstacle.domain.center_index]
        assert contact.measure == pytest.approx(contact.count * h**2)
        assert not np.any(contact.mask & ~trivial_obstacle.domain.inner_mask)

    @pytest.mark.parametrize("n, points_per_axis", [(1, 17), (2, 9)])
    def test_trivial_contact_is_not_sparse(self, n, points_per_axis):
        sc = scenario("trivial", n)
        domain = make_grid(n, sc.z0, DELTA, points_per_axis)
        solution = convex_envelope_iterative(build_obstacle(build_v_delta(sc, DELTA, domain), domain))
        assert solution.contact_count >= 0.01 * int(domain.inner_mask.sum())

    def test_monotone_in_tolerance(self, trivial_obstacle, trivial_solution):
        counts = [contact_set(trivial_solution, trivial_obstacle, tol).count for tol in (0.0, 1e-4, 1e-3, 1e-2)]
        assert counts == sorted(counts)

    def test_negative_tolerance_is_empty(self, trivial_obstacle, trivial_solution):
        contact = contact_set(trivial_solution, trivial_obstacle, -1.0)
        assert contact.count == 0
        assert contact.measure == 0.0

    def test_double_well_contact_on_the_wells(self, double_well):
        solution = convex_envelope_iterative(double_well, contact_tol=0.2)
        contact = np.flatnonzero(solution.contact_mask)
        assert contact.size > 0
        x = double_well.domain.coordinates[contact, 0]
        assert np.allclose(np.abs(x), 0.75)
