"""Constrained convex envelope of the obstacle built from v_δ.

The envelope is the largest function below w that is midpoint-convex along
every stencil direction, computed by the Jacobi obstacle iteration

    γ^{k+1}(x) = min( w(x), min_e ½(γ^k(x + e) + γ^k(x − e)) )

restricted to the nodes of the closed ball B_{2δ}. A linear program over
all obstacle nodes gives the exact affine-minorant value at a single node
and serves as the oracle for the iteration.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from psh_extension_lab.calculus import laplacian_all
from psh_extension_lab.config import settings
from psh_extension_lab.errors import LabError
from psh_extension_lab.geometry import GridConfigurationError, GridDomain, ScalarField, make_grid

logger = logging.getLogger(__name__)

StencilVector = tuple[int, ...]


class EnvelopeConvergenceError(LabError):
    """Raised when the obstacle iteration stops above tolerance."""

    exit_code = 2

    def __init__(self, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"Envelope iteration did not converge: residual {residual:.3e} after {iterations} sweeps"
        )


class EnvelopeOracleError(LabError):
    """Raised when the affine-minorant LP does not return an optimum."""

    exit_code = 2

    def __init__(self, status: int, message: str):
        self.status = status
        self.message = message
        super().__init__(f"LP oracle failed (status {status}): {message}")


@dataclass(frozen=True, eq=False)
class AffineFunction:
    """l(x) = a·(x − center) + b."""

    a: tuple[float, ...]
    b: float

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return points @ np.asarray(self.a) + self.b


@dataclass(frozen=True, eq=False)
class Obstacle:
    """Obstacle values on B_{2δ}; NaN marks nodes outside the ball."""

    domain: GridDomain
    w: np.ndarray

    def __post_init__(self):
        w = np.array(self.w, dtype=float).reshape(-1)
        if w.size != self.domain.node_count:
            raise GridConfigurationError("obstacle", f"expected {self.domain.node_count} values, got {w.size}")
        w[~self.domain.support_mask] = np.nan
        if not np.all(np.isfinite(w[self.domain.support_mask])):
            raise GridConfigurationError("obstacle", "values must be finite on B_2δ")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @classmethod
    def from_values(cls, domain: GridDomain, values: np.ndarray) -> "Obstacle":
        """Obstacle with arbitrary values on the ball, for tests and idempotence checks."""
        return cls(domain, values)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.domain.support_mask)

    def affine_offsets(self) -> np.ndarray:
        return self.domain.offsets[self.support]


@dataclass(frozen=True, eq=False)
class EnvelopeSolution:
    domain: GridDomain
    gamma: np.ndarray
    contact_mask: np.ndarray
    iterations: int
    final_residual: float
    contact_tol: float

    @property
    def contact_count(self) -> int:
        return int(self.contact_mask.sum())

    def as_field(self) -> ScalarField:
        """Γ as a grid field; nodes outside B_{2δ} hold 0 and are never read."""
        values = np.where(np.isnan(self.gamma), 0.0, self.gamma)
        return ScalarField(self.domain, values)


def build_obstacle(v_delta: ScalarField, domain: GridDomain) -> Obstacle:
    """w = v_δ on B_δ, w = 0 on the collar B_{2δ} ∖ B_δ."""
    if v_delta.domain != domain:
        raise GridConfigurationError("domain", "v_delta is sampled on a different grid")
    w = np.full(domain.node_count, np.nan)
    w[domain.inner_mask] = v_delta.values[domain.inner_mask]
    w[domain.collar_mask] = 0.0
    return Obstacle(domain, w)


def double_well_obstacle(points_per_axis: int) -> Obstacle:
    """w(x) = (x1² − 1)² on the disc of radius 2 in C, independent of y1."""
    domain = make_grid(1, None, 1.0, points_per_axis)
    x = domain.coordinates[:, 0]
    return Obstacle(domain, (x * x - 1.0) ** 2)


def nonvoid_witness(obstacle: Obstacle) -> AffineFunction:
    inner = obstacle.w[obstacle.domain.inner_mask]
    level = min(0.0, float(inner.min())) if inner.size else 0.0
    return AffineFunction(a=(0.0,) * obstacle.domain.dim, b=level)


def default_stencil(n: int, width: int = 1) -> list[StencilVector]:
    """Axis directions and the (±1, ±1) diagonals of every axis pair, times 1..width."""
    if width < 1:
        raise GridConfigurationError("stencil width", f"must be >= 1, got {width}")
    dim = 2 * n
    base: list[np.ndarray] = []
    for a in range(dim):
        e = np.zeros(dim, dtype=np.int64)
        e[a] = 1
        base.append(e)
    for a, b in itertools.combinations(range(dim), 2):
        for sign in (1, -1):
            e = np.zeros(dim, dtype=np.int64)
            e[a], e[b] = 1, sign
            base.append(e)
    return [tuple(int(c) for c in s * e) for s in range(1, width + 1) for e in base]


def _check_stencil(stencil: Sequence[StencilVector], dim: int) -> np.ndarray:
    vectors = np.asarray(stencil, dtype=np.int64)
    if vectors.ndim != 2 or vectors.shape[1] != dim:
        raise GridConfigurationError("stencil", f"vectors need {dim} integer components")
    for a in range(dim):
        axis = np.zeros(dim, dtype=np.int64)
        axis[a] = 1
        if not np.any(np.all(vectors == axis, axis=1) | np.all(vectors == -axis, axis=1)):
            raise GridConfigurationError("stencil", f"missing axis direction {a}")
    return vectors


def _neighbour_slots(domain: GridDomain, support: np.ndarray, vectors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Positions of x ± e inside the support list; missing neighbours point at a sentinel slot."""
    count = support.size
    position = np.full(domain.node_count, count, dtype=np.int64)
    position[support] = np.arange(count)
    multi = np.stack(np.unravel_index(support, domain.shape), axis=-1)
    top = domain.points_per_axis - 1

    def slots(shift: np.ndarray) -> np.ndarray:
        target = multi + shift
        inside = np.all((target >= 0) & (target <= top), axis=1)
        flat = np.clip(target, 0, top) @ domain.strides
        return np.where(inside, position[flat], count)

    plus = np.stack([slots(v) for v in vectors])
    minus = np.stack([slots(-v) for v in vectors])
    return plus, minus


def default_contact_tol(obstacle: Obstacle, tol: float) -> float:
    """10·tol + h²·max |Δw| over B_δ nodes whose stencil stays in B_δ."""
    domain = obstacle.domain
    inner = domain.inner_mask
    interior = inner & domain.interior_mask()
    nodes = np.flatnonzero(interior)
    keep = np.ones(nodes.size, dtype=bool)
    for s in domain.strides:
        keep &= inner[nodes + s] & inner[nodes - s]
    nodes = nodes[keep]
    curvature = 0.0
    if nodes.size:
        values = np.where(np.isnan(obstacle.w), 0.0, obstacle.w)
        curvature = float(np.max(np.abs(laplacian_all(values, domain, nodes))))
    return settings.contact_tol_factor * tol + domain.h**2 * curvature


def convex_envelope_iterative(
    obstacle: Obstacle,
    stencil: Sequence[StencilVector] | None = None,
    tol: float | None = None,
    max_iter: int | None = None,
    contact_tol: float | None = None,
) -> EnvelopeSolution:
    domain = obstacle.domain
    tol = settings.envelope_tol if tol is None else tol
    if not tol > 0:
        raise GridConfigurationError("envelope tol", f"must be > 0, got {tol}")
    max_iter = settings.max_iter_factor * domain.points_per_axis**2 if max_iter is None else max_iter
    vectors = _check_stencil(default_stencil(domain.n) if stencil is None else stencil, domain.dim)

    support = obstacle.support
    w = obstacle.w[support]
    plus, minus = _neighbour_slots(domain, support, vectors)

    # Trailing +inf slot: a direction with a missing neighbour imposes nothing.
    g = np.append(w, np.inf)
    residual = np.inf
    iterations = 0
    while iterations < max_iter:
        midpoints = 0.5 * (g[plus] + g[minus])
        candidate = np.minimum(w, midpoints.min(axis=0))
        residual = float(np.max(np.abs(g[:-1] - candidate)))
        g[:-1] = candidate
        iterations += 1
        if residual < tol:
            break
    else:
        logger.error("Envelope stalled at residual %.3e after %d sweeps", residual, iterations)
        raise EnvelopeConvergenceError(residual, iterations)

    gamma = np.full(domain.node_count, np.nan)
    gamma[support] = g[:-1]
    contact_tol = default_contact_tol(obstacle, tol) if contact_tol is None else contact_tol
    mask = _contact_mask(obstacle, gamma, contact_tol)
    logger.info(
        "Envelope converged after %d sweeps (residual %.2e, %d contact nodes)",
        iterations, residual, int(mask.sum()),
    )
    return EnvelopeSolution(
        domain=domain,
        gamma=gamma,
        contact_mask=mask,
        iterations=iterations,
        final_residual=residual,
        contact_tol=float(contact_tol),
    )


def _contact_mask(obstacle: Obstacle, gamma: np.ndarray, contact_tol: float) -> np.ndarray:
    inner = obstacle.domain.inner_mask
    mask = np.zeros(obstacle.domain.node_count, dtype=bool)
    mask[inner] = obstacle.w[inner] - gamma[inner] <= contact_tol
    return mask


def convex_envelope_lp(obstacle: Obstacle, node: int) -> float:
    """max a·x₀ + b subject to a·x_i + b ≤ w(x_i) on every obstacle node."""
    domain = obstacle.domain
    if not domain.support_mask[node]:
        raise GridConfigurationError("node", f"node {node} lies outside B_2δ")
    support = obstacle.support
    offsets = domain.offsets
    A_ub = np.hstack([offsets[support], np.ones((support.size, 1))])
    b_ub = obstacle.w[support]
    c = -np.append(offsets[node], 1.0)
    result = linprog(
        c,
        A_ub=A_ub,
        b_ub=b_ub,
        bounds=[(None, None)] * (domain.dim + 1),
        method="highs",
    )
    if result.status != 0:
        logger.error("LP oracle failed at node %d: %s", node, result.message)
        raise EnvelopeOracleError(int(result.status), str(result.message))
    return float(-result.fun)


@dataclass(frozen=True)
class ContactSet:
    mask: np.ndarray
    count: int
    measure: float


def contact_set(solution: EnvelopeSolution, obstacle: Obstacle, contact_tol: float | None = None) -> ContactSet:
    """Nodes of B_δ with w − γ ≤ contact_tol, and the Riemann volume count·h^{2n}."""
    contact_tol = solution.contact_tol if contact_tol is None else contact_tol
    mask = _contact_mask(obstacle, solution.gamma, contact_tol)
    count = int(mask.sum())
    if count == 0:
        logger.warning("Empty contact set at contact_tol %.3e", contact_tol)
    return ContactSet(mask=mask, count=count, measure=count * obstacle.domain.h ** obstacle.domain.dim)
