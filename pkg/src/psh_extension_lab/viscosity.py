"""Certifiers for subharmonicity and plurisubharmonicity on a grid.

Testing against every C² majorant reduces to sub-mean-value inequalities:
a node passes at radius r when the circle (psh) or sphere (subharmonic)
mean is at least the value minus tol·r². Nodes whose circles leave the grid,
or that lie within the margin of an excluded set, are skipped and counted.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.ndimage import maximum_filter

from psh_extension_lab.calculus import (
    DetPlusValue,
    MINUS_INFINITY,
    circle_means,
    direction_sample,
    hessian_from_differences,
    min_eigenvalues,
    second_differences_all,
)
from psh_extension_lab.config import settings
from psh_extension_lab.errors import LabError
from psh_extension_lab.geometry import ComplexPoint, ScalarField
from psh_extension_lab.singular_sets import EmptySet, SingularSet, grid_membership

logger = logging.getLogger(__name__)


class CertifierArgumentError(LabError, ValueError):
    """Raised for empty radius lists or radii that do not fit the grid."""


class Status(str, Enum):
    PASS = "Pass"
    FAIL = "Fail"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class Witness:
    node_index: int
    point: tuple[float, ...]
    violation: float
    radius: float | None = None
    direction_index: int | None = None

    def as_dict(self) -> dict:
        return {
            "node_index": self.node_index,
            "point": list(self.point),
            "radius": self.radius,
            "direction_index": self.direction_index,
            "violation": self.violation,
        }


@dataclass(frozen=True)
class Verdict:
    status: Status
    witnesses: tuple[Witness, ...]
    tested_node_count: int
    skipped_node_count: int
    violation_count: int = 0
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status is Status.PASS

    def as_dict(self) -> dict:
        return {
            "status": self.status.value,
            "tested_node_count": self.tested_node_count,
            "skipped_node_count": self.skipped_node_count,
            "violation_count": self.violation_count,
            "witnesses": [w.as_dict() for w in self.witnesses],
            **self.details,
        }


class _WitnessPool:
    """Collects violations and keeps the worst ones in a deterministic order."""

    def __init__(self, field_: ScalarField):
        self.field = field_
        self.violation: list[np.ndarray] = []
        self.node: list[np.ndarray] = []
        self.direction: list[np.ndarray] = []
        self.radius_index: list[np.ndarray] = []
        self.radii: list[float] = []

    def add(self, nodes: np.ndarray, violation: np.ndarray, radius_index: int, direction_index: int) -> None:
        if nodes.size == 0:
            return
        self.node.append(nodes.astype(np.int64))
        self.violation.append(violation)
        self.direction.append(np.full(nodes.size, direction_index, dtype=np.int64))
        self.radius_index.append(np.full(nodes.size, radius_index, dtype=np.int64))

    @property
    def count(self) -> int:
        return int(sum(v.size for v in self.violation))

    def worst(self, radii: Sequence[float], with_direction: bool, limit: int) -> tuple[Witness, ...]:
        if not self.violation:
            return ()
        violation = np.concatenate(self.violation)
        node = np.concatenate(self.node)
        direction = np.concatenate(self.direction)
        radius_index = np.concatenate(self.radius_index)
        # Largest violation first; ties by node, then direction, then radius.
        order = np.lexsort((radius_index, direction, node, -violation))[:limit]
        coords = self.field.domain.coordinates
        return tuple(
            Witness(
                node_index=int(node[i]),
                point=tuple(float(c) for c in coords[node[i]]),
                violation=float(violation[i]),
                radius=None if radius_index[i] < 0 else float(radii[radius_index[i]]),
                direction_index=int(direction[i]) if with_direction else None,
            )
            for i in order
        )


def default_radii(field_: ScalarField) -> list[float]:
    return [f * field_.domain.h for f in settings.certify_radius_factors]


def _eligible_nodes(field_: ScalarField, radii: Sequence[float]) -> np.ndarray:
    if not radii:
        raise CertifierArgumentError("radii must be a non-empty list")
    if any(r <= 0 for r in radii):
        raise CertifierArgumentError(f"radii must be positive, got {list(radii)}")
    fits = field_.domain.box_distance >= max(radii) * (1 - 1e-12)
    return fits


def _finish(pool: _WitnessPool, radii, tested: int, skipped: int, with_direction: bool, name: str, details=None) -> Verdict:
    witnesses = pool.worst(radii, with_direction, settings.witness_limit)
    if tested == 0:
        status = Status.INCONCLUSIVE
    elif witnesses:
        status = Status.FAIL
    else:
        status = Status.PASS
    logger.info(
        "%s: %s (tested %d, skipped %d, violations %d)",
        name, status.value, tested, skipped, pool.count,
    )
    return Verdict(
        status=status,
        witnesses=witnesses,
        tested_node_count=tested,
        skipped_node_count=skipped,
        violation_count=pool.count,
        details=details or {},
    )


def certify_subharmonic(
    field_: ScalarField,
    radii: Sequence[float] | None = None,
    tol: float | None = None,
    directions: Sequence[ComplexPoint] | None = None,
    m: int | None = None,
) -> Verdict:
    """Sphere sub-mean-value test at every node whose spheres fit the grid."""
    radii = default_radii(field_) if radii is None else list(radii)
    tol = settings.certify_tol if tol is None else tol
    m = settings.certify_quadrature_nodes if m is None else m
    directions = direction_sample(field_.domain.n) if directions is None else list(directions)

    eligible = np.flatnonzero(_eligible_nodes(field_, radii))
    centers = field_.domain.coordinates[eligible]
    values = field_.values[eligible]
    pool = _WitnessPool(field_)
    for ri, r in enumerate(radii):
        total = np.zeros(eligible.size)
        for T in directions:
            total += circle_means(field_, centers, r, T, m)
        gap = total / len(directions) - values
        bad = gap < -tol * r * r
        pool.add(eligible[bad], -gap[bad], ri, -1)
    return _finish(
        pool, radii, eligible.size, field_.domain.node_count - eligible.size,
        with_direction=False, name="certify_subharmonic",
    )


def certify_psh(
    field_: ScalarField,
    exclude: SingularSet | None = None,
    margin: float = 0.0,
    radii: Sequence[float] | None = None,
    directions: Sequence[ComplexPoint] | None = None,
    tol: float | None = None,
    m: int | None = None,
) -> Verdict:
    """Circle sub-mean-value test along every sampled complex direction.

    Nodes within ``margin`` of ``exclude`` are skipped; with the empty set
    this certifies plurisubharmonicity on the whole grid.
    """
    exclude = EmptySet() if exclude is None else exclude
    radii = default_radii(field_) if radii is None else list(radii)
    tol = settings.certify_tol if tol is None else tol
    m = settings.certify_quadrature_nodes if m is None else m
    directions = direction_sample(field_.domain.n) if directions is None else list(directions)

    mask = _eligible_nodes(field_, radii) & ~grid_membership(exclude, field_.domain, margin)
    eligible = np.flatnonzero(mask)
    centers = field_.domain.coordinates[eligible]
    values = field_.values[eligible]
    pool = _WitnessPool(field_)
    for ri, r in enumerate(radii):
        for ti, T in enumerate(directions):
            gap = circle_means(field_, centers, r, T, m) - values
            bad = gap < -tol * r * r
            pool.add(eligible[bad], -gap[bad], ri, ti)
    return _finish(
        pool, radii, eligible.size, field_.domain.node_count - eligible.size,
        with_direction=True, name="certify_psh",
    )


def det_plus_subsolution_check(field_: ScalarField, tol: float | None = None) -> Verdict:
    """PSD complex Hessian at every interior node.

    ``tol=None`` uses the h-scaled tolerance c_H·h·(1 + max |F| over the
    stencil block) node by node.
    """
    domain = field_.domain
    nodes, D = second_differences_all(field_)
    H = hessian_from_differences(D)
    lowest = min_eigenvalues(H)
    if tol is None:
        block_max = maximum_filter(np.abs(field_.grid_values()), size=3, mode="nearest").ravel()
        tolerance = settings.psd_c * domain.h * (1.0 + block_max[nodes])
    else:
        tolerance = np.full(nodes.size, float(tol))
    bad = lowest < -tolerance
    pool = _WitnessPool(field_)
    pool.add(nodes[bad], -lowest[bad], -1, -1)

    if np.any(bad):
        smallest: DetPlusValue = MINUS_INFINITY
    elif nodes.size:
        smallest = DetPlusValue(float(np.min(np.linalg.det(H).real)))
    else:
        smallest = MINUS_INFINITY
    return _finish(
        pool, [], nodes.size, domain.node_count - nodes.size,
        with_direction=False, name="det_plus_subsolution_check",
        details={"min_det_plus": str(smallest)},
    )
