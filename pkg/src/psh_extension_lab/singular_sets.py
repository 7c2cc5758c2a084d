"""Exceptional sets E as membership-with-margin predicates.

Measure-zero sets can still contain grid nodes, so every query carries a
margin: ``contains(p, m)`` is true when p lies within distance m of the
represented set. Cantor products are finite-depth outer approximations with
an explicit Lebesgue measure bound.
"""

from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from psh_extension_lab.errors import LabError
from psh_extension_lab.functions import Expression, FunctionDescriptor
from psh_extension_lab.geometry import ComplexPoint, GridDomain, as_coords, chunked

logger = logging.getLogger(__name__)

Interval = tuple[float, float]


class SetArgumentError(LabError, ValueError):
    """Raised for negative margins or invalid set parameters."""


def _check_margin(margin: float) -> float:
    if margin < 0:
        raise SetArgumentError(f"margin must be >= 0, got {margin}")
    return float(margin)


class SingularSet(ABC):
    """A closed set E ⊂ C^n given by a distance-with-margin predicate."""

    @property
    @abstractmethod
    def measure_upper_bound(self) -> float:
        """Upper bound of the Lebesgue outer measure of the represented set."""

    @abstractmethod
    def _contains_many(self, points: np.ndarray, margin: float) -> np.ndarray:
        """Vectorised membership for points of shape (M, 2n)."""

    @abstractmethod
    def describe(self) -> dict:
        """JSON-friendly description echoed into reports."""

    def contains_many(self, points: np.ndarray, margin: float) -> np.ndarray:
        margin = _check_margin(margin)
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return self._contains_many(points, margin)

    def contains(self, p: ComplexPoint | Sequence[float], margin: float) -> bool:
        return bool(self.contains_many(as_coords(p)[None, :], margin)[0])


@dataclass(frozen=True, eq=False)
class EmptySet(SingularSet):
    @property
    def measure_upper_bound(self) -> float:
        return 0.0

    def _contains_many(self, points: np.ndarray, margin: float) -> np.ndarray:
        return np.zeros(points.shape[0], dtype=bool)

    def describe(self) -> dict:
        return {"kind": "empty"}


@dataclass(frozen=True, eq=False)
class HypersurfaceLevelSet(SingularSet):
    """{g = 0}; p is within margin m when |g(p)| ≤ m·L."""

    g: FunctionDescriptor
    lipschitz: float

    @property
    def measure_upper_bound(self) -> float:
        return 0.0

    def _contains_many(self, points: np.ndarray, margin: float) -> np.ndarray:
        values = np.asarray(self.g(points), dtype=float)
        return np.abs(values) <= margin * self.lipschitz

    def describe(self) -> dict:
        return {"kind": "level_set", "g": self.g.describe(), "lipschitz": self.lipschitz}


@dataclass(frozen=True, eq=False)
class Sphere(SingularSet):
    """{‖z − c‖ = ρ}; p is within margin m when |‖p − c‖ − ρ| ≤ m."""

    center: tuple[float, ...]
    radius: float

    @property
    def measure_upper_bound(self) -> float:
        return 0.0

    def _contains_many(self, points: np.ndarray, margin: float) -> np.ndarray:
        if points.shape[1] != len(self.center):
            raise SetArgumentError(
                f"sphere lives in R^{len(self.center)}, points have {points.shape[1]} coordinates"
            )
        r = np.linalg.norm(points - np.asarray(self.center)[None, :], axis=1)
        return np.abs(r - self.radius) <= margin

    def describe(self) -> dict:
        return {"kind": "sphere", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class CantorProduct(SingularSet):
    """Product over the 2n axes of finite unions of closed intervals."""

    depth: int
    axis_intervals: tuple[tuple[Interval, ...], ...]
    label: str = "cantor"

    @cached_property
    def _bounds(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return [
            (np.array([a for a, _ in axis]), np.array([b for _, b in axis]))
            for axis in self.axis_intervals
        ]

    @property
    def measure_upper_bound(self) -> float:
        return math.prod(math.fsum(b - a for a, b in axis) for axis in self.axis_intervals)

    def axis_distance(self, values: np.ndarray, axis: int) -> np.ndarray:
        lo, hi = self._bounds[axis]
        gaps = np.maximum(np.maximum(lo[None, :] - values[:, None], values[:, None] - hi[None, :]), 0.0)
        return gaps.min(axis=1)

    def _contains_many(self, points: np.ndarray, margin: float) -> np.ndarray:
        if points.shape[1] != len(self.axis_intervals):
            raise SetArgumentError(
                f"{self.label} lives in R^{len(self.axis_intervals)}, points have {points.shape[1]} coordinates"
            )
        # Distance to a product set is the root-sum-square of axis distances.
        squared = np.zeros(points.shape[0])
        for axis in range(points.shape[1]):
            squared += self.axis_distance(points[:, axis], axis) ** 2
        return squared <= margin * margin

    def describe(self) -> dict:
        return {
            "kind": self.label,
            "depth": self.depth,
            "axes": len(self.axis_intervals),
            "pieces_per_axis": len(self.axis_intervals[0]) if self.axis_intervals else 0,
            "measure_upper_bound": self.measure_upper_bound,
        }


@dataclass(frozen=True, eq=False)
class FiniteUnion(SingularSet):
    members: tuple[SingularSet, ...]

    @property
    def measure_upper_bound(self) -> float:
        return math.fsum(m.measure_upper_bound for m in self.members)

    def _contains_many(self, points: np.ndarray, margin: float) -> np.ndarray:
        hit = np.zeros(points.shape[0], dtype=bool)
        for member in self.members:
            hit |= member._contains_many(points, margin)
        return hit

    def describe(self) -> dict:
        return {"kind": "union", "members": [m.describe() for m in self.members]}


@dataclass(frozen=True, eq=False)
class PointCloud(SingularSet):
    points: tuple[ComplexPoint, ...]

    @property
    def measure_upper_bound(self) -> float:
        return 0.0

    def _contains_many(self, points: np.ndarray, margin: float) -> np.ndarray:
        if not self.points:
            return np.zeros(points.shape[0], dtype=bool)
        cloud = np.stack([p.as_array() for p in self.points])
        squared = np.sum((points[:, None, :] - cloud[None, :, :]) ** 2, axis=-1)
        return squared.min(axis=1) <= margin * margin

    def describe(self) -> dict:
        return {"kind": "points", "points": [list(p.coords) for p in self.points]}


def empty_set() -> EmptySet:
    return EmptySet()


def hypersurface_set(g: FunctionDescriptor, L: float) -> HypersurfaceLevelSet:
    """Level set {g = 0}. Regularity of g is the caller's responsibility."""
    if not L > 0:
        raise SetArgumentError(f"Lipschitz bound must be > 0, got {L}")
    return HypersurfaceLevelSet(g=g, lipschitz=float(L))


def hyperplane_re_z1(n: int, offset: float = 0.0) -> HypersurfaceLevelSet:
    """{Re z₁ = offset}."""
    g = Expression("x1") if offset == 0 else Expression(f"x1 - ({offset!r})")
    return hypersurface_set(g, 1.0)


def unit_sphere(n: int, center: Sequence[float] | None = None, radius: float = 1.0) -> Sphere:
    """{‖z − c‖ = ρ} with the exact distance as margin test."""
    if not radius > 0:
        raise SetArgumentError(f"radius must be > 0, got {radius}")
    c = np.zeros(2 * n) if center is None else np.asarray(center, dtype=float)
    if c.size != 2 * n:
        raise SetArgumentError(f"center needs {2 * n} coordinates, got {c.size}")
    return Sphere(center=tuple(float(x) for x in c), radius=float(radius))


def _cantor_intervals(depth: int, start: float, length: float, ratio: float) -> list[Interval]:
    """Keep the two outer pieces of relative length ``ratio`` at every step."""
    intervals = [(start, start + length)]
    for _ in range(depth):
        refined: list[Interval] = []
        for a, b in intervals:
            piece = (b - a) * ratio
            refined.append((a, a + piece))
            refined.append((b - piece, b))
        intervals = refined
    return intervals


def cantor_product(
    depth: int,
    n: int,
    offset: Sequence[float] | None = None,
    ratio: float = 1.0 / 3.0,
) -> CantorProduct:
    """2n-fold product of the depth-truncated Cantor construction on [0, 1].

    With the default ratio 1/3 this is the middle-third set and the measure
    bound is (2/3)^{2n·depth}. ``offset`` translates the whole product.
    """
    if depth < 0:
        raise SetArgumentError(f"depth must be >= 0, got {depth}")
    if not 0 < ratio < 0.5:
        raise SetArgumentError(f"ratio must lie in (0, 1/2), got {ratio}")
    shift = np.zeros(2 * n) if offset is None else np.asarray(offset, dtype=float)
    if shift.size != 2 * n:
        raise SetArgumentError(f"offset needs {2 * n} coordinates, got {shift.size}")
    base = _cantor_intervals(depth, 0.0, 1.0, ratio)
    axes = tuple(tuple((a + s, b + s) for a, b in base) for s in shift)
    return CantorProduct(depth=depth, axis_intervals=axes)


def generalized_cantor_product(levels: int, depth: int, n: int) -> CantorProduct:
    """Product of 2n copies of A = {1} ∪ ⋃_j A_j, j = 2..levels+1.

    A_j is a two-piece Cantor set of similarity dimension 1 − 1/j placed in
    [1 − 1/j, 1 − 1/(j+1)]; the full product has Lebesgue measure zero but
    Hausdorff dimension approaching 2n as levels grow.
    """
    if levels < 1:
        raise SetArgumentError(f"levels must be >= 1, got {levels}")
    if depth < 0:
        raise SetArgumentError(f"depth must be >= 0, got {depth}")
    axis: list[Interval] = []
    for j in range(2, levels + 2):
        start, stop = 1.0 - 1.0 / j, 1.0 - 1.0 / (j + 1)
        dimension = 1.0 - 1.0 / j
        ratio = 2.0 ** (-1.0 / dimension)
        axis.extend(_cantor_intervals(depth, start, stop - start, ratio))
    axis.append((1.0, 1.0))
    return CantorProduct(
        depth=depth,
        axis_intervals=tuple(tuple(axis) for _ in range(2 * n)),
        label="generalized_cantor",
    )


def finite_union(*members: SingularSet) -> FiniteUnion:
    return FiniteUnion(members=tuple(members))


def point_cloud(points: Sequence[ComplexPoint]) -> PointCloud:
    return PointCloud(points=tuple(points))


def grid_membership(set_: SingularSet, domain: GridDomain, margin: float) -> np.ndarray:
    """Boolean mask of nodes within ``margin`` of the set."""
    margin = _check_margin(margin)
    coords = domain.coordinates
    mask = np.zeros(domain.node_count, dtype=bool)
    for part in chunked(domain.node_count, 1):
        mask[part] = set_._contains_many(coords[part], margin)
    return mask


def grid_fraction_on_set(set_: SingularSet, domain: GridDomain, margin: float) -> float:
    fraction = float(grid_membership(set_, domain, margin).mean())
    logger.debug("Grid fraction on %s at margin %g: %g", set_.describe()["kind"], margin, fraction)
    return fraction
