"""Points of C^n as R^{2n}, grids over concentric balls, sampled fields.

A ``GridDomain`` is a uniform grid on the box [c − 2δ, c + 2δ]^{2n} whose
center is a node. Nodes are numbered in C order over the 2n axes
(x_1, y_1, ..., x_n, y_n); every array attached to a grid is flat and
indexed by that node number.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from psh_extension_lab.config import settings
from psh_extension_lab.errors import LabError
from psh_extension_lab.functions import FunctionDescriptor, LinearCombination

logger = logging.getLogger(__name__)


class GridConfigurationError(LabError, ValueError):
    """Raised when grid parameters violate their documented ranges."""

    def __init__(self, field_name: str, detail: str):
        self.field_name = field_name
        self.detail = detail
        super().__init__(f"Invalid grid {field_name}: {detail}")


class SamplingError(LabError):
    """Raised when a function is not finite at some grid node."""

    def __init__(self, node_index: int, point: Sequence[float], value: float):
        self.node_index = node_index
        self.point = tuple(float(c) for c in point)
        self.value = value
        super().__init__(
            f"Non-finite value {value!r} at node {node_index} (point {list(self.point)})"
        )


class GridDomainError(LabError, ValueError):
    """Raised when a point lies outside the grid box."""

    def __init__(self, point: Sequence[float], detail: str = "outside the grid box"):
        self.point = tuple(float(c) for c in np.ravel(point))
        super().__init__(f"Point {list(self.point)[:8]} is {detail}")


@dataclass(frozen=True)
class ComplexPoint:
    """A point of C^n stored as (x_1, y_1, ..., x_n, y_n)."""

    coords: tuple[float, ...]

    def __post_init__(self):
        if len(self.coords) == 0 or len(self.coords) % 2:
            raise GridConfigurationError(
                "point", f"expected 2n coordinates, got {len(self.coords)}"
            )

    @classmethod
    def from_complex(cls, values: Iterable[complex]) -> "ComplexPoint":
        coords: list[float] = []
        for z in values:
            coords.extend((float(complex(z).real), float(complex(z).imag)))
        return cls(tuple(coords))

    @classmethod
    def origin(cls, n: int) -> "ComplexPoint":
        return cls((0.0,) * (2 * n))

    @property
    def n(self) -> int:
        return len(self.coords) // 2

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float)

    def as_complex(self) -> np.ndarray:
        a = self.as_array()
        return a[0::2] + 1j * a[1::2]


def as_coords(p: "ComplexPoint | Sequence[float] | np.ndarray") -> np.ndarray:
    if isinstance(p, ComplexPoint):
        return p.as_array()
    return np.asarray(p, dtype=float)


def complex_to_real(vector: np.ndarray) -> np.ndarray:
    """Interleave real and imaginary parts of a complex vector (last axis)."""
    vector = np.asarray(vector, dtype=complex)
    out = np.empty(vector.shape[:-1] + (2 * vector.shape[-1],))
    out[..., 0::2] = vector.real
    out[..., 1::2] = vector.imag
    return out


def norm_squared(p: "ComplexPoint | Sequence[float] | np.ndarray") -> float:
    a = as_coords(p)
    return float(np.dot(a, a))


@dataclass(frozen=True)
class GridDomain:
    """Uniform grid over the box circumscribing B_{2δ}(center)."""

    n: int
    center: ComplexPoint
    delta: float
    points_per_axis: int

    @property
    def dim(self) -> int:
        return 2 * self.n

    @property
    def h(self) -> float:
        return 4.0 * self.delta / (self.points_per_axis - 1)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.dim

    @property
    def node_count(self) -> int:
        return self.points_per_axis**self.dim

    @property
    def mid(self) -> int:
        return (self.points_per_axis - 1) // 2

    @property
    def center_index(self) -> int:
        return self.flat_index((self.mid,) * self.dim)

    @cached_property
    def axis(self) -> np.ndarray:
        """Offsets of the nodes along one axis, relative to the center."""
        return (np.arange(self.points_per_axis) - self.mid) * self.h

    @cached_property
    def offsets(self) -> np.ndarray:
        """(N, 2n) node coordinates relative to the center."""
        mesh = np.meshgrid(*([self.axis] * self.dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    @cached_property
    def coordinates(self) -> np.ndarray:
        """(N, 2n) absolute node coordinates."""
        return self.offsets + self.center.as_array()

    @cached_property
    def distance(self) -> np.ndarray:
        """Euclidean distance of every node to the center."""
        return np.sqrt(np.sum(self.offsets**2, axis=-1))

    @cached_property
    def inner_mask(self) -> np.ndarray:
        """Nodes of B_δ (strict inequality)."""
        return self.distance < self.delta

    @cached_property
    def collar_mask(self) -> np.ndarray:
        """Nodes of the collar B_{2δ} ∖ B_δ (closed)."""
        return (self.distance >= self.delta) & (self.distance <= 2.0 * self.delta)

    @cached_property
    def outer_mask(self) -> np.ndarray:
        return self.distance > 2.0 * self.delta

    @property
    def support_mask(self) -> np.ndarray:
        """Nodes of the closed ball B_{2δ}."""
        return ~self.outer_mask

    @cached_property
    def box_distance(self) -> np.ndarray:
        """Distance of every node to the nearest face of the grid box."""
        half = 2.0 * self.delta
        return half - np.max(np.abs(self.offsets), axis=-1)

    @cached_property
    def strides(self) -> np.ndarray:
        return np.array(
            [self.points_per_axis ** (self.dim - 1 - k) for k in range(self.dim)],
            dtype=np.int64,
        )

    def flat_index(self, multi: Sequence[int]) -> int:
        return int(np.dot(np.asarray(multi, dtype=np.int64), self.strides))

    def multi_index(self, index: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(int(index), self.shape))

    def node_point(self, index: int) -> ComplexPoint:
        return ComplexPoint(tuple(float(c) for c in self.coordinates[int(index)]))

    def is_interior(self, index: int, width: int = 1) -> bool:
        """True when the node is at least ``width`` cells from every box face."""
        multi = self.multi_index(index)
        return all(width <= i <= self.points_per_axis - 1 - width for i in multi)

    def interior_mask(self, width: int = 1) -> np.ndarray:
        multi = np.stack(np.unravel_index(np.arange(self.node_count), self.shape), axis=-1)
        return np.all((multi >= width) & (multi <= self.points_per_axis - 1 - width), axis=-1)

    def contains_point(self, p) -> bool:
        offset = as_coords(p) - self.center.as_array()
        return bool(np.all(np.abs(offset) <= 2.0 * self.delta * (1 + 1e-12)))

    def classification_counts(self) -> dict[str, int]:
        return {
            "inner": int(self.inner_mask.sum()),
            "collar": int(self.collar_mask.sum()),
            "outer": int(self.outer_mask.sum()),
        }


def make_grid(
    n: int,
    center: ComplexPoint | Sequence[float] | None,
    delta: float,
    points_per_axis: int,
) -> GridDomain:
    if n < 1:
        raise GridConfigurationError("n", f"complex dimension must be >= 1, got {n}")
    if not delta > 0:
        raise GridConfigurationError("delta", f"must be > 0, got {delta}")
    if points_per_axis < 5:
        raise GridConfigurationError(
            "points_per_axis", f"must be >= 5, got {points_per_axis}"
        )
    if points_per_axis % 2 == 0:
        raise GridConfigurationError(
            "points_per_axis",
            f"must be odd so the center is a grid node, got {points_per_axis}",
        )
    if center is None:
        center = ComplexPoint.origin(n)
    elif not isinstance(center, ComplexPoint):
        center = ComplexPoint(tuple(float(c) for c in center))
    if center.n != n:
        raise GridConfigurationError("center", f"expected {2 * n} coordinates, got {2 * center.n}")
    domain = GridDomain(n=n, center=center, delta=float(delta), points_per_axis=int(points_per_axis))
    logger.debug(
        "Grid n=%d delta=%g points_per_axis=%d h=%g nodes=%d",
        n, delta, points_per_axis, domain.h, domain.node_count,
    )
    return domain


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real values on every node of a grid, plus the descriptor they came from."""

    domain: GridDomain
    values: np.ndarray
    source: FunctionDescriptor | None = field(default=None)

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        if values.size != self.domain.node_count:
            raise GridConfigurationError(
                "values", f"expected {self.domain.node_count} values, got {values.size}"
            )
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            i = int(bad[0])
            raise SamplingError(i, self.domain.coordinates[i], float(values[i]))
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def grid_values(self) -> np.ndarray:
        return self.values.reshape(self.domain.shape)

    def at(self, index: int) -> float:
        return float(self.values[int(index)])

    def detached(self) -> "ScalarField":
        """The same samples without the source descriptor."""
        return ScalarField(self.domain, self.values)

    def _combine(self, other, a: float, b: float) -> "ScalarField":
        if isinstance(other, ScalarField):
            if other.domain != self.domain:
                raise GridConfigurationError("domain", "fields live on different grids")
            values = a * self.values + b * other.values
            if self.source is not None and other.source is not None:
                source = LinearCombination(terms=((a, self.source), (b, other.source)))
            else:
                source = None
        else:
            values = a * self.values + b * float(other)
            source = None if self.source is None else LinearCombination.of(self.source, a, float(other), b)
        return ScalarField(self.domain, values, source)

    def __add__(self, other):
        return self._combine(other, 1.0, 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, 1.0, -1.0)

    def __mul__(self, scale: float):
        return self._combine(0.0, float(scale), 0.0)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0


def sample(f: FunctionDescriptor, domain: GridDomain) -> ScalarField:
    """Evaluate ``f`` at every node; non-finite values are rejected."""
    if f.min_n > domain.n:
        raise GridConfigurationError(
            "n", f"{f.describe()!r} needs n >= {f.min_n}, grid has n = {domain.n}"
        )
    values = np.asarray(f(domain.coordinates), dtype=float)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        i = int(bad[0])
        logger.error("Sampling %s failed at node %d", f.describe(), i)
        raise SamplingError(i, domain.coordinates[i], float(values[i]))
    return ScalarField(domain, values, f)


def _corner_offsets(dim: int) -> np.ndarray:
    return np.array(list(itertools.product((0, 1), repeat=dim)), dtype=np.int64)


def interpolate_many(field_: ScalarField, points: np.ndarray) -> np.ndarray:
    """Multilinear interpolation at ``points`` of shape (M, 2n).

    Each point uses the 2^{2n} nodes of the cell containing it; points on the
    upper face of the box fall back into the last cell.
    """
    domain = field_.domain
    points = np.atleast_2d(np.asarray(points, dtype=float))
    half = 2.0 * domain.delta
    local = (points - domain.center.as_array() + half) / domain.h
    top = domain.points_per_axis - 1
    slack = 1e-9
    outside = np.any((local < -slack) | (local > top + slack), axis=-1)
    if np.any(outside):
        raise GridDomainError(points[int(np.flatnonzero(outside)[0])])
    local = np.clip(local, 0.0, float(top))
    # Round-off of a few ulps snaps onto the node.
    nearest = np.rint(local)
    snap = 4.0 * np.finfo(float).eps * top
    local = np.where(np.abs(local - nearest) <= snap, nearest, local)
    base = np.minimum(np.floor(local).astype(np.int64), top - 1)
    frac = local - base

    corners = _corner_offsets(domain.dim)
    base_flat = base @ domain.strides
    values = field_.values
    result = np.zeros(points.shape[0])
    for corner in corners:
        weights = np.prod(np.where(corner == 1, frac, 1.0 - frac), axis=-1)
        result += weights * values[base_flat + int(corner @ domain.strides)]
    return result


def interpolate(field_: ScalarField, p: ComplexPoint | Sequence[float]) -> float:
    coords = as_coords(p)
    if not field_.domain.contains_point(coords):
        raise GridDomainError(coords)
    return float(interpolate_many(field_, coords[None, :])[0])


def evaluate_many(field_: ScalarField, points: np.ndarray, resample: bool = True) -> np.ndarray:
    """Values at arbitrary points: exact resampling when a source is known."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if resample and field_.source is not None:
        return np.asarray(field_.source(points), dtype=float)
    return interpolate_many(field_, points)


def chunked(count: int, rows_per_item: int) -> Iterable[slice]:
    """Batches of items such that rows stay under the configured chunk size."""
    step = max(1, settings.chunk_size // max(1, rows_per_item))
    for start in range(0, count, step):
        yield slice(start, min(count, start + step))
