"""Discrete Laplacian and complex Hessian, Hermitian positivity, det⁺, circle means.

Second derivatives use central differences with step h: pure second
differences along each real axis and four-point cross differences for
mixed pairs. The complex Hessian is assembled from them through

    ∂²/∂z_j∂z̄_k = ¼[(D_{x_j x_k} + D_{y_j y_k}) + i(D_{x_j y_k} − D_{y_j x_k})]

so its trace times four is exactly the discrete Laplacian.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

from psh_extension_lab.config import settings
from psh_extension_lab.errors import LabError
from psh_extension_lab.geometry import (
    ComplexPoint,
    GridDomain,
    GridDomainError,
    ScalarField,
    as_coords,
    chunked,
    complex_to_real,
    evaluate_many,
)

logger = logging.getLogger(__name__)


class StencilError(LabError, ValueError):
    """Raised when a stencil would read past the grid boundary."""

    def __init__(self, node_index: int):
        self.node_index = node_index
        super().__init__(f"Node {node_index} is on the grid boundary; stencil does not fit")


class DirectionError(LabError, ValueError):
    """Raised for non-unit directions or too few quadrature nodes."""


@dataclass(frozen=True, eq=False)
class HermitianForm:
    """n×n Hermitian matrix; symmetry is enforced at construction."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"Hermitian form must be square, got shape {a.shape}")
        a = 0.5 * (a + a.conj().T)
        a[np.diag_indices_from(a)] = a.diagonal().real
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def quadratic_form(self, T: ComplexPoint | Sequence[complex]) -> float:
        """Σ_{j,k} H_{jk} T_j T̄_k."""
        t = T.as_complex() if isinstance(T, ComplexPoint) else np.asarray(T, dtype=complex)
        return float(np.real(t @ self.entries @ t.conj()))


@dataclass(frozen=True)
class DetPlusValue:
    """det⁺: a finite determinant on the PSD cone, MinusInfinity off it."""

    value: float | None

    @property
    def is_finite(self) -> bool:
        return self.value is not None

    def as_float(self) -> float:
        return -math.inf if self.value is None else float(self.value)

    def __str__(self) -> str:
        return "MinusInfinity" if self.value is None else repr(self.value)


MINUS_INFINITY = DetPlusValue(None)


def _check_interior(domain: GridDomain, node: int) -> None:
    if not domain.is_interior(node):
        raise StencilError(node)


def _second_difference(values: np.ndarray, domain: GridDomain, node: int, a: int, b: int) -> float:
    """D_{ab} at ``node`` (axes a, b in 0..2n−1)."""
    s = domain.strides
    h2 = domain.h * domain.h
    if a == b:
        return (values[node + s[a]] - 2.0 * values[node] + values[node - s[a]]) / h2
    return (
        values[node + s[a] + s[b]]
        - values[node + s[a] - s[b]]
        - values[node - s[a] + s[b]]
        + values[node - s[a] - s[b]]
    ) / (4.0 * h2)


def laplacian(field: ScalarField, node: int) -> float:
    domain = field.domain
    _check_interior(domain, node)
    return float(sum(_second_difference(field.values, domain, node, a, a) for a in range(domain.dim)))


def hessian_from_differences(D: np.ndarray) -> np.ndarray:
    """Complex Hessian(s) from real second-difference matrices (..., 2n, 2n)."""
    xx = D[..., 0::2, 0::2]
    yy = D[..., 1::2, 1::2]
    xy = D[..., 0::2, 1::2]
    yx = D[..., 1::2, 0::2]
    H = 0.25 * ((xx + yy) + 1j * (xy - yx))
    H = 0.5 * (H + np.swapaxes(H.conj(), -1, -2))
    n = H.shape[-1]
    idx = np.arange(n)
    H[..., idx, idx] = H[..., idx, idx].real
    return H


def complex_hessian(field: ScalarField, node: int) -> HermitianForm:
    domain = field.domain
    _check_interior(domain, node)
    D = np.empty((domain.dim, domain.dim))
    for a in range(domain.dim):
        for b in range(a, domain.dim):
            D[a, b] = D[b, a] = _second_difference(field.values, domain, node, a, b)
    return HermitianForm(hessian_from_differences(D))


def second_differences_all(field: ScalarField) -> tuple[np.ndarray, np.ndarray]:
    """D matrices at every interior node: returns (node indices, D of shape (M, 2n, 2n))."""
    domain = field.domain
    grid = field.grid_values()
    dim, h2 = domain.dim, domain.h * domain.h
    core = tuple(slice(1, -1) for _ in range(dim))

    def shifted(offset: dict[int, int]) -> np.ndarray:
        return grid[tuple(slice(1 + offset.get(k, 0), domain.points_per_axis - 1 + offset.get(k, 0)) for k in range(dim))]

    centre = grid[core]
    D = np.empty(centre.shape + (dim, dim))
    for a in range(dim):
        D[..., a, a] = (shifted({a: 1}) - 2.0 * centre + shifted({a: -1})) / h2
        for b in range(a + 1, dim):
            cross = (
                shifted({a: 1, b: 1})
                - shifted({a: 1, b: -1})
                - shifted({a: -1, b: 1})
                + shifted({a: -1, b: -1})
            ) / (4.0 * h2)
            D[..., a, b] = D[..., b, a] = cross
    nodes = np.flatnonzero(domain.interior_mask())
    return nodes, D.reshape(-1, dim, dim)


def laplacian_all(values: np.ndarray, domain: GridDomain, nodes: np.ndarray) -> np.ndarray:
    """Discrete Laplacian of a flat value array at the given interior nodes."""
    total = -2.0 * domain.dim * values[nodes]
    for s in domain.strides:
        total = total + values[nodes + s] + values[nodes - s]
    return total / (domain.h * domain.h)


def min_eigenvalues(H: np.ndarray) -> np.ndarray:
    """Smallest eigenvalue of a stack of Hermitian matrices (..., n, n)."""
    n = H.shape[-1]
    if n == 1:
        return H[..., 0, 0].real.copy()
    if n == 2:
        a = H[..., 0, 0].real
        d = H[..., 1, 1].real
        b = H[..., 0, 1]
        return 0.5 * (a + d) - np.sqrt(0.25 * (a - d) ** 2 + np.abs(b) ** 2)
    return np.linalg.eigvalsh(H)[..., 0]


def min_eigenvalue(H: HermitianForm) -> float:
    return float(min_eigenvalues(H.entries))


def is_psd(H: HermitianForm, tol: float) -> bool:
    return min_eigenvalue(H) >= -tol


def det_plus(H: HermitianForm, tol: float) -> DetPlusValue:
    if not is_psd(H, tol):
        return MINUS_INFINITY
    if H.n == 2:
        e = H.entries
        det = e[0, 0].real * e[1, 1].real - abs(e[0, 1]) ** 2
    else:
        det = float(np.linalg.det(H.entries).real)
    return DetPlusValue(float(det))


def psd_tolerance(field: ScalarField, node: int, c_H: float | None = None) -> float:
    """c_H·h·(1 + max |field| over the 3^{2n} stencil block around ``node``)."""
    domain = field.domain
    c_H = settings.psd_c if c_H is None else c_H
    multi = domain.multi_index(node)
    block = tuple(slice(max(i - 1, 0), i + 2) for i in multi)
    scale = float(np.max(np.abs(field.grid_values()[block])))
    return c_H * domain.h * (1.0 + scale)


def _unit_direction(T: ComplexPoint | Sequence[float], n: int) -> np.ndarray:
    coords = as_coords(T)
    if coords.size != 2 * n:
        raise DirectionError(f"direction needs {2 * n} coordinates, got {coords.size}")
    norm = math.sqrt(float(np.dot(coords, coords)))
    if abs(norm - 1.0) > 1e-12:
        raise DirectionError(f"direction must be a unit vector, has norm {norm!r}")
    return coords[0::2] + 1j * coords[1::2]


def circle_offsets(r: float, T: ComplexPoint | Sequence[float], m: int, n: int) -> np.ndarray:
    """(m, 2n) real offsets r·e^{2πik/m}·T."""
    if m < 8:
        raise DirectionError(f"need at least 8 quadrature nodes, got {m}")
    t = _unit_direction(T, n)
    phases = np.exp(2j * np.pi * np.arange(m) / m)
    return complex_to_real(r * phases[:, None] * t[None, :])


def circle_means(
    field: ScalarField,
    centers: np.ndarray,
    r: float,
    T: ComplexPoint | Sequence[float],
    m: int,
    resample: bool = True,
) -> np.ndarray:
    """Trapezoidal circle means around each row of ``centers`` (M, 2n)."""
    domain = field.domain
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    offsets = circle_offsets(r, T, m, domain.n)
    half = 2.0 * domain.delta * (1 + 1e-12)
    reach = np.max(np.abs(offsets), axis=0)
    outside = np.any(np.abs(centers - domain.center.as_array()) + reach > half, axis=-1)
    if np.any(outside):
        raise GridDomainError(centers[int(np.flatnonzero(outside)[0])], "the center of a circle leaving the grid")
    means = np.empty(centers.shape[0])
    for part in chunked(centers.shape[0], m):
        points = (centers[part, None, :] + offsets[None, :, :]).reshape(-1, domain.dim)
        values = evaluate_many(field, points, resample=resample).reshape(-1, m)
        means[part] = values.mean(axis=1)
    return means


def circle_mean(
    field: ScalarField,
    center: ComplexPoint | Sequence[float],
    r: float,
    T: ComplexPoint | Sequence[float],
    m: int | None = None,
    resample: bool = True,
) -> float:
    """(1/m)·Σ_k F(center + r·e^{2πik/m}·T).

    Fields that remember their source are evaluated exactly on the circle;
    otherwise the samples are interpolated multilinearly.
    """
    m = settings.quadrature_nodes if m is None else m
    return float(circle_means(field, as_coords(center)[None, :], r, T, m, resample)[0])


def sphere_mean(
    field: ScalarField,
    center: ComplexPoint | Sequence[float],
    r: float,
    directions: Sequence[ComplexPoint],
    m: int | None = None,
    resample: bool = True,
) -> float:
    """Average of circle means over a sample of complex directions."""
    if not directions:
        raise DirectionError("sphere_mean needs at least one direction")
    means = [circle_mean(field, center, r, T, m, resample) for T in directions]
    return math.fsum(means) / len(means)


def _sphere_points(count: int, dim: int, seed: int) -> np.ndarray:
    """Scrambled Halton points pushed to the unit sphere of R^dim."""
    sampler = qmc.Halton(d=dim, scramble=True, seed=seed)
    u = sampler.random(count)
    u = np.clip(u, 1e-12, 1 - 1e-12)
    g = ndtri(u)
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _orbit(t: np.ndarray) -> list[np.ndarray]:
    """Images of t under cyclic coordinate shifts and sign flips of coords 2..n."""
    n = t.size
    images = []
    for shift in range(n):
        rolled = np.roll(t, shift)
        for mask in range(2 ** (n - 1)):
            signs = np.ones(n)
            for k in range(1, n):
                if mask >> (k - 1) & 1:
                    signs[k] = -1.0
            images.append(rolled * signs)
    return images


def direction_sample(n: int, count: int | None = None, seed: int | None = None) -> list[ComplexPoint]:
    """Complex axis directions plus a symmetrised low-discrepancy sample.

    In complex dimension 1 every direction spans the same complex line, so
    the sample is just e₁. Otherwise the n axes come first, followed by whole
    orbits of seeded Halton points until at least ``count`` directions exist.
    """
    count = settings.direction_count if count is None else count
    seed = settings.seed if seed is None else seed
    axes = [ComplexPoint.from_complex(np.eye(n)[k]) for k in range(n)]
    if n == 1:
        return axes
    orbit_size = n * 2 ** (n - 1)
    needed = max(0, count - n)
    base_count = -(-needed // orbit_size)
    directions = list(axes)
    if base_count:
        raw = _sphere_points(base_count, 2 * n, seed)
        for row in raw:
            t = row[0::2] + 1j * row[1::2]
            for image in _orbit(t):
                image = image / np.linalg.norm(image)
                directions.append(ComplexPoint(tuple(float(c) for c in complex_to_real(image))))
    logger.debug("Direction sample n=%d: %d directions (seed %d)", n, len(directions), seed)
    return directions
