"""Alexandrov–Bakelman–Pucci quantities for v_δ and the implied constant C.

For each δ the report holds sup_{B_δ}|v_δ|, the contact integral
(Σ_contact max(f, 0)^{2n}·h^{2n})^{1/(2n)} with f = Δφ + 4nδ, and
C = sup / (δ · integral) whenever the integral is positive.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import Iterable

import numpy as np

from psh_extension_lab.envelope import EnvelopeSolution
from psh_extension_lab.errors import LabError
from psh_extension_lab.geometry import GridConfigurationError, ScalarField

logger = logging.getLogger(__name__)

LOWER_BOUND_SLACK = 1e-10


class ConstantEstimationError(LabError):
    """Raised when no report defines an implied constant."""

    exit_code = 2


@dataclass(frozen=True)
class AbpReport:
    n: int
    delta: float
    sup_abs: float
    contact_integral: float
    implied_C: float | None
    lower_bound_ok: bool
    empty_contact: bool
    contact_count: int

    def as_dict(self) -> dict:
        return asdict(self)


def poisson_rhs(phi: ScalarField, delta: float, n: int) -> ScalarField:
    """f = Δφ + 4nδ at every node.

    With a source descriptor the five-point stencil is evaluated on the
    descriptor itself, so boundary nodes are exact too; otherwise boundary
    values are edge-padded.
    """
    domain = phi.domain
    if domain.n != n:
        raise GridConfigurationError("n", f"phi lives in n = {domain.n}, asked for n = {n}")
    h = domain.h
    coords = domain.coordinates
    if phi.source is not None:
        total = -2.0 * domain.dim * phi.values
        for a in range(domain.dim):
            step = np.zeros(domain.dim)
            step[a] = h
            total = total + phi.source(coords + step) + phi.source(coords - step)
    else:
        padded = np.pad(phi.grid_values(), 1, mode="edge")
        centre = padded[(slice(1, -1),) * domain.dim]
        total = -2.0 * domain.dim * centre
        for a in range(domain.dim):
            for shift in (2, 0):
                index = [slice(1, -1)] * domain.dim
                index[a] = slice(shift, shift + domain.points_per_axis)
                total = total + padded[tuple(index)]
        total = total.ravel()
    f = total / (h * h) + 4.0 * n * delta
    return ScalarField(domain, f)


def abp_quantities(
    v_delta: ScalarField,
    solution: EnvelopeSolution,
    f: ScalarField,
    delta: float,
) -> AbpReport:
    domain = v_delta.domain
    inner = domain.inner_mask
    sup_abs = float(np.max(np.abs(v_delta.values[inner])))
    dim = domain.dim
    contact = np.flatnonzero(solution.contact_mask)
    cell = domain.h**dim
    # Index order keeps the sum reproducible.
    integrand = math.fsum(float(max(f.values[i], 0.0)) ** dim * cell for i in contact)
    contact_integral = integrand ** (1.0 / dim) if integrand > 0 else 0.0
    implied = sup_abs / (delta * contact_integral) if contact_integral > 0 else None
    report = AbpReport(
        n=domain.n,
        delta=float(delta),
        sup_abs=sup_abs,
        contact_integral=contact_integral,
        implied_C=implied,
        lower_bound_ok=delta**3 <= sup_abs + LOWER_BOUND_SLACK,
        empty_contact=contact.size == 0,
        contact_count=int(contact.size),
    )
    if report.empty_contact:
        logger.warning("ABP at delta=%g: empty contact set, implied C undefined", delta)
    else:
        logger.info(
            "ABP at delta=%g: sup=%.3e integral=%.3e C=%s",
            delta, sup_abs, contact_integral, "undefined" if implied is None else f"{implied:.4g}",
        )
    return report


def estimate_constant(reports: Iterable[AbpReport]) -> float:
    defined = [r.implied_C for r in reports if r.implied_C is not None]
    if not defined:
        raise ConstantEstimationError("No report defines an implied constant")
    return max(defined)


def estimate_constants(reports: Iterable[AbpReport]) -> dict[int, float]:
    """Implied constants grouped by complex dimension."""
    grouped: dict[int, list[AbpReport]] = {}
    for report in reports:
        grouped.setdefault(report.n, []).append(report)
    estimates = {}
    for n, group in sorted(grouped.items()):
        try:
            estimates[n] = estimate_constant(group)
        except ConstantEstimationError:
            logger.warning("No defined implied constant for n=%d", n)
    if not estimates:
        raise ConstantEstimationError("No report defines an implied constant")
    return estimates
