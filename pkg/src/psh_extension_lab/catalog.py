"""Built-in functions, exceptional sets and scenarios with their expected verdicts.

Entries are the regression corpus: every expected verdict is reproduced by
the certifiers on the default grid (n = 2, δ = 0.75, 17 points per axis).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

from psh_extension_lab.functions import Constant, Expression, FunctionDescriptor
from psh_extension_lab.geometry import ComplexPoint
from psh_extension_lab.pipeline import ExtensionVerdict, Scenario, intro_counterexample
from psh_extension_lab.singular_sets import (
    SingularSet,
    cantor_product,
    empty_set,
    hyperplane_re_z1,
    unit_sphere,
)
from psh_extension_lab.viscosity import Status

logger = logging.getLogger(__name__)

DEFAULT_N = 2
DEFAULT_DELTA = 0.75

SetFactory = Callable[[int], SingularSet]


class CatalogLookupError(KeyError):
    """Raised for names that are neither catalog entries nor scenarios."""


@dataclass(frozen=True)
class Expected:
    subharmonic: Status
    psh: Status
    psh_off: Status | None = None

    def __post_init__(self):
        if self.psh is Status.PASS and self.subharmonic is not Status.PASS:
            raise ValueError("psh = Pass requires subharmonic = Pass")


@dataclass(frozen=True, eq=False)
class CatalogEntry:
    name: str
    function: FunctionDescriptor
    expected: Expected
    notes: str
    exclude: SetFactory | None = None
    min_n: int = 1
    smooth: bool = False
    witness_direction: int | None = None
    tags: tuple[str, ...] = field(default_factory=tuple)

    def exclude_set(self, n: int) -> SingularSet | None:
        return None if self.exclude is None else self.exclude(n)


P, F = Status.PASS, Status.FAIL


def catalog_entries() -> list[CatalogEntry]:
    return [
        CatalogEntry(
            "norm-squared", Expression("r2"), Expected(P, P),
            "mean over a circle of radius r exceeds the centre value by exactly r²",
            smooth=True,
        ),
        CatalogEntry(
            "re-z1", Expression("x1"), Expected(P, P),
            "pluriharmonic; boundary case of the psh cone",
            smooth=True,
        ),
        CatalogEntry(
            "sh-not-psh", Expression("x1**2 + y1**2 - x2**2 - y2**2"), Expected(P, F),
            "Hermitian signature diag(1, -1): harmonic in C², concave along e₂",
            min_n=2, smooth=True, witness_direction=1,
        ),
        CatalogEntry(
            "abs-re-z1", Expression("abs(x1)"), Expected(P, P, P),
            "convex with a kink along the real hypersurface {Re z₁ = 0}",
            exclude=hyperplane_re_z1,
        ),
        CatalogEntry(
            "intro-counterexample", Expression("min(r2, 1)"), Expected(F, F, P),
            "‖z‖² inside the unit ball, 1 outside: psh off the sphere, not subharmonic across it",
            exclude=lambda n: unit_sphere(n),
        ),
        CatalogEntry(
            "neg-abs-re-z1", Expression("-abs(x1)"), Expected(F, F, P),
            "pluriharmonic on each side of {Re z₁ = 0}, concave kink on it",
            exclude=hyperplane_re_z1,
        ),
        CatalogEntry(
            "norm-squared-cantor", Expression("r2"), Expected(P, P, P),
            "smooth psh function with a depth-3 Cantor product as E",
            exclude=lambda n: cantor_product(3, n), smooth=True,
        ),
        CatalogEntry(
            "max-re-z1", Expression("max(x1, 0)"), Expected(P, P),
            "convex, kink along a real hypersurface",
        ),
        CatalogEntry(
            "log-one-plus-norm", Expression("log(1 + r2)"), Expected(P, P),
            "Fubini–Study potential",
            smooth=True,
        ),
        CatalogEntry(
            "neg-norm-squared", Expression("-r2"), Expected(F, F),
            "strictly superharmonic",
            smooth=True,
        ),
        CatalogEntry(
            "re-z1-squared", Expression("x1**2 - y1**2"), Expected(P, P),
            "Re z₁², pluriharmonic",
            smooth=True,
        ),
        CatalogEntry(
            "abs-z1", Expression("sqrt(x1**2 + y1**2)"), Expected(P, P),
            "|z₁| = exp(log |z₁|), psh with a cone point along {z₁ = 0}",
        ),
        CatalogEntry(
            "exp-re-z1", Expression("exp(x1)"), Expected(P, P),
            "convex, hence psh",
            smooth=True,
        ),
    ]


def catalog_entry(name: str) -> CatalogEntry:
    for entry in catalog_entries():
        if entry.name == name:
            return entry
    raise CatalogLookupError(name)


def scenario_entries(n: int = DEFAULT_N) -> list[Scenario]:
    origin = ComplexPoint.origin(n)
    smooth_phi = Expression("r2 + r2**2")
    scenarios = [
        Scenario(
            name="trivial",
            n=n,
            u=Constant(0.0),
            phi=Constant(0.0),
            z0=origin,
            E=empty_set(),
            delta0=0.5,
            expected=ExtensionVerdict.CERTIFIED,
            notes="u = phi = 0; every bound is 0",
        ),
        Scenario(
            name="smooth-psh",
            n=n,
            u=Expression("r2"),
            phi=smooth_phi,
            z0=origin,
            E=hyperplane_re_z1(n),
            delta0=0.5,
            expected=ExtensionVerdict.CERTIFIED,
            notes="phi = u + ‖z‖⁴; Hessian bound tends to 1",
        ),
        Scenario(
            name="smooth-psh-cantor",
            n=n,
            u=Expression("r2"),
            phi=smooth_phi,
            z0=origin,
            E=cantor_product(3, n),
            delta0=0.5,
            expected=ExtensionVerdict.CERTIFIED,
            notes="Cantor product with a corner at z0",
        ),
        Scenario(
            name="negative-control",
            n=n,
            u=Expression("r2"),
            phi=Expression("r2 + r2**2 - 4*x1**2"),
            z0=origin,
            E=hyperplane_re_z1(n),
            delta0=0.5,
            expected=ExtensionVerdict.PRECONDITION_VIOLATED,
            notes="concave term along Re z₁ pushes phi below u next to z0",
        ),
        intro_counterexample(n),
    ]
    return scenarios


def scenario(name: str, n: int = DEFAULT_N) -> Scenario:
    for candidate in scenario_entries(n):
        if candidate.name == name:
            return candidate
    raise CatalogLookupError(name)


def names() -> dict[str, list[str]]:
    return {
        "functions": [e.name for e in catalog_entries()],
        "scenarios": [s.name for s in scenario_entries()],
    }
