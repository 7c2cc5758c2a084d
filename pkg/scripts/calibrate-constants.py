#!/usr/bin/env python3
"""
Measure the regression constants frozen in tests/conftest.py.

C0       max |gamma - LP| / (h + tol) over B_delta nodes, n = 1, per obstacle
         (trivial, double well) over 17 and 33 points per axis.
C_frozen max implied ABP constant per dimension over the certified scenarios,
         delta in {0.05, 0.1, 0.2}, at 17 and 25 points per axis.

Prints JSON; copy the values (with headroom) into tests/conftest.py.
"""

import argparse
import json
import logging
import sys

import numpy as np

from psh_extension_lab.abp import abp_quantities, estimate_constants, poisson_rhs
from psh_extension_lab.catalog import scenario_entries
from psh_extension_lab.config import settings
from psh_extension_lab.envelope import (
    build_obstacle,
    convex_envelope_iterative,
    convex_envelope_lp,
    double_well_obstacle,
)
from psh_extension_lab.geometry import make_grid, sample
from psh_extension_lab.pipeline import ExtensionVerdict, build_v_delta

ORACLE_GRIDS = (17, 33)
ABP_GRIDS = (17, 25)
DELTAS = (0.05, 0.1, 0.2)
TRIVIAL_DELTA = 0.2

GREEN = "\033[92m"
YELLOW = "\033[93m"
RESET = "\033[0m"


def oracle_ratio(obstacle) -> float:
    """Worst |gamma - LP| / (h + tol) over the inner nodes of one obstacle."""
    solution = convex_envelope_iterative(obstacle)
    domain = obstacle.domain
    scale = domain.h + settings.envelope_tol
    worst = 0.0
    for node in np.flatnonzero(domain.inner_mask):
        gap = abs(float(solution.gamma[node]) - convex_envelope_lp(obstacle, int(node)))
        worst = max(worst, gap / scale)
    return worst


def measure_c0() -> dict:
    trivial = next(s for s in scenario_entries(1) if s.name == "trivial")
    ratios = {}
    for ppa in ORACLE_GRIDS:
        print(f"{YELLOW}Oracle sweep at {ppa} points per axis...{RESET}", file=sys.stderr)
        domain = make_grid(1, trivial.z0, TRIVIAL_DELTA, ppa)
        v = build_v_delta(trivial, TRIVIAL_DELTA, domain)
        ratios[f"trivial_{ppa}"] = oracle_ratio(build_obstacle(v, domain))
        ratios[f"double_well_{ppa}"] = oracle_ratio(double_well_obstacle(ppa))
    c0 = {kind: max(v for k, v in ratios.items() if k.startswith(kind)) for kind in ("trivial", "double_well")}
    return {"C0": c0, "ratios": ratios}


def measure_c_frozen() -> dict:
    reports = []
    for n in (1, 2):
        for sc in scenario_entries(n):
            if sc.expected is not ExtensionVerdict.CERTIFIED:
                continue
            for ppa in ABP_GRIDS:
                for delta in DELTAS:
                    print(f"{YELLOW}ABP {sc.name} n={n} ppa={ppa} delta={delta}{RESET}", file=sys.stderr)
                    domain = make_grid(n, sc.z0, delta, ppa)
                    v = build_v_delta(sc, delta, domain)
                    solution = convex_envelope_iterative(build_obstacle(v, domain))
                    f = poisson_rhs(sample(sc.phi, domain), delta, n)
                    reports.append(abp_quantities(v, solution, f, delta))
    constants = estimate_constants(reports)
    return {"C_frozen": {str(n): c for n, c in constants.items()}, "reports": len(reports)}


def main():
    """Main entry point."""
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--skip-abp", action="store_true", help="only measure C0")
    args = parser.parse_args()
    logging.basicConfig(level=logging.WARNING)

    result = measure_c0()
    if not args.skip_abp:
        result.update(measure_c_frozen())
    print(json.dumps(result, indent=2, sort_keys=True))
    print(f"{GREEN}Calibration complete.{RESET}", file=sys.stderr)


if __name__ == "__main__":
    main()
