"""psh-lab command-line entry point.

    psh-lab <command> [--config PATH] [--target NAME|EXPR] [--n N] [--delta D[,D...]]
                      [--ppa P] [--out-json PATH] [--out-csv PATH] [--seed S] [--verbose]

Exit codes: 0 Pass/Certified, 1 Fail/Refuted, 2 PreconditionViolated/Inconclusive,
3 configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
from pathlib import Path
from typing import Any, Callable

import numpy as np

from psh_extension_lab.abp import AbpReport, abp_quantities, estimate_constants, poisson_rhs
from psh_extension_lab.calculus import direction_sample
from psh_extension_lab.catalog import (
    DEFAULT_DELTA,
    CatalogLookupError,
    catalog_entries,
    catalog_entry,
    scenario,
)
from psh_extension_lab.cli.reports import (
    RunReport,
    abp_csv_path,
    write_abp_csv,
    write_chain_csv,
    write_json,
)
from psh_extension_lab.cli.run_config import ConfigError, RunConfig, build_set, config_from_dict
from psh_extension_lab.config import settings
from psh_extension_lab.envelope import (
    build_obstacle,
    contact_set,
    convex_envelope_iterative,
    convex_envelope_lp,
    nonvoid_witness,
)
from psh_extension_lab.errors import LabError
from psh_extension_lab.functions import Expression, ExpressionError, FunctionDescriptor
from psh_extension_lab.geometry import make_grid, sample
from psh_extension_lab.pipeline import PipelineParams, Scenario, build_v_delta, counterexample_demo, run_extension
from psh_extension_lab.viscosity import Status, Verdict, certify_psh, certify_subharmonic, det_plus_subsolution_check

logger = logging.getLogger(__name__)

COMMANDS = ("certify", "envelope", "abp", "extend", "catalog", "demo-counterexample")
DEFAULT_DELTAS = (0.2, 0.1, 0.05)


class Outcome:
    """What a command hands back to ``run``."""

    def __init__(self, status: str, exit_code: int, result: dict[str, Any]):
        self.status = status
        self.exit_code = exit_code
        self.result = result


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="psh-lab",
        description="Numerical checks for extending plurisubharmonic functions across closed null sets.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", type=Path, help="JSON run configuration")
    parser.add_argument("--target", help="catalog entry, scenario name, or inline expression")
    parser.add_argument("--n", type=int, help="complex dimension")
    parser.add_argument("--delta", help="inner radius, or a comma-separated decreasing list")
    parser.add_argument("--ppa", type=int, help="grid points per axis (odd)")
    parser.add_argument("--out-json", help="write the JSON report here")
    parser.add_argument("--out-csv", help="write CSV tables here")
    parser.add_argument("--seed", type=int, help="direction sampling seed")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    return parser


def _merge_flags(data: dict, args: argparse.Namespace) -> dict:
    data = dict(data)
    data["command"] = args.command
    grid = dict(data.get("grid") or {})
    params = dict(data.get("params") or {})
    output = dict(data.get("output") or {})
    if args.target is not None:
        data["target"] = args.target
    if args.n is not None:
        grid["n"] = args.n
    if args.delta is not None:
        try:
            values = [float(v) for v in args.delta.split(",") if v.strip()]
        except ValueError as e:
            raise ConfigError("grid.delta", f"not a number list: {args.delta!r}") from e
        if len(values) == 1:
            grid["delta"] = values[0]
        else:
            grid["deltas"] = values
    if args.ppa is not None:
        grid["points_per_axis"] = args.ppa
    if args.seed is not None:
        params["seed"] = args.seed
    if args.out_json is not None:
        output["json"] = args.out_json
    if args.out_csv is not None:
        output["csv"] = args.out_csv
    if args.verbose:
        output["verbosity"] = "DEBUG"
    for key, value in (("grid", grid), ("params", params), ("output", output)):
        if value:
            data[key] = value
    return data


def load_config(args: argparse.Namespace) -> RunConfig:
    data: dict = {}
    if args.config is not None:
        try:
            text = args.config.read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError("--config", f"cannot read {args.config}: {e.strerror}") from e
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError("$", f"malformed JSON: {e.msg} (line {e.lineno})") from e
        if not isinstance(data, dict):
            raise ConfigError("$", "configuration must be a JSON object")
    return config_from_dict(_merge_flags(data, args))


def _resolve_function(config: RunConfig) -> tuple[FunctionDescriptor, Any]:
    if not config.target:
        raise ConfigError("target", "certify needs a catalog entry or an expression")
    try:
        entry = catalog_entry(config.target)
        return entry.function, entry
    except CatalogLookupError:
        pass
    try:
        return Expression(config.target), None
    except ExpressionError as e:
        raise ConfigError("target", f"neither a catalog entry nor a valid expression: {e.detail}") from e


def _resolve_scenario(config: RunConfig, default: str = "trivial") -> Scenario:
    name = config.target or default
    try:
        return scenario(name, config.grid.n)
    except CatalogLookupError as e:
        raise ConfigError("target", f"unknown scenario {name!r}") from e


def _deltas(config: RunConfig) -> tuple[float, ...]:
    if config.grid.deltas:
        return tuple(config.grid.deltas)
    if config.grid.delta is not None:
        return (config.grid.delta,)
    return DEFAULT_DELTAS


def _overall(verdicts: dict[str, Verdict]) -> Outcome:
    statuses = [v.status for v in verdicts.values()]
    if Status.FAIL in statuses:
        return Outcome(Status.FAIL.value, 1, {})
    if Status.INCONCLUSIVE in statuses:
        return Outcome(Status.INCONCLUSIVE.value, 2, {})
    return Outcome(Status.PASS.value, 0, {})


def _certify(config: RunConfig) -> Outcome:
    function, entry = _resolve_function(config)
    n = config.grid.n
    if function.min_n > n:
        raise ConfigError("grid.n", f"{function.describe()!r} needs n >= {function.min_n}")
    delta = config.grid.delta if config.grid.delta is not None else DEFAULT_DELTA
    domain = make_grid(n, config.grid.center, delta, config.grid.points_per_axis)
    field = sample(function, domain)
    p = config.params
    directions = direction_sample(n, p.direction_count, config.seed())
    factors = p.certify_radius_factors or settings.certify_radius_factors
    radii = [f * domain.h for f in factors]
    m = p.quadrature_nodes or settings.certify_quadrature_nodes

    verdicts = {
        "subharmonic": certify_subharmonic(field, radii, p.certify_tol, directions, m),
        "psh": certify_psh(field, None, 0.0, radii, directions, p.certify_tol, m),
    }
    exclude = build_set(config.exclude, n) if config.exclude is not None else (
        entry.exclude_set(n) if entry is not None else None
    )
    if exclude is not None:
        margin = (p.psh_margin_factor or settings.psh_margin_factor) * domain.h
        verdicts["psh_off_E"] = certify_psh(field, exclude, margin, radii, directions, p.certify_tol, m)
    outcome = _overall(verdicts)
    result: dict[str, Any] = {
        "function": function.describe(),
        "h": domain.h,
        "verdicts": {name: v.as_dict() for name, v in verdicts.items()},
    }
    if exclude is not None:
        result["exclude"] = exclude.describe()
    if entry is not None and entry.smooth:
        result["det_plus"] = det_plus_subsolution_check(field).as_dict()
    outcome.result = result
    return outcome


def _envelope(config: RunConfig) -> Outcome:
    sc = _resolve_scenario(config)
    delta = config.grid.delta if config.grid.delta is not None else DEFAULT_DELTAS[0]
    domain = make_grid(sc.n, sc.z0, delta, config.grid.points_per_axis)
    v = build_v_delta(sc, delta, domain)
    obstacle = build_obstacle(v, domain)
    solution = convex_envelope_iterative(
        obstacle, tol=config.params.envelope_tol, contact_tol=config.params.contact_tol
    )
    contact = contact_set(solution, obstacle)
    result: dict[str, Any] = {
        "scenario": sc.describe(),
        "delta": delta,
        "h": domain.h,
        "iterations": solution.iterations,
        "final_residual": solution.final_residual,
        "contact_tol": solution.contact_tol,
        "contact_count": contact.count,
        "contact_measure": contact.measure,
        "nonvoid_witness": nonvoid_witness(obstacle).b,
        "gamma_at_z0": float(solution.gamma[domain.center_index]),
    }
    if config.params.oracle:
        inner = domain.inner_mask
        if domain.dim > 2:
            # one LP per node: restrict to the Re z1 axis through z0
            inner = inner & np.all(domain.offsets[:, 1:] == 0.0, axis=1)
        inner = np.flatnonzero(inner)
        gaps = [abs(float(solution.gamma[i]) - convex_envelope_lp(obstacle, int(i))) for i in inner]
        result["oracle_max_gap"] = max(gaps) if gaps else 0.0
        result["oracle_nodes"] = int(inner.size)
    status, code = ("Converged", 0) if contact.count else ("EmptyContact", 2)
    return Outcome(status, code, result)


def _abp_reports(sc: Scenario, deltas, config: RunConfig) -> list[AbpReport]:
    reports = []
    for delta in deltas:
        domain = make_grid(sc.n, sc.z0, delta, config.grid.points_per_axis)
        v = build_v_delta(sc, delta, domain)
        solution = convex_envelope_iterative(
            build_obstacle(v, domain), tol=config.params.envelope_tol, contact_tol=config.params.contact_tol
        )
        f = poisson_rhs(sample(sc.phi, domain), delta, sc.n)
        reports.append(abp_quantities(v, solution, f, delta))
    return reports


def _abp(config: RunConfig) -> Outcome:
    sc = _resolve_scenario(config)
    reports = _abp_reports(sc, _deltas(config), config)
    result: dict[str, Any] = {"scenario": sc.describe(), "reports": [r.as_dict() for r in reports]}
    if any(r.implied_C is not None for r in reports):
        result["constants"] = {str(n): c for n, c in estimate_constants(reports).items()}
    if config.output.csv_path:
        write_abp_csv(reports, config.output.csv_path)
    if any(r.empty_contact for r in reports):
        return Outcome(Status.INCONCLUSIVE.value, 2, result)
    if not all(r.lower_bound_ok for r in reports):
        return Outcome(Status.FAIL.value, 1, result)
    return Outcome(Status.PASS.value, 0, result)


def _pipeline_params(config: RunConfig) -> PipelineParams:
    p = config.params
    overrides: dict[str, Any] = {
        "deltas": _deltas(config),
        "points_per_axis": config.grid.points_per_axis,
        "seed": config.seed(),
    }
    optional = {
        "radius_factors": None if p.radius_factors is None else tuple(p.radius_factors),
        "m": p.quadrature_nodes,
        "margin_factor": p.margin_factor,
        "guard_margin_factor": p.psh_margin_factor,
        "envelope_tol": p.envelope_tol,
        "contact_tol": p.contact_tol,
        "chain_tol": p.chain_tol,
        "certify_tol": p.certify_tol,
        "final_tol": p.final_tol,
        "direction_count": p.direction_count,
    }
    overrides.update({k: v for k, v in optional.items() if v is not None})
    return PipelineParams(**overrides)


def _extend(config: RunConfig) -> Outcome:
    sc = _resolve_scenario(config, default="smooth-psh")
    if config.exclude is not None:
        sc = dataclasses.replace(sc, E=build_set(config.exclude, sc.n))
    report = run_extension(sc, _pipeline_params(config))
    if config.output.csv_path:
        write_chain_csv(report, config.output.csv_path)
        write_abp_csv([r.abp for r in report.records if r.abp is not None], abp_csv_path(config.output.csv_path))
    return Outcome(report.verdict.value, report.verdict.exit_code, report.as_dict())


def _catalog(config: RunConfig) -> Outcome:
    n = config.grid.n
    delta = config.grid.delta if config.grid.delta is not None else DEFAULT_DELTA
    domain = make_grid(n, None, delta, config.grid.points_per_axis)
    directions = direction_sample(n, config.params.direction_count, config.seed())
    margin = (config.params.psh_margin_factor or settings.psh_margin_factor) * domain.h
    rows = []
    mismatches = []
    for entry in catalog_entries():
        if entry.min_n > n:
            continue
        field = sample(entry.function, domain)
        observed = {
            "subharmonic": certify_subharmonic(field, directions=directions).status,
            "psh": certify_psh(field, directions=directions).status,
        }
        expected = {"subharmonic": entry.expected.subharmonic, "psh": entry.expected.psh}
        exclude = entry.exclude_set(n)
        if exclude is not None and entry.expected.psh_off is not None:
            observed["psh_off_E"] = certify_psh(field, exclude, margin, directions=directions).status
            expected["psh_off_E"] = entry.expected.psh_off
        ok = observed == expected
        if not ok:
            mismatches.append(entry.name)
            logger.warning("Catalog entry %s: expected %s, observed %s", entry.name, expected, observed)
        rows.append(
            {
                "name": entry.name,
                "notes": entry.notes,
                "expected": {k: v.value for k, v in expected.items()},
                "observed": {k: v.value for k, v in observed.items()},
                "matches": ok,
            }
        )
    result = {"n": n, "h": domain.h, "entries": rows, "mismatches": mismatches}
    if mismatches:
        return Outcome(Status.FAIL.value, 1, result)
    return Outcome(Status.PASS.value, 0, result)


def _demo(config: RunConfig) -> Outcome:
    grid_radius = 2.0 * config.grid.delta if config.grid.delta is not None else 1.5
    demo = counterexample_demo(config.grid.n, grid_radius, config.grid.points_per_axis, config.params.psh_margin_factor)
    return Outcome(demo.verdict.value, demo.verdict.exit_code, demo.as_dict())


HANDLERS: dict[str, Callable[[RunConfig], Outcome]] = {
    "certify": _certify,
    "envelope": _envelope,
    "abp": _abp,
    "extend": _extend,
    "catalog": _catalog,
    "demo-counterexample": _demo,
}


def run(config: RunConfig) -> tuple[int, RunReport]:
    """Execute one command; returns the exit code and the report (also written if configured)."""
    start = time.perf_counter()
    logger.info("Running %s (target %s)", config.command, config.target)
    outcome = HANDLERS[config.command](config)
    report = RunReport(
        command=config.command,
        inputs=config.model_dump(mode="json", by_alias=True),
        status=outcome.status,
        exit_code=outcome.exit_code,
        result=outcome.result,
        timing_seconds=round(time.perf_counter() - start, 3),
    )
    if config.output.json_path:
        write_json(report, config.output.json_path)
    logger.info("%s finished: %s (exit %d)", config.command, outcome.status, outcome.exit_code)
    return outcome.exit_code, report


def _configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging("DEBUG" if args.verbose else settings.log_level)
    try:
        config = load_config(args)
        if config.output.verbosity:
            logging.getLogger().setLevel(config.output.verbosity)
        code, report = run(config)
    except LabError as e:
        logger.error("%s", e)
        print(f"psh-lab: {e}", file=sys.stderr)
        return e.exit_code
    if not config.output.json_path:
        print(json.dumps({"command": report.command, "status": report.status, "exit_code": code}))
    return code


if __name__ == "__main__":
    sys.exit(main())
