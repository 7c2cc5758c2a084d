"""JSON run reports and the CSV tables written next to them.

CSV columns are stable:

    chain  delta, r, T_index, u_gap, gamma_gap, phi_bound, hessian_form_min
    abp    n, delta, sup_abs, contact_integral, implied_C, lower_bound_ok, empty_contact, contact_count
"""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import Any, Iterable

from pydantic import BaseModel, Field

from psh_extension_lab import __version__
from psh_extension_lab.abp import AbpReport
from psh_extension_lab.pipeline import ExtensionReport

logger = logging.getLogger(__name__)

CHAIN_COLUMNS = ["delta", "r", "T_index", "u_gap", "gamma_gap", "phi_bound", "hessian_form_min"]
ABP_COLUMNS = [
    "n", "delta", "sup_abs", "contact_integral", "implied_C",
    "lower_bound_ok", "empty_contact", "contact_count",
]


class RunReport(BaseModel):
    command: str
    version: str = __version__
    inputs: dict[str, Any]
    status: str
    exit_code: int
    result: dict[str, Any] = Field(default_factory=dict)
    timing_seconds: float = 0.0


def dumps(report: RunReport) -> str:
    return json.dumps(report.model_dump(), sort_keys=True, indent=2) + "\n"


def write_json(report: RunReport, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(report), encoding="utf-8")
    logger.info("Wrote JSON report to %s", path)
    return path


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_rows(path: Path, columns: list[str], rows: Iterable[dict]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\r\n")
        writer.writerow(columns)
        count = 0
        for row in rows:
            writer.writerow([_cell(row.get(c)) for c in columns])
            count += 1
    logger.info("Wrote %d rows to %s", count, path)
    return path


def chain_rows(report: ExtensionReport) -> list[dict]:
    rows = []
    for record in report.records:
        for chain in record.chain_records:
            rows.append(
                {
                    "delta": chain.delta,
                    "r": chain.r,
                    "T_index": chain.T_index,
                    "u_gap": chain.u_gap,
                    "gamma_gap": chain.gamma_gap,
                    "phi_bound": chain.phi_bound,
                    "hessian_form_min": record.hessian_form_min,
                }
            )
    return rows


def abp_csv_path(path: str | Path) -> Path:
    """The ABP table sits next to the chain table: ``run.csv`` → ``run_abp.csv``."""
    path = Path(path)
    return path.with_name(f"{path.stem}_abp{path.suffix or '.csv'}")


def write_chain_csv(report: ExtensionReport, path: str | Path) -> Path:
    return _write_rows(Path(path), CHAIN_COLUMNS, chain_rows(report))


def write_abp_csv(reports: Iterable[AbpReport], path: str | Path) -> Path:
    return _write_rows(Path(path), ABP_COLUMNS, (r.as_dict() for r in reports))
