"""Machine-readable reports and their table/Markdown renderings."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np
from rich import box
from rich.table import Table

from .config import REPORT_COLUMNS
from .geometry import RationalPolytope
from .numerics import LogRational, scalar_to_json

EXACT = "exact"
CERTIFIED = "certified"
NUMERIC = "numeric"

PROVENANCES = (EXACT, CERTIFIED, NUMERIC)


def encode_value(value: Any) -> Any:
    """Turn a computed value into JSON: exact scalars as ``"p/q"`` or log-rational
    objects, floats as decimal strings, polytopes as H- and V-representations.
    """

    if value is None or isinstance(value, (bool, str)):
        return value
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (Fraction, LogRational)):
        return scalar_to_json(value)
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, RationalPolytope):
        return polytope_to_json(value)
    if isinstance(value, Mapping):
        return {str(k): encode_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [encode_value(v) for v in value]
    raise TypeError(f"cannot encode {type(value).__name__} in a report")


def polytope_to_json(polytope: RationalPolytope) -> Dict[str, Any]:
    return {
        "dimension": polytope.ambient_dim,
        "empty": polytope.is_empty,
        "halfspaces": [
            {"normal": list(normal), "offset": encode_value(offset)} for normal, offset in polytope.halfspaces
        ],
        "vertices": [[encode_value(x) for x in v] for v in polytope.vertices],
    }


@dataclass(frozen=True, slots=True)
class ReportField:
    name: str
    value: Any
    provenance: str = EXACT
    tol: Optional[float] = None

    def to_json(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"name": self.name, "value": self.value, "provenance": self.provenance}
        if self.tol is not None:
            out["tol"] = self.tol
        return out


@dataclass(slots=True)
class Report:
    """The outcome of one command on one specification."""

    command: List[str]
    source: str = "-"
    digest: Optional[str] = None
    results: List[ReportField] = field(default_factory=list)
    elapsed: Optional[float] = None

    def add(self, name: str, value: Any, provenance: str = EXACT, tol: Optional[float] = None) -> None:
        if provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {provenance!r}")
        if provenance == NUMERIC and tol is None:
            raise ValueError(f"numeric field {name!r} needs a tolerance")
        self.results.append(ReportField(name, encode_value(value), provenance, tol))

    def get(self, name: str) -> Any:
        for item in self.results:
            if item.name == name:
                return item.value
        raise KeyError(name)

    @property
    def provenance(self) -> str:
        """The weakest provenance among the results."""

        seen = {item.provenance for item in self.results}
        for level in reversed(PROVENANCES):
            if level in seen:
                return level
        return EXACT

    def to_json(self, *, timing: bool = True) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            "command": list(self.command),
            "input": {"source": self.source, "sha256": self.digest},
            "provenance": self.provenance,
            "results": [item.to_json() for item in self.results],
        }
        if timing and self.elapsed is not None:
            out["timing"] = {"seconds": round(self.elapsed, 6)}
        return out

    @classmethod
    def from_json(cls, payload: Mapping[str, Any]) -> "Report":
        report = cls(
            list(payload["command"]),
            payload["input"]["source"],
            payload["input"]["sha256"],
            elapsed=payload.get("timing", {}).get("seconds"),
        )
        for item in payload["results"]:
            report.results.append(
                ReportField(item["name"], item["value"], item["provenance"], item.get("tol"))
            )
        return report


def reports_to_text(reports: Sequence[Report], *, timing: bool = True) -> str:
    """JSON text for one report, or a list when running a manifest."""

    payload: Any = [r.to_json(timing=timing) for r in reports]
    if len(reports) == 1:
        payload = payload[0]
    return json.dumps(payload, indent=2, ensure_ascii=False) + "\n"


# ── rendering ──────────────────────────────────────────────────────────


def _display(value: Any) -> str:
    if isinstance(value, str):
        if "/" in value and value.endswith("/1"):
            return value[:-2]
        return value
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, Mapping) and set(value) == {"rat", "logs"}:
        return str(LogRational.from_terms(value["rat"], value["logs"]))
    if isinstance(value, Mapping) and "vertices" in value:
        vertices = ["(" + ", ".join(_display(x) for x in v) + ")" for v in value["vertices"]]
        return "conv{" + ", ".join(vertices) + "}" if vertices else "∅"
    if isinstance(value, list):
        return "[" + ", ".join(_display(v) for v in value) + "]"
    if isinstance(value, Mapping):
        return ", ".join(f"{k}={_display(v)}" for k, v in value.items())
    return str(value)


def _provenance_cell(item: ReportField) -> str:
    return item.provenance if item.tol is None else f"{item.provenance} ±{item.tol:g}"


def _escape_markdown_cell(text: str) -> str:
    cleaned = text.replace("\\", "\\\\").replace("|", "\\|").replace("\n", " ")
    return cleaned.strip()


def _format_cell_value(value: Optional[str]) -> str:
    text = "-" if value is None else str(value)
    return text if text.strip() else "-"


def _markdown_cell(value: Optional[str]) -> str:
    return _escape_markdown_cell(_format_cell_value(value))


def report_to_table(report: Report) -> Table:
    """Return a Rich table with one row per result field."""

    table = Table(
        title=" ".join(report.command),
        caption=f"Source: {report.source}",
        box=box.SIMPLE_HEAVY,
        highlight=True,
    )
    for header, justify in REPORT_COLUMNS:
        table.add_column(header, justify=justify)
    if report.results:
        for item in report.results:
            table.add_row(item.name, _format_cell_value(_display(item.value)), _provenance_cell(item))
    else:
        table.add_row("No results", *[""] * (len(REPORT_COLUMNS) - 1), style="italic")
    return table


def report_to_markdown(report: Report) -> str:
    """Return a Markdown section describing *report*."""

    lines = [f"### {' '.join(report.command)}", f"*Source*: {report.source}"]
    if report.digest:
        lines.append(f"*SHA-256*: `{report.digest}`")
    lines.append("")
    headers = [label for label, _ in REPORT_COLUMNS]
    lines.append("| " + " | ".join(headers) + " |")
    lines.append("| " + " | ".join(["---"] * len(headers)) + " |")
    if report.results:
        for item in report.results:
            row = [item.name, _display(item.value), _provenance_cell(item)]
            lines.append("| " + " | ".join(_markdown_cell(cell) for cell in row) + " |")
    else:
        empty_row = ["_No results_"] + [""] * (len(headers) - 1)
        lines.append("| " + " | ".join(empty_row) + " |")
    return "\n".join(lines)


__all__ = [
    "CERTIFIED",
    "EXACT",
    "NUMERIC",
    "Report",
    "ReportField",
    "encode_value",
    "polytope_to_json",
    "report_to_markdown",
    "report_to_table",
    "reports_to_text",
]
