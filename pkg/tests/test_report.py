from __future__ import annotations

import json
import re
from fractions import Fraction

import numpy as np
import pytest
from rich.console import Console

from toric_arakelov.config import REPORT_COLUMNS
from toric_arakelov.geometry import RationalPolytope
from toric_arakelov.numerics import LogRational
from toric_arakelov.report import (
    CERTIFIED,
    EXACT,
    NUMERIC,
    Report,
    encode_value,
    polytope_to_json,
    report_to_markdown,
    report_to_table,
    reports_to_text,
)

COLUMN_NAMES = [name for name, _ in REPORT_COLUMNS]


def _row_from_rich(line: str) -> dict[str, str]:
    cells = [cell.strip() for cell in re.split(r"\s{2,}", line.strip()) if cell.strip()]
    assert len(cells) == len(COLUMN_NAMES), f"Unexpected cell count in line: {line}"
    return dict(zip(COLUMN_NAMES, cells))


def _row_from_markdown(line: str) -> dict[str, str]:
    cells = [cell.strip() for cell in line.strip().strip("|").split("|")]
    assert len(cells) == len(COLUMN_NAMES), f"Unexpected cell count in markdown row: {line}"
    return dict(zip(COLUMN_NAMES, cells))


def _rich_rows(rendered: str) -> dict[str, dict[str, str]]:
    rows: dict[str, dict[str, str]] = {}
    for line in rendered.splitlines():
        if not line.strip() or "Source:" in line:
            continue
        try:
            row = _row_from_rich(line)
        except AssertionError:
            continue
        if row[COLUMN_NAMES[0]] == COLUMN_NAMES[0]:
            continue
        rows[row["Field"]] = row
    return rows


def _markdown_rows(markdown: str) -> dict[str, dict[str, str]]:
    rows: dict[str, dict[str, str]] = {}
    for line in markdown.splitlines():
        if not line.startswith("|") or "---" in line:
            continue
        row = _row_from_markdown(line)
        if row[COLUMN_NAMES[0]] == COLUMN_NAMES[0]:
            continue
        rows[row["Field"]] = row
    return rows


def _sample_report() -> Report:
    report = Report(["volume", "halfplane-theta.json"], "halfplane-theta.json", "ab" * 32)
    report.add("geometric_volume", Fraction(1))
    report.add("arithmetic_volume", Fraction(1, 4))
    report.add("lhat", LogRational.log_of(6))
    report.add("big", True, CERTIFIED)
    report.add("estimate", 0.2501, NUMERIC, 1e-6)
    return report


# ── fields and provenance ─────────────────────────────────────────────


def test_provenance_is_the_weakest_field():
    report = Report(["classify"])
    assert report.provenance == EXACT
    report.add("ample", False, CERTIFIED)
    assert report.provenance == CERTIFIED
    report.add("volume", 0.5, NUMERIC, 1e-8)
    assert report.provenance == NUMERIC


def test_numeric_fields_need_a_tolerance():
    with pytest.raises(ValueError):
        Report(["volume"]).add("volume", 0.5, NUMERIC)


def test_unknown_provenance_is_rejected():
    with pytest.raises(ValueError):
        Report(["volume"]).add("volume", 0.5, "guessed")


def test_get_returns_encoded_values():
    report = _sample_report()
    assert report.get("arithmetic_volume") == "1/4"
    assert report.get("lhat") == {"rat": "0/1", "logs": {"2": "1/1", "3": "1/1"}}
    with pytest.raises(KeyError):
        report.get("missing")


@pytest.mark.parametrize(
    "value, expected",
    [
        pytest.param(np.int64(3), 3, id="numpy-int"),
        pytest.param(np.float64(0.5), "0.5", id="numpy-float"),
        pytest.param(Fraction(-3, 4), "-3/4", id="fraction"),
        pytest.param((Fraction(1, 2), 2), ["1/2", 2], id="tuple"),
        pytest.param({2: Fraction(1)}, {"2": "1/1"}, id="mapping"),
        pytest.param(None, None, id="none"),
    ],
)
def test_encode_value(value, expected):
    assert encode_value(value) == expected


def test_encode_value_rejects_unknown_types():
    with pytest.raises(TypeError):
        encode_value(object())


def test_polytope_encoding_has_both_representations():
    payload = polytope_to_json(RationalPolytope.standard_simplex(2))
    assert payload["dimension"] == 2
    assert payload["empty"] is False
    assert len(payload["halfspaces"]) == 3
    assert sorted(map(tuple, payload["vertices"])) == [("0/1", "0/1"), ("0/1", "1/1"), ("1/1", "0/1")]


# ── JSON ──────────────────────────────────────────────────────────────


def test_report_json_layout():
    report = _sample_report()
    report.elapsed = 0.125
    payload = report.to_json()
    assert payload["command"] == ["volume", "halfplane-theta.json"]
    assert payload["input"] == {"source": "halfplane-theta.json", "sha256": "ab" * 32}
    assert payload["provenance"] == NUMERIC
    assert payload["timing"] == {"seconds": 0.125}
    assert payload["results"][-1] == {"name": "estimate", "value": "0.2501", "provenance": NUMERIC, "tol": 1e-6}
    assert "timing" not in report.to_json(timing=False)


def test_report_survives_json():
    report = _sample_report()
    again = Report.from_json(json.loads(reports_to_text([report])))
    assert again.to_json() == report.to_json()


def test_manifest_runs_print_a_list():
    text = reports_to_text([_sample_report(), _sample_report()], timing=False)
    assert isinstance(json.loads(text), list)
    assert text.endswith("\n")


# ── rendering ─────────────────────────────────────────────────────────


def test_table_rows_match_markdown_rows():
    report = _sample_report()
    console = Console(record=True, width=160)
    console.print(report_to_table(report))
    rich_rows = _rich_rows(console.export_text())
    markdown_rows = _markdown_rows(report_to_markdown(report))
    assert set(rich_rows) == set(markdown_rows) == {item.name for item in report.results}
    for name in rich_rows:
        assert rich_rows[name] == markdown_rows[name]
    assert rich_rows["geometric_volume"]["Value"] == "1"
    assert rich_rows["lhat"]["Value"] == "1*log(2) + 1*log(3)"
    assert rich_rows["big"]["Value"] == "yes"
    assert rich_rows["estimate"]["Provenance"] == "numeric ±1e-06"


def test_markdown_header_and_escaping():
    report = Report(["theta", "x.json"], "x.json", "cafe")
    report.add("note", "a|b")
    report.add("theta", RationalPolytope.empty(2))
    markdown = report_to_markdown(report)
    lines = markdown.splitlines()
    assert lines[:3] == ["### theta x.json", "*Source*: x.json", "*SHA-256*: `cafe`"]
    assert "| note | a\\|b | exact |" in lines
    assert "| theta | ∅ | exact |" in lines


def test_polytopes_render_as_vertex_lists():
    report = Report(["theta"])
    report.add("theta", RationalPolytope.from_vertices([(0, 0), (Fraction(1, 2), 0), (0, Fraction(1, 2))]))
    row = _markdown_rows(report_to_markdown(report))["theta"]
    assert row["Value"].startswith("conv{")
    assert "(1/2, 0)" in row["Value"]


def test_empty_reports_render_placeholders():
    report = Report(["classify"])
    assert "_No results_" in report_to_markdown(report)
    console = Console(record=True, width=120)
    console.print(report_to_table(report))
    assert "No results" in console.export_text()
