"""Read and write divisor specification documents.

A specification is a UTF-8 JSON object describing one toric metrized
ℝ-divisor over ℚ.  Exact scalars are ``"p/q"`` strings (plain integers and
JSON numbers are accepted on input) or ``{"rat": "p/q", "logs": {"2": "p/q"}}``
for log-rationals.  Every parse failure raises :class:`SpecError` carrying a
JSON path such as ``$.fan.rays[2]``.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

from .adelic import INFINITY, Place, PlaceId, PlaceTable, parse_place
from .convex import AffineForm, Cell, PiecewiseAffineConcave, PiecewiseAffineGeneral
from .divisor import (
    CanonicalMetric,
    FubiniStudyMetric,
    MetricSpec,
    PsiMetric,
    ThetaMetric,
    ToricMetrizedRDivisor,
)
from .errors import InvalidParametersError, SpecError, ToricArakelovError
from .geometry import RationalFan, RationalPolytope, VirtualSupportFunction
from .numerics import Scalar, scalar_from_json, scalar_to_json

_LOGGER = logging.getLogger(__name__)

SPEC_KEYS = {"rank", "fan", "divisor", "places", "metrics", "options"}
OPTION_KEYS = {"tol", "precision", "ell"}


@dataclass(frozen=True, slots=True)
class SpecOptions:
    """Per-document defaults; command-line flags take precedence."""

    tol: Optional[float] = None
    precision: Optional[int] = None
    ell: Optional[int] = None

    def to_json(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {}
        if self.tol is not None:
            out["tol"] = self.tol
        if self.precision is not None:
            out["precision"] = self.precision
        if self.ell is not None:
            out["ell"] = self.ell
        return out


@dataclass(frozen=True, slots=True)
class DivisorSpec:
    """A parsed specification together with its canonical document."""

    divisor: ToricMetrizedRDivisor
    options: SpecOptions = field(default_factory=SpecOptions)
    source: str = "<spec>"

    @property
    def document(self) -> Dict[str, Any]:
        return divisor_to_document(self.divisor, self.options)

    @property
    def digest(self) -> str:
        """SHA-256 of the canonical document."""

        return hashlib.sha256(canonical_json(self.document).encode("utf-8")).hexdigest()


def canonical_json(document: Any) -> str:
    return json.dumps(document, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


# ── field readers ──────────────────────────────────────────────────────


def _child(path: str, key: Union[str, int]) -> str:
    return f"{path}[{key}]" if isinstance(key, int) else f"{path}.{key}"


def _object(value: Any, path: str) -> Mapping[str, Any]:
    if not isinstance(value, Mapping):
        raise SpecError("expected an object", path=path)
    return value


def _array(value: Any, path: str) -> Sequence[Any]:
    if not isinstance(value, list):
        raise SpecError("expected an array", path=path)
    return value


def _require(mapping: Mapping[str, Any], key: str, path: str) -> Any:
    if key not in mapping:
        raise SpecError(f"missing field {key!r}", path=path)
    return mapping[key]


def _reject_unknown(mapping: Mapping[str, Any], allowed: set, path: str) -> None:
    unknown = sorted(set(mapping) - allowed)
    if unknown:
        raise SpecError(f"unknown field {unknown[0]!r}", path=path)


def _integer(value: Any, path: str, *, minimum: Optional[int] = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SpecError("expected an integer", path=path)
    if minimum is not None and value < minimum:
        raise SpecError(f"expected an integer ≥ {minimum}", path=path)
    return value


def _scalar(value: Any, path: str) -> Scalar:
    if isinstance(value, bool) or value is None:
        raise SpecError("expected a rational or log-rational", path=path)
    if isinstance(value, float):
        # decimal text as written, not the binary double
        value = repr(value)
    try:
        return scalar_from_json(value)
    except (ValueError, TypeError, ZeroDivisionError, ToricArakelovError) as exc:
        raise SpecError(f"bad scalar {value!r}: {exc}", path=path) from None


def _rational(value: Any, path: str) -> Fraction:
    result = _scalar(value, path)
    if not isinstance(result, Fraction):
        raise SpecError("expected a rational, not a log-rational", path=path)
    return result


def _scalar_vector(value: Any, path: str, n: int) -> Tuple[Scalar, ...]:
    items = _array(value, path)
    if len(items) != n:
        raise SpecError(f"expected {n} entries, got {len(items)}", path=path)
    return tuple(_scalar(x, _child(path, i)) for i, x in enumerate(items))


def _int_vector(value: Any, path: str, n: int) -> Tuple[int, ...]:
    items = _array(value, path)
    if len(items) != n:
        raise SpecError(f"expected {n} entries, got {len(items)}", path=path)
    return tuple(_integer(x, _child(path, i)) for i, x in enumerate(items))


# ── sections ───────────────────────────────────────────────────────────


def _parse_fan(value: Any, path: str, n: int) -> RationalFan:
    fan = _object(value, path)
    _reject_unknown(fan, {"rays", "cones"}, path)
    rays_path = _child(path, "rays")
    rays = tuple(
        _int_vector(r, _child(rays_path, i), n)
        for i, r in enumerate(_array(_require(fan, "rays", path), rays_path))
    )
    cones_path = _child(path, "cones")
    cones = []
    for i, cone in enumerate(_array(_require(fan, "cones", path), cones_path)):
        here = _child(cones_path, i)
        cones.append(tuple(_integer(x, _child(here, j), minimum=0) for j, x in enumerate(_array(cone, here))))
    try:
        return RationalFan(rays, tuple(cones), n)
    except ToricArakelovError as exc:
        raise SpecError(exc.message, path=path) from None


def _parse_form(value: Any, path: str, n: int) -> AffineForm:
    form = _object(value, path)
    _reject_unknown(form, {"slope", "offset"}, path)
    slope = _scalar_vector(_require(form, "slope", path), _child(path, "slope"), n)
    offset = _scalar(form.get("offset", "0"), _child(path, "offset"))
    return AffineForm(slope, offset)


def _parse_forms(value: Any, path: str, n: int) -> Tuple[AffineForm, ...]:
    forms = _array(value, path)
    if not forms:
        raise SpecError("expected at least one affine form", path=path)
    return tuple(_parse_form(f, _child(path, i), n) for i, f in enumerate(forms))


def _parse_cell(value: Any, path: str, n: int) -> Cell:
    cell = _object(value, path)
    _reject_unknown(cell, {"halfspaces", "form"}, path)
    rows_path = _child(path, "halfspaces")
    rows = []
    for i, row in enumerate(_array(_require(cell, "halfspaces", path), rows_path)):
        here = _child(rows_path, i)
        entry = _object(row, here)
        _reject_unknown(entry, {"normal", "offset"}, here)
        normal = _int_vector(_require(entry, "normal", here), _child(here, "normal"), n)
        rows.append((normal, _scalar(entry.get("offset", "0"), _child(here, "offset"))))
    return Cell(tuple(rows), _parse_form(_require(cell, "form", path), _child(path, "form"), n))


def _parse_metric(value: Any, path: str, n: int, delta: RationalPolytope) -> MetricSpec:
    if value == "canonical":
        return CanonicalMetric()
    metric = _object(value, path)
    if len(metric) != 1:
        raise SpecError("a metric has exactly one kind", path=path)
    (kind, body), = metric.items()
    here = _child(path, kind)
    if kind == "fubini-study":
        weights = [_rational(w, _child(here, i)) for i, w in enumerate(_array(body, here))]
        return FubiniStudyMetric(tuple(weights))
    if kind == "pa-psi":
        data = _object(body, here)
        if ("cells" in data) == ("forms" in data):
            raise SpecError("pa-psi needs exactly one of 'cells' or 'forms'", path=here)
        if "forms" in data:
            return PsiMetric(PiecewiseAffineConcave(_parse_forms(data["forms"], _child(here, "forms"), n)))
        cells_path = _child(here, "cells")
        cells = _array(data["cells"], cells_path)
        return PsiMetric(
            PiecewiseAffineGeneral(tuple(_parse_cell(c, _child(cells_path, i), n) for i, c in enumerate(cells)))
        )
    if kind == "pa-theta":
        data = _object(body, here)
        _reject_unknown(data, {"forms"}, here)
        if delta.is_empty:
            raise SpecError("a roof needs a nonempty Δ_D", path=here)
        forms = _parse_forms(_require(data, "forms", here), _child(here, "forms"), n)
        return ThetaMetric(PiecewiseAffineConcave(forms, delta))
    raise SpecError(f"unknown metric kind {kind!r}", path=path)


def _parse_places(value: Any, path: str) -> List[PlaceId]:
    ids: List[PlaceId] = []
    for i, entry in enumerate(_array(value, path)):
        here = _child(path, i)
        place_doc = _object(entry, here)
        _reject_unknown(place_doc, {"id", "lambda", "weight"}, here)
        try:
            place = Place(parse_place(_require(place_doc, "id", here)))
        except ToricArakelovError as exc:
            raise SpecError(exc.message, path=_child(here, "id")) from None
        if "lambda" in place_doc and _scalar(place_doc["lambda"], _child(here, "lambda")) != place.lam:
            raise SpecError(f"λ must be {place.lam} at this place", path=_child(here, "lambda"))
        if "weight" in place_doc and _rational(place_doc["weight"], _child(here, "weight")) != 1:
            raise SpecError("over Q every place has weight 1", path=_child(here, "weight"))
        ids.append(place.id)
    return ids


def _parse_options(value: Any, path: str) -> SpecOptions:
    options = _object(value, path)
    _reject_unknown(options, OPTION_KEYS, path)
    tol = options.get("tol")
    if tol is not None:
        if isinstance(tol, bool) or not isinstance(tol, (int, float)) or not tol > 0:
            raise SpecError("expected a positive number", path=_child(path, "tol"))
        tol = float(tol)
    precision = options.get("precision")
    if precision is not None:
        precision = _integer(precision, _child(path, "precision"), minimum=53)
    ell = options.get("ell")
    if ell is not None:
        ell = _integer(ell, _child(path, "ell"), minimum=1)
    return SpecOptions(tol, precision, ell)


# ── documents ──────────────────────────────────────────────────────────


def parse_spec(document: Any, *, source: str = "<spec>") -> DivisorSpec:
    """Validate *document* and build the divisor it describes."""

    root = _object(document, "$")
    _reject_unknown(root, SPEC_KEYS, "$")
    n = _integer(_require(root, "rank", "$"), "$.rank", minimum=1)
    fan = _parse_fan(_require(root, "fan", "$"), "$.fan", n)
    vectors_doc = _array(_require(root, "divisor", "$"), "$.divisor")
    if len(vectors_doc) != len(fan.cones):
        raise SpecError(f"expected {len(fan.cones)} defining vectors, one per cone", path="$.divisor")
    vectors = tuple(_scalar_vector(v, _child("$.divisor", i), n) for i, v in enumerate(vectors_doc))
    try:
        psi = VirtualSupportFunction(fan, vectors)
    except ToricArakelovError as exc:
        raise SpecError(exc.message, path="$.divisor") from None
    primes = _parse_places(root.get("places", []), "$.places")
    table = PlaceTable.rationals(p for p in primes if p != INFINITY)
    base = ToricMetrizedRDivisor(psi, (), table)

    metrics_doc = _object(root.get("metrics", {}), "$.metrics")
    metrics: Dict[PlaceId, MetricSpec] = {}
    for key, value in metrics_doc.items():
        here = _child("$.metrics", key)
        try:
            place = parse_place(key)
            if place in metrics:
                raise SpecError("place listed twice", path=here)
            metric = _parse_metric(value, here, n, base.delta())
            ToricMetrizedRDivisor(psi, ((place, metric),), table)
        except SpecError:
            raise
        except ToricArakelovError as exc:
            raise SpecError(exc.message, path=here) from None
        metrics[place] = metric
    divisor = ToricMetrizedRDivisor(psi, tuple(metrics.items()), table)
    options = _parse_options(root.get("options", {}), "$.options")
    _LOGGER.debug("parsed %s: rank %s, %s cones, metrics at %s", source, n, len(fan.cones), sorted(map(str, metrics)))
    return DivisorSpec(divisor, options, source)


def read_document(path: Union[str, Path]) -> Any:
    """Load JSON from *path*, reporting syntax errors with line and column."""

    file = Path(path)
    try:
        text = file.read_text(encoding="utf-8")
    except OSError as exc:
        raise SpecError(f"cannot read {file}: {exc.strerror or exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{file}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def load_spec(path: Union[str, Path]) -> DivisorSpec:
    return parse_spec(read_document(path), source=str(path))


def load_manifest(path: Union[str, Path]) -> Optional[List[Path]]:
    """Spec paths listed by a ``{"manifest": [...]}`` document, else ``None``.

    Relative entries are resolved against the manifest's directory.
    """

    document = read_document(path)
    if not isinstance(document, Mapping) or "manifest" not in document:
        return None
    _reject_unknown(document, {"manifest"}, "$")
    base = Path(path).parent
    entries = []
    for i, entry in enumerate(_array(document["manifest"], "$.manifest")):
        if not isinstance(entry, str) or not entry:
            raise SpecError("expected a file name", path=_child("$.manifest", i))
        entries.append(base / entry)
    return entries


# ── serialization ──────────────────────────────────────────────────────


def _form_to_json(form: AffineForm) -> Dict[str, Any]:
    return {"slope": [scalar_to_json(x) for x in form.slope], "offset": scalar_to_json(form.offset)}


def _metric_to_json(metric: MetricSpec) -> Any:
    if isinstance(metric, CanonicalMetric):
        return "canonical"
    if isinstance(metric, FubiniStudyMetric):
        return {"fubini-study": [scalar_to_json(w) for w in metric.weights]}
    if isinstance(metric, ThetaMetric) and isinstance(metric.roof, PiecewiseAffineConcave):
        return {"pa-theta": {"forms": [_form_to_json(f) for f in metric.roof.forms]}}
    if isinstance(metric, PsiMetric) and isinstance(metric.function, PiecewiseAffineConcave):
        return {"pa-psi": {"forms": [_form_to_json(f) for f in metric.function.forms]}}
    if isinstance(metric, PsiMetric) and isinstance(metric.function, PiecewiseAffineGeneral):
        cells = [
            {
                "halfspaces": [
                    {"normal": list(normal), "offset": scalar_to_json(offset)}
                    for normal, offset in cell.halfspaces
                ],
                "form": _form_to_json(cell.form),
            }
            for cell in metric.function.cells
        ]
        return {"pa-psi": {"cells": cells}}
    raise InvalidParametersError(f"a {metric.kind} metric has no document form")


def _place_key(place: PlaceId) -> str:
    return INFINITY if place == INFINITY else str(place)


def divisor_to_document(divisor: ToricMetrizedRDivisor, options: SpecOptions = SpecOptions()) -> Dict[str, Any]:
    """The canonical document of *divisor*; parsing it gives the same divisor back."""

    fan = divisor.fan
    document: Dict[str, Any] = {
        "rank": divisor.dim,
        "fan": {"rays": [list(r) for r in fan.rays], "cones": [list(c) for c in fan.cones]},
        "divisor": [[scalar_to_json(x) for x in v] for v in divisor.psi.vectors],
        "places": [
            {"id": p.id, "lambda": scalar_to_json(p.lam), "weight": scalar_to_json(p.weight)}
            for p in divisor.table
        ],
        "metrics": {_place_key(place): _metric_to_json(metric) for place, metric in divisor.metrics},
    }
    extra = options.to_json()
    if extra:
        document["options"] = extra
    return document


def dump_spec(divisor: ToricMetrizedRDivisor, options: SpecOptions = SpecOptions()) -> str:
    return json.dumps(divisor_to_document(divisor, options), indent=2, ensure_ascii=False) + "\n"


__all__ = [
    "DivisorSpec",
    "SpecOptions",
    "canonical_json",
    "divisor_to_document",
    "dump_spec",
    "load_manifest",
    "load_spec",
    "parse_spec",
    "read_document",
]
