"""Toric metrized ℝ-divisors over ℚ and their roof functions.

A divisor is a virtual support function ``Ψ_D`` on a complete fan together
with one metric per place.  Places that are not listed carry the canonical
metric ``ψ_v = Ψ_D``.  Metrics are given in one of four ways:

* canonical,
* ``ψ_v`` directly (piecewise affine or an oracle),
* the roof ``ϑ_v`` directly on ``Δ_D`` (the exact path for Zariski work),
* the weighted Fubini–Study metric at ∞ on ℙⁿ, evaluated in closed form.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, ClassVar, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import logsumexp, xlogy

from .adelic import INFINITY, Place, PlaceId, PlaceTable, parse_place, place_label
from .config import get_settings
from .convex import (
    AffineForm,
    ConcaveFunction,
    NumericConcave,
    OracleFunction,
    PiecewiseAffineConcave,
    PiecewiseAffineGeneral,
    is_concave,
    legendre_dual,
    sup_convolution,
    _maximize_on_polytope,
)
from .errors import (
    ConstructionError,
    EmptyPolytopeError,
    GridTooCoarseError,
    IncomparableFansError,
    InvalidParametersError,
    NotRepresentableError,
    NotSemipositiveError,
    OraclePathUnsupportedError,
    PointOutsidePolytopeError,
)
from .geometry import Point, RationalFan, RationalPolytope, VirtualSupportFunction, lattice_points
from .numerics import (
    ONE,
    ZERO,
    LogRational,
    Scalar,
    dot,
    is_rational,
    rational_ratio,
    scalar_min,
    to_float,
)

_LOGGER = logging.getLogger(__name__)

PsiFunction = Union[PiecewiseAffineGeneral, PiecewiseAffineConcave, OracleFunction]

# Relative tolerance for float comparisons of roofs on the numeric path.
NUMERIC_SLACK = 1e-9


# ── metric specifications ──────────────────────────────────────────────


@dataclass(frozen=True, slots=True)
class CanonicalMetric:
    kind: ClassVar[str] = "canonical"


@dataclass(frozen=True, slots=True)
class PsiMetric:
    """The metric given by ``ψ_v`` with ``rec(ψ_v) = Ψ_D``."""

    function: PsiFunction

    @property
    def kind(self) -> str:
        return "oracle-psi" if isinstance(self.function, OracleFunction) else "pa-psi"


@dataclass(frozen=True, slots=True)
class ThetaMetric:
    """The semipositive metric given by its roof ``ϑ_v`` on ``Δ_D``."""

    roof: ConcaveFunction

    @property
    def kind(self) -> str:
        return "pa-theta" if isinstance(self.roof, PiecewiseAffineConcave) else "numeric-theta"


@dataclass(frozen=True, slots=True)
class FubiniStudyMetric:
    """Weighted Fubini–Study metric at ∞ on ℙⁿ with weights ``α_0, …, α_n``."""

    weights: Tuple[Fraction, ...]
    kind: ClassVar[str] = "fubini-study"

    def __post_init__(self) -> None:
        weights = tuple(Fraction(w) for w in self.weights)
        if len(weights) < 2 or any(w <= 0 for w in weights):
            raise ConstructionError("Fubini–Study weights must be at least two positive numbers")
        object.__setattr__(self, "weights", weights)


MetricSpec = Union[CanonicalMetric, PsiMetric, ThetaMetric, FubiniStudyMetric]


# ── Fubini–Study closed forms ──────────────────────────────────────────


def _harmonic(k: int) -> Fraction:
    return sum((Fraction(1, j) for j in range(1, k + 1)), ZERO)


@dataclass(frozen=True, slots=True)
class FubiniStudyRoof:
    """``ψ(u) = −½ log Σ α_i e^{−2u_i}`` and ``ϑ(x) = −½ Σ x_i log(x_i/α_i)`` (``u_0 = 0``, ``x_0 = 1 − Σx_i``)."""

    weights: Tuple[Fraction, ...]

    @property
    def dim(self) -> int:
        return len(self.weights) - 1

    def _alpha(self) -> np.ndarray:
        return np.array([float(a) for a in self.weights])

    def psi(self, u: np.ndarray) -> float:
        u = np.asarray(u, dtype=float)
        exponents = -2.0 * np.concatenate(([0.0], u))
        return float(-0.5 * logsumexp(exponents, b=self._alpha()))

    def psi_many(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        exponents = -2.0 * np.hstack([np.zeros((len(points), 1)), points])
        return -0.5 * logsumexp(exponents, axis=1, b=self._alpha())

    def theta(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        full = np.concatenate(([1.0 - x.sum()], x))
        full = np.clip(full, 0.0, None)
        return float(-0.5 * (xlogy(full, full) - xlogy(full, self._alpha())).sum())

    def theta_many(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        full = np.clip(np.hstack([1.0 - points.sum(axis=1, keepdims=True), points]), 0.0, None)
        return -0.5 * (xlogy(full, full) - xlogy(full, self._alpha())).sum(axis=1)

    def theta_exact(self, x: Sequence[Fraction]) -> Scalar:
        full = [ONE - sum(x, ZERO)] + list(x)
        total: Scalar = ZERO
        for xi, alpha in zip(full, self.weights):
            if xi == 0:
                continue
            total = total + (LogRational.log_of(xi) - LogRational.log_of(alpha)) * xi
        return total * Fraction(-1, 2)

    def maximum(self) -> Tuple[Scalar, Point]:
        """``½ log Σα`` at ``α/Σα``."""

        total = sum(self.weights, ZERO)
        point = tuple(a / total for a in self.weights[1:])
        return LogRational.log_of(total) * Fraction(1, 2), point

    def vertex_value(self, index: int) -> Scalar:
        return LogRational.log_of(self.weights[index]) * Fraction(1, 2)

    def chi_volume(self) -> Scalar:
        """``(n+1)! ∫_Δ ϑ = ½ Σ_i (log α_i + Σ_{j≤i} 1/j)``."""

        total: Scalar = ZERO
        for i, alpha in enumerate(self.weights):
            total = total + LogRational.log_of(alpha) + _harmonic(i)
        return total * Fraction(1, 2)

    def to_numeric(self, domain: RationalPolytope) -> NumericConcave:
        return NumericConcave(self.theta, domain, self.theta_exact, self.maximum(), self.theta_many)

    def oracle(self) -> OracleFunction:
        n = self.dim
        forms = [AffineForm(tuple(ZERO for _ in range(n)), ZERO)]
        forms += [AffineForm(tuple(Fraction(int(i == j)) for j in range(n)), ZERO) for i in range(n)]
        return OracleFunction(self.psi, PiecewiseAffineConcave(tuple(forms)), True, n, spot_check=False)


def _is_standard_simplex(delta: RationalPolytope) -> bool:
    n = delta.ambient_dim
    expected = {tuple(Fraction(0) for _ in range(n))}
    expected |= {tuple(Fraction(int(i == j)) for j in range(n)) for i in range(n)}
    return set(delta.vertices) == expected


# ── roofs ──────────────────────────────────────────────────────────────


@dataclass(frozen=True, slots=True)
class RoofFunction:
    """Local roofs per place and their weighted sum ``ϑ = Σ n_v ϑ_v``."""

    local: Tuple[Tuple[PlaceId, ConcaveFunction], ...]
    global_roof: ConcaveFunction
    delta: RationalPolytope

    def __call__(self, x: Sequence[Scalar]) -> Union[Scalar, float]:
        return self.global_roof(x)

    def local_roof(self, place: PlaceId) -> ConcaveFunction:
        for key, value in self.local:
            if key == place:
                return value
        return PiecewiseAffineConcave.constant(ZERO, self.delta)

    @property
    def is_exact(self) -> bool:
        return isinstance(self.global_roof, PiecewiseAffineConcave)


def _scale_roof(roof: ConcaveFunction, lam: Scalar) -> ConcaveFunction:
    if lam == 1:
        return roof
    if isinstance(roof, PiecewiseAffineConcave):
        return roof.scale_values(lam)
    factor = to_float(lam)
    base = roof.evaluator
    exact = roof.exact
    scaled_exact = None
    if exact is not None:
        def scaled_exact(x: Sequence[Fraction]) -> Scalar:
            return exact(x) * lam

    return NumericConcave(lambda x: factor * base(x), roof.domain, scaled_exact)


def _is_zero_constant(roof: ConcaveFunction) -> bool:
    return (
        isinstance(roof, PiecewiseAffineConcave)
        and len(roof.forms) == 1
        and roof.forms[0].offset == 0
        and all(x == 0 for x in roof.forms[0].slope)
    )


def combine_roofs(parts: Sequence[Tuple[Fraction, ConcaveFunction]], delta: RationalPolytope) -> ConcaveFunction:
    """``Σ w_i ϑ_i`` on *delta*; exact when every part is piecewise affine."""

    live = [(w, r) for w, r in parts if not _is_zero_constant(r)]
    if not live:
        return PiecewiseAffineConcave.constant(ZERO, delta)
    if len(live) == 1 and live[0][0] == 1:
        return live[0][1]
    if all(isinstance(r, PiecewiseAffineConcave) for _, r in live):
        total = live[0][1].scale_values(live[0][0])
        for w, r in live[1:]:
            total = total + r.scale_values(w)
        return total.with_domain(delta)

    evaluators = [(float(w), r.evaluator if isinstance(r, NumericConcave) else _pa_evaluator(r)) for w, r in live]
    exacts = []
    for w, r in live:
        if isinstance(r, PiecewiseAffineConcave):
            exacts.append((w, r.evaluate))
        elif r.exact is not None:
            exacts.append((w, r.exact))
        else:
            exacts = None
            break

    def evaluate(x: np.ndarray) -> float:
        return sum(w * f(x) for w, f in evaluators)

    exact = None
    if exacts is not None:
        def exact(x: Sequence[Fraction]) -> Scalar:
            total: Scalar = ZERO
            for w, f in exacts:
                total = total + f(x) * w
            return total

    return NumericConcave(evaluate, delta, exact)


def _pa_evaluator(roof: PiecewiseAffineConcave) -> Callable[[np.ndarray], float]:
    def evaluate(x: np.ndarray) -> float:
        return float(roof.evaluate_many(np.atleast_2d(np.asarray(x, dtype=float)))[0])

    return evaluate


# ── the divisor ────────────────────────────────────────────────────────


def _place_key(place: PlaceId) -> Tuple[int, int]:
    return (0, 0) if place == INFINITY else (1, int(place))


def _recession_points(psi: VirtualSupportFunction, rec: Union[PiecewiseAffineGeneral, PiecewiseAffineConcave]) -> List[Tuple[Fraction, ...]]:
    points = [tuple(map(Fraction, r)) for r in psi.fan.rays]
    points += [tuple(map(Fraction, psi.fan.cone(i).interior_point())) for i in range(len(psi.fan.cones))]
    general = rec.to_general() if isinstance(rec, PiecewiseAffineConcave) else rec
    for cell in general.cells:
        points += [tuple(map(Fraction, g)) for g in cell.recession_generators()]
    return points


@lru_cache(maxsize=512)
def _delta_of(psi: VirtualSupportFunction) -> RationalPolytope:
    return psi.stability_set()


@dataclass(frozen=True, slots=True)
class ToricMetrizedRDivisor:
    """``D̄ = (Ψ_D, (ψ_v)_v)`` on the fan of ``Ψ_D``.

    *metrics* maps places to metric specifications; canonical entries are
    dropped and unlisted places are canonical.
    """

    psi: VirtualSupportFunction
    metrics: Tuple[Tuple[PlaceId, MetricSpec], ...] = ()
    table: PlaceTable = field(default_factory=PlaceTable.rationals)

    def __post_init__(self) -> None:
        raw = self.metrics.items() if isinstance(self.metrics, Mapping) else self.metrics
        clean: Dict[PlaceId, MetricSpec] = {}
        for key, metric in raw:
            place = parse_place(key)
            if place in clean:
                raise ConstructionError(f"place {place_label(place)} has two metrics")
            if not isinstance(metric, CanonicalMetric):
                clean[place] = metric
        pairs = tuple(sorted(clean.items(), key=lambda item: _place_key(item[0])))
        object.__setattr__(self, "metrics", pairs)
        object.__setattr__(self, "table", self.table.with_places(clean))
        for place, metric in pairs:
            self._validate(place, metric)

    # validation -----------------------------------------------------------

    def _validate(self, place: PlaceId, metric: MetricSpec) -> None:
        label = place_label(place)
        n = self.dim
        if isinstance(metric, PsiMetric):
            function = metric.function
            if function.dim != n:
                raise ConstructionError(f"ψ at {label} has dimension {function.dim}, expected {n}")
            if isinstance(function, PiecewiseAffineConcave) and function.domain is not None:
                raise ConstructionError(f"ψ at {label} must be defined on all of N_R")
            rec = function.recession_function if isinstance(function, OracleFunction) else function.recession()
            for u in _recession_points(self.psi, rec):
                if rec.evaluate(u) != self.psi(u):
                    raise ConstructionError(
                        f"recession of ψ at {label} differs from Ψ_D at {tuple(map(str, u))}"
                    )
        elif isinstance(metric, ThetaMetric):
            delta = self.delta()
            if delta.is_empty:
                raise ConstructionError(f"roof at {label} needs a nonempty Δ_D")
            if set(metric.roof.domain.vertices) != set(delta.vertices):
                raise ConstructionError(f"roof at {label} is not defined on Δ_D")
        elif isinstance(metric, FubiniStudyMetric):
            if place != INFINITY:
                raise ConstructionError("the Fubini–Study metric lives at the archimedean place")
            if len(metric.weights) != n + 1 or not _is_standard_simplex(self.delta()):
                raise ConstructionError("the Fubini–Study metric needs O(1) on the standard ℙⁿ")
        else:
            raise ConstructionError(f"unknown metric {metric!r} at {label}")

    # basic data -----------------------------------------------------------

    @property
    def dim(self) -> int:
        return self.psi.ambient_dim

    @property
    def fan(self) -> RationalFan:
        return self.psi.fan

    def metric(self, place: PlaceId) -> MetricSpec:
        for key, value in self.metrics:
            if key == place:
                return value
        return CanonicalMetric()

    def metric_map(self) -> Dict[PlaceId, MetricSpec]:
        return dict(self.metrics)

    def places(self) -> List[PlaceId]:
        return [p.id for p in self.table]

    def delta(self) -> RationalPolytope:
        return _delta_of(self.psi)

    def lam(self, place: PlaceId) -> Scalar:
        return Place(place).lam

    # roofs ----------------------------------------------------------------

    def local_roof(self, place: PlaceId) -> ConcaveFunction:
        return _local_roof(self, parse_place(place))

    def roof(self) -> RoofFunction:
        return _roof(self)

    def psi_evaluator(self, place: PlaceId) -> Callable[[np.ndarray], np.ndarray]:
        """Vectorised float evaluation of ``ψ_v`` on an ``(k, n)`` array."""

        metric = self.metric(place)
        if isinstance(metric, CanonicalMetric):
            return PiecewiseAffineGeneral.from_support_function(self.psi).evaluate_many
        if isinstance(metric, PsiMetric):
            return metric.function.evaluate_many
        if isinstance(metric, FubiniStudyMetric):
            return FubiniStudyRoof(metric.weights).psi_many
        if place != INFINITY:
            raise InvalidParametersError("ψ from a roof is only evaluated at the archimedean place")
        return legendre_dual(metric.roof).evaluate_many

    # positivity data ------------------------------------------------------

    def is_semipositive(self) -> bool:
        if not self.psi.is_concave():
            return False
        for _, metric in self.metrics:
            if isinstance(metric, PsiMetric):
                function = metric.function
                if isinstance(function, OracleFunction) and not function.concave:
                    return False
                if isinstance(function, PiecewiseAffineGeneral) and not is_concave(function)[0]:
                    return False
        return True

    def is_integral(self) -> bool:
        return all(is_rational(x) and Fraction(x).denominator == 1 for v in self.psi.vectors for x in v)

    # constructions --------------------------------------------------------

    def pullback(self, fan: RationalFan) -> "ToricMetrizedRDivisor":
        if fan == self.fan:
            return self
        return ToricMetrizedRDivisor(self.psi.pullback(fan), self.metrics, self.table)

    def with_metrics(self, metrics: Mapping[PlaceId, MetricSpec]) -> "ToricMetrizedRDivisor":
        return ToricMetrizedRDivisor(self.psi, tuple(metrics.items()), self.table)


@lru_cache(maxsize=256)
def _local_roof(divisor: ToricMetrizedRDivisor, place: PlaceId) -> ConcaveFunction:
    delta = divisor.delta()
    if delta.is_empty:
        raise EmptyPolytopeError("Δ_D is empty; the roof function is undefined")
    metric = divisor.metric(place)
    if isinstance(metric, CanonicalMetric):
        return PiecewiseAffineConcave.constant(ZERO, delta)
    if isinstance(metric, ThetaMetric):
        return metric.roof
    if isinstance(metric, FubiniStudyMetric):
        return FubiniStudyRoof(metric.weights).to_numeric(delta)
    dual = legendre_dual(metric.function, delta)
    return _scale_roof(dual, divisor.lam(place))


@lru_cache(maxsize=256)
def _roof(divisor: ToricMetrizedRDivisor) -> RoofFunction:
    delta = divisor.delta()
    if delta.is_empty:
        raise EmptyPolytopeError("Δ_D is empty; the roof function is undefined")
    local = tuple((p.id, divisor.local_roof(p.id)) for p in divisor.table)
    weights = {p.id: p.weight * divisor.table.degree for p in divisor.table}
    total = combine_roofs([(weights[p], r) for p, r in local], delta)
    return RoofFunction(local, total, delta)


# ── top-level operations ───────────────────────────────────────────────


def delta_polytope(divisor: ToricMetrizedRDivisor) -> RationalPolytope:
    """``Δ_D = stab(Ψ_D)``; the empty polytope when infeasible."""

    return divisor.delta()


def roof(divisor: ToricMetrizedRDivisor) -> RoofFunction:
    return divisor.roof()


def monomial_supnorm(divisor: ToricMetrizedRDivisor, m: Sequence[object], ell: int, place: PlaceId) -> Union[Scalar, float]:
    """``−log ‖s_m‖_{v,sup} = ℓ·ϑ_v(m/ℓ)``."""

    if ell < 1:
        raise InvalidParametersError("ℓ must be a positive integer")
    x = tuple(Fraction(c) / ell for c in m)
    if not divisor.delta().contains(x):
        raise PointOutsidePolytopeError(f"{tuple(m)} is outside {ell}·Δ_D")
    value = divisor.local_roof(place)(x)
    return value * ell


def pullback(divisor: ToricMetrizedRDivisor, fan: RationalFan) -> ToricMetrizedRDivisor:
    return divisor.pullback(fan)


def _exact_values(lower: ConcaveFunction, upper: ConcaveFunction) -> bool:
    def exact(f: ConcaveFunction) -> bool:
        return isinstance(f, PiecewiseAffineConcave) or f.exact is not None

    return exact(lower) and exact(upper)


def _leq_at(lower: ConcaveFunction, upper: ConcaveFunction, x: Point, exact: bool) -> bool:
    if exact:
        return not upper(x) < lower(x)
    return to_float(upper(x)) >= to_float(lower(x)) - NUMERIC_SLACK


def _leq_on_regions(lower: ConcaveFunction, upper: ConcaveFunction, region: RationalPolytope) -> bool:
    """``lower ≤ upper`` on *region*; both concave."""

    exact = _exact_values(lower, upper)
    if isinstance(lower, PiecewiseAffineConcave):
        # upper − lower is concave on each linearity region of lower
        return all(_leq_at(lower, upper, v, exact) for v in lower.region_vertices(region))
    if isinstance(upper, PiecewiseAffineConcave):
        for piece, form in upper.regions(region):
            def gap(x: np.ndarray, form: AffineForm = form) -> float:
                return lower.evaluator(x) - float(form.evaluate_many(np.atleast_2d(x))[0])

            value, _ = _maximize_on_polytope(gap, piece)
            if value > NUMERIC_SLACK:
                return False
        return True
    _LOGGER.info("comparing two numeric roofs on sample points")
    samples = list(region.vertices) + [region.centroid()]
    samples += [tuple(Fraction(int(c), 8) for c in row) for row in lattice_points(region, 8)]
    if not all(_leq_at(lower, upper, x, exact) for x in samples):
        return False
    value, _ = _maximize_on_polytope(lambda x: lower.evaluator(x) - upper.evaluator(x), region)
    return value <= NUMERIC_SLACK


def dominates(d: ToricMetrizedRDivisor, e: ToricMetrizedRDivisor) -> bool:
    """``D̄ ≥ Ē`` for semipositive Ē, via ``Δ_E ⊆ Δ_D`` and ``ϑ_{E,v} ≤ ϑ_{D,v}`` on ``Δ_E``."""

    if not e.is_semipositive():
        raise NotSemipositiveError("the smaller divisor must be semipositive")
    if d.fan != e.fan and not (d.fan.refines(e.fan) or e.fan.refines(d.fan)):
        raise IncomparableFansError("neither fan refines the other")
    delta_d, delta_e = d.delta(), e.delta()
    if delta_e.is_empty:
        return True
    if delta_d.is_empty or not all(delta_d.contains(v) for v in delta_e.vertices):
        return False
    places = sorted(set(d.places()) | set(e.places()), key=_place_key)
    for place in places:
        upper = d.local_roof(place) if place in d.table else PiecewiseAffineConcave.constant(ZERO, delta_d)
        lower = e.local_roof(place) if place in e.table else PiecewiseAffineConcave.constant(ZERO, delta_e)
        if not _leq_on_regions(lower, upper, delta_e):
            _LOGGER.debug("domination fails at place %s", place_label(place))
            return False
    return True


# ── arithmetic on divisors ─────────────────────────────────────────────


def _over_lambda(gamma: Scalar, place: PlaceId) -> Scalar:
    if place == INFINITY or gamma == 0:
        return gamma
    ratio = rational_ratio(gamma, LogRational.log_prime(int(place)))
    if ratio is None:
        raise NotRepresentableError(f"γ_{place} / log {place} is not rational")
    return ratio


def shift(divisor: ToricMetrizedRDivisor, a: Sequence[object], gamma: Mapping[PlaceId, Scalar]) -> ToricMetrizedRDivisor:
    """``D̄ + div̂(α χ^a)`` with ``log|α|_v = γ_v``.

    ``Ψ′ = Ψ − ⟨a,·⟩``, ``Δ′ = Δ − a`` and ``ϑ′_v(x) = ϑ_v(x + a) − γ_v``.
    """

    a = tuple(Fraction(c) for c in a)
    gammas = {parse_place(k): v for k, v in gamma.items()}
    new_psi = divisor.psi.translate(a)
    places = sorted(set(divisor.places()) | set(gammas), key=_place_key)
    concave = divisor.psi.is_concave()
    new_delta = _delta_of(new_psi)
    metrics: Dict[PlaceId, MetricSpec] = {}
    for place in places:
        g = gammas.get(place, ZERO)
        metric = divisor.metric(place)
        if isinstance(metric, CanonicalMetric) and g == 0:
            continue
        if isinstance(metric, (ThetaMetric, FubiniStudyMetric)) or (concave and isinstance(metric, CanonicalMetric)):
            roof = divisor.local_roof(place).shift(a, g)
            if isinstance(roof, PiecewiseAffineConcave):
                roof = roof.with_domain(new_delta)
            else:
                roof = NumericConcave(roof.evaluator, new_delta, roof.exact, roof.sup_hint)
            metrics[place] = ThetaMetric(roof)
            continue
        offset = _over_lambda(g, place)
        if isinstance(metric, CanonicalMetric):
            function: PsiFunction = PiecewiseAffineGeneral.from_support_function(divisor.psi)
        else:
            function = metric.function
        metrics[place] = PsiMetric(_shift_psi(function, a, offset))
    return ToricMetrizedRDivisor(new_psi, tuple(metrics.items()), divisor.table.with_places(gammas))


def _shift_psi(function: PsiFunction, a: Sequence[Fraction], offset: Scalar) -> PsiFunction:
    """``u ↦ ψ(u) − ⟨a, u⟩ + offset``."""

    if isinstance(function, PiecewiseAffineGeneral):
        return function.shift(a, offset)
    if isinstance(function, PiecewiseAffineConcave):
        forms = tuple(
            AffineForm(tuple(m - x for m, x in zip(f.slope, a)), f.offset + offset) for f in function.forms
        )
        return PiecewiseAffineConcave(forms)
    base = function.evaluator
    vec = np.array([float(x) for x in a])
    c = to_float(offset)
    rec = function.recession_function
    rec = rec.shift(a, ZERO) if isinstance(rec, PiecewiseAffineGeneral) else _shift_psi(rec, a, ZERO)
    return OracleFunction(lambda u: base(u) - float(np.dot(vec, u)) + c, rec, function.concave, function.dim, spot_check=False)


def _as_general(divisor: ToricMetrizedRDivisor, place: PlaceId) -> Optional[PiecewiseAffineGeneral]:
    metric = divisor.metric(place)
    if isinstance(metric, CanonicalMetric):
        return PiecewiseAffineGeneral.from_support_function(divisor.psi)
    if isinstance(metric, PsiMetric):
        if isinstance(metric.function, PiecewiseAffineGeneral):
            return metric.function
        if isinstance(metric.function, PiecewiseAffineConcave):
            return metric.function.to_general()
    return None


def add(first: ToricMetrizedRDivisor, second: ToricMetrizedRDivisor) -> ToricMetrizedRDivisor:
    """``D̄₁ + D̄₂``: ψ's add; roofs combine by sup-convolution."""

    total_psi = first.psi + second.psi
    places = sorted(set(first.places()) | set(second.places()), key=_place_key)
    semipositive = first.psi.is_concave() and second.psi.is_concave()
    metrics: Dict[PlaceId, MetricSpec] = {}
    for place in places:
        m1, m2 = first.metric(place), second.metric(place)
        if isinstance(m1, CanonicalMetric) and isinstance(m2, CanonicalMetric):
            continue
        g1, g2 = _as_general(first, place), _as_general(second, place)
        if g1 is not None and g2 is not None:
            metrics[place] = PsiMetric(g1 + g2)
        elif semipositive:
            roof = sup_convolution(first.local_roof(place), second.local_roof(place))
            metrics[place] = ThetaMetric(roof)
        else:
            raise OraclePathUnsupportedError(f"cannot add the metrics at {place_label(place)}")
    table = first.table.with_places(second.places())
    return _with_matching_domains(total_psi, metrics, table)


def _with_matching_domains(psi: VirtualSupportFunction, metrics: Dict[PlaceId, MetricSpec], table: PlaceTable) -> ToricMetrizedRDivisor:
    delta = _delta_of(psi)
    fixed: Dict[PlaceId, MetricSpec] = {}
    for place, metric in metrics.items():
        if isinstance(metric, ThetaMetric) and isinstance(metric.roof, PiecewiseAffineConcave):
            metric = ThetaMetric(metric.roof.with_domain(delta))
        elif isinstance(metric, ThetaMetric):
            roof = metric.roof
            metric = ThetaMetric(NumericConcave(roof.evaluator, delta, roof.exact, roof.sup_hint))
        fixed[place] = metric
    return ToricMetrizedRDivisor(psi, tuple(fixed.items()), table)


def _scale_oracle(function: OracleFunction, k: Fraction) -> OracleFunction:
    base = function.evaluator
    kf = float(k)
    rec = function.recession_function
    rec = rec.scale(k) if isinstance(rec, PiecewiseAffineGeneral) else rec.scale_values(k)
    return OracleFunction(lambda u: kf * base(u), rec, function.concave, function.dim, spot_check=False)


def scale(divisor: ToricMetrizedRDivisor, factor: object) -> ToricMetrizedRDivisor:
    """``α·D̄`` for rational ``α > 0``: ψ scales, ``ϑ ↦ α ϑ(·/α)``."""

    k = Fraction(factor)
    if k <= 0:
        raise InvalidParametersError("the scale factor must be positive")
    metrics: Dict[PlaceId, MetricSpec] = {}
    for place, metric in divisor.metrics:
        if isinstance(metric, PsiMetric) and isinstance(metric.function, PiecewiseAffineGeneral):
            metrics[place] = PsiMetric(metric.function.scale(k))
        elif isinstance(metric, PsiMetric) and isinstance(metric.function, PiecewiseAffineConcave):
            metrics[place] = PsiMetric(metric.function.scale_values(k))
        elif isinstance(metric, PsiMetric):
            metrics[place] = PsiMetric(_scale_oracle(metric.function, k))
        else:
            metrics[place] = ThetaMetric(divisor.local_roof(place).dilate(k))
    return _with_matching_domains(divisor.psi.scale(k), metrics, divisor.table)


# ── orthogonality validation ───────────────────────────────────────────


@dataclass(frozen=True, slots=True)
class OrthogonalityTrial:
    lower: float
    estimate: float
    upper: float
    slack: float
    ok: bool


@dataclass(frozen=True, slots=True)
class FiniteOrthogonality:
    """``−log‖Σγ_m s_m‖_p`` by the max-formula and directly from ``ψ_p``."""

    place: PlaceId
    max_formula: Scalar
    direct: Scalar

    @property
    def ok(self) -> bool:
        return self.max_formula == self.direct


@dataclass(frozen=True, slots=True)
class OrthogonalityReport:
    sections: int
    trials: Tuple[OrthogonalityTrial, ...]
    non_archimedean: Tuple[FiniteOrthogonality, ...]

    @property
    def ok(self) -> bool:
        return all(t.ok for t in self.trials) and all(f.ok for f in self.non_archimedean)


def _grid_defaults(n: int) -> Tuple[int, int]:
    settings = get_settings()
    if n == 1:
        return settings.orthogonality_u_points, settings.orthogonality_angle_points
    return 61, 32


def _padic_valuation(value: int, prime: int) -> int:
    count = 0
    while value % prime == 0:
        value //= prime
        count += 1
    return count


def _finite_psi(divisor: ToricMetrizedRDivisor, place: PlaceId) -> Tuple[PiecewiseAffineGeneral, Scalar]:
    """``ψ_p`` as a cell complex and the factor ``λ`` with ``ϑ_p = λ·ψ_p^∨``."""

    metric = divisor.metric(place)
    if isinstance(metric, ThetaMetric) and isinstance(metric.roof, PiecewiseAffineConcave):
        return legendre_dual(metric.roof).to_general(), ONE
    general = _as_general(divisor, place)
    if general is None:
        raise InvalidParametersError(f"the metric at {place_label(place)} is not piecewise affine")
    return general, divisor.lam(place)


def _finite_supnorm(
    divisor: ToricMetrizedRDivisor, place: PlaceId, points: np.ndarray, coefficients: Sequence[int]
) -> Scalar:
    """``min_u min_m (v_p(γ_m)·log p + λ⟨m,u⟩) − λψ_p(u)`` over the cell vertices ``u`` of ``ψ_p``."""

    general, lam = _finite_psi(divisor, place)
    log_p = LogRational.log_prime(int(place))
    monomials = [
        (tuple(int(c) for c in m), log_p * _padic_valuation(g, int(place)))
        for m, g in zip(points, coefficients)
    ]
    vertices: List[Point] = []
    for cell in general.cells:
        for v in cell.vertices():
            if v not in vertices:
                vertices.append(v)
    if not vertices:
        raise InvalidParametersError(f"the cells of ψ at {place_label(place)} have no vertices")
    values = [
        scalar_min(c + lam * dot(m, u) for m, c in monomials) - lam * general(u) for u in vertices
    ]
    return scalar_min(values)


def validate_orthogonality(
    divisor: ToricMetrizedRDivisor,
    trials: int = 8,
    grid: Optional[Tuple[int, int]] = None,
    *,
    seed: int = 0,
    box: Optional[float] = None,
) -> OrthogonalityReport:
    """Check ``max‖γ_m s_m‖ ≤ ‖Σγ_m s_m‖_sup ≤ #(Δ∩M)·max‖γ_m s_m‖`` on a grid.

    The archimedean sup-norm is the maximum of
    ``|Σ γ_m e^{i⟨m,θ⟩ − ⟨m,u⟩}|·e^{ψ_∞(u)}`` over ``u ∈ [−box, box]ⁿ`` and
    angles ``θ`` (*box* defaults to ``Settings.orthogonality_box``); the grid
    error is bounded by a relative slack.  At finite places ``−log`` of the
    sup-norm of a sum is computed exactly twice: by the max-formula over
    monomials, and as a minimum over the cell vertices of ``ψ_p``.  The two
    must agree.
    """

    n = divisor.dim
    if n > 2:
        raise InvalidParametersError("orthogonality validation is limited to n ≤ 2")
    if not divisor.is_integral():
        raise InvalidParametersError("orthogonality validation needs integral defining vectors")
    delta = divisor.delta()
    if delta.is_empty:
        raise EmptyPolytopeError("Δ_D is empty")
    points = lattice_points(delta, 1)
    if len(points) == 0:
        raise EmptyPolytopeError("Δ_D has no lattice points")
    u_points, angle_points = grid or _grid_defaults(n)
    box = get_settings().orthogonality_box if box is None else box
    if box <= 0:
        raise InvalidParametersError(f"the u-grid half-width must be positive, got {box}")
    roof_inf = divisor.local_roof(INFINITY)
    thetas = np.array([to_float(roof_inf(tuple(Fraction(int(c)) for c in m))) for m in points])
    single = np.exp(-thetas)

    axis = np.linspace(-box, box, u_points)
    us = np.stack(np.meshgrid(*([axis] * n), indexing="ij"), axis=-1).reshape(-1, n)
    psi_values = np.asarray(divisor.psi_evaluator(INFINITY)(us), dtype=float)
    angle_axis = np.linspace(0.0, 2.0 * math.pi, angle_points, endpoint=False)
    angles = np.stack(np.meshgrid(*([angle_axis] * n), indexing="ij"), axis=-1).reshape(-1, n)
    phases = np.exp(1j * angles @ points.T)
    weights = np.exp(psi_values[:, None] - us @ points.T)

    reach = float(np.abs(points).sum(axis=1).max())
    angle_loss = 1.0 - math.cos(min(math.pi, math.pi * reach / angle_points))
    step = 2.0 * box / (u_points - 1)
    # log of the summand weights is 2·reach-Lipschitz in the sup norm of u
    slack = 1.0 - (1.0 - angle_loss) * math.exp(-reach * step) * (1.0 - math.exp(-box))

    rng = np.random.default_rng(seed)
    results = []
    for _ in range(trials):
        gamma = rng.normal(size=len(points)) + 1j * rng.normal(size=len(points))
        values = np.abs((weights * gamma) @ phases.T)
        estimate = float(values.max())
        lower = float((np.abs(gamma) * single).max())
        upper = len(points) * lower
        ok = lower * (1.0 - slack) <= estimate <= upper * (1.0 + NUMERIC_SLACK)
        if not ok and estimate >= lower * (1.0 - 10.0 * slack):
            raise GridTooCoarseError(
                f"estimate {estimate:.6g} misses the lower bound {lower:.6g} by less than ten grid slacks"
            )
        results.append(OrthogonalityTrial(lower, estimate, upper, slack, ok))

    finite = []
    coefficients = [int(c) for c in rng.integers(1, 1000, size=len(points))]
    for place in divisor.places():
        if place == INFINITY:
            continue
        roof_p = divisor.local_roof(place)
        log_p = LogRational.log_prime(int(place))
        values = [
            roof_p(tuple(Fraction(int(c)) for c in m)) + log_p * _padic_valuation(g, int(place))
            for m, g in zip(points, coefficients)
        ]
        direct = _finite_supnorm(divisor, place, points, coefficients)
        check = FiniteOrthogonality(place, scalar_min(values), direct)
        if not check.ok:
            _LOGGER.warning(
                "sup-norm at %s: max-formula %s, direct %s", place_label(place), check.max_formula, check.direct
            )
        finite.append(check)
    return OrthogonalityReport(len(points), tuple(results), tuple(finite))


__all__ = [
    "CanonicalMetric",
    "FiniteOrthogonality",
    "FubiniStudyMetric",
    "FubiniStudyRoof",
    "MetricSpec",
    "OrthogonalityReport",
    "OrthogonalityTrial",
    "PsiMetric",
    "RoofFunction",
    "ThetaMetric",
    "ToricMetrizedRDivisor",
    "add",
    "combine_roofs",
    "delta_polytope",
    "dominates",
    "monomial_supnorm",
    "pullback",
    "roof",
    "scale",
    "shift",
    "validate_orthogonality",
]
