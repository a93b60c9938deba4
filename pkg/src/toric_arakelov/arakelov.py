"""Volumes, heights, positivity and decompositions of toric metrized divisors.

Every operation works from the roof function.  When the global roof is
piecewise affine the results are exact (rationals or log-rationals);
otherwise they are numeric and say so through their ``provenance``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import optimize

from .adelic import INFINITY, PlaceId, ScalingWitness, find_scaling, place_label
from .config import get_settings
from .convex import ConcaveFunction, NumericConcave, PiecewiseAffineConcave, minimize_converged
from .divisor import (
    FubiniStudyMetric,
    FubiniStudyRoof,
    ThetaMetric,
    ToricMetrizedRDivisor,
    dominates,
    monomial_supnorm,
    shift,
)
from .errors import (
    BudgetExceededError,
    ConstructionError,
    InvalidParametersError,
    NotBigError,
    NotPseudoEffectiveError,
    NotSemipositiveError,
    PointNotInThetaError,
    ThetaEmptyError,
)
from .geometry import (
    Lattice,
    Point,
    RationalFan,
    RationalPolytope,
    VirtualSupportFunction,
    integrate_pa,
    lattice_points,
    lattice_volume,
    refine_by_polytope,
)
from .linalg import coordinates, primitive
from .numerics import (
    ZERO,
    LogRational,
    Scalar,
    as_rational,
    dot,
    integrate_over_simplices,
    is_rational,
    rational_ratio,
    to_float,
)

_LOGGER = logging.getLogger(__name__)

Value = Union[Scalar, float]

EXACT = "exact"
NUMERIC = "numeric"


def _factorial(k: int) -> int:
    return math.factorial(k)


def _is_float(*values: Value) -> bool:
    return any(isinstance(v, float) for v in values)


def _minus(a: Value, b: Value) -> Value:
    return to_float(a) - to_float(b) if _is_float(a, b) else a - b


def _sign(value: Value, tol: float = 0.0) -> Optional[int]:
    """Sign of *value*; None when a float lies within *tol* of zero."""

    if isinstance(value, float):
        if value > tol:
            return 1
        if value < -tol:
            return -1
        return 0 if tol == 0.0 else None
    return (value > 0) - (value < 0)


def _fubini_study_weights(divisor: ToricMetrizedRDivisor) -> Optional[Tuple[Fraction, ...]]:
    """Weights when the only non-canonical metric is Fubini–Study at ∞."""

    metrics = divisor.metric_map()
    if set(metrics) != {INFINITY}:
        return None
    metric = metrics[INFINITY]
    return metric.weights if isinstance(metric, FubiniStudyMetric) else None


# ── volumes and heights ────────────────────────────────────────────────


def geometric_volume(divisor: ToricMetrizedRDivisor) -> Fraction:
    """``vol(D) = n!·vol_M(Δ_D)``; zero for empty or lower-dimensional Δ."""

    delta = divisor.delta()
    if delta.is_empty or not delta.is_full_dimensional():
        return Fraction(0)
    return _factorial(divisor.dim) * lattice_volume(delta)


@dataclass(frozen=True, slots=True)
class ArithmeticVolumes:
    volume: Value
    chi_volume: Value
    provenance: str = EXACT
    tol: Optional[float] = None


def _integrate_numeric(f: Callable[[np.ndarray], np.ndarray], polytope: RationalPolytope, tol: float) -> float:
    simplices = [[[to_float(c) for c in v] for v in s] for s in polytope.simplices()]
    return integrate_over_simplices(f, simplices, tol)


def _clamped(roof: ConcaveFunction) -> Callable[[np.ndarray], np.ndarray]:
    def evaluate(points: np.ndarray) -> np.ndarray:
        return np.maximum(roof.evaluate_many(points), 0.0)

    return evaluate


def _integrate_roof(roof: ConcaveFunction, polytope: RationalPolytope, tol: float) -> Tuple[Value, str]:
    if polytope.is_empty or not polytope.is_full_dimensional():
        return Fraction(0), EXACT
    if isinstance(roof, PiecewiseAffineConcave):
        value = integrate_pa(polytope, roof)
        return value, NUMERIC if isinstance(value, float) else EXACT
    return _integrate_numeric(roof.evaluate_many, polytope, tol), NUMERIC


def arithmetic_volumes(divisor: ToricMetrizedRDivisor, tol: Optional[float] = None) -> ArithmeticVolumes:
    """``vol̂ = (n+1)!∫_Θ ϑ`` and ``vol̂_χ = (n+1)!∫_Δ ϑ``."""

    tol = tol or get_settings().cubature_tol
    delta = divisor.delta()
    if delta.is_empty or not delta.is_full_dimensional():
        return ArithmeticVolumes(Fraction(0), Fraction(0))
    scale = _factorial(divisor.dim + 1)
    roof = divisor.roof().global_roof

    weights = _fubini_study_weights(divisor)
    if weights is not None:
        closed = FubiniStudyRoof(weights)
        chi = closed.chi_volume()
        total = sum(weights, ZERO)
        if all(a >= 1 for a in weights):
            return ArithmeticVolumes(chi, chi)
        if total <= 1:
            return ArithmeticVolumes(Fraction(0), chi)
        volume = scale * _integrate_numeric(_clamped(roof), delta, tol / scale)
        return ArithmeticVolumes(volume, chi, NUMERIC, tol)

    if isinstance(roof, PiecewiseAffineConcave):
        chi, chi_kind = _integrate_roof(roof, delta, tol)
        region = theta_region(divisor)
        if region.polytope is not None:
            vol, vol_kind = _integrate_roof(roof, region.polytope, tol)
        else:
            vol, vol_kind = _integrate_numeric(_clamped(roof), delta, tol / scale), NUMERIC
        provenance = EXACT if chi_kind == vol_kind == EXACT else NUMERIC
        return ArithmeticVolumes(vol * scale, chi * scale, provenance, None if provenance == EXACT else tol)

    chi = _integrate_numeric(roof.evaluate_many, delta, tol / scale)
    minimum, _ = roof.minimum()
    if _sign(minimum) >= 0:
        volume = chi
    else:
        volume = _integrate_numeric(_clamped(roof), delta, tol / scale)
    return ArithmeticVolumes(scale * volume, scale * chi, NUMERIC, tol)


def _face_of(divisor: ToricMetrizedRDivisor, cone: Optional[Sequence[int]]) -> RationalPolytope:
    delta = divisor.delta()
    if not cone:
        return delta
    rays = [divisor.fan.rays[i] for i in cone]
    return delta.face(rays)


def _integrate_on_face(roof: ConcaveFunction, face: RationalPolytope, tol: float) -> Tuple[Value, str]:
    """Integral over *face* for its own lattice-normalized measure."""

    d = face.affine_dimension()
    if d == 0:
        value = roof(face.vertices[0])
        return value, NUMERIC if isinstance(value, float) else EXACT
    if isinstance(roof, PiecewiseAffineConcave):
        value = integrate_pa(face, roof)
        return value, NUMERIC if isinstance(value, float) else EXACT
    if d == face.ambient_dim:
        return _integrate_numeric(roof.evaluate_many, face, tol), NUMERIC
    basis = face.direction_lattice()
    base = face.vertices[0]
    matrix = np.array([[float(x) for x in b] for b in basis], dtype=float)
    origin = np.array([to_float(x) for x in base])
    simplices = []
    for simplex in face.simplices():
        rows = []
        for v in simplex:
            coords = coordinates(basis, [a - b for a, b in zip(v, base)])
            rows.append([to_float(c) for c in coords])
        simplices.append(rows)

    def evaluate(points: np.ndarray) -> np.ndarray:
        return roof.evaluate_many(origin + points @ matrix)

    return integrate_over_simplices(evaluate, simplices, tol), NUMERIC


@dataclass(frozen=True, slots=True)
class HeightResult:
    value: Value
    face_dimension: int
    provenance: str = EXACT


def height(
    divisor: ToricMetrizedRDivisor,
    cone: Optional[Sequence[int]] = None,
    place: Optional[PlaceId] = None,
    tol: Optional[float] = None,
) -> HeightResult:
    """Height of the orbit closure ``V(σ)``: ``(d+1)!∫_{F_σ} ϑ``.

    *cone* lists ray indices spanning ``σ``; ``None`` is the zero cone and
    gives ``h(X)``.  With *place* the local roof ``ϑ_v`` replaces ``ϑ``.
    """

    if not divisor.is_semipositive():
        raise NotSemipositiveError("heights are defined here for semipositive divisors")
    if cone:
        generators = [divisor.fan.rays[i] for i in cone]
        if divisor.fan.containing_cone(generators) is None:
            raise InvalidParametersError(f"rays {list(cone)} do not span a cone of the fan")
    tol = tol or get_settings().cubature_tol
    face = _face_of(divisor, cone)
    if face.is_empty:
        raise InvalidParametersError("the face of Δ_D is empty")
    d = face.affine_dimension()
    roof = divisor.local_roof(place) if place is not None else divisor.roof().global_roof
    weights = _fubini_study_weights(divisor)
    if not cone and weights is not None and place in (None, INFINITY):
        return HeightResult(FubiniStudyRoof(weights).chi_volume(), d)
    value, provenance = _integrate_on_face(roof, face, tol / _factorial(d + 1))
    return HeightResult(value * _factorial(d + 1), d, provenance)


# ── positivity ─────────────────────────────────────────────────────────


@dataclass(frozen=True, slots=True)
class PositivityReport:
    """The five positivity notions with a witness for each verdict.

    *uncertain* names the flags that were decided from floats within the
    numeric tolerance.
    """

    ample: bool
    nef: bool
    big: bool
    pseudo_effective: bool
    effective: bool
    witnesses: Mapping[str, str] = field(default_factory=dict)
    uncertain: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        broken = []
        if self.ample and not self.nef:
            broken.append("ample without nef")
        if self.nef and not self.pseudo_effective:
            broken.append("nef without pseudo-effective")
        if self.big and not self.pseudo_effective:
            broken.append("big without pseudo-effective")
        if self.effective and not self.pseudo_effective:
            broken.append("effective without pseudo-effective")
        if broken:
            raise ConstructionError("inconsistent positivity report: " + ", ".join(broken))

    def flags(self) -> Dict[str, bool]:
        return {
            "ample": self.ample,
            "nef": self.nef,
            "big": self.big,
            "pseudo_effective": self.pseudo_effective,
            "effective": self.effective,
        }


_FLAGS = ("ample", "nef", "big", "pseudo_effective", "effective")


def _show(value: Value) -> str:
    return f"{value:.12g}" if isinstance(value, float) else str(value)


def _show_point(point: Sequence[Scalar]) -> str:
    return "(" + ", ".join(_show(x) for x in point) + ")"


def _roof_extremes(roof: ConcaveFunction) -> Tuple[Tuple[Value, Point], Tuple[Value, Point]]:
    return roof.minimum(), roof.maximum()


def classify(divisor: ToricMetrizedRDivisor) -> PositivityReport:
    """Decide ample, nef, big, pseudo-effective and effective from the roof."""

    delta = divisor.delta()
    if delta.is_empty:
        witness = "Δ_D is empty"
        return PositivityReport(False, False, False, False, False, {k: witness for k in _FLAGS})
    tol = get_settings().oracle_tol ** 0.5
    witnesses: Dict[str, str] = {}
    uncertain: List[str] = []

    concave = divisor.psi.is_concave()
    strict = divisor.psi.is_strictly_concave()
    semipositive = divisor.is_semipositive()
    roof = divisor.roof().global_roof
    (low, low_at), (high, high_at) = _roof_extremes(roof)
    low_sign, high_sign = _sign(low, tol), _sign(high, tol)
    if low_sign is None:
        uncertain += ["ample", "nef"]
        low_sign = 0
    if high_sign is None:
        uncertain += ["big", "pseudo_effective"]
        high_sign = 0

    if not concave:
        violation = divisor.psi.concavity_violation()
        witnesses["nef"] = f"Ψ_D is not concave across cones {violation[:2]}" if violation else "Ψ_D is not concave"
    elif not semipositive:
        witnesses["nef"] = "some ψ_v is not concave"
    else:
        witnesses["nef"] = f"min ϑ = {_show(low)} at {_show_point(low_at)}"
    nef = concave and semipositive and low_sign >= 0

    if not strict:
        witnesses["ample"] = "Ψ_D is not strictly concave on the fan"
    else:
        witnesses["ample"] = witnesses["nef"]
    ample = strict and semipositive and low_sign > 0

    full = delta.is_full_dimensional()
    witnesses["big"] = (
        f"max ϑ = {_show(high)} at {_show_point(high_at)}" if full else f"dim Δ_D = {delta.affine_dimension()}"
    )
    big = full and high_sign > 0
    witnesses["pseudo_effective"] = f"max ϑ = {_show(high)} at {_show_point(high_at)}"
    pseudo_effective = high_sign >= 0

    origin = tuple(ZERO for _ in range(divisor.dim))
    effective = delta.contains(origin)
    if not effective:
        witnesses["effective"] = "0 is not in Δ_D"
    else:
        witnesses["effective"] = "ϑ_v(0) ≥ 0 at every place"
        for place in divisor.places():
            value = divisor.local_roof(place)(origin)
            s = _sign(value, tol)
            if s is None:
                uncertain.append("effective")
                s = 0
            if s < 0:
                effective = False
                witnesses["effective"] = f"ϑ_{place_label(place)}(0) = {_show(value)} < 0"
                break
    return PositivityReport(ample, nef, big, pseudo_effective, effective, witnesses, tuple(dict.fromkeys(uncertain)))


# ── the Θ-region ───────────────────────────────────────────────────────

YES = "yes"
NO = "no"
UNKNOWN = "unknown"


@dataclass(frozen=True, slots=True)
class ThetaRegion:
    """``Θ = {x ∈ Δ_D : ϑ(x) ≥ 0}``.

    *polytope* is set whenever Θ is known as a polytope (exactly, or with
    float-derived offsets when *provenance* is numeric).  *contains* tests
    membership of float points on every path.
    """

    polytope: Optional[RationalPolytope]
    quasi_rational: str
    contains: Callable[[np.ndarray], np.ndarray] = field(compare=False, repr=False)
    provenance: str = EXACT

    @property
    def is_empty(self) -> bool:
        return self.polytope is not None and self.polytope.is_empty


def _rational_direction(slope: Sequence[Scalar]) -> Optional[Tuple[Tuple[int, ...], Scalar]]:
    """``(r, λ)`` with ``slope = λ·r`` and ``r`` primitive, if the direction is rational."""

    pivot = next((k for k, x in enumerate(slope) if x != 0), None)
    if pivot is None:
        return None
    ratios = []
    for x in slope:
        ratio = rational_ratio(x, slope[pivot])
        if ratio is None:
            return None
        ratios.append(ratio)
    r = primitive(ratios)
    return r, slope[pivot] * Fraction(1, r[pivot])


def _offset_over(c: Scalar, lam: Scalar) -> Tuple[Scalar, bool]:
    """``c/λ`` exactly when representable, else a rational approximation."""

    if is_rational(lam):
        return c * (1 / Fraction(lam)), True
    ratio = rational_ratio(c, lam)
    if ratio is not None:
        return ratio, True
    return Fraction(to_float(c) / to_float(lam)).limit_denominator(10**12), False


def _membership(divisor: ToricMetrizedRDivisor, roof: ConcaveFunction) -> Callable[[np.ndarray], np.ndarray]:
    delta = divisor.delta()
    rows = np.array([[float(x) for x in u] for u, _ in delta.halfspaces], dtype=float)
    bounds = np.array([to_float(g) for _, g in delta.halfspaces])

    def contains(points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        inside = np.all(points @ rows.T >= bounds - 1e-12, axis=1)
        values = np.full(len(points), -np.inf)
        if inside.any():
            values[inside] = roof.evaluate_many(points[inside])
        return inside & (values >= 0.0)

    return contains


def _exact_theta(divisor: ToricMetrizedRDivisor, roof: PiecewiseAffineConcave) -> ThetaRegion:
    delta = divisor.delta()
    contains = _membership(divisor, roof)
    halfspaces = []
    irrational = []
    exact = True
    for form in roof.forms:
        direction = _rational_direction(form.slope)
        if direction is None:
            if all(x == 0 for x in form.slope):
                if form.offset < 0:
                    return ThetaRegion(RationalPolytope.empty(divisor.dim), YES, contains)
                continue
            irrational.append(form)
            continue
        r, lam = direction
        bound, ok = _offset_over(-form.offset, lam)
        exact = exact and ok
        # ⟨λr, x⟩ + c ≥ 0
        halfspaces.append((r, bound) if lam > 0 else (tuple(-x for x in r), -bound))
    polytope = delta.intersect(halfspaces)
    provenance = EXACT if exact else NUMERIC
    if polytope.is_empty:
        return ThetaRegion(polytope, YES, contains, provenance)
    cutting = [f for f in irrational if any(f.evaluate(v) < 0 for v in polytope.vertices)]
    if cutting:
        _LOGGER.info("Θ has %s facet(s) with irrational normal direction", len(cutting))
        return ThetaRegion(None, NO, contains, provenance)
    return ThetaRegion(polytope, YES, contains, provenance)


def _boundary_distance(roof: ConcaveFunction, delta: RationalPolytope, centre: np.ndarray, direction: np.ndarray) -> Tuple[float, bool]:
    """Distance from *centre* to ``∂Θ`` along *direction* and whether the exit is through ``∂Δ``."""

    exit_t = math.inf
    for u, g in delta.halfspaces:
        rate = float(np.dot([float(x) for x in u], direction))
        if rate < 0:
            exit_t = min(exit_t, (to_float(g) - float(np.dot([float(x) for x in u], centre))) / rate)

    def value(t: float) -> float:
        return float(roof.evaluator(centre + t * direction))

    edge = exit_t * (1 - 1e-12)
    if value(edge) >= 0:
        return exit_t, True
    return optimize.brentq(value, 0.0, edge, xtol=1e-13), False


def _is_curved(roof: NumericConcave, delta: RationalPolytope, centre: np.ndarray) -> Optional[bool]:
    """Three nearby boundary points of Θ; None when they all lie on ``∂Δ``."""

    rng = np.random.default_rng(1)
    n = delta.ambient_dim
    for _ in range(8):
        basis = np.linalg.qr(rng.normal(size=(n, 2)))[0]
        base = rng.uniform(0, 2 * math.pi)
        points = []
        for angle in (base - 0.05, base, base + 0.05):
            direction = basis @ np.array([math.cos(angle), math.sin(angle)])
            t, on_delta = _boundary_distance(roof, delta, centre, direction)
            if on_delta:
                break
            points.append(centre + t * direction)
        if len(points) < 3:
            continue
        first, second = points[1] - points[0], points[2] - points[0]
        scale = float(np.dot(first, first) * np.dot(second, second))
        area = math.sqrt(max(scale - float(np.dot(first, second)) ** 2, 0.0))
        return area > 1e-6 * math.sqrt(max(scale, 1e-300))
    return None


def _numeric_theta(divisor: ToricMetrizedRDivisor, roof: NumericConcave) -> ThetaRegion:
    delta = divisor.delta()
    contains = _membership(divisor, roof)
    minimum, _ = roof.minimum()
    if _sign(minimum) >= 0:
        return ThetaRegion(delta, YES, contains, EXACT if not isinstance(minimum, float) else NUMERIC)
    top, top_at = roof.maximum()
    if top_at is not None and not isinstance(top, float):
        if top < 0:
            return ThetaRegion(RationalPolytope.empty(divisor.dim), YES, contains)
        if top == 0 and all(is_rational(x) for x in top_at):
            return ThetaRegion(RationalPolytope.from_vertices([top_at]), YES, contains)
    elif to_float(top) < 0:
        return ThetaRegion(RationalPolytope.empty(divisor.dim), YES, contains, NUMERIC)
    centre = np.array([to_float(x) for x in top_at])
    if divisor.dim == 1:
        ends = []
        for sign, vertex in zip((-1.0, 1.0), (delta.vertices[0], delta.vertices[-1])):
            t, on_delta = _boundary_distance(roof, delta, centre, np.array([sign]))
            if on_delta:
                ends.append(vertex[0])
            else:
                ends.append(Fraction(float(centre[0] + sign * t)).limit_denominator(10**12))
        return ThetaRegion(RationalPolytope.box([ends[0]], [ends[1]]), YES, contains, NUMERIC)
    curved = _is_curved(roof, delta, centre)
    return ThetaRegion(None, NO if curved else UNKNOWN, contains, NUMERIC)


def theta_region(divisor: ToricMetrizedRDivisor) -> ThetaRegion:
    delta = divisor.delta()
    if delta.is_empty:
        raise ThetaEmptyError("Δ_D is empty")
    roof = divisor.roof().global_roof
    if isinstance(roof, PiecewiseAffineConcave):
        return _exact_theta(divisor, roof)
    return _numeric_theta(divisor, roof)


# ── the lattice-sum oracle ─────────────────────────────────────────────


@dataclass(frozen=True, slots=True)
class OracleEstimate:
    ell: int
    volume: float
    chi_volume: float
    points: int


def lattice_sum_oracle(divisor: ToricMetrizedRDivisor, ell: int) -> OracleEstimate:
    """``(n+1)!·ℓ^{−n}·Σ_{m ∈ ℓΔ∩M} max(0, ϑ(m/ℓ))`` and the unclamped sum."""

    if ell < 1:
        raise InvalidParametersError("ℓ must be a positive integer")
    delta = divisor.delta()
    if delta.is_empty:
        return OracleEstimate(ell, 0.0, 0.0, 0)
    n = divisor.dim
    points = lattice_points(delta, ell)
    roof = divisor.roof().global_roof
    values = np.asarray(roof.evaluate_many(points.astype(float) / ell), dtype=float)
    factor = _factorial(n + 1) / float(ell) ** n
    volume = factor * math.fsum(np.maximum(values, 0.0))
    chi = factor * math.fsum(values)
    return OracleEstimate(ell, volume, chi, len(points))


@dataclass(frozen=True, slots=True)
class ConvergenceRow:
    ell: int
    estimate: float
    reference: float
    gap: float


def compare_oracle(divisor: ToricMetrizedRDivisor, ells: Sequence[int], tol: Optional[float] = None) -> List[ConvergenceRow]:
    """Oracle estimates of ``vol̂`` against :func:`arithmetic_volumes`."""

    reference = to_float(arithmetic_volumes(divisor, tol).volume)
    rows = []
    for ell in ells:
        estimate = lattice_sum_oracle(divisor, ell).volume
        rows.append(ConvergenceRow(ell, estimate, reference, abs(estimate - reference)))
    return rows


# ── decompositions ─────────────────────────────────────────────────────


@dataclass(frozen=True, slots=True)
class DivisorDifference:
    """``Ē = positive − negative``, kept as the pair of divisors."""

    positive: ToricMetrizedRDivisor
    negative: ToricMetrizedRDivisor

    @property
    def psi(self) -> VirtualSupportFunction:
        return self.positive.psi - self.negative.psi

    def is_zero(self) -> bool:
        return self.positive == self.negative

    def is_effective(self) -> bool:
        """``Ē ≥ 0``, decided as ``positive ≥ negative``."""

        return self.is_zero() or dominates(self.positive, self.negative)


def _restrict(roof: ConcaveFunction, polytope: RationalPolytope) -> ConcaveFunction:
    if isinstance(roof, PiecewiseAffineConcave):
        return roof.with_domain(polytope)
    hint = roof.sup_hint
    if hint is not None and not polytope.contains(hint[1]):
        hint = None
    return NumericConcave(roof.evaluator, polytope, roof.exact, hint)


def _restricted_divisor(divisor: ToricMetrizedRDivisor, fan: RationalFan, polytope: RationalPolytope) -> ToricMetrizedRDivisor:
    """Theta-mode divisor on *fan* with ``Δ = polytope`` and roofs ``ϑ_v|_polytope``."""

    psi = VirtualSupportFunction.of_polytope(fan, polytope)
    metrics = {place: ThetaMetric(_restrict(divisor.local_roof(place), polytope)) for place, _ in divisor.metrics}
    return ToricMetrizedRDivisor(psi, tuple(metrics.items()), divisor.table)


def _same_value(a: Value, b: Value) -> bool:
    if isinstance(a, float) or isinstance(b, float):
        return math.isclose(to_float(a), to_float(b), rel_tol=1e-6, abs_tol=1e-9)
    return a == b


@dataclass(frozen=True, slots=True)
class ZariskiDecomposition:
    """``φ*D̄ = P̄ + Ē`` on the refined fan, with its verification flags."""

    fan: RationalFan
    nef_part: ToricMetrizedRDivisor
    effective_part: DivisorDifference
    theta: ThetaRegion
    volume: Value
    nef_volume: Value
    nef_verified: bool
    effective_verified: bool
    volume_verified: bool
    strong: bool = True

    @property
    def verified(self) -> bool:
        return self.nef_verified and self.effective_verified and self.volume_verified


@dataclass(frozen=True, slots=True)
class ZariskiRefusal:
    reason: str
    theta: ThetaRegion


def _best_point(divisor: ToricMetrizedRDivisor) -> Point:
    _, point = divisor.roof().global_roof.maximum()
    return tuple(Fraction(x) if is_rational(x) else Fraction(float(x)).limit_denominator(10**9) for x in point)


def _point_decomposition(divisor: ToricMetrizedRDivisor, region: ThetaRegion) -> ZariskiDecomposition:
    """Weak decomposition with the nef part concentrated at a single point of Θ."""

    a = _best_point(divisor)
    point = RationalPolytope.from_vertices([a])
    metrics = {}
    for place, _ in divisor.metrics:
        value = divisor.local_roof(place)(a)
        value = as_rational(value) if isinstance(value, float) else value
        metrics[place] = ThetaMetric(PiecewiseAffineConcave.constant(value, point))
    nef = ToricMetrizedRDivisor(VirtualSupportFunction.linear(divisor.fan, a), tuple(metrics.items()), divisor.table)
    difference = DivisorDifference(divisor, nef)
    _LOGGER.info("Θ is not a polytope; returning the decomposition concentrated at %s", _show_point(a))
    return ZariskiDecomposition(
        divisor.fan,
        nef,
        difference,
        region,
        Fraction(0),
        Fraction(0),
        classify(nef).nef,
        difference.is_effective(),
        True,
        strong=False,
    )


def zariski(divisor: ToricMetrizedRDivisor) -> Union[ZariskiDecomposition, ZariskiRefusal]:
    """Toric Zariski decomposition through the Θ-region.

    ``Σ′`` refines the fan by the normal fan of Θ, ``P̄`` has polytope Θ and
    roofs ``ϑ_v|_Θ``, and ``Ē = φ*D̄ − P̄``.
    """

    report = classify(divisor)
    if not report.pseudo_effective:
        raise NotPseudoEffectiveError("the divisor is not pseudo-effective")
    region = theta_region(divisor)
    if report.nef:
        volume = arithmetic_volumes(divisor).volume
        return ZariskiDecomposition(
            divisor.fan, divisor, DivisorDifference(divisor, divisor), region, volume, volume, True, True, True
        )
    if region.polytope is None:
        if report.big:
            return ZariskiRefusal(
                "Θ is not a quasi-rational polytope, so no toric Zariski decomposition exists", region
            )
        return _point_decomposition(divisor, region)
    theta = region.polytope
    fan = refine_by_polytope(divisor.fan, theta)
    nef = _restricted_divisor(divisor, fan, theta)
    difference = DivisorDifference(divisor.pullback(fan), nef)
    volume = arithmetic_volumes(divisor).volume
    nef_volume = arithmetic_volumes(nef).volume
    return ZariskiDecomposition(
        fan,
        nef,
        difference,
        region,
        volume,
        nef_volume,
        classify(nef).nef,
        difference.is_effective(),
        not report.big or _same_value(volume, nef_volume),
        strong=True,
    )


@dataclass(frozen=True, slots=True)
class FujitaApproximation:
    fan: RationalFan
    ample_part: ToricMetrizedRDivisor
    effective_part: DivisorDifference
    volume: Value
    ample_volume: Value
    shrink: Fraction
    ample_verified: bool
    effective_verified: bool


def _inscribed_polytope(divisor: ToricMetrizedRDivisor, region: ThetaRegion) -> RationalPolytope:
    """A rational polytope inside Θ spanned by boundary points pulled slightly inwards."""

    roof = divisor.roof().global_roof
    delta = divisor.delta()
    centre = np.array([to_float(x) for x in _best_point(divisor)])
    n = divisor.dim
    if n == 2:
        angles = np.linspace(0.0, 2.0 * math.pi, 32, endpoint=False)
        directions = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    else:
        directions = np.random.default_rng(0).normal(size=(16 * n * n, n))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    points = []
    for direction in directions:
        t, _ = _boundary_distance(roof, delta, centre, direction)
        candidate = tuple(Fraction(float(c)).limit_denominator(10**9) for c in centre + 0.999 * t * direction)
        if region.contains(np.array([[float(c) for c in candidate]]))[0] and delta.contains(candidate):
            points.append(candidate)
    _LOGGER.info("inscribed %s boundary points of Θ", len(points))
    return RationalPolytope.from_vertices(points)


def _margin(polytope: RationalPolytope, point: Point) -> float:
    """Euclidean distance from *point* to the boundary of *polytope*."""

    return min(
        (to_float(dot(u, point)) - to_float(g)) / math.sqrt(sum(x * x for x in u)) for u, g in polytope.halfspaces
    )


def _diameter(polytope: RationalPolytope) -> float:
    coords = np.array([[to_float(x) for x in v] for v in polytope.vertices])
    return float(max(np.linalg.norm(a - b) for a in coords for b in coords))


def fujita(divisor: ToricMetrizedRDivisor, eps: object, tol: Optional[float] = None) -> FujitaApproximation:
    """Ample ``Ā`` on a refinement with ``vol̂(Ā) ≥ vol̂(D̄) − ε``.

    ``Δ′ = p* + (1−t)(Q − p*) + δ(Δ − c_Δ)`` for an inner polytope ``Q ⊆ Θ``
    and its centroid ``p*``; ``t`` is halved until the volume deficit is at
    most ε.
    """

    epsilon = as_rational(eps)
    if epsilon <= 0:
        raise InvalidParametersError("ε must be positive")
    report = classify(divisor)
    if not report.big:
        raise NotBigError("Fujita approximation needs a big divisor")
    settings = get_settings()
    region = theta_region(divisor)
    inner = region.polytope
    if inner is None or not inner.is_full_dimensional():
        inner = _inscribed_polytope(divisor, region)
    delta = divisor.delta()
    target = arithmetic_volumes(divisor, tol).volume
    centre = inner.centroid()
    widen = set(inner.vertices) != set(delta.vertices)
    reach = _margin(inner, centre) / (2.0 * _diameter(delta))
    delta_centre = delta.centroid()
    base = delta.translate(tuple(-x for x in delta_centre))
    t = Fraction(1, 2)
    for _ in range(settings.fujita_max_iterations):
        polytope = inner.shrink_towards(centre, 1 - t)
        if widen:
            delta_scale = Fraction(float(t) * reach).limit_denominator(10**9) * Fraction(9, 10)
            if delta_scale > 0:
                polytope = polytope.minkowski_sum(base.scale(delta_scale))
        fan = refine_by_polytope(divisor.fan, polytope)
        ample = _restricted_divisor(divisor, fan, polytope)
        volume = arithmetic_volumes(ample, tol).volume
        deficit = _minus(target, volume)
        if deficit <= (float(epsilon) if isinstance(deficit, float) else epsilon):
            difference = DivisorDifference(divisor.pullback(fan), ample)
            _LOGGER.debug("Fujita shrink t = %s gives volume %s", t, _show(volume))
            return FujitaApproximation(
                fan, ample, difference, target, volume, t, classify(ample).ample, difference.is_effective()
            )
        t /= 2
    raise BudgetExceededError(f"no shrink factor within {settings.fujita_max_iterations} halvings")


# ── Dirichlet certificates, multiplicities and small sections ──────────


@dataclass(frozen=True, slots=True)
class DirichletCertificate:
    """``D̄ + div̂(α χ^a) ≥ 0`` with ``α = Π_p p^{β_p}`` and ``log|α|_v = γ_v``."""

    point: Point
    gammas: Mapping[PlaceId, Value]
    betas: Mapping[int, Value]
    shifted: ToricMetrizedRDivisor
    verified: bool


def _beta(gamma: Value, prime: int) -> Value:
    if isinstance(gamma, float):
        return -gamma / math.log(prime)
    ratio = rational_ratio(gamma, LogRational.log_prime(prime))
    return -ratio if ratio is not None else -to_float(gamma) / math.log(prime)


def dirichlet_certificate(divisor: ToricMetrizedRDivisor, point: Sequence[object]) -> DirichletCertificate:
    a = tuple(as_rational(x) for x in point)
    if not divisor.delta().contains(a):
        raise PointNotInThetaError(f"{_show_point(a)} is outside Δ_D")
    value = divisor.roof()(a)
    if _sign(value) < 0:
        raise PointNotInThetaError(f"ϑ{_show_point(a)} = {_show(value)} < 0")
    gammas: Dict[PlaceId, Value] = {}
    total: Value = ZERO
    for place in divisor.places():
        if place == INFINITY:
            continue
        gamma = divisor.local_roof(place)(a)
        gammas[place] = gamma
        total = _minus(total, -gamma) if _is_float(total, gamma) else total + gamma
    gammas[INFINITY] = -total
    betas = {int(p): _beta(g, int(p)) for p, g in gammas.items() if p != INFINITY}
    shifted = shift(divisor, a, gammas)
    verified = classify(shifted).effective
    return DirichletCertificate(a, gammas, betas, shifted, verified)


@dataclass(frozen=True, slots=True)
class MultiplicityResult:
    value: Value
    provenance: str = EXACT


def arithmetic_multiplicity(divisor: ToricMetrizedRDivisor, ray: Sequence[object]) -> MultiplicityResult:
    """``μ(ν_u) = Ψ_Θ(u) − Ψ_D(u)`` for a primitive ``u ∈ N``."""

    u = tuple(int(x) for x in ray)
    if len(u) != divisor.dim or not Lattice(divisor.dim).is_primitive(u):
        raise InvalidParametersError(f"{u} is not a primitive vector of N")
    region = theta_region(divisor)
    if region.is_empty:
        raise ThetaEmptyError("Θ is empty")
    psi_d = divisor.psi(u)
    if region.polytope is not None:
        return MultiplicityResult(region.polytope.support(u) - psi_d, region.provenance)

    roof = divisor.roof().global_roof
    delta = divisor.delta()
    direction = np.array(u, dtype=float)
    rows = np.array([[float(x) for x in h] for h, _ in delta.halfspaces], dtype=float)
    bounds = np.array([to_float(g) for _, g in delta.halfspaces])
    start = np.array([to_float(x) for x in _best_point(divisor)])
    settings = get_settings()
    constraints = [
        {"type": "ineq", "fun": lambda x: rows @ x - bounds},
        {"type": "ineq", "fun": lambda x: np.array([roof.evaluator(x)])},
    ]
    options = {"ftol": settings.oracle_tol, "maxiter": settings.optimizer_max_iterations}
    result = minimize_converged(
        lambda x0: optimize.minimize(
            lambda x: float(direction @ x), x0, method="SLSQP", constraints=constraints, options=options
        ),
        start,
        "SLSQP over Θ",
    )
    return MultiplicityResult(float(result.fun) - to_float(psi_d), NUMERIC)


@dataclass(frozen=True, slots=True)
class SmallSection:
    """``α·s_m^{⊗e}`` is small everywhere and strictly small at ∞."""

    m: Tuple[int, ...]
    ell: int
    witness: ScalingWitness

    @property
    def power(self) -> int:
        return self.witness.ell

    @property
    def alpha(self) -> Fraction:
        return self.witness.alpha


def small_section(divisor: ToricMetrizedRDivisor, m: Sequence[object], ell: int) -> SmallSection:
    """Scale a monomial with ``ϑ(m/ℓ) > 0`` into a strictly small section."""

    if ell < 1:
        raise InvalidParametersError("ℓ must be a positive integer")
    point = tuple(Fraction(int(c), ell) for c in m)
    if not divisor.delta().contains(point) or _sign(divisor.roof()(point)) <= 0:
        raise PointNotInThetaError(f"ϑ is not positive at {_show_point(point)}")
    log_gamma = {place: -monomial_supnorm(divisor, m, ell, place) for place in divisor.places()}
    witness = find_scaling(log_gamma, strict_places=(INFINITY,))
    return SmallSection(tuple(int(c) for c in m), ell, witness)


__all__ = [
    "ArithmeticVolumes",
    "ConvergenceRow",
    "DirichletCertificate",
    "DivisorDifference",
    "FujitaApproximation",
    "HeightResult",
    "MultiplicityResult",
    "OracleEstimate",
    "PositivityReport",
    "SmallSection",
    "ThetaRegion",
    "ZariskiDecomposition",
    "ZariskiRefusal",
    "arithmetic_multiplicity",
    "arithmetic_volumes",
    "classify",
    "compare_oracle",
    "dirichlet_certificate",
    "fujita",
    "geometric_volume",
    "height",
    "lattice_sum_oracle",
    "small_section",
    "theta_region",
    "zariski",
]
