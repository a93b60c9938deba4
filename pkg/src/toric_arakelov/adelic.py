"""Places of ℚ, 𝔐_ℚ-divisors, small-element counts and the scaling lemma.

Place identifiers are ``"inf"`` for the archimedean place and prime
integers for the non-archimedean ones.  All quantities that the counting
lemmas compare are kept in the log domain as exact log-rationals, except
the logarithm of a count too long to factor, which is a float.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, Mapping, Optional, Tuple, Union

from sympy import factorint, isprime

from .errors import ConstructionError, ProductNotStrictlyLessError, UnsupportedFieldError
from .numerics import (
    ONE,
    ZERO,
    LogRational,
    Scalar,
    as_rational,
    floor_scalar,
    to_float,
)

_LOGGER = logging.getLogger(__name__)

INFINITY = "inf"
PlaceId = Union[str, int]

# Bound for |l̂(c) − max(0, deĝ(c))| over ℚ: 2⌊C⌋+1 lies in [C, 3C] for C ≥ 1.
KAPPA = LogRational.log_prime(3)

# Counts longer than this get a float logarithm instead of a factorisation.
EXACT_COUNT_BITS = 64


def parse_place(value: object) -> PlaceId:
    """Normalise ``"inf"``/``"∞"``/a prime (int or string) to a place id."""

    if isinstance(value, str):
        text = value.strip().lower()
        if text in {"inf", "∞", "infinity"}:
            return INFINITY
        if not text.isdigit():
            raise ConstructionError(f"unknown place {value!r}")
        value = int(text)
    if isinstance(value, int) and not isinstance(value, bool) and isprime(value):
        return value
    raise ConstructionError(f"place {value!r} is neither 'inf' nor a prime")


def place_label(place: PlaceId) -> str:
    return "∞" if place == INFINITY else str(place)


@dataclass(frozen=True, slots=True)
class Place:
    id: PlaceId
    weight: Fraction = ONE

    @property
    def is_archimedean(self) -> bool:
        return self.id == INFINITY

    @property
    def lam(self) -> Scalar:
        """``λ_v``: 1 at ∞ and ``log p`` at ``p``."""

        return ONE if self.is_archimedean else LogRational.log_prime(int(self.id))


@dataclass(frozen=True, slots=True)
class PlaceTable:
    """The places carrying data, always including ∞.

    ``field`` names the global field; only ``"Q"`` is supported by the
    counting operations.
    """

    places: Tuple[Place, ...]
    degree: Fraction = ONE
    field_name: str = "Q"

    def __post_init__(self) -> None:
        ids = [p.id for p in self.places]
        if INFINITY not in ids:
            raise ConstructionError("a place table must contain the archimedean place")
        if len(set(ids)) != len(ids):
            raise ConstructionError("duplicate places")
        if self.degree <= 0 or any(p.weight <= 0 for p in self.places):
            raise ConstructionError("weights and degree must be positive")
        if self.field_name == "Q" and (self.degree != 1 or any(p.weight != 1 for p in self.places)):
            raise ConstructionError("over Q every place has weight 1 and the degree is 1")

    @classmethod
    def rationals(cls, primes: Iterable[int] = ()) -> "PlaceTable":
        ordered = sorted(set(parse_place(p) for p in primes))
        return cls((Place(INFINITY),) + tuple(Place(p) for p in ordered))

    def __iter__(self):
        return iter(self.places)

    def __contains__(self, place: object) -> bool:
        return any(p.id == place for p in self.places)

    def get(self, place: PlaceId) -> Place:
        for p in self.places:
            if p.id == place:
                return p
        raise KeyError(place)

    def with_places(self, places: Iterable[PlaceId]) -> "PlaceTable":
        extra = [p for p in places if p not in self]
        if not extra:
            return self
        primes = [p.id for p in self.places if not p.is_archimedean] + list(extra)
        return PlaceTable.rationals(primes)

    def require_rationals(self) -> None:
        if self.field_name != "Q":
            raise UnsupportedFieldError(f"operation is implemented over Q only, not {self.field_name}")


def _power_of(prime: int, value: Fraction) -> int:
    """Return ``j`` with ``value = prime^j``."""

    if value <= 0:
        raise ConstructionError(f"c_{prime} must be positive")
    num = factorint(value.numerator)
    den = factorint(value.denominator)
    if set(num) - {prime} or set(den) - {prime}:
        raise ConstructionError(f"c_{prime} = {value} is not a power of {prime}")
    return num.get(prime, 0) - den.get(prime, 0)


@dataclass(frozen=True, slots=True)
class MKDivisor:
    """An 𝔐_ℚ-divisor ``c``: ``c_∞ > 0`` and ``c_p = p^{−k_p}``, 1 elsewhere."""

    values: Mapping[PlaceId, Fraction]
    table: PlaceTable = field(default_factory=PlaceTable.rationals)

    def __post_init__(self) -> None:
        clean: Dict[PlaceId, Fraction] = {}
        for key, raw in self.values.items():
            place = parse_place(key)
            value = as_rational(raw)
            if value <= 0:
                raise ConstructionError(f"c_{place_label(place)} must be positive")
            if place != INFINITY:
                _power_of(int(place), value)
            clean[place] = value
        object.__setattr__(self, "values", clean)
        object.__setattr__(self, "table", self.table.with_places(clean))

    def __getitem__(self, place: PlaceId) -> Fraction:
        return self.values.get(place, ONE)

    def exponent(self, prime: int) -> int:
        """``k_p`` with ``c_p = p^{−k_p}``."""

        return -_power_of(prime, self[prime])

    def product(self) -> Fraction:
        """``C = Π_v c_v``."""

        total = ONE
        for value in self.values.values():
            total *= value
        return total

    def __mul__(self, other: "MKDivisor") -> "MKDivisor":
        keys = set(self.values) | set(other.values)
        return MKDivisor({k: self[k] * other[k] for k in keys})


@dataclass(frozen=True, slots=True)
class LhatResult:
    count: int
    value: Union[Scalar, float]


@dataclass(frozen=True, slots=True)
class GapCheck:
    gap: Union[Scalar, float]
    bound: Scalar
    ok: bool


def lhat(c: MKDivisor) -> LhatResult:
    """``l̂(c) = log #{γ ∈ ℚ : |γ|_v ≤ c_v ∀v}``; the count is ``2⌊C⌋ + 1``."""

    c.table.require_rationals()
    count = 2 * floor_scalar(c.product()) + 1
    if count.bit_length() > EXACT_COUNT_BITS:
        return LhatResult(count, math.log(count))
    return LhatResult(count, LogRational.log_of(count))


def deg_hat(c: MKDivisor) -> Scalar:
    """``deĝ(c) = Σ_v d_K n_v log c_v``, exactly."""

    total: Scalar = ZERO
    for place in c.table:
        value = c[place.id]
        if value != 1:
            total = total + LogRational.log_of(value) * (place.weight * c.table.degree)
    return total


def gap_check(c: MKDivisor) -> GapCheck:
    """``|l̂(c) − max(0, deĝ(c))| ≤ κ`` with ``κ = log 3``.

    Over ℚ ``e^{deĝ(c)} = C``, so the bound is the rational test
    ``max(1, C)/3 ≤ 2⌊C⌋+1 ≤ 3·max(1, C)``.
    """

    result = lhat(c)
    size = c.product()
    scale = size if size > 1 else ONE
    ok = scale <= 3 * result.count and result.count <= 3 * scale
    degree = deg_hat(c)
    top = degree if degree > 0 else ZERO
    if isinstance(result.value, float):
        gap: Union[Scalar, float] = abs(result.value - to_float(top))
    else:
        gap = result.value - top
        if gap < 0:
            gap = -gap
    return GapCheck(gap, KAPPA, ok)


# ── scaling lemma ──────────────────────────────────────────────────────


@dataclass(frozen=True, slots=True)
class ScalingWitness:
    """``α = Π p^{e_p}`` and the per-place values ``log(|α|_v γ_v^ℓ)``."""

    ell: int
    ell0: int
    exponents: Mapping[int, int]
    margins: Mapping[PlaceId, Scalar]
    ok: bool

    @property
    def alpha(self) -> Fraction:
        value = ONE
        for p, e in self.exponents.items():
            value *= Fraction(p) ** e
        return value


def _log_abs_alpha(place: PlaceId, exponents: Mapping[int, int]) -> Scalar:
    if place == INFINITY:
        total: Scalar = ZERO
        for p, e in exponents.items():
            total = total + LogRational.log_prime(p) * e
        return total
    return LogRational.log_prime(int(place)) * (-exponents.get(int(place), 0))


def _smallest_exponent(prime: int, target: Scalar, strict: bool) -> int:
    """Least ``e`` with ``−e·log p + target ≤ 0`` (``< 0`` if *strict*)."""

    log_p = LogRational.log_prime(prime)
    e = int(float(target) / float(log_p)) - 2
    while True:
        value = target - log_p * e
        if value < 0 or (not strict and value == 0):
            return e
        e += 1


def _threshold(budget: Scalar, rate: Scalar) -> int:
    """Least ``ℓ ≥ 1`` with ``ℓ·rate > budget`` (certified)."""

    ell = max(1, int(float(budget) / float(rate)) - 1)
    while ell > 1 and rate * (ell - 1) > budget:
        ell -= 1
    while not rate * ell > budget:
        ell += 1
    return ell


def find_scaling(
    log_gamma: Mapping[PlaceId, Scalar],
    strict_places: Iterable[PlaceId] = (INFINITY,),
    eta: object = 1,
    ell: Optional[int] = None,
) -> ScalingWitness:
    """Find ``α ∈ ℚ^×`` with ``|α|_v γ_v^ℓ ≤ 1`` everywhere and ``< η`` on *strict_places*.

    *log_gamma* maps places to ``log γ_v`` (absent places have ``γ_v = 1``);
    ``Σ_v log γ_v < 0`` is required.  ``ℓ₀`` is the threshold beyond which the
    construction always succeeds; *ell* defaults to it.
    """

    logs = {
        parse_place(k): as_rational(v) if isinstance(v, float) else v
        for k, v in log_gamma.items()
        if v != 0
    }
    strict = {parse_place(s) for s in strict_places}
    eta_q = as_rational(eta)
    if not 0 < eta_q <= 1:
        raise ConstructionError("η must lie in (0, 1]")
    log_eta = LogRational.log_of(eta_q)
    total: Scalar = ZERO
    for value in logs.values():
        total = total + value
    if not total < 0:
        raise ProductNotStrictlyLessError(f"Σ log γ_v = {total} is not negative")

    primes = sorted({int(p) for p in set(logs) | strict if p != INFINITY})
    # worst-case rounding budget spent at ∞ by the per-prime exponents
    budget: Scalar = ZERO
    for p in primes:
        budget = budget + LogRational.log_prime(p)
        if p in strict:
            budget = budget - log_eta
    if INFINITY in strict:
        budget = budget - log_eta
    ell0 = _threshold(budget, -total)
    chosen = ell if ell is not None else ell0
    if chosen < 1:
        raise ConstructionError("ℓ must be a positive integer")

    exponents: Dict[int, int] = {}
    for p in primes:
        target = logs.get(p, ZERO) * chosen
        if p in strict:
            target = target - log_eta
        e = _smallest_exponent(p, target, p in strict)
        if e:
            exponents[p] = e
    margins: Dict[PlaceId, Scalar] = {}
    ok = True
    for place in [INFINITY] + primes:
        margin = _log_abs_alpha(place, exponents) + logs.get(place, ZERO) * chosen
        margins[place] = margin
        limit = log_eta if place in strict else ZERO
        if place in strict:
            ok = ok and margin < limit
        else:
            ok = ok and margin <= limit
    if not ok:
        _LOGGER.info("scaling for ℓ = %s fails; the guaranteed threshold is ℓ₀ = %s", chosen, ell0)
    return ScalingWitness(chosen, ell0, exponents, margins, ok)


__all__ = [
    "EXACT_COUNT_BITS",
    "INFINITY",
    "KAPPA",
    "GapCheck",
    "LhatResult",
    "MKDivisor",
    "Place",
    "PlaceId",
    "PlaceTable",
    "ScalingWitness",
    "deg_hat",
    "find_scaling",
    "gap_check",
    "lhat",
    "parse_place",
    "place_label",
]
