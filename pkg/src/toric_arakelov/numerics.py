"""Scalar kernel: exact rationals, log-rationals and certified comparison.

Values of the form ``r + Σ q_p·log p`` (``r`` and ``q_p`` rational, ``p``
prime) are kept symbolically in :class:`LogRational`.  Because the logs of
distinct primes are linearly independent over ℚ, equality is decided
symbolically; ordering is decided by MPFR interval enclosures whose precision
doubles until the enclosure excludes zero.

The module also hosts the deterministic adaptive simplex cubature used on the
numeric path.
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from numbers import Rational as _RationalABC
from typing import Callable, Dict, Iterable, Mapping, Optional, Sequence, Tuple, Union

import gmpy2
import numpy as np
from sympy import factorint, isprime

from .config import Settings, get_settings
from .errors import BudgetExceededError, NotRepresentableError

_LOGGER = logging.getLogger(__name__)

Rational = Fraction
Scalar = Union[Fraction, "LogRational"]
Evaluator = Callable[[np.ndarray], np.ndarray]

ZERO = Fraction(0)
ONE = Fraction(1)


def as_rational(value: object) -> Fraction:
    """Coerce *value* (int, Fraction, ``"p/q"`` or decimal string) to a Fraction."""

    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, (int, _RationalABC)):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite value {value!r}")
        return Fraction(value)
    raise TypeError(f"cannot interpret {value!r} as a rational")


def is_rational(value: object) -> bool:
    return isinstance(value, (int, Fraction)) and not isinstance(value, bool)


# ── log-rationals ──────────────────────────────────────────────────────


def _normalise_terms(terms: Iterable[Tuple[int, Fraction]]) -> Tuple[Tuple[int, Fraction], ...]:
    merged: Dict[int, Fraction] = {}
    for prime, coeff in terms:
        merged[prime] = merged.get(prime, ZERO) + coeff
    return tuple(sorted((p, c) for p, c in merged.items() if c != 0))


def _build(rational: Fraction, terms: Tuple[Tuple[int, Fraction], ...]) -> Scalar:
    if not terms:
        return rational
    return LogRational(rational, terms)


@dataclass(frozen=True, slots=True, eq=False)
class LogRational:
    """An element ``rational + Σ coeff·log(prime)`` with at least one log term.

    Arithmetic that cancels every log term returns a plain :class:`Fraction`,
    so a ``LogRational`` instance is never rational.  Multiplication is only
    defined when one factor is rational.
    """

    rational: Fraction
    logs: Tuple[Tuple[int, Fraction], ...]

    @classmethod
    def from_terms(
        cls, rational: object = 0, logs: Optional[Mapping[object, object]] = None
    ) -> Scalar:
        """Build a scalar from a rational part and a prime→coefficient mapping."""

        terms = []
        for prime, coeff in (logs or {}).items():
            p = int(prime)
            if not isprime(p):
                raise ValueError(f"log term key {prime!r} is not a prime")
            terms.append((p, as_rational(coeff)))
        return _build(as_rational(rational), _normalise_terms(terms))

    @classmethod
    def log_of(cls, value: object) -> Scalar:
        """Return ``log(value)`` for a positive rational *value*, exactly."""

        q = as_rational(value)
        if q <= 0:
            raise ValueError(f"log of non-positive value {q}")
        terms = [(p, Fraction(e)) for p, e in factorint(q.numerator).items()]
        terms += [(p, Fraction(-e)) for p, e in factorint(q.denominator).items()]
        return _build(ZERO, _normalise_terms(terms))

    @classmethod
    def log_prime(cls, prime: int) -> "LogRational":
        return LogRational(ZERO, ((int(prime), ONE),))

    # arithmetic -----------------------------------------------------------

    def _parts(self) -> Tuple[Fraction, Tuple[Tuple[int, Fraction], ...]]:
        return self.rational, self.logs

    def __add__(self, other: object) -> Scalar:
        if isinstance(other, LogRational):
            return _build(self.rational + other.rational, _normalise_terms(self.logs + other.logs))
        if is_rational(other):
            return LogRational(self.rational + Fraction(other), self.logs)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self) -> "LogRational":
        return LogRational(-self.rational, tuple((p, -c) for p, c in self.logs))

    def __pos__(self) -> "LogRational":
        return self

    def __sub__(self, other: object) -> Scalar:
        if isinstance(other, LogRational) or is_rational(other):
            return self + (-other)
        return NotImplemented

    def __rsub__(self, other: object) -> Scalar:
        if is_rational(other):
            return (-self) + other
        return NotImplemented

    def __mul__(self, other: object) -> Scalar:
        if isinstance(other, LogRational):
            raise NotRepresentableError(f"product of logarithmic values {self} * {other}")
        if is_rational(other):
            k = Fraction(other)
            if k == 0:
                return ZERO
            return LogRational(self.rational * k, tuple((p, c * k) for p, c in self.logs))
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other: object) -> Scalar:
        if is_rational(other):
            return self * (1 / Fraction(other))
        if isinstance(other, LogRational):
            ratio = rational_ratio(self, other)
            if ratio is None:
                raise NotRepresentableError(f"quotient {self} / {other} is not rational")
            return ratio
        return NotImplemented

    def divide_by_log(self, prime: int) -> Fraction:
        """Return ``q`` when this value equals ``q·log(prime)`` exactly."""

        if self.rational == 0 and len(self.logs) == 1 and self.logs[0][0] == prime:
            return self.logs[0][1]
        raise NotRepresentableError(f"{self} is not a rational multiple of log {prime}")

    # comparison -----------------------------------------------------------

    def __eq__(self, other: object) -> bool:
        if isinstance(other, LogRational):
            return self.rational == other.rational and self.logs == other.logs
        if is_rational(other):
            return False
        return NotImplemented

    def __hash__(self) -> int:
        return hash((self.rational, self.logs))

    def __lt__(self, other: object) -> bool:
        return certified_compare(self, other) is Ordering.LESS

    def __le__(self, other: object) -> bool:
        return certified_compare(self, other) is not Ordering.GREATER

    def __gt__(self, other: object) -> bool:
        return certified_compare(self, other) is Ordering.GREATER

    def __ge__(self, other: object) -> bool:
        return certified_compare(self, other) is not Ordering.LESS

    def __float__(self) -> float:
        return enclose(self, 64).midpoint()

    def __str__(self) -> str:
        parts = [] if self.rational == 0 else [str(self.rational)]
        for prime, coeff in self.logs:
            parts.append(f"{coeff}*log({prime})")
        return " + ".join(parts).replace("+ -", "- ")

    def __repr__(self) -> str:
        return f"LogRational({self})"

    def to_json(self) -> dict:
        return {
            "rat": _fraction_text(self.rational),
            "logs": {str(p): _fraction_text(c) for p, c in self.logs},
        }


def _fraction_text(value: Fraction) -> str:
    return f"{value.numerator}/{value.denominator}"


def scalar_to_json(value: Scalar) -> object:
    """Encode a scalar as ``"p/q"`` or ``{"rat": ..., "logs": {...}}``."""

    if isinstance(value, LogRational):
        return value.to_json()
    return _fraction_text(Fraction(value))


def scalar_from_json(payload: object) -> Scalar:
    if isinstance(payload, Mapping):
        unknown = set(payload) - {"rat", "logs"}
        if unknown:
            raise ValueError(f"unexpected keys {sorted(unknown)}")
        logs = payload.get("logs") or {}
        if not isinstance(logs, Mapping):
            raise ValueError("'logs' must be an object")
        return LogRational.from_terms(payload.get("rat", "0"), logs)
    return as_rational(payload)


def rational_ratio(a: Scalar, b: Scalar) -> Optional[Fraction]:
    """Return ``q`` with ``a = q·b`` when such a rational exists (``b ≠ 0``)."""

    if is_rational(b):
        if b == 0:
            return None
        if is_rational(a):
            return Fraction(a) / Fraction(b)
        return None
    if is_rational(a):
        return ZERO if a == 0 else None
    coeffs_b = dict(b.logs)
    coeffs_a = dict(a.logs)
    if set(coeffs_a) != set(coeffs_b):
        return None
    prime = b.logs[0][0]
    q = coeffs_a[prime] / coeffs_b[prime]
    return q if a == b * q else None


# ── certified intervals ────────────────────────────────────────────────


class Ordering(Enum):
    LESS = -1
    EQUAL = 0
    GREATER = 1


@dataclass(frozen=True, slots=True)
class CertifiedInterval:
    """A closed interval ``[lower, upper]`` of MPFR values at *precision* bits."""

    lower: object
    upper: object
    precision: int

    def __post_init__(self) -> None:
        if self.lower > self.upper:
            raise ValueError("interval lower bound exceeds upper bound")

    def width(self) -> float:
        return float(self.upper - self.lower)

    def sign(self) -> Optional[int]:
        """Return -1/0/1 when the enclosure decides the sign, else None."""

        if self.lower > 0:
            return 1
        if self.upper < 0:
            return -1
        if self.lower == 0 and self.upper == 0:
            return 0
        return None

    def midpoint(self) -> float:
        return float((self.lower + self.upper) / 2)

    def refine(self, value: Scalar) -> "CertifiedInterval":
        return enclose(value, self.precision * 2)


def _context(bits: int, direction: int):
    return gmpy2.context(
        precision=bits,
        round=gmpy2.RoundDown if direction < 0 else gmpy2.RoundUp,
        trap_inexact=False,
    )


@lru_cache(maxsize=4096)
def _log_bound(prime: int, bits: int, direction: int):
    with _context(bits, direction):
        return gmpy2.log(gmpy2.mpz(prime))


def _bound(value: Scalar, bits: int, direction: int):
    if isinstance(value, LogRational):
        rational, logs = value.rational, value.logs
    else:
        rational, logs = Fraction(value), ()
    with _context(bits, direction):
        total = gmpy2.mpfr(rational.numerator) / gmpy2.mpz(rational.denominator)
        for prime, coeff in logs:
            # q·log p is increasing in log p for q > 0 and decreasing otherwise
            log_value = _log_bound(prime, bits, direction if coeff > 0 else -direction)
            term = (log_value * gmpy2.mpz(coeff.numerator)) / gmpy2.mpz(coeff.denominator)
            total = total + term
    return total


def enclose(value: Scalar, bits: int) -> CertifiedInterval:
    """Return an MPFR enclosure of *value* using directed rounding."""

    return CertifiedInterval(_bound(value, bits, -1), _bound(value, bits, 1), bits)


def _sign_below_resolution(diff: Scalar, bits: int) -> Ordering:
    """Order a log-rational difference that no enclosure up to *bits* separates from zero.

    Logarithms of distinct primes are linearly independent over ℚ and
    ``r + Σ c_p log p`` with ``r ≠ 0`` is transcendental, so a normalised
    difference with log terms is never zero: ``EQUAL`` is excluded and the
    sign is read from the midpoint of the last enclosure.
    """

    midpoint = enclose(diff, bits).midpoint()
    _LOGGER.warning(
        "precision cap %s bits reached comparing %s; nonzero by log independence, using midpoint sign",
        bits,
        diff,
    )
    return Ordering.GREATER if midpoint >= 0 else Ordering.LESS


def certified_compare(a: object, b: object, settings: Optional[Settings] = None) -> Ordering:
    """Compare two scalars; ``EQUAL`` only when the difference is symbolically zero."""

    diff = a - b
    if is_rational(diff):
        if diff == 0:
            return Ordering.EQUAL
        return Ordering.GREATER if diff > 0 else Ordering.LESS
    settings = settings or get_settings()
    bits = settings.precision_bits
    while True:
        sign = enclose(diff, bits).sign()
        if sign is not None and sign != 0:
            return Ordering.GREATER if sign > 0 else Ordering.LESS
        if bits >= settings.precision_cap_bits:
            return _sign_below_resolution(diff, bits)
        bits = min(bits * 2, settings.precision_cap_bits)
        _LOGGER.debug("escalating precision to %s bits for %s", bits, diff)


def sign(value: Scalar) -> int:
    return certified_compare(value, ZERO).value


def scalar_min(values: Iterable[Scalar]) -> Scalar:
    it = iter(values)
    best = next(it)
    for item in it:
        if certified_compare(item, best) is Ordering.LESS:
            best = item
    return best


def scalar_max(values: Iterable[Scalar]) -> Scalar:
    it = iter(values)
    best = next(it)
    for item in it:
        if certified_compare(item, best) is Ordering.GREATER:
            best = item
    return best


def to_float(value: Scalar) -> float:
    return float(value)


def floor_scalar(value: Scalar) -> int:
    """Certified floor of a scalar."""

    if is_rational(value):
        return math.floor(Fraction(value))
    candidate = math.floor(float(value))
    while certified_compare(value, candidate) is Ordering.LESS:
        candidate -= 1
    while certified_compare(value, candidate + 1) is not Ordering.LESS:
        candidate += 1
    return candidate


def ceil_scalar(value: Scalar) -> int:
    return -floor_scalar(-value)


def dot(u: Sequence[Scalar], v: Sequence[Scalar]) -> Scalar:
    """Inner product; one side must be rational wherever the other has logs."""

    total: Scalar = ZERO
    for a, b in zip(u, v):
        if a == 0 or b == 0:
            continue
        total = total + a * b
    return total


# ── adaptive cubature ──────────────────────────────────────────────────


def _rule_coefficients(n: int) -> Tuple[float, float]:
    root = math.sqrt(n + 2)
    s = (n + 2 + n * root) / ((n + 1) * (n + 2))
    r = (n + 2 - root) / ((n + 1) * (n + 2))
    return s, r


def _volumes(simplices: np.ndarray) -> np.ndarray:
    n = simplices.shape[2]
    edges = simplices[:, 1:, :] - simplices[:, :1, :]
    return np.abs(np.linalg.det(edges)) / math.factorial(n)


def _apply_rule(f: Evaluator, simplices: np.ndarray) -> np.ndarray:
    """Degree-2 rule with n+1 interior points, equal weights vol/(n+1)."""

    k, m, n = simplices.shape
    s, r = _rule_coefficients(n)
    points = r * simplices.sum(axis=1, keepdims=True) + (s - r) * simplices
    values = np.asarray(f(points.reshape(k * m, n)), dtype=float).reshape(k, m)
    return _volumes(simplices) * values.mean(axis=1)


def _bisect(simplices: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Split every simplex along its longest edge (lowest index pair on ties)."""

    m = simplices.shape[1]
    pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]
    lengths = np.stack(
        [np.sum((simplices[:, i] - simplices[:, j]) ** 2, axis=1) for i, j in pairs], axis=1
    )
    choice = np.argmax(lengths, axis=1)
    left = simplices.copy()
    right = simplices.copy()
    for idx, pair_index in enumerate(choice):
        i, j = pairs[pair_index]
        mid = 0.5 * (simplices[idx, i] + simplices[idx, j])
        left[idx, j] = mid
        right[idx, i] = mid
    return left, right


@dataclass(slots=True)
class _Element:
    vertices: np.ndarray
    coarse: float
    fine: float
    error: float
    left: np.ndarray
    right: np.ndarray
    left_value: float
    right_value: float


def _make_elements(f: Evaluator, simplices: np.ndarray, coarse: np.ndarray) -> list[_Element]:
    left, right = _bisect(simplices)
    halves = _apply_rule(f, np.concatenate([left, right]))
    k = simplices.shape[0]
    out = []
    for idx in range(k):
        lv, rv = float(halves[idx]), float(halves[k + idx])
        fine = lv + rv
        out.append(
            _Element(
                simplices[idx], float(coarse[idx]), fine, abs(float(coarse[idx]) - fine),
                left[idx], right[idx], lv, rv,
            )
        )
    return out


def integrate_over_simplices(
    f: Evaluator,
    simplices: Sequence[Sequence[Sequence[object]]],
    tol: float,
    settings: Optional[Settings] = None,
) -> float:
    """Integrate *f* over the union of *simplices* to absolute tolerance *tol*.

    *f* receives a ``(k, n)`` array of points and returns ``k`` values.  The
    refinement order and the final summation are fixed, so identical inputs
    produce bit-identical results.
    """

    if tol <= 0:
        raise ValueError("tolerance must be positive")
    settings = settings or get_settings()
    array = np.asarray([[[float(c) for c in v] for v in s] for s in simplices], dtype=float)
    if array.size == 0:
        return 0.0
    if array.shape[1] != array.shape[2] + 1:
        raise ValueError("each simplex needs n+1 vertices in R^n")
    elements = _make_elements(f, array, _apply_rule(f, array))
    counter = 0
    heap: list[Tuple[float, int]] = []
    active: Dict[int, _Element] = {}
    for element in elements:
        active[counter] = element
        heapq.heappush(heap, (-element.error, counter))
        counter += 1
    while True:
        total_error = math.fsum(e.error for e in active.values())
        if total_error <= tol:
            break
        if len(active) >= settings.cubature_max_elements:
            raise BudgetExceededError(
                f"cubature used {len(active)} elements with error estimate "
                f"{total_error:.3e} > {tol:.3e}"
            )
        batch = max(1, min(len(active) // 4, settings.cubature_max_elements - len(active)))
        popped = [active.pop(heapq.heappop(heap)[1]) for _ in range(min(batch, len(heap)))]
        children = np.concatenate([np.stack([e.left, e.right]) for e in popped])
        coarse = np.array([v for e in popped for v in (e.left_value, e.right_value)])
        for element in _make_elements(f, children, coarse):
            active[counter] = element
            heapq.heappush(heap, (-element.error, counter))
            counter += 1
    estimate = math.fsum(active[key].fine for key in sorted(active))
    _LOGGER.debug("cubature: %s elements, error estimate %.3e", len(active), total_error)
    return estimate


def adaptive_integrate(
    f: Evaluator,
    simplex: Sequence[Sequence[object]],
    tol: float,
    settings: Optional[Settings] = None,
) -> float:
    """Integrate *f* over one simplex (``n+1`` vertices in ``R^n``)."""

    return integrate_over_simplices(f, [simplex], tol, settings)


__all__ = [
    "ONE",
    "ZERO",
    "CertifiedInterval",
    "Evaluator",
    "LogRational",
    "Ordering",
    "Rational",
    "Scalar",
    "adaptive_integrate",
    "as_rational",
    "ceil_scalar",
    "certified_compare",
    "dot",
    "enclose",
    "floor_scalar",
    "integrate_over_simplices",
    "is_rational",
    "rational_ratio",
    "scalar_from_json",
    "scalar_max",
    "scalar_min",
    "scalar_to_json",
    "sign",
    "to_float",
]
