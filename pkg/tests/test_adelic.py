from __future__ import annotations

import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from toric_arakelov.adelic import (
    EXACT_COUNT_BITS,
    INFINITY,
    KAPPA,
    MKDivisor,
    PlaceTable,
    deg_hat,
    find_scaling,
    gap_check,
    lhat,
    parse_place,
    place_label,
)
from toric_arakelov.errors import (
    ConstructionError,
    ProductNotStrictlyLessError,
    UnsupportedFieldError,
)
from toric_arakelov.numerics import LogRational

LOG = LogRational.log_of
SMALL_PRIMES = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47]


# ── places ────────────────────────────────────────────────────────────


@pytest.mark.parametrize(
    "raw, expected",
    [
        pytest.param("inf", INFINITY, id="inf"),
        pytest.param("∞", INFINITY, id="symbol"),
        pytest.param("7", 7, id="prime-text"),
        pytest.param(11, 11, id="prime-int"),
    ],
)
def test_parse_place(raw, expected):
    assert parse_place(raw) == expected


@pytest.mark.parametrize("raw", ["6", 1, "p", True])
def test_parse_place_rejects_non_places(raw):
    with pytest.raises(ConstructionError):
        parse_place(raw)


def test_place_table_normalisation():
    table = PlaceTable.rationals([5, 2, "5"])
    assert [p.id for p in table] == [INFINITY, 2, 5]
    assert table.get(INFINITY).lam == 1
    assert table.get(5).lam == LogRational.log_prime(5)
    assert place_label(INFINITY) == "∞"


def test_non_rational_tables_reject_counting():
    table = PlaceTable(PlaceTable.rationals().places, field_name="F_p(t)")
    with pytest.raises(UnsupportedFieldError):
        lhat(MKDivisor({INFINITY: 3}, table))


def test_non_archimedean_values_must_be_powers():
    with pytest.raises(ConstructionError):
        MKDivisor({2: Fraction(1, 3)})
    assert MKDivisor({3: Fraction(1, 9)}).exponent(3) == 2


# ── small elements and degrees ────────────────────────────────────────


@pytest.mark.parametrize(
    "values, count",
    [
        pytest.param({INFINITY: 10}, 21, id="archimedean-only"),
        pytest.param({INFINITY: 10, 2: Fraction(1, 2)}, 11, id="even-only"),
        pytest.param({INFINITY: Fraction(1, 2)}, 1, id="only-zero"),
        pytest.param({}, 3, id="trivial"),
    ],
)
def test_lhat_counts(values, count):
    result = lhat(MKDivisor(values))
    assert result.count == count
    assert result.value == LOG(count)


@pytest.mark.parametrize(
    "values, expected",
    [
        pytest.param({}, Fraction(0), id="trivial"),
        pytest.param({INFINITY: 10, 2: Fraction(1, 2)}, LOG(5), id="log5"),
        pytest.param({3: Fraction(1, 3)}, -LOG(3), id="minus-log3"),
    ],
)
def test_deg_hat(values, expected):
    assert deg_hat(MKDivisor(values)) == expected


def test_gap_at_the_boundary_equals_kappa():
    check = gap_check(MKDivisor({}))
    assert check.gap == KAPPA
    assert check.ok


def test_gap_for_large_archimedean_value():
    check = gap_check(MKDivisor({INFINITY: 1000}))
    assert check.gap == LOG(Fraction(2001, 1000))
    assert check.ok


def test_gap_vanishes_when_only_zero_is_small():
    check = gap_check(MKDivisor({INFINITY: Fraction(1, 2)}))
    assert check.gap == 0
    assert check.ok


def _random_divisor(rng: random.Random) -> MKDivisor:
    values = {INFINITY: Fraction(rng.randint(1, 2**20), 2 ** rng.randint(0, 20))}
    for p in rng.sample(SMALL_PRIMES, rng.randint(0, 3)):
        values[p] = Fraction(p) ** -rng.randint(-8, 8)
    return MKDivisor(values)


@pytest.mark.parametrize("seed", range(100))
def test_gap_check_holds_for_random_divisors(seed):
    assert gap_check(_random_divisor(random.Random(seed))).ok


@settings(max_examples=10_000, deadline=None)
@given(
    st.integers(1, 2**40),
    st.dictionaries(st.sampled_from(SMALL_PRIMES), st.integers(-8, 8), max_size=3),
)
def test_gap_bound_holds(numerator, exponents):
    values = {INFINITY: Fraction(numerator, 2**20)}
    values.update({p: Fraction(p) ** -e for p, e in exponents.items()})
    check = gap_check(MKDivisor(values))
    assert check.ok
    assert float(check.gap) <= float(KAPPA) + 1e-9


def test_long_counts_get_a_float_logarithm():
    c = MKDivisor({INFINITY: 2**20, 47: Fraction(47) ** 8, 43: Fraction(43) ** 8})
    result = lhat(c)
    assert result.count.bit_length() > EXACT_COUNT_BITS
    assert result.value == pytest.approx(math.log(result.count))
    check = gap_check(c)
    assert check.ok
    assert isinstance(check.gap, float)
    assert check.gap == pytest.approx(math.log(result.count / c.product()), abs=1e-9)


@pytest.mark.parametrize("seed", range(20))
def test_deg_hat_is_additive(seed):
    rng = random.Random(seed)
    c, d = _random_divisor(rng), _random_divisor(rng)
    assert deg_hat(c * d) == deg_hat(c) + deg_hat(d)


@pytest.mark.parametrize("seed", range(20))
def test_lhat_is_monotone(seed):
    rng = random.Random(seed)
    c = _random_divisor(rng)
    bigger = MKDivisor({**c.values, INFINITY: c[INFINITY] * rng.randint(1, 5)})
    assert lhat(bigger).count >= lhat(c).count


# ── scaling ───────────────────────────────────────────────────────────


def _verify(witness, gammas: dict, strict: set, eta: Fraction) -> None:
    alpha = witness.alpha
    ell = witness.ell
    for place in {INFINITY, *gammas, *strict}:
        gamma = gammas.get(place, Fraction(1)) ** ell
        if place == INFINITY:
            size = abs(alpha)
        else:
            size = Fraction(place) ** -witness.exponents.get(place, 0)
        value = size * gamma
        if place in strict:
            assert value < eta
        else:
            assert value <= 1


def test_scaling_with_small_archimedean_gamma_needs_no_alpha():
    witness = find_scaling({INFINITY: -LOG(2)})
    assert witness.ok
    assert witness.ell0 == 1
    assert witness.alpha == 1


def test_scaling_hand_checked_example():
    gammas = {INFINITY: Fraction(4), 2: Fraction(1, 16)}
    witness = find_scaling({k: LOG(v) for k, v in gammas.items()}, ell=1)
    assert witness.ok
    assert witness.alpha == Fraction(1, 16)
    _verify(witness, gammas, {INFINITY}, Fraction(1))


def test_scaling_with_strict_finite_place():
    gammas = {INFINITY: Fraction(11, 10), 3: Fraction(1, 2)}
    witness = find_scaling({k: LOG(v) for k, v in gammas.items()}, strict_places=[3], eta=Fraction(1, 2))
    assert witness.ok
    assert witness.ell == witness.ell0
    _verify(witness, gammas, {3}, Fraction(1, 2))


@pytest.mark.parametrize(
    "gammas",
    [
        pytest.param({INFINITY: Fraction(2)}, id="product-above-one"),
        pytest.param({INFINITY: Fraction(2), 2: Fraction(1, 2)}, id="product-equal-one"),
    ],
)
def test_scaling_requires_product_below_one(gammas):
    with pytest.raises(ProductNotStrictlyLessError):
        find_scaling({k: LOG(v) for k, v in gammas.items()})


@pytest.mark.parametrize("seed", range(25))
def test_random_scaling_witnesses_verify(seed):
    rng = random.Random(seed)
    primes = rng.sample(SMALL_PRIMES[:8], rng.randint(1, 3))
    gammas = {p: Fraction(p) ** -rng.randint(0, 3) for p in primes}
    shrink = 1
    for value in gammas.values():
        shrink *= value
    # keep Π γ_v < 1 with a random archimedean factor
    gammas[INFINITY] = shrink ** -1 * Fraction(rng.randint(1, 9), 10)
    strict = {INFINITY} if rng.random() < 0.5 else {primes[0]}
    eta = Fraction(1, rng.randint(1, 4))
    witness = find_scaling({k: LOG(v) for k, v in gammas.items()}, strict, eta)
    assert witness.ok
    _verify(witness, gammas, strict, eta)
