from __future__ import annotations

import itertools
import logging
import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import optimize

import toric_arakelov.config as config_module
from toric_arakelov.config import Settings
from toric_arakelov.convex import (
    AffineForm,
    Cell,
    NumericConcave,
    OracleFunction,
    PiecewiseAffineConcave,
    PiecewiseAffineGeneral,
    concave_envelope,
    is_concave,
    legendre_dual,
    minimize_converged,
    recession,
    stability_set,
    sup_convolution,
)
from toric_arakelov.errors import (
    BudgetExceededError,
    ConstructionError,
    EmptyStabilitySetError,
    NotInStabilitySetError,
    PointOutsidePolytopeError,
)
from toric_arakelov.geometry import RationalPolytope

from .util import vec

UNIT = RationalPolytope.box([0], [1])


def pac(*forms, domain=None) -> PiecewiseAffineConcave:
    return PiecewiseAffineConcave(tuple(AffineForm(vec(*s), Fraction(c)) for s, c in forms), domain)


def cells_1d(*pieces) -> PiecewiseAffineGeneral:
    """``pieces`` are ``(low, high, slope, offset)`` with ``None`` for an open end."""

    cells = []
    for low, high, slope, offset in pieces:
        halfspaces = []
        if low is not None:
            halfspaces.append(((1,), Fraction(low)))
        if high is not None:
            halfspaces.append(((-1,), -Fraction(high)))
        cells.append(Cell(tuple(halfspaces), AffineForm(vec(slope), Fraction(offset))))
    return PiecewiseAffineGeneral(tuple(cells))


MIN_0_U = pac(((0,), 0), ((1,), 0))
ABS = cells_1d((0, None, 1, 0), (None, 0, -1, 0))
# min(0, u) with a notch pushed down on [0, 2]
NOTCHED = cells_1d((None, 0, 1, 0), (0, 1, -1, 0), (1, 2, 1, -2), (2, None, 0, 0))


def _half_entropy(x: np.ndarray) -> float:
    t = float(np.asarray(x, dtype=float)[0])
    if t <= 0 or t >= 1:
        return 0.0
    return -0.5 * (t * math.log(t) + (1 - t) * math.log(1 - t))


# ── piecewise-affine concave functions ────────────────────────────────


def test_redundant_forms_are_pruned():
    f = pac(((0,), 0), ((1,), 0), ((Fraction(1, 2),), 5))
    assert len(f.forms) == 2
    assert f((Fraction(-2),)) == -2


def test_constant_form_active_only_at_a_point_is_pruned():
    f = pac(((0,), 1), ((-1,), 1), ((1,), 1))
    assert {form.slope for form in f.forms} == {vec(-1), vec(1)}


def test_evaluation_outside_the_domain_is_rejected():
    f = MIN_0_U.with_domain(UNIT)
    with pytest.raises(PointOutsidePolytopeError):
        f((Fraction(2),))


def test_maximum_and_minimum_on_a_domain():
    tent = pac(((1,), 0), ((-1,), 1), domain=UNIT)
    assert tent.maximum() == (Fraction(1, 2), vec(Fraction(1, 2)))
    assert tent.minimum()[0] == 0


def test_shift_translates_domain_and_values():
    tent = pac(((1,), 0), ((-1,), 1), domain=UNIT)
    moved = tent.shift(vec(Fraction(1, 4)), Fraction(1))
    assert moved.domain.vertices == (vec(Fraction(-1, 4)), vec(Fraction(3, 4)))
    assert moved((Fraction(1, 4),)) == tent((Fraction(1, 2),)) - 1


def test_dilate_scales_domain_and_values():
    tent = pac(((1,), 0), ((-1,), 1), domain=UNIT)
    big = tent.dilate(2)
    assert big.domain.vertices == (vec(0), vec(2))
    assert big((Fraction(1),)) == 1


def test_discontinuous_cells_are_rejected():
    with pytest.raises(ConstructionError):
        cells_1d((None, 0, 1, 0), (0, None, 2, 1))


def test_uncovered_space_is_rejected():
    with pytest.raises(ConstructionError):
        cells_1d((0, None, 1, 0))


# ── stability sets ────────────────────────────────────────────────────


def test_stability_set_of_simplex_support_function():
    f = pac(((0, 0), 0), ((1, 0), 0), ((0, 1), 0))
    assert set(stability_set(f).vertices) == {vec(0, 0), vec(1, 0), vec(0, 1)}


def test_stability_set_of_linear_function_is_a_point():
    f = pac(((3, -2), 7))
    assert stability_set(f).vertices == (vec(3, -2),)


def test_stability_set_of_convex_function_is_empty():
    assert stability_set(ABS).is_empty


def test_stability_set_of_general_function_uses_its_recession():
    assert stability_set(NOTCHED).vertices == (vec(0), vec(1))


# ── duality ───────────────────────────────────────────────────────────


def test_dual_of_simplex_support_function_vanishes():
    dual = legendre_dual(MIN_0_U, UNIT)
    for x in (0, Fraction(1, 3), 1):
        assert dual((Fraction(x),)) == 0


def test_dual_of_tent_on_the_whole_line():
    f = pac(((0,), 1), ((-1,), 1), ((1,), 1))
    dual = legendre_dual(f, RationalPolytope.box([-1], [1]))
    assert dual((Fraction(0),)) == -1
    assert dual((Fraction(1, 2),)) == -1


def test_dual_outside_stability_set_is_rejected():
    with pytest.raises(NotInStabilitySetError):
        legendre_dual(MIN_0_U, RationalPolytope.box([0], [2]))


def test_dual_of_convex_function_has_empty_stability_set():
    with pytest.raises(EmptyStabilitySetError):
        legendre_dual(ABS)


def test_fubini_study_dual_through_the_oracle_path():
    oracle = OracleFunction(
        lambda u: -0.5 * float(np.logaddexp(0.0, -2.0 * float(u[0]))),
        MIN_0_U,
        concave=True,
        dim=1,
    )
    dual = legendre_dual(oracle, UNIT)
    assert dual((Fraction(1, 2),)) == pytest.approx(0.5 * math.log(2), abs=1e-6)
    assert dual((Fraction(1, 4),)) == pytest.approx(_half_entropy(np.array([0.25])), abs=1e-6)


def test_oracle_with_wrong_recession_is_rejected():
    with pytest.raises(ConstructionError):
        OracleFunction(lambda u: float(u[0]), MIN_0_U, concave=True, dim=1)


def test_biduality_returns_the_function():
    tent = pac(((1,), 0), ((-1,), 1), domain=UNIT)
    back = legendre_dual(legendre_dual(tent), UNIT)
    assert back.same_as(tent)


@st.composite
def _concave_on_a_cube(draw):
    n = draw(st.integers(1, 3))
    slopes = draw(
        st.lists(
            st.tuples(*[st.integers(-3, 3)] * n), min_size=1, max_size=8, unique=True
        )
    )
    offsets = draw(
        st.lists(
            st.fractions(min_value=-3, max_value=3, max_denominator=4),
            min_size=len(slopes),
            max_size=len(slopes),
        )
    )
    cube = RationalPolytope.box([0] * n, [1] * n)
    return pac(*zip(slopes, offsets), domain=cube), cube


@settings(max_examples=500, deadline=None)
@given(_concave_on_a_cube())
def test_biduality_on_random_concave_functions(case):
    f, cube = case
    assert legendre_dual(legendre_dual(f), cube).same_as(f)


def test_dual_is_order_reversing():
    lower = MIN_0_U.add_constant(Fraction(-1))
    d_lower = legendre_dual(lower, UNIT)
    d_upper = legendre_dual(MIN_0_U, UNIT)
    for x in (0, Fraction(1, 2), 1):
        assert d_lower((Fraction(x),)) >= d_upper((Fraction(x),))


# ── recession and envelopes ───────────────────────────────────────────


def test_recession_of_affine_function_drops_the_offset():
    rec = recession(pac(((2, 1), 5)))
    assert rec.forms == (AffineForm(vec(2, 1), Fraction(0)),)


def test_recession_of_shifted_support_function():
    rec = recession(MIN_0_U.add_constant(Fraction(5)))
    assert rec.same_as(MIN_0_U)


def test_recession_of_general_function_is_conic():
    rec = recession(NOTCHED)
    for u in (-3, -1, 2, 7):
        assert rec((Fraction(u),)) == min(0, u)


def test_concave_envelope_is_idempotent_on_concave_input():
    assert concave_envelope(MIN_0_U) is MIN_0_U


def test_concave_envelope_fills_the_notch():
    envelope = concave_envelope(NOTCHED)
    assert envelope.same_as(MIN_0_U)


def test_biduality_of_general_function_matches_envelope():
    double = legendre_dual(legendre_dual(NOTCHED))
    assert double.same_as(concave_envelope(NOTCHED))


def test_concave_envelope_needs_a_stability_set():
    with pytest.raises(EmptyStabilitySetError):
        concave_envelope(ABS)


# ── concavity test ────────────────────────────────────────────────────


def test_simplex_support_function_is_concave():
    f = pac(((0, 0), 0), ((1, 0), 0), ((0, 1), 0)).to_general()
    assert is_concave(f) == (True, None)


def test_convex_function_is_not_concave_and_reports_a_witness():
    ok, witness = is_concave(cells_1d((None, 0, 0, 0), (0, None, 1, 0)))
    assert not ok
    first, second, point = witness
    assert first != second
    assert point is not None


def test_notched_function_is_not_concave():
    ok, witness = is_concave(NOTCHED)
    assert not ok
    assert witness is not None


# ── sup-convolution ───────────────────────────────────────────────────


def test_sup_convolution_with_point_mass_is_identity():
    tent = pac(((1,), 0), ((-1,), 1), domain=UNIT)
    origin = PiecewiseAffineConcave.constant(Fraction(0), RationalPolytope.from_vertices([(0,)]))
    assert sup_convolution(tent, origin).same_as(tent)


def test_sup_convolution_of_zero_functions_on_segments():
    zero = PiecewiseAffineConcave.constant(Fraction(0), UNIT)
    total = sup_convolution(zero, zero)
    assert total.domain.vertices == (vec(0), vec(2))
    assert total((Fraction(3, 2),)) == 0


def test_sup_convolution_translates_numeric_functions():
    entropy = NumericConcave(_half_entropy, UNIT)
    point = PiecewiseAffineConcave.constant(Fraction(0), RationalPolytope.from_vertices([(Fraction(1, 4),)]))
    moved = sup_convolution(entropy, point)
    assert moved.domain.vertices == (vec(Fraction(1, 4)), vec(Fraction(5, 4)))
    assert moved((Fraction(3, 4),)) == pytest.approx(0.5 * math.log(2))


def _random_concave(rng: random.Random, n: int, forms: int) -> PiecewiseAffineConcave:
    grid = list(itertools.product(range(-3, 4), repeat=n))
    while True:
        slopes = rng.sample(grid, forms)
        if RationalPolytope.from_vertices(slopes).is_full_dimensional():
            break
    return pac(*[(s, Fraction(rng.randint(-6, 6), rng.randint(1, 3))) for s in slopes])


def _sample_points(polytope: RationalPolytope) -> list:
    vertices = list(polytope.vertices)
    centre = tuple(sum(c) / len(vertices) for c in zip(*vertices))
    midpoints = [tuple((a + b) / 2 for a, b in zip(v, centre)) for v in vertices]
    return vertices + midpoints + [centre]


@pytest.mark.parametrize("seed", range(200))
def test_dual_of_sum_dominates_sup_convolution_of_duals(seed):
    rng = random.Random(seed)
    n = 1 + seed % 3
    f = _random_concave(rng, n, n + 2)
    g = _random_concave(rng, n, n + 1)
    total = f + g
    stab_total = stability_set(total)
    minkowski = stability_set(f).minkowski_sum(stability_set(g))
    assert all(stab_total.contains(v) for v in minkowski.vertices)
    convolution = sup_convolution(legendre_dual(f), legendre_dual(g))
    dual_total = legendre_dual(total, minkowski)
    for x in _sample_points(minkowski):
        assert dual_total(x) >= convolution(x)


@pytest.mark.parametrize("k", [0, 1, 2, 4, 10])
def test_perturbed_stability_sets_shrink_to_the_original(k):
    f = pac(((0, 0), 0), ((1, 0), 0), ((0, 1), 0))
    g = pac(((1, 0), 0), ((-1, 0), 0), ((0, 1), 0), ((0, -1), 0))
    eps = Fraction(1, 2**k)
    wide = stability_set(f + g.scale_values(eps))
    narrow = stability_set(f + g.scale_values(eps / 2))
    assert all(wide.contains(v) for v in narrow.vertices)
    assert all(narrow.contains(v) for v in stability_set(f).vertices)
    for u in [(1, 0), (0, 1), (-1, -1)]:
        assert stability_set(f).support(u) - wide.support(u) <= eps


# ── optimizer convergence ─────────────────────────────────────────────


def _scripted_runs(*outcomes):
    results = iter(outcomes)

    def run(start):
        x, fun, success = next(results)
        return optimize.OptimizeResult(x=np.array(x), fun=fun, success=success, message="scripted")

    return run


def test_converged_run_is_returned_directly():
    result = minimize_converged(_scripted_runs(([0.5], 1.0, True)), np.zeros(1), "search")
    assert result.fun == 1.0


def test_failed_run_restarts_from_the_last_iterate(caplog):
    run = _scripted_runs(([0.5], 1.0, False), ([0.25], 0.5, True))
    with caplog.at_level(logging.WARNING, logger="toric_arakelov.convex"):
        result = minimize_converged(run, np.zeros(1), "search")
    assert result.fun == 0.5
    assert "search did not converge" in caplog.text


def test_restart_that_stays_put_is_accepted():
    run = _scripted_runs(([0.5], 1.0, False), ([0.5], 1.0, False))
    assert minimize_converged(run, np.zeros(1), "search").fun == 1.0


def test_two_failed_runs_exceed_the_budget():
    run = _scripted_runs(([0.5], 1.0, False), ([0.25], 0.5, False))
    with pytest.raises(BudgetExceededError, match="search did not converge"):
        minimize_converged(run, np.zeros(1), "search")


def _half_entropy_2d(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    full = np.clip(np.array([1.0 - x.sum(), x[0], x[1]]), 0.0, None)
    return float(-0.5 * np.sum(full * np.log(np.where(full > 0, full, 1.0))))


def test_dual_of_numeric_roof_needs_a_converging_optimizer(monkeypatch):
    roof = NumericConcave(_half_entropy_2d, RationalPolytope.standard_simplex(2))
    dual = legendre_dual(roof)
    expected = -0.5 * math.log(1 + math.exp(-0.6) + math.exp(0.4))
    assert dual((0.3, -0.2)) == pytest.approx(expected, abs=1e-6)
    monkeypatch.setattr(config_module, "_SETTINGS", Settings(optimizer_max_iterations=1))
    with pytest.raises(BudgetExceededError):
        dual((0.3, -0.2))
