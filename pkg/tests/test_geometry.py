from __future__ import annotations

from fractions import Fraction

import pytest

from toric_arakelov.convex import AffineForm, PiecewiseAffineConcave
from toric_arakelov.errors import (
    ConstructionError,
    EmptyPolytopeError,
    FaceNotRationalDirectionError,
    NotARefinementError,
    NotFullDimensionalError,
    UnboundedPolyhedronError,
)
from toric_arakelov.geometry import (
    Lattice,
    RationalFan,
    RationalPolytope,
    VirtualSupportFunction,
    common_refinement,
    dual_description,
    integrate_pa,
    lattice_points,
    lattice_volume,
    normal_fan,
)
from toric_arakelov.numerics import LogRational

from .util import vec

SIMPLEX = RationalPolytope.standard_simplex(2)
SQUARE = RationalPolytope.box([0, 0], [1, 1])
P2_FAN = normal_fan(SIMPLEX)
P1P1_FAN = normal_fan(SQUARE)
HALF_SIMPLEX = SIMPLEX.intersect([((-1, -1), Fraction(-1, 2))])


# ── lattices and fans ─────────────────────────────────────────────────


def test_lattice_primitive_vectors():
    lattice = Lattice(2)
    assert lattice.is_primitive((2, 3))
    assert not lattice.is_primitive((2, 4))
    assert not lattice.is_primitive((0, 0))
    assert not lattice.contains((Fraction(1, 2), 0))


def test_normal_fan_of_square_has_four_quadrants():
    assert set(P1P1_FAN.rays) == {(1, 0), (0, 1), (-1, 0), (0, -1)}
    assert len(P1P1_FAN.cones) == 4


def test_normal_fan_of_simplex_is_projective_plane():
    assert set(P2_FAN.rays) == {(1, 0), (0, 1), (-1, -1)}
    assert len(P2_FAN.cones) == 3


def test_normal_fan_rejects_lower_dimensional_polytopes():
    segment = RationalPolytope.from_vertices([(0, 0), (1, 0)])
    with pytest.raises(NotFullDimensionalError):
        normal_fan(segment)


def test_incomplete_fan_is_rejected():
    with pytest.raises(ConstructionError):
        RationalFan(((1, 0), (0, 1), (-1, 0)), ((0, 1), (1, 2)), 2)


def test_overlapping_cones_are_rejected():
    rays = ((1, 0), (0, 1), (-1, -1), (1, 1))
    with pytest.raises(ConstructionError):
        RationalFan(rays, ((0, 1), (1, 2), (0, 2), (0, 3)), 2)


def test_common_refinement_with_itself_is_idempotent():
    refined = common_refinement(P2_FAN, P2_FAN)
    assert set(refined.rays) == set(P2_FAN.rays)
    assert len(refined.cones) == len(P2_FAN.cones)


def test_common_refinement_of_plane_and_quadrants():
    refined = common_refinement(P2_FAN, P1P1_FAN)
    assert set(refined.rays) == {(1, 0), (0, 1), (-1, 0), (0, -1), (-1, -1)}
    assert len(refined.cones) == 5
    assert refined.refines(P2_FAN)
    assert refined.refines(P1P1_FAN)


def test_common_refinement_with_a_dilated_simplex_changes_nothing():
    refined = common_refinement(P2_FAN, normal_fan(HALF_SIMPLEX))
    assert set(refined.rays) == set(P2_FAN.rays)
    assert len(refined.cones) == 3


# ── virtual support functions ─────────────────────────────────────────


def test_support_function_of_simplex_recovers_the_simplex():
    psi = VirtualSupportFunction.of_polytope(P2_FAN, SIMPLEX)
    assert psi.is_strictly_concave()
    assert set(psi.stability_set().vertices) == set(SIMPLEX.vertices)
    assert psi((1, 1)) == 0
    assert psi((-1, -1)) == -1


def test_incompatible_defining_vectors_are_rejected():
    vectors = tuple(vec(1, 0) if i == 0 else vec(0, 0) for i in range(len(P2_FAN.cones)))
    with pytest.raises(ConstructionError):
        VirtualSupportFunction(P2_FAN, vectors)


def test_linear_function_has_a_point_as_stability_set():
    psi = VirtualSupportFunction.linear(P2_FAN, vec(2, -1))
    assert psi.is_concave()
    assert not psi.is_strictly_concave()
    assert psi.stability_set().vertices == (vec(2, -1),)


def test_difference_of_support_functions_can_fail_concavity():
    psi = VirtualSupportFunction.of_polytope(P2_FAN, SIMPLEX)
    difference = VirtualSupportFunction.linear(P2_FAN, vec(0, 0)) - psi
    assert not difference.is_concave()
    assert difference.concavity_violation() is not None


def test_linear_combinations_stay_compatible():
    psi = VirtualSupportFunction.of_polytope(P2_FAN, SIMPLEX)
    combined = psi.scale(3) + psi.scale(Fraction(1, 2))
    assert set(combined.stability_set().vertices) == set(SIMPLEX.scale(Fraction(7, 2)).vertices)


def test_pullback_to_a_coarser_fan_fails():
    refined = common_refinement(P2_FAN, P1P1_FAN)
    psi = VirtualSupportFunction.of_polytope(refined, SQUARE)
    with pytest.raises(NotARefinementError):
        psi.pullback(P2_FAN)


def test_pullback_preserves_values():
    psi = VirtualSupportFunction.of_polytope(P2_FAN, SIMPLEX)
    refined = common_refinement(P2_FAN, P1P1_FAN)
    pulled = psi.pullback(refined)
    for u in [(1, 0), (-1, 0), (0, -1), (-3, -1), (2, 5)]:
        assert pulled(u) == psi(u)


# ── polytopes ─────────────────────────────────────────────────────────


def test_dual_description_of_simplex():
    polytope = RationalPolytope.from_halfspaces(
        [((1, 0), 0), ((0, 1), 0), ((-1, -1), -1)], 2
    )
    assert set(polytope.vertices) == {vec(0, 0), vec(1, 0), vec(0, 1)}


def test_dual_description_of_square_from_vertices():
    polytope = RationalPolytope.from_vertices([(0, 0), (2, 0), (0, 2), (2, 2), (1, 1)])
    assert set(polytope.halfspaces) == {
        ((1, 0), 0),
        ((-1, 0), -2),
        ((0, 1), 0),
        ((0, -1), -2),
    }
    assert dual_description(polytope) == polytope


def test_redundant_constraints_are_dropped():
    polytope = RationalPolytope.from_halfspaces(
        [((1, 0), 0), ((0, 1), 0), ((-1, -1), -1), ((-1, 0), -5)], 2
    )
    assert len(polytope.halfspaces) == 3


def test_unbounded_constraints_are_rejected():
    with pytest.raises(UnboundedPolyhedronError):
        RationalPolytope.from_halfspaces([((1, 0), 0), ((0, 1), 0), ((1, 1), 3)], 2)


def test_infeasible_constraints():
    halfspaces = [((1,), 1), ((-1,), 0)]
    with pytest.raises(EmptyPolytopeError):
        RationalPolytope.from_halfspaces(halfspaces, 1)
    assert RationalPolytope.from_halfspaces(halfspaces, 1, allow_empty=True).is_empty


def test_log_rational_offsets_are_compared_exactly():
    log2 = LogRational.log_prime(2)
    interval = RationalPolytope.from_halfspaces([((1,), -log2), ((-1,), -1)], 1)
    assert interval.vertices == ((-log2,), (Fraction(1),))
    assert interval.contains((Fraction(-69, 100),))
    assert not interval.contains((Fraction(-7, 10),))


def test_vertex_enumeration_with_many_constraints_is_exact():
    log2 = LogRational.log_prime(2)
    halfspaces = [((1, 0, 0), 0), ((0, 1, 0), 0), ((0, 0, 1), 0), ((0, -1, 0), -1), ((0, 0, -1), -1)]
    halfspaces += [((-1, 0, 0), -log2), ((-1, -1, -1), -2)]
    polytope = RationalPolytope.from_halfspaces(halfspaces, 3)
    one = Fraction(1)
    expected = [
        vec(0, 0, 0), vec(0, 1, 0), vec(0, 0, 1), vec(0, 1, 1),
        (log2, 0, 0), (log2, one, 0), (log2, 0, one),
        (log2, one, one - log2), (log2, one - log2, one),
    ]
    assert len(polytope.vertices) == len(expected)
    assert all(v in polytope.vertices for v in expected)
    assert len(polytope.halfspaces) == 7


def test_face_of_simplex():
    edge = SIMPLEX.face([(-1, -1)])
    assert set(edge.vertices) == {vec(1, 0), vec(0, 1)}
    assert edge.affine_dimension() == 1


@pytest.mark.parametrize(
    "polytope, face, expected",
    [
        pytest.param(SIMPLEX, None, Fraction(1, 2), id="simplex"),
        pytest.param(SIMPLEX, [(-1, -1)], Fraction(1), id="hypotenuse"),
        pytest.param(RationalPolytope.box([0, 0], [2, 3]), None, Fraction(6), id="box"),
        pytest.param(SIMPLEX, [(1, 0), (0, 1)], Fraction(1), id="vertex"),
        pytest.param(HALF_SIMPLEX, None, Fraction(1, 8), id="half-simplex"),
    ],
)
def test_lattice_volume(polytope, face, expected):
    assert lattice_volume(polytope, face) == expected


def test_lattice_volume_of_a_diagonal_segment_uses_the_induced_lattice():
    segment = RationalPolytope.from_vertices([(0, 0), (2, 2)])
    assert lattice_volume(segment) == 2


def test_simplex_outside_the_direction_lattice_is_rejected():
    segment = RationalPolytope.from_vertices([(0, 0), (2, 2)])
    with pytest.raises(FaceNotRationalDirectionError):
        segment.simplex_volume([(Fraction(0), Fraction(0)), (Fraction(0), Fraction(1))], [(1, 1)])


def test_triangulation_volumes_add_up():
    hexagon = RationalPolytope.from_vertices([(1, 0), (2, 0), (2, 1), (1, 2), (0, 2), (0, 1)])
    assert lattice_volume(hexagon) == 3
    assert all(len(s) == 3 for s in hexagon.simplices())


@pytest.mark.parametrize(
    "polytope, ell, expected",
    [
        pytest.param(SIMPLEX, 1, 3, id="simplex"),
        pytest.param(SIMPLEX, 2, 6, id="simplex-doubled"),
        pytest.param(HALF_SIMPLEX, 4, 6, id="half-simplex"),
    ],
)
def test_lattice_point_counts(polytope, ell, expected):
    assert len(lattice_points(polytope, ell)) == expected


def test_lattice_points_are_in_lexicographic_order():
    points = lattice_points(SIMPLEX, 1).tolist()
    assert points == [[0, 0], [0, 1], [1, 0]]


@pytest.mark.parametrize("ell", range(1, 51))
def test_simplex_point_counts_are_triangular_numbers(ell):
    assert len(lattice_points(SIMPLEX, ell)) == (ell + 1) * (ell + 2) // 2


def test_minkowski_sum_of_segments():
    a = RationalPolytope.box([0], [1])
    assert a.minkowski_sum(a).vertices == (vec(0), vec(2))


def test_minkowski_sum_of_simplex_and_square():
    total = SIMPLEX.minkowski_sum(SQUARE)
    assert set(total.vertices) == {vec(0, 0), vec(2, 0), vec(2, 1), vec(1, 2), vec(0, 2)}


# ── exact integration ─────────────────────────────────────────────────


def test_integral_of_constant_is_value_times_volume():
    f = PiecewiseAffineConcave.constant(Fraction(3), SIMPLEX)
    assert integrate_pa(SIMPLEX, f) == Fraction(3, 2)


def test_integral_of_halfplane_roof_over_its_region():
    f = PiecewiseAffineConcave((AffineForm(vec(-2, -2), Fraction(1)),))
    assert integrate_pa(HALF_SIMPLEX, f) == Fraction(1, 24)


def test_integral_of_tent_function():
    f = PiecewiseAffineConcave((AffineForm(vec(1), Fraction(0)), AffineForm(vec(-1), Fraction(1))))
    assert integrate_pa(RationalPolytope.box([0], [1]), f) == Fraction(1, 4)


def test_integral_with_log_offsets_stays_exact():
    log3 = LogRational.log_prime(3)
    f = PiecewiseAffineConcave.constant(log3, SIMPLEX)
    assert integrate_pa(SIMPLEX, f) == log3 * Fraction(1, 2)
