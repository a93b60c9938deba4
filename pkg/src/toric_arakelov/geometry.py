"""Lattices, rational fans, virtual support functions and rational polytopes.

Polytopes are stored with both representations: an H-representation
``⟨x, u_j⟩ ≥ γ_j`` with primitive integer normals ``u_j`` and scalar offsets
``γ_j`` (rational or log-rational), and the vertex list.  All predicates are
exact; offsets with log terms are compared through
:func:`~toric_arakelov.numerics.certified_compare`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from typing import TYPE_CHECKING, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .config import get_settings
from .errors import (
    BudgetExceededError,
    ConstructionError,
    EmptyPolytopeError,
    FaceNotRationalDirectionError,
    NotARefinementError,
    NotFullDimensionalError,
    UnboundedPolyhedronError,
)
from .linalg import (
    coordinates,
    det,
    lattice_basis,
    nullspace,
    primitive,
    rank,
    solve,
    to_fractions,
)
from .numerics import (
    ZERO,
    Ordering,
    Scalar,
    ceil_scalar,
    certified_compare,
    dot,
    floor_scalar,
    is_rational,
    scalar_max,
    scalar_min,
    to_float,
)

if TYPE_CHECKING:  # pragma: no cover
    from .convex import PiecewiseAffineConcave

_LOGGER = logging.getLogger(__name__)

IntVector = Tuple[int, ...]
Point = Tuple[Scalar, ...]
Halfspace = Tuple[IntVector, Scalar]


@dataclass(frozen=True, slots=True)
class Lattice:
    """The lattice ``N ≅ ℤⁿ``; ``M = N^∨`` is identified with ℤⁿ by the dual basis."""

    rank: int

    def __post_init__(self) -> None:
        if self.rank < 1:
            raise ConstructionError("lattice rank must be positive")

    def contains(self, vector: Sequence[object]) -> bool:
        return len(vector) == self.rank and all(
            is_rational(x) and Fraction(x).denominator == 1 for x in vector
        )

    def is_primitive(self, vector: Sequence[object]) -> bool:
        if not self.contains(vector) or not any(vector):
            return False
        g = 0
        for x in vector:
            g = math.gcd(g, int(x))
        return g == 1


# ── cones ──────────────────────────────────────────────────────────────


def _identity(n: int) -> List[Tuple[Fraction, ...]]:
    return [tuple(Fraction(int(i == j)) for j in range(n)) for i in range(n)]


@lru_cache(maxsize=8192)
def cone_generators(
    normals: Tuple[Tuple[Fraction, ...], ...], n: int
) -> Tuple[Tuple[IntVector, ...], Tuple[IntVector, ...]]:
    """Lineality basis and extreme rays of ``{d : ⟨a, d⟩ ≥ 0 for a in normals}``."""

    rows = [r for r in normals if any(r)]
    lineality = nullspace(rows, n) if rows else _identity(n)
    pointed_dim = n - len(lineality)
    rays = set()
    if pointed_dim > 0:
        for subset in combinations(range(len(rows)), pointed_dim - 1):
            system = [rows[i] for i in subset] + list(lineality)
            if rank(system) != n - 1:
                continue
            direction = nullspace(system, n)[0]
            values = [dot(a, direction) for a in rows]
            if all(v >= 0 for v in values):
                rays.add(primitive(direction))
            elif all(v <= 0 for v in values):
                rays.add(primitive([-x for x in direction]))
    return tuple(primitive(l) for l in lineality), tuple(sorted(rays))


def cone_halfspaces(generators: Sequence[Sequence[object]], n: int) -> Tuple[IntVector, ...]:
    """Normals ``h`` with ``cone(generators) = {u : ⟨h, u⟩ ≥ 0}``."""

    rows = tuple(tuple(to_fractions(g)) for g in generators)
    lineality, rays = cone_generators(rows, n)
    normals = list(rays)
    for l in lineality:
        normals.append(l)
        normals.append(tuple(-x for x in l))
    return tuple(normals)


def _in_cone(normals: Sequence[IntVector], u: Sequence[Scalar]) -> bool:
    return all(dot(h, u) >= 0 for h in normals)


@dataclass(frozen=True, slots=True)
class Cone:
    """A rational polyhedral cone given by primitive integer generators."""

    generators: Tuple[IntVector, ...]
    ambient_dim: int

    @property
    def dimension(self) -> int:
        return rank(self.generators) if self.generators else 0

    def halfspaces(self) -> Tuple[IntVector, ...]:
        return cone_halfspaces(self.generators, self.ambient_dim)

    def contains(self, u: Sequence[Scalar]) -> bool:
        return _in_cone(self.halfspaces(), u)

    def interior_point(self) -> IntVector:
        return tuple(sum(g[i] for g in self.generators) for i in range(self.ambient_dim))


# ── fans ───────────────────────────────────────────────────────────────


@dataclass(frozen=True, slots=True)
class RationalFan:
    """A complete fan given by primitive rays and maximal cones (ray indices)."""

    rays: Tuple[IntVector, ...]
    cones: Tuple[Tuple[int, ...], ...]
    ambient_dim: int
    check: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self) -> None:
        lattice = Lattice(self.ambient_dim)
        for ray in self.rays:
            if not lattice.is_primitive(ray):
                raise ConstructionError(f"fan ray {ray} is not a primitive lattice vector")
        if len(set(self.rays)) != len(self.rays):
            raise ConstructionError("fan rays must be distinct")
        for cone in self.cones:
            if not cone or any(i < 0 or i >= len(self.rays) for i in cone):
                raise ConstructionError(f"cone {cone} references unknown rays")
        if self.check:
            self._validate_complete()

    def _validate_complete(self) -> None:
        n = self.ambient_dim
        for idx, cone in enumerate(self.cones):
            if self.cone(idx).dimension != n:
                raise ConstructionError(f"maximal cone {cone} is not full-dimensional")
        for i, j in combinations(range(len(self.cones)), 2):
            normals = self.cone(i).halfspaces() + self.cone(j).halfspaces()
            lineality, rays = cone_generators(tuple(tuple(map(Fraction, h)) for h in normals), n)
            if rank(list(rays) + list(lineality)) == n:
                raise ConstructionError(
                    f"cones {self.cones[i]} and {self.cones[j]} overlap in their interiors"
                )
        # every facet of a maximal cone must be shared by exactly two maximal cones
        counts: Dict[FrozenSet[int], int] = {}
        for idx in range(len(self.cones)):
            for facet in self.facets(idx):
                counts[facet] = counts.get(facet, 0) + 1
        open_facets = [sorted(f) for f, c in counts.items() if c != 2]
        if open_facets:
            raise ConstructionError(f"fan is not complete: boundary facets {open_facets}")

    def cone(self, index: int) -> Cone:
        return Cone(tuple(self.rays[i] for i in self.cones[index]), self.ambient_dim)

    def facets(self, index: int) -> List[FrozenSet[int]]:
        """Facets of a maximal cone, as sets of ray indices."""

        cone = self.cones[index]
        out = []
        for h in self.cone(index).halfspaces():
            on = frozenset(i for i in cone if dot(h, self.rays[i]) == 0)
            gens = [self.rays[i] for i in on]
            if (rank(gens) if gens else 0) == self.ambient_dim - 1 and on not in out:
                out.append(on)
        return out

    def locate(self, u: Sequence[Scalar]) -> int:
        """Index of the first maximal cone containing *u*."""

        for idx in range(len(self.cones)):
            if self.cone(idx).contains(u):
                return idx
        raise ConstructionError(f"no cone of the fan contains {tuple(u)}")

    def containing_cone(self, generators: Sequence[IntVector]) -> Optional[int]:
        """Index of a maximal cone containing every vector in *generators*."""

        for idx in range(len(self.cones)):
            normals = self.cone(idx).halfspaces()
            if all(_in_cone(normals, g) for g in generators):
                return idx
        return None

    def refines(self, other: "RationalFan") -> bool:
        return all(
            other.containing_cone(self.cone(i).generators) is not None
            for i in range(len(self.cones))
        )

    def ray_index(self, ray: Sequence[int]) -> int:
        return self.rays.index(tuple(ray))


def fan_from_cones(cone_list: Iterable[Sequence[IntVector]], n: int) -> RationalFan:
    """Assemble a fan from maximal cones given by their generators."""

    rays: List[IntVector] = []
    cones: List[Tuple[int, ...]] = []
    for generators in cone_list:
        indices = []
        for g in generators:
            g = tuple(g)
            if g not in rays:
                rays.append(g)
            indices.append(rays.index(g))
        key = tuple(sorted(indices))
        if key not in cones:
            cones.append(key)
    order = sorted(range(len(rays)), key=lambda i: rays[i])
    remap = {old: new for new, old in enumerate(order)}
    sorted_rays = tuple(rays[i] for i in order)
    sorted_cones = tuple(sorted(tuple(sorted(remap[i] for i in c)) for c in cones))
    return RationalFan(sorted_rays, sorted_cones, n, check=False)


def _refine(
    cones_a: Sequence[Tuple[IntVector, ...]], cones_b: Sequence[Tuple[IntVector, ...]], n: int
) -> RationalFan:
    pieces = []
    for ha in cones_a:
        for hb in cones_b:
            normals = tuple(tuple(map(Fraction, h)) for h in tuple(ha) + tuple(hb))
            lineality, rays = cone_generators(normals, n)
            if lineality:
                raise ConstructionError("refinement produced a cone with a lineality space")
            if rays and rank(rays) == n:
                pieces.append(rays)
    return fan_from_cones(pieces, n)


def common_refinement(first: RationalFan, second: RationalFan) -> RationalFan:
    """Coarsest complete fan refining both; cones are pairwise intersections."""

    if first.ambient_dim != second.ambient_dim:
        raise ConstructionError("fans live in lattices of different rank")
    cones_a = [first.cone(i).halfspaces() for i in range(len(first.cones))]
    cones_b = [second.cone(i).halfspaces() for i in range(len(second.cones))]
    return _refine(cones_a, cones_b, first.ambient_dim)


def refine_by_polytope(fan: RationalFan, polytope: "RationalPolytope") -> RationalFan:
    """Refine *fan* so the support function of *polytope* is linear on every cone.

    The polytope may be lower-dimensional; its normal cones then contain lines
    and only the intersections with the (pointed) cones of *fan* survive.
    """

    cones_a = [fan.cone(i).halfspaces() for i in range(len(fan.cones))]
    cones_b = [cone_halfspaces(g, fan.ambient_dim) for g in polytope.normal_cone_generators()]
    return _refine(cones_a, cones_b, fan.ambient_dim)


# ── virtual support functions ──────────────────────────────────────────


@dataclass(frozen=True, slots=True)
class VirtualSupportFunction:
    """A function linear on each maximal cone: ``Ψ(u) = ⟨m_σ, u⟩`` for ``u ∈ σ``."""

    fan: RationalFan
    vectors: Tuple[Point, ...]

    def __post_init__(self) -> None:
        if len(self.vectors) != len(self.fan.cones):
            raise ConstructionError("need exactly one defining vector per maximal cone")
        n = self.fan.ambient_dim
        for vec in self.vectors:
            if len(vec) != n:
                raise ConstructionError(f"defining vector {vec} has wrong dimension")
        for i, j in combinations(range(len(self.fan.cones)), 2):
            shared = set(self.fan.cones[i]) & set(self.fan.cones[j])
            diff = [a - b for a, b in zip(self.vectors[i], self.vectors[j])]
            for r in shared:
                if dot(diff, self.fan.rays[r]) != 0:
                    raise ConstructionError(
                        f"defining vectors of cones {self.fan.cones[i]} and "
                        f"{self.fan.cones[j]} disagree on ray {self.fan.rays[r]}"
                    )

    @property
    def ambient_dim(self) -> int:
        return self.fan.ambient_dim

    def __call__(self, u: Sequence[Scalar]) -> Scalar:
        return dot(self.vectors[self.fan.locate(u)], u)

    def ray_value(self, ray_index: int) -> Scalar:
        for idx, cone in enumerate(self.fan.cones):
            if ray_index in cone:
                return dot(self.vectors[idx], self.fan.rays[ray_index])
        raise ConstructionError(f"ray {ray_index} lies in no maximal cone")

    def stability_set(self) -> "RationalPolytope":
        """``{x : ⟨x, ρ⟩ ≥ Ψ(ρ)}`` over the rays; the divisor polytope."""

        halfspaces = [(ray, self.ray_value(k)) for k, ray in enumerate(self.fan.rays)]
        return RationalPolytope.from_halfspaces(halfspaces, self.ambient_dim, allow_empty=True)

    def concavity_violation(self) -> Optional[Tuple[int, int, IntVector]]:
        """A ``(σ, τ, ρ)`` with ``⟨m_τ, ρ⟩ < ⟨m_σ, ρ⟩`` for a ray ρ of σ, or None."""

        for i, cone in enumerate(self.fan.cones):
            for j in range(len(self.fan.cones)):
                if i == j:
                    continue
                diff = [a - b for a, b in zip(self.vectors[j], self.vectors[i])]
                for r in cone:
                    if dot(diff, self.fan.rays[r]) < 0:
                        return i, j, self.fan.rays[r]
        return None

    def is_concave(self) -> bool:
        return self.concavity_violation() is None

    def strict_concavity_witness(self) -> Tuple[bool, Optional[Tuple[int, int]]]:
        """Strict concavity: concave and ``⟨m_τ − m_σ, u_σ⟩ > 0`` for all σ ≠ τ."""

        violation = self.concavity_violation()
        if violation is not None:
            return False, violation[:2]
        for i in range(len(self.fan.cones)):
            u = self.fan.cone(i).interior_point()
            for j in range(len(self.fan.cones)):
                if i == j:
                    continue
                diff = [a - b for a, b in zip(self.vectors[j], self.vectors[i])]
                if dot(diff, u) <= 0:
                    return False, (i, j)
        return True, None

    def is_strictly_concave(self) -> bool:
        return self.strict_concavity_witness()[0]

    def _combine(self, other: "VirtualSupportFunction", a: Scalar, b: Scalar) -> "VirtualSupportFunction":
        if other.fan != self.fan:
            fan = common_refinement(self.fan, other.fan)
            return self.pullback(fan)._combine(other.pullback(fan), a, b)
        vectors = tuple(
            tuple(a * x + b * y for x, y in zip(u, v)) for u, v in zip(self.vectors, other.vectors)
        )
        return VirtualSupportFunction(self.fan, vectors)

    def __add__(self, other: "VirtualSupportFunction") -> "VirtualSupportFunction":
        return self._combine(other, Fraction(1), Fraction(1))

    def __sub__(self, other: "VirtualSupportFunction") -> "VirtualSupportFunction":
        return self._combine(other, Fraction(1), Fraction(-1))

    def scale(self, factor: object) -> "VirtualSupportFunction":
        k = Fraction(factor)
        return VirtualSupportFunction(self.fan, tuple(tuple(k * x for x in v) for v in self.vectors))

    def pullback(self, fan: RationalFan) -> "VirtualSupportFunction":
        """Re-express on a refinement of the current fan."""

        if fan == self.fan:
            return self
        vectors = []
        for idx in range(len(fan.cones)):
            home = self.fan.containing_cone(fan.cone(idx).generators)
            if home is None:
                raise NotARefinementError(
                    f"cone {fan.cones[idx]} of the new fan lies in no cone of the old fan"
                )
            vectors.append(self.vectors[home])
        return VirtualSupportFunction(fan, tuple(vectors))

    def translate(self, a: Sequence[Scalar]) -> "VirtualSupportFunction":
        """``Ψ − ⟨a, ·⟩``."""

        return VirtualSupportFunction(
            self.fan, tuple(tuple(x - y for x, y in zip(v, a)) for v in self.vectors)
        )

    @classmethod
    def linear(cls, fan: RationalFan, m: Sequence[Scalar]) -> "VirtualSupportFunction":
        return cls(fan, tuple(tuple(m) for _ in fan.cones))

    @classmethod
    def of_polytope(cls, fan: RationalFan, polytope: "RationalPolytope") -> "VirtualSupportFunction":
        """Support function ``u ↦ min_{x∈P} ⟨x,u⟩`` on a fan where it is linear."""

        vectors = []
        for idx in range(len(fan.cones)):
            cone = fan.cone(idx)
            u = cone.interior_point()
            best = min(
                range(len(polytope.vertices)),
                key=lambda k: _SortKey(dot(polytope.vertices[k], u)),
            )
            vertex = polytope.vertices[best]
            for g in cone.generators:
                if dot(vertex, g) != polytope.support(g):
                    raise NotARefinementError(
                        "the fan does not refine the normal fan of the polytope"
                    )
            vectors.append(vertex)
        return cls(fan, tuple(vectors))


class _SortKey:
    """Total order on scalars through certified comparison."""

    __slots__ = ("value",)

    def __init__(self, value: Scalar) -> None:
        self.value = value

    def __lt__(self, other: "_SortKey") -> bool:
        return certified_compare(self.value, other.value) is Ordering.LESS


# ── polyhedra ──────────────────────────────────────────────────────────


def _canonical_halfspace(normal: Sequence[object], offset: Scalar) -> Optional[Halfspace]:
    values = to_fractions(normal)
    if not any(values):
        return None
    prim = primitive(values)
    # u = s·prim with s > 0
    k = next(i for i, x in enumerate(prim) if x != 0)
    s = values[k] / prim[k]
    return prim, offset * (1 / s)


def tighten_halfspaces(halfspaces: Iterable[Tuple[Sequence[object], Scalar]]) -> Tuple[List[Halfspace], bool]:
    """Canonicalize and deduplicate; report infeasibility of ``0 ≥ γ`` rows."""

    best: Dict[IntVector, Scalar] = {}
    order: List[IntVector] = []
    feasible = True
    for normal, offset in halfspaces:
        canon = _canonical_halfspace(normal, offset)
        if canon is None:
            if offset > 0:
                feasible = False
            continue
        prim, gamma = canon
        if prim not in best:
            order.append(prim)
            best[prim] = gamma
        elif certified_compare(gamma, best[prim]) is Ordering.GREATER:
            best[prim] = gamma
    return [(p, best[p]) for p in order], feasible


# Subsets below this |det| skip the float prefilter and go straight to exact rank tests.
_DET_FLOOR = 1e-6
_FEASIBILITY_SLACK = 1e-7
_PREFILTER_MIN_SUBSETS = 32


def _candidate_subsets(
    normals: Sequence[Tuple[Fraction, ...]],
    halfspaces: Sequence[Halfspace],
    lineality: Sequence[Tuple[Fraction, ...]],
    subsets: List[Tuple[int, ...]],
) -> List[Tuple[int, ...]]:
    """Drop subsets whose float intersection point clearly violates a constraint."""

    if len(subsets) < _PREFILTER_MIN_SUBSETS or not subsets[0]:
        return subsets
    a = np.array([[float(x) for x in u] for u in normals], dtype=float)
    b = np.array([to_float(g) for _, g in halfspaces], dtype=float)
    index = np.array(subsets, dtype=int)
    rows = a[index]
    rhs = b[index]
    if lineality:
        extra = np.array([[float(x) for x in l] for l in lineality], dtype=float)
        rows = np.concatenate([rows, np.broadcast_to(extra, (len(subsets),) + extra.shape)], axis=1)
        rhs = np.concatenate([rhs, np.zeros((len(subsets), len(lineality)))], axis=1)
    regular = np.abs(np.linalg.det(rows)) >= _DET_FLOOR
    keep = ~regular
    if regular.any():
        points = np.linalg.solve(rows[regular], rhs[regular][..., None])[..., 0]
        slack = points @ a.T - b
        scale = 1.0 + np.abs(b) + np.abs(points) @ np.abs(a).T
        keep[regular] = np.all(slack >= -_FEASIBILITY_SLACK * scale, axis=1)
    return [subset for subset, ok in zip(subsets, keep) if ok]


def polyhedron_vertices(
    halfspaces: Sequence[Halfspace], n: int
) -> Tuple[List[Point], List[Tuple[Fraction, ...]]]:
    """Vertices of ``P ∩ L^⊥`` and a basis of the lineality space ``L``.

    A float solve screens the candidate subsets; every reported vertex is
    solved and checked exactly.
    """

    normals = [tuple(map(Fraction, u)) for u, _ in halfspaces]
    lineality = nullspace(normals, n) if normals else _identity(n)
    k = n - len(lineality)
    vertices: List[Point] = []
    subsets = list(combinations(range(len(halfspaces)), k))
    for subset in _candidate_subsets(normals, halfspaces, lineality, subsets):
        rows = [normals[i] for i in subset] + list(lineality)
        rhs = [halfspaces[i][1] for i in subset] + [ZERO] * len(lineality)
        if rank(rows) != n:
            continue
        point = solve(rows, rhs)
        if point is None:
            continue
        if all(dot(u, point) >= g for u, g in halfspaces) and point not in vertices:
            vertices.append(point)
    return vertices, lineality


def polyhedron_rays(halfspaces: Sequence[Halfspace], n: int) -> Tuple[Tuple[IntVector, ...], Tuple[IntVector, ...]]:
    """Lineality basis and extreme rays of the recession cone."""

    return cone_generators(tuple(tuple(map(Fraction, u)) for u, _ in halfspaces), n)


def polyhedron_interior_point(halfspaces: Sequence[Halfspace], n: int) -> Optional[Point]:
    """A relative-interior point: vertex centroid plus the sum of extreme rays."""

    vertices, _ = polyhedron_vertices(halfspaces, n)
    if not vertices:
        return None
    _, rays = polyhedron_rays(halfspaces, n)
    centre = [sum((v[i] for v in vertices), ZERO) * Fraction(1, len(vertices)) for i in range(n)]
    for ray in rays:
        centre = [c + r for c, r in zip(centre, ray)]
    return tuple(centre)


def _sorted_points(points: List[Point]) -> List[Point]:
    if all(is_rational(x) for p in points for x in p):
        return sorted(points)
    return points


@dataclass(frozen=True, slots=True)
class RationalPolytope:
    """A bounded polytope ``{x : ⟨x, u_j⟩ ≥ γ_j}`` with its vertex list.

    An empty polytope has no halfspaces and no vertices.
    """

    ambient_dim: int
    halfspaces: Tuple[Halfspace, ...]
    vertices: Tuple[Point, ...]

    # construction ---------------------------------------------------------

    @classmethod
    def empty(cls, n: int) -> "RationalPolytope":
        return cls(n, (), ())

    @classmethod
    def from_halfspaces(
        cls,
        halfspaces: Iterable[Tuple[Sequence[object], Scalar]],
        n: int,
        *,
        allow_empty: bool = False,
    ) -> "RationalPolytope":
        """Exact vertex enumeration with redundant constraints removed.

        Raises :class:`UnboundedPolyhedronError` for unbounded input and
        :class:`EmptyPolytopeError` for infeasible input unless *allow_empty*.
        """

        rows, feasible = tighten_halfspaces(halfspaces)
        if not feasible:
            return cls._empty_or_raise(n, allow_empty)
        vertices, lineality = polyhedron_vertices(rows, n)
        if lineality:
            if vertices:
                raise UnboundedPolyhedronError("the constraints leave a line free")
            return cls._empty_or_raise(n, allow_empty)
        if not vertices:
            return cls._empty_or_raise(n, allow_empty)
        _, rays = polyhedron_rays(rows, n)
        if rays:
            raise UnboundedPolyhedronError(f"recession direction {rays[0]}")
        return cls(n, _irredundant(rows, vertices, n), tuple(_sorted_points(vertices)))

    @staticmethod
    def _empty_or_raise(n: int, allow_empty: bool) -> "RationalPolytope":
        if allow_empty:
            return RationalPolytope.empty(n)
        raise EmptyPolytopeError("the constraints are infeasible")

    @classmethod
    def from_vertices(cls, points: Iterable[Sequence[object]]) -> "RationalPolytope":
        """Convex hull of rational points."""

        pts = []
        for p in points:
            q = tuple(to_fractions(p))
            if q not in pts:
                pts.append(q)
        if not pts:
            raise EmptyPolytopeError("no points given")
        n = len(pts[0])
        base = pts[0]
        diffs = [tuple(a - b for a, b in zip(p, base)) for p in pts[1:]]
        equalities = nullspace(diffs, n) if diffs else _identity(n)
        halfspaces: List[Tuple[Sequence[object], Scalar]] = []
        for e in equalities:
            value = dot(e, base)
            halfspaces.append((e, value))
            halfspaces.append((tuple(-x for x in e), -value))
        d = n - len(equalities)
        if d > 0:
            directions = [r for r in nullspace(list(equalities), n)] if equalities else _identity(n)
            for subset in combinations(range(len(pts)), d):
                anchor = pts[subset[0]]
                rows = [
                    [dot(D, [a - b for a, b in zip(pts[i], anchor)]) for D in directions]
                    for i in subset[1:]
                ]
                coeffs = nullspace(rows, d) if rows else _identity(d)
                if len(coeffs) != 1:
                    continue
                normal = [sum((c * D[i] for c, D in zip(coeffs[0], directions)), ZERO) for i in range(n)]
                gamma = dot(normal, anchor)
                values = [dot(normal, p) - gamma for p in pts]
                if all(v >= 0 for v in values):
                    halfspaces.append((normal, gamma))
                elif all(v <= 0 for v in values):
                    halfspaces.append(([-x for x in normal], -gamma))
        return cls.from_halfspaces(halfspaces, n)

    @classmethod
    def box(cls, lows: Sequence[object], highs: Sequence[object]) -> "RationalPolytope":
        n = len(lows)
        halfspaces = []
        for i, (lo, hi) in enumerate(zip(lows, highs)):
            e = tuple(int(i == j) for j in range(n))
            halfspaces.append((e, Fraction(lo)))
            halfspaces.append((tuple(-x for x in e), -Fraction(hi)))
        return cls.from_halfspaces(halfspaces, n)

    @classmethod
    def standard_simplex(cls, n: int) -> "RationalPolytope":
        points = [tuple(Fraction(0) for _ in range(n))]
        points += [tuple(Fraction(int(i == j)) for j in range(n)) for i in range(n)]
        return cls.from_vertices(points)

    # predicates -----------------------------------------------------------

    @property
    def is_empty(self) -> bool:
        return not self.vertices

    def contains(self, x: Sequence[Scalar]) -> bool:
        if self.is_empty:
            return False
        return all(dot(u, x) >= g for u, g in self.halfspaces)

    def contains_strictly(self, x: Sequence[Scalar]) -> bool:
        """Interior membership (relative to the ambient space)."""

        return not self.is_empty and all(dot(u, x) > g for u, g in self.halfspaces)

    def equality_normals(self) -> List[IntVector]:
        return [u for u, g in self.halfspaces if all(dot(u, v) == g for v in self.vertices)]

    def affine_dimension(self) -> int:
        if self.is_empty:
            return -1
        eq = self.equality_normals()
        return self.ambient_dim - (rank(eq) if eq else 0)

    def is_full_dimensional(self) -> bool:
        return self.affine_dimension() == self.ambient_dim

    def has_rational_vertices(self) -> bool:
        return all(is_rational(x) for v in self.vertices for x in v)

    def support(self, u: Sequence[object]) -> Scalar:
        """``min_{x ∈ P} ⟨x, u⟩``."""

        if self.is_empty:
            raise EmptyPolytopeError("support function of the empty polytope")
        return scalar_min(dot(v, u) for v in self.vertices)

    def centroid(self) -> Point:
        k = Fraction(1, len(self.vertices))
        return tuple(
            sum((v[i] for v in self.vertices), ZERO) * k for i in range(self.ambient_dim)
        )

    # transformations ------------------------------------------------------

    def face(self, directions: Sequence[Sequence[object]]) -> "RationalPolytope":
        """The face minimizing every direction in *directions* simultaneously."""

        halfspaces = list(self.halfspaces)
        for d in directions:
            value = self.support(d)
            halfspaces.append((tuple(-Fraction(x) for x in d), -value))
        return RationalPolytope.from_halfspaces(halfspaces, self.ambient_dim, allow_empty=True)

    def intersect(self, halfspaces: Iterable[Tuple[Sequence[object], Scalar]]) -> "RationalPolytope":
        return RationalPolytope.from_halfspaces(
            list(self.halfspaces) + list(halfspaces), self.ambient_dim, allow_empty=True
        )

    def translate(self, a: Sequence[Scalar]) -> "RationalPolytope":
        if self.is_empty:
            return self
        return RationalPolytope(
            self.ambient_dim,
            tuple((u, g + dot(u, a)) for u, g in self.halfspaces),
            tuple(tuple(x + y for x, y in zip(v, a)) for v in self.vertices),
        )

    def scale(self, factor: object) -> "RationalPolytope":
        k = Fraction(factor)
        if k <= 0:
            raise ValueError("scale factor must be positive")
        return RationalPolytope(
            self.ambient_dim,
            tuple((u, g * k) for u, g in self.halfspaces),
            tuple(tuple(x * k for x in v) for v in self.vertices),
        )

    def shrink_towards(self, centre: Sequence[Scalar], factor: object) -> "RationalPolytope":
        """``centre + factor·(P − centre)``."""

        neg = tuple(-x for x in centre)
        return self.translate(neg).scale(factor).translate(centre)

    def normal_cone_generators(self) -> List[Tuple[IntVector, ...]]:
        """Generators of the inner normal cone at each vertex (lines as ± pairs)."""

        out = []
        for v in self.vertices:
            gens = [u for u, g in self.halfspaces if dot(u, v) == g]
            out.append(tuple(gens))
        return out

    def minkowski_sum(self, other: "RationalPolytope") -> "RationalPolytope":
        """Minkowski sum via support values on the rays of the common normal refinement."""

        if self.is_empty or other.is_empty:
            return RationalPolytope.empty(self.ambient_dim)
        n = self.ambient_dim
        cones_a = [cone_halfspaces(g, n) for g in self.normal_cone_generators()]
        cones_b = [cone_halfspaces(g, n) for g in other.normal_cone_generators()]
        directions = set()
        for ha in cones_a:
            for hb in cones_b:
                normals = tuple(tuple(map(Fraction, h)) for h in tuple(ha) + tuple(hb))
                lineality, rays = cone_generators(normals, n)
                directions.update(rays)
                for l in lineality:
                    directions.add(l)
                    directions.add(tuple(-x for x in l))
        halfspaces = [(d, self.support(d) + other.support(d)) for d in sorted(directions)]
        return RationalPolytope.from_halfspaces(halfspaces, n)

    # combinatorics --------------------------------------------------------

    def _tight_sets(self) -> List[FrozenSet[int]]:
        return [
            frozenset(j for j, (u, g) in enumerate(self.halfspaces) if dot(u, v) == g)
            for v in self.vertices
        ]

    def triangulate(self) -> List[Tuple[int, ...]]:
        """Pulling triangulation from the smallest-index vertex, recursively on facets.

        Returns simplices as tuples of vertex indices; each simplex has
        ``affine_dimension() + 1`` vertices.
        """

        if self.is_empty:
            return []
        tight = self._tight_sets()
        cache: Dict[FrozenSet[int], int] = {}

        def face_dim(face: FrozenSet[int]) -> int:
            if face not in cache:
                common = frozenset.intersection(*(tight[v] for v in face))
                normals = [self.halfspaces[j][0] for j in common]
                cache[face] = self.ambient_dim - (rank(normals) if normals else 0)
            return cache[face]

        def subfaces(face: FrozenSet[int], d: int) -> List[FrozenSet[int]]:
            common = frozenset.intersection(*(tight[v] for v in face))
            found = []
            for j in sorted(frozenset.union(*(tight[v] for v in face)) - common):
                sub = frozenset(v for v in face if j in tight[v])
                if sub and sub not in found and face_dim(sub) == d - 1:
                    found.append(sub)
            return sorted(found, key=sorted)

        def pull(face: FrozenSet[int], d: int) -> List[Tuple[int, ...]]:
            apex = min(face)
            if d == 0:
                return [(apex,)]
            out = []
            for sub in subfaces(face, d):
                if apex in sub:
                    continue
                out.extend(s + (apex,) for s in pull(sub, d - 1))
            return out

        everything = frozenset(range(len(self.vertices)))
        return pull(everything, face_dim(everything))

    def direction_lattice(self) -> List[IntVector]:
        """Lattice basis of the direction space of the affine hull."""

        eq = self.equality_normals()
        directions = nullspace(eq, self.ambient_dim) if eq else _identity(self.ambient_dim)
        if not directions:
            return []
        return lattice_basis(directions, self.ambient_dim)

    def simplex_volume(self, simplex: Sequence[Point], basis: Sequence[IntVector]) -> Union[Fraction, float]:
        d = len(simplex) - 1
        if d == 0:
            return Fraction(1)
        base = simplex[0]
        rows = []
        for v in simplex[1:]:
            coords = coordinates(basis, [a - b for a, b in zip(v, base)])
            if coords is None:
                raise FaceNotRationalDirectionError("the face spans a direction outside its rational lattice")
            rows.append(coords)
        if all(is_rational(x) for r in rows for x in r):
            return abs(det(rows)) / math.factorial(d)
        array = np.array([[float(x) for x in r] for r in rows], dtype=float)
        return abs(float(np.linalg.det(array))) / math.factorial(d)

    def simplices(self) -> List[Tuple[Point, ...]]:
        return [tuple(self.vertices[i] for i in s) for s in self.triangulate()]


def _irredundant(rows: List[Halfspace], vertices: List[Point], n: int) -> Tuple[Halfspace, ...]:
    tight = [frozenset(j for j, (u, g) in enumerate(rows) if dot(u, v) == g) for v in vertices]
    everything = frozenset.intersection(*tight)
    equalities = [rows[j][0] for j in sorted(everything)]
    eq_rank = rank(equalities) if equalities else 0
    d = n - eq_rank
    kept: List[Halfspace] = []
    basis: List[IntVector] = []
    for j in sorted(everything):
        u, g = rows[j]
        if rank(basis + [u]) > len(basis):
            basis.append(u)
            kept.append((u, g))
            kept.append((tuple(-x for x in u), -g))
    for j, (u, g) in enumerate(rows):
        if j in everything:
            continue
        on = [v for v, t in zip(range(len(vertices)), tight) if j in t]
        if not on:
            continue
        common = frozenset.intersection(*(tight[v] for v in on))
        normals = [rows[k][0] for k in common]
        if n - rank(normals) == d - 1:
            kept.append((u, g))
    return tuple(_dedupe(kept))


def _dedupe(halfspaces: List[Halfspace]) -> List[Halfspace]:
    out: List[Halfspace] = []
    for h in halfspaces:
        if h not in out:
            out.append(h)
    return out


# ── top-level operations ───────────────────────────────────────────────


def normal_fan(polytope: RationalPolytope) -> RationalFan:
    """Complete fan of inner normal cones at the vertices of a full-dimensional polytope."""

    if polytope.is_empty or not polytope.is_full_dimensional():
        raise NotFullDimensionalError("normal fan needs a full-dimensional polytope")
    n = polytope.ambient_dim
    pieces = [tuple(sorted(set(g))) for g in polytope.normal_cone_generators()]
    return fan_from_cones(pieces, n)


def dual_description(polytope: RationalPolytope) -> RationalPolytope:
    """Recompute both representations from the H-representation."""

    if polytope.is_empty:
        return polytope
    if not polytope.halfspaces:
        return RationalPolytope.from_vertices(polytope.vertices)
    return RationalPolytope.from_halfspaces(polytope.halfspaces, polytope.ambient_dim)


def lattice_volume(
    polytope: RationalPolytope, face: Optional[Sequence[Sequence[object]]] = None
) -> Union[Fraction, float]:
    """Volume normalized by the induced lattice of the affine hull.

    *face* is an optional list of directions (for example the rays of a cone);
    the volume is then taken over the face they expose.  Results are exact
    Fractions for rational vertices and floats otherwise.
    """

    target = polytope.face(face) if face else polytope
    if target.is_empty:
        return Fraction(0)
    basis = target.direction_lattice()
    total: Union[Fraction, float] = Fraction(0)
    for simplex in target.simplices():
        total = total + target.simplex_volume(simplex, basis)
    return total


def lattice_points(polytope: RationalPolytope, ell: int = 1) -> np.ndarray:
    """Integer points of ``ℓ·P`` in lexicographic order, as an ``(k, n)`` array."""

    n = polytope.ambient_dim
    if polytope.is_empty:
        return np.zeros((0, n), dtype=np.int64)
    if ell < 1:
        raise ValueError("scale must be a positive integer")
    lows = [ceil_scalar(scalar_min(v[i] for v in polytope.vertices) * ell) for i in range(n)]
    highs = [floor_scalar(scalar_max(v[i] for v in polytope.vertices) * ell) for i in range(n)]
    if any(h < l for l, h in zip(lows, highs)):
        return np.zeros((0, n), dtype=np.int64)
    size = math.prod(h - l + 1 for l, h in zip(lows, highs))
    if size > get_settings().lattice_point_cap:
        raise BudgetExceededError(f"bounding box holds {size} candidate points")
    axes = [np.arange(l, h + 1, dtype=np.int64) for l, h in zip(lows, highs)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    keep = np.ones(len(grid), dtype=bool)
    for u, g in polytope.halfspaces:
        bound = ceil_scalar(g * ell)
        keep &= grid @ np.asarray(u, dtype=np.int64) >= bound
    return grid[keep]


def integrate_pa(polytope: RationalPolytope, f: "PiecewiseAffineConcave") -> Union[Scalar, float]:
    """Exact integral of a min-of-forms function over a polytope.

    The polytope is split into the regions where each form is minimal; each
    region is triangulated and every simplex contributes volume × value at
    its centroid.  The measure is the lattice-normalized one of the affine
    hull of *polytope*.  Slopes must be rational.
    """

    if polytope.is_empty:
        return Fraction(0)
    d = polytope.affine_dimension()
    total: Union[Scalar, float] = Fraction(0)
    for region, form in f.regions(polytope):
        if region.affine_dimension() != d:
            continue
        basis = region.direction_lattice()
        for simplex in region.simplices():
            volume = region.simplex_volume(simplex, basis)
            centre = tuple(
                sum((v[i] for v in simplex), ZERO) * Fraction(1, len(simplex))
                for i in range(polytope.ambient_dim)
            )
            value = form.evaluate(centre)
            if isinstance(volume, float) or isinstance(total, float):
                total = float(total) + volume * float(value)
            else:
                total = total + value * volume
    return total


__all__ = [
    "Cone",
    "Halfspace",
    "IntVector",
    "Lattice",
    "Point",
    "RationalFan",
    "RationalPolytope",
    "VirtualSupportFunction",
    "common_refinement",
    "cone_generators",
    "cone_halfspaces",
    "dual_description",
    "fan_from_cones",
    "integrate_pa",
    "lattice_points",
    "lattice_volume",
    "normal_fan",
    "polyhedron_interior_point",
    "polyhedron_rays",
    "polyhedron_vertices",
    "refine_by_polytope",
    "tighten_halfspaces",
]
