"""Piecewise-affine and oracle concave functions and their Legendre duality.

Concave functions are stored as a minimum of affine forms; general
(possibly non-concave) piecewise-affine functions carry an explicit cell
complex.  Duals of piecewise-affine data are computed exactly: the infimum
of ``⟨x, u⟩ − f(u)`` over a cell is attained at one of its vertices, so the
dual is the minimum of the forms ``x ↦ ⟨x, v⟩ − f(v)`` over all cell vertices.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import optimize

from .config import get_settings
from .errors import (
    BudgetExceededError,
    ConstructionError,
    EmptyStabilitySetError,
    NotInStabilitySetError,
    NotRepresentableError,
    OraclePathUnsupportedError,
    PointOutsidePolytopeError,
)
from .geometry import (
    Halfspace,
    Point,
    RationalPolytope,
    VirtualSupportFunction,
    polyhedron_interior_point,
    polyhedron_rays,
    polyhedron_vertices,
    tighten_halfspaces,
)
from .numerics import (
    ZERO,
    Scalar,
    dot,
    is_rational,
    scalar_min,
    to_float,
)

_LOGGER = logging.getLogger(__name__)

ConcaveFunction = Union["PiecewiseAffineConcave", "NumericConcave"]


@dataclass(frozen=True, slots=True)
class AffineForm:
    """``u ↦ ⟨slope, u⟩ + offset``."""

    slope: Point
    offset: Scalar

    def __post_init__(self) -> None:
        if not self.slope:
            raise ConstructionError("affine form needs a nonempty slope")

    @property
    def dim(self) -> int:
        return len(self.slope)

    def evaluate(self, u: Sequence[Scalar]) -> Scalar:
        return dot(self.slope, u) + self.offset

    __call__ = evaluate

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        slope = np.array([to_float(x) for x in self.slope])
        return points @ slope + to_float(self.offset)

    def has_rational_slope(self) -> bool:
        return all(is_rational(x) for x in self.slope)

    def shift(self, a: Sequence[Scalar]) -> "AffineForm":
        """The form ``u ↦ self(u − a)``."""

        return AffineForm(self.slope, self.offset - dot(self.slope, a))

    def sort_key(self) -> Tuple[Tuple[float, ...], float]:
        return tuple(to_float(x) for x in self.slope), to_float(self.offset)


def _below(form: AffineForm, other: AffineForm) -> Halfspace:
    """Halfspace ``form ≤ other`` written as ``⟨u, other.m − form.m⟩ ≥ form.c − other.c``."""

    normal = [b - a for a, b in zip(form.slope, other.slope)]
    if not all(is_rational(x) for x in normal):
        raise NotRepresentableError("cells of forms with log-rational slope differences")
    return tuple(Fraction(x) for x in normal), form.offset - other.offset


def _dedupe_forms(forms: Sequence[AffineForm]) -> List[AffineForm]:
    best: dict = {}
    for form in forms:
        current = best.get(form.slope)
        if current is None or form.offset < current.offset:
            best[form.slope] = form
    return list(best.values())


# ── concave piecewise-affine functions ─────────────────────────────────


@dataclass(frozen=True, slots=True)
class PiecewiseAffineConcave:
    """``f(u) = min_i ⟨m_i, u⟩ + c_i``, optionally restricted to a polytope.

    Redundant forms (never strictly minimal on a full-dimensional part of the
    domain) are dropped on construction when slope differences are rational.
    """

    forms: Tuple[AffineForm, ...]
    domain: Optional[RationalPolytope] = None
    canonical: bool = field(default=False, compare=False, repr=False)

    def __post_init__(self) -> None:
        if not self.forms:
            raise ConstructionError("a concave function needs at least one form")
        n = self.forms[0].dim
        if any(f.dim != n for f in self.forms):
            raise ConstructionError("forms of different dimension")
        if self.domain is not None and self.domain.ambient_dim != n:
            raise ConstructionError("domain dimension does not match the forms")
        if self.domain is not None and self.domain.is_empty:
            raise ConstructionError("domain of a concave function is empty")
        if not self.canonical:
            object.__setattr__(self, "forms", tuple(self._prune(_dedupe_forms(self.forms))))
            object.__setattr__(self, "canonical", True)

    def _prune(self, forms: List[AffineForm]) -> List[AffineForm]:
        if len(forms) == 1 or not all(
            is_rational(a - b) for f in forms for a, b in zip(f.slope, forms[0].slope)
        ):
            return sorted(forms, key=AffineForm.sort_key)
        kept = [
            form
            for i, form in enumerate(forms)
            if self._region_is_full(form, [g for j, g in enumerate(forms) if j != i])
        ]
        return sorted(kept or forms[:1], key=AffineForm.sort_key)

    def _region_is_full(self, form: AffineForm, others: Sequence[AffineForm]) -> bool:
        cuts = [_below(form, g) for g in others]
        n = self.dim
        if self.domain is not None:
            region = self.domain.intersect(cuts)
            return not region.is_empty and region.affine_dimension() == self.domain.affine_dimension()
        rows, feasible = tighten_halfspaces(cuts)
        if not feasible:
            return False
        point = polyhedron_interior_point(rows, n)
        return point is not None and all(dot(u, point) > g for u, g in rows)

    @property
    def dim(self) -> int:
        return self.forms[0].dim

    @classmethod
    def constant(cls, value: Scalar, domain: RationalPolytope) -> "PiecewiseAffineConcave":
        return cls((AffineForm(tuple(ZERO for _ in range(domain.ambient_dim)), value),), domain)

    def evaluate(self, u: Sequence[Scalar]) -> Scalar:
        if self.domain is not None and not self.domain.contains(u):
            raise PointOutsidePolytopeError(f"{tuple(map(str, u))} is outside the domain")
        return scalar_min(f.evaluate(u) for f in self.forms)

    __call__ = evaluate

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        values = np.stack([f.evaluate_many(points) for f in self.forms], axis=-1)
        return values.min(axis=-1)

    def has_rational_slopes(self) -> bool:
        return all(f.has_rational_slope() for f in self.forms)

    def regions(self, polytope: Optional[RationalPolytope] = None) -> Iterator[Tuple[RationalPolytope, AffineForm]]:
        """Pieces of *polytope* (default: the domain) where each form is minimal."""

        target = polytope if polytope is not None else self.domain
        if target is None:
            raise ConstructionError("regions need a bounded domain")
        for i, form in enumerate(self.forms):
            cuts = [_below(form, g) for j, g in enumerate(self.forms) if j != i]
            region = target.intersect(cuts)
            if not region.is_empty:
                yield region, form

    def region_vertices(self, polytope: Optional[RationalPolytope] = None) -> List[Point]:
        """Vertices of the subdivision of the domain into regions of linearity."""

        out: List[Point] = []
        if len(self.forms) == 1:
            target = polytope if polytope is not None else self.domain
            return list(target.vertices) if target is not None else []
        for region, _ in self.regions(polytope):
            for v in region.vertices:
                if v not in out:
                    out.append(v)
        return out

    def maximum(self) -> Tuple[Scalar, Point]:
        """Exact maximum over the domain and a maximizer."""

        best: Optional[Tuple[Scalar, Point]] = None
        for v in self.region_vertices():
            value = scalar_min(f.evaluate(v) for f in self.forms)
            if best is None or value > best[0]:
                best = (value, v)
        assert best is not None
        return best

    def minimum(self) -> Tuple[Scalar, Point]:
        """Exact minimum over the domain (attained at a vertex of the domain)."""

        if self.domain is None:
            raise ConstructionError("minimum needs a bounded domain")
        best: Optional[Tuple[Scalar, Point]] = None
        for v in self.domain.vertices:
            value = self.evaluate(v)
            if best is None or value < best[0]:
                best = (value, v)
        assert best is not None
        return best

    def with_domain(self, domain: Optional[RationalPolytope]) -> "PiecewiseAffineConcave":
        return PiecewiseAffineConcave(self.forms, domain)

    def shift(self, a: Sequence[Scalar], gamma: Scalar = ZERO) -> "PiecewiseAffineConcave":
        """``x ↦ f(x + a) − γ`` on ``domain − a``."""

        neg = tuple(-x for x in a)
        forms = tuple(AffineForm(f.slope, f.offset + dot(f.slope, a) - gamma) for f in self.forms)
        domain = self.domain.translate(neg) if self.domain is not None else None
        return PiecewiseAffineConcave(forms, domain)

    def add_constant(self, value: Scalar) -> "PiecewiseAffineConcave":
        forms = tuple(AffineForm(f.slope, f.offset + value) for f in self.forms)
        return PiecewiseAffineConcave(forms, self.domain, canonical=True)

    def scale_values(self, factor: Scalar) -> "PiecewiseAffineConcave":
        """``x ↦ k·f(x)``; *k* may carry log terms when the data is rational."""

        k = Fraction(factor) if is_rational(factor) else factor
        if k <= 0:
            raise ValueError("factor must be positive")
        forms = tuple(AffineForm(tuple(k * x for x in f.slope), k * f.offset) for f in self.forms)
        return PiecewiseAffineConcave(forms, self.domain, canonical=True)

    def dilate(self, factor: object) -> "PiecewiseAffineConcave":
        """``x ↦ k·f(x/k)`` on ``k·domain``."""

        k = Fraction(factor)
        if k <= 0:
            raise ValueError("factor must be positive")
        forms = tuple(AffineForm(f.slope, k * f.offset) for f in self.forms)
        domain = self.domain.scale(k) if self.domain is not None else None
        return PiecewiseAffineConcave(forms, domain, canonical=True)

    def __add__(self, other: "PiecewiseAffineConcave") -> "PiecewiseAffineConcave":
        """Pointwise sum; domains intersect."""

        forms = tuple(
            AffineForm(tuple(a + b for a, b in zip(f.slope, g.slope)), f.offset + g.offset)
            for f in self.forms
            for g in other.forms
        )
        domain = self.domain
        if other.domain is not None:
            domain = other.domain if domain is None else domain.intersect(other.domain.halfspaces)
        return PiecewiseAffineConcave(forms, domain)

    def recession(self) -> "PiecewiseAffineConcave":
        if self.domain is not None:
            raise ConstructionError("recession needs a function on the whole space")
        return PiecewiseAffineConcave(tuple(AffineForm(f.slope, ZERO) for f in self.forms))

    def to_general(self) -> "PiecewiseAffineGeneral":
        if self.domain is not None:
            raise ConstructionError("only functions on the whole space have a cell complex")
        cells = []
        for i, form in enumerate(self.forms):
            cuts = [_below(form, g) for j, g in enumerate(self.forms) if j != i]
            rows, _ = tighten_halfspaces(cuts)
            cells.append(Cell(tuple(rows), form))
        return PiecewiseAffineGeneral(tuple(cells), check=False)

    def same_as(self, other: "PiecewiseAffineConcave") -> bool:
        """Equality of canonical data (form sets and domains)."""

        if set(self.forms) != set(other.forms):
            return False
        if (self.domain is None) != (other.domain is None):
            return False
        return self.domain is None or set(self.domain.vertices) == set(other.domain.vertices)


# ── general piecewise-affine functions ─────────────────────────────────


@dataclass(frozen=True, slots=True)
class Cell:
    """A polyhedral cell ``{u : ⟨u, a_j⟩ ≥ b_j}`` with the affine form used on it."""

    halfspaces: Tuple[Halfspace, ...]
    form: AffineForm

    def contains(self, u: Sequence[Scalar]) -> bool:
        return all(dot(a, u) >= b for a, b in self.halfspaces)

    def vertices(self) -> List[Point]:
        return polyhedron_vertices(self.halfspaces, self.form.dim)[0]

    def recession_generators(self) -> List[Tuple[int, ...]]:
        lineality, rays = polyhedron_rays(self.halfspaces, self.form.dim)
        out = list(rays)
        for l in lineality:
            out.append(l)
            out.append(tuple(-x for x in l))
        return out

    def interior_point(self) -> Optional[Point]:
        return polyhedron_interior_point(self.halfspaces, self.form.dim)


@dataclass(frozen=True, slots=True)
class PiecewiseAffineGeneral:
    """A continuous function given by affine forms on the cells of a complete complex."""

    cells: Tuple[Cell, ...]
    check: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self) -> None:
        if not self.cells:
            raise ConstructionError("a piecewise-affine function needs cells")
        n = self.dim
        if any(c.form.dim != n for c in self.cells):
            raise ConstructionError("cells of different dimension")
        if self.check:
            self._check_continuity()
            self._check_cover()

    @property
    def dim(self) -> int:
        return self.cells[0].form.dim

    def _check_continuity(self) -> None:
        n = self.dim
        for i, first in enumerate(self.cells):
            if first.interior_point() is None:
                raise ConstructionError(f"cell {i} is empty")
            for j in range(i + 1, len(self.cells)):
                second = self.cells[j]
                shared = first.halfspaces + second.halfspaces
                rows, feasible = tighten_halfspaces(shared)
                if not feasible:
                    continue
                vertices, _ = polyhedron_vertices(rows, n)
                if not vertices:
                    continue
                lineality, rays = polyhedron_rays(rows, n)
                slope = [a - b for a, b in zip(first.form.slope, second.form.slope)]
                bad = [v for v in vertices if first.form(v) != second.form(v)]
                bad += [r for r in list(rays) + list(lineality) if dot(slope, r) != 0]
                if bad:
                    raise ConstructionError(
                        f"cells {i} and {j} disagree on their common face near {tuple(map(str, bad[0]))}"
                    )

    def _check_cover(self, samples: int = 64) -> None:
        rng = random.Random(0)
        n = self.dim
        for _ in range(samples):
            u = tuple(Fraction(rng.randint(-400, 400), rng.randint(1, 7)) for _ in range(n))
            if not any(c.contains(u) for c in self.cells):
                raise ConstructionError(f"cells do not cover the point {tuple(map(str, u))}")

    @classmethod
    def from_support_function(cls, psi: VirtualSupportFunction) -> "PiecewiseAffineGeneral":
        cells = []
        for idx in range(len(psi.fan.cones)):
            normals = psi.fan.cone(idx).halfspaces()
            cells.append(
                Cell(tuple((h, ZERO) for h in normals), AffineForm(tuple(psi.vectors[idx]), ZERO))
            )
        return cls(tuple(cells), check=False)

    def evaluate(self, u: Sequence[Scalar]) -> Scalar:
        for cell in self.cells:
            if cell.contains(u):
                return cell.form(u)
        raise ConstructionError(f"no cell contains {tuple(map(str, u))}")

    __call__ = evaluate

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        out = np.full(len(points), np.nan)
        for cell in self.cells:
            inside = np.ones(len(points), dtype=bool)
            for a, b in cell.halfspaces:
                inside &= points @ np.asarray([float(x) for x in a]) >= to_float(b) - 1e-12
            fill = inside & np.isnan(out)
            out[fill] = cell.form.evaluate_many(points[fill])
        return out

    def __add__(self, other: "PiecewiseAffineGeneral") -> "PiecewiseAffineGeneral":
        """Pointwise sum on the common refinement of the two complexes."""

        n = self.dim
        cells = []
        for first in self.cells:
            for second in other.cells:
                rows, feasible = tighten_halfspaces(first.halfspaces + second.halfspaces)
                if not feasible:
                    continue
                point = polyhedron_interior_point(rows, n)
                if point is None or not all(dot(u, point) > g for u, g in rows):
                    continue
                slope = tuple(a + b for a, b in zip(first.form.slope, second.form.slope))
                cells.append(Cell(tuple(rows), AffineForm(slope, first.form.offset + second.form.offset)))
        return PiecewiseAffineGeneral(tuple(cells), check=False)

    def scale(self, factor: Scalar) -> "PiecewiseAffineGeneral":
        cells = tuple(
            Cell(c.halfspaces, AffineForm(tuple(factor * x for x in c.form.slope), factor * c.form.offset))
            for c in self.cells
        )
        return PiecewiseAffineGeneral(cells, check=False)

    def shift(self, slope: Sequence[Scalar], offset: Scalar) -> "PiecewiseAffineGeneral":
        """``u ↦ f(u) − ⟨slope, u⟩ + offset``."""

        cells = tuple(
            Cell(
                c.halfspaces,
                AffineForm(tuple(a - b for a, b in zip(c.form.slope, slope)), c.form.offset + offset),
            )
            for c in self.cells
        )
        return PiecewiseAffineGeneral(cells, check=False)

    def recession(self) -> "PiecewiseAffineGeneral":
        n = self.dim
        cells = []
        for cell in self.cells:
            lineality, rays = polyhedron_rays(cell.halfspaces, n)
            if len(lineality) + len(rays) == 0:
                continue
            cone = tuple((tuple(a), ZERO) for a, _ in cell.halfspaces)
            inside = polyhedron_interior_point(cone, n)
            if inside is None or not all(dot(a, inside) > 0 for a, _ in cone if any(a)):
                continue
            cells.append(Cell(cone, AffineForm(cell.form.slope, ZERO)))
        return PiecewiseAffineGeneral(tuple(cells), check=False)


# ── oracle and numeric functions ───────────────────────────────────────


Evaluator = Callable[[np.ndarray], float]
RecessionFunction = Union[PiecewiseAffineGeneral, PiecewiseAffineConcave]


@dataclass(frozen=True, slots=True)
class OracleFunction:
    """A black-box function ``N_ℝ → ℝ`` with a declared conic recession function."""

    evaluator: Evaluator
    recession_function: RecessionFunction
    concave: bool
    dim: int
    spot_check: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.recession_function.dim != self.dim:
            raise ConstructionError("recession function dimension mismatch")
        if self.spot_check:
            self._check_bounded()

    def _check_bounded(self) -> None:
        rng = np.random.default_rng(0)
        directions = rng.normal(size=(16, self.dim))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        for radius in (1e3,):
            points = directions * radius
            gap = np.abs(
                np.array([self.evaluator(p) for p in points])
                - self.recession_function.evaluate_many(points)
            )
            if np.any(gap / radius > 1e-2):
                raise ConstructionError("oracle function is not asymptotic to its recession function")

    def evaluate(self, u: Sequence[float]) -> float:
        return float(self.evaluator(np.asarray(u, dtype=float)))

    __call__ = evaluate

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        return np.array([self.evaluator(p) for p in np.asarray(points, dtype=float)])


@dataclass(frozen=True, slots=True)
class NumericConcave:
    """A concave function on a polytope known through a float evaluator.

    *exact* optionally evaluates at rational points in closed form; it is
    used for certified decisions when available.
    *batch* optionally evaluates a whole (k, n) array at once.
    """

    evaluator: Evaluator
    domain: RationalPolytope
    exact: Optional[Callable[[Sequence[Fraction]], Scalar]] = field(default=None, compare=False)
    sup_hint: Optional[Tuple[Scalar, Point]] = field(default=None, compare=False)
    batch: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)

    @property
    def dim(self) -> int:
        return self.domain.ambient_dim

    def evaluate(self, x: Sequence[Scalar]) -> Union[Scalar, float]:
        if not self.domain.contains(x):
            raise PointOutsidePolytopeError(f"{tuple(map(str, x))} is outside the domain")
        if self.exact is not None and all(is_rational(c) for c in x):
            return self.exact([Fraction(c) for c in x])
        return float(self.evaluator(np.array([to_float(c) for c in x])))

    __call__ = evaluate

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        if self.batch is not None:
            return np.asarray(self.batch(points), dtype=float)
        return np.array([self.evaluator(p) for p in np.asarray(points, dtype=float)])

    def shift(self, a: Sequence[Scalar], gamma: Scalar = ZERO) -> "NumericConcave":
        shift = np.array([to_float(x) for x in a])
        g = to_float(gamma)
        base = self.evaluator
        exact = self.exact
        exact_shifted = None
        if exact is not None and all(is_rational(x) for x in a):
            exact_shifted = lambda x: exact([p + Fraction(q) for p, q in zip(x, a)]) - gamma
        hint = None
        if self.sup_hint is not None:
            value, point = self.sup_hint
            hint = (value - gamma, tuple(p - q for p, q in zip(point, a)))
        return NumericConcave(
            lambda x: base(np.asarray(x, dtype=float) + shift) - g,
            self.domain.translate(tuple(-x for x in a)),
            exact_shifted,
            hint,
        )

    def dilate(self, factor: object) -> "NumericConcave":
        """``x ↦ k·f(x/k)`` on ``k·domain``."""

        k = Fraction(factor)
        base, exact = self.evaluator, self.exact
        kf = float(k)
        exact_scaled = None
        if exact is not None:
            exact_scaled = lambda x: exact([c / k for c in x]) * k
        hint = None
        if self.sup_hint is not None:
            value, point = self.sup_hint
            hint = (value * k, tuple(p * k for p in point))
        return NumericConcave(
            lambda x: kf * base(np.asarray(x, dtype=float) / kf), self.domain.scale(k), exact_scaled, hint
        )

    def maximum(self) -> Tuple[Union[Scalar, float], Point]:
        if self.sup_hint is not None:
            return self.sup_hint
        value, point = _maximize_on_polytope(self.evaluator, self.domain)
        return value, tuple(point)

    def minimum(self) -> Tuple[Union[Scalar, float], Point]:
        """Minimum over the domain, attained at a vertex by concavity."""

        values = [(self.evaluate(v), v) for v in self.domain.vertices]
        return min(values, key=lambda item: to_float(item[0]))


# ── numeric minimization helpers ───────────────────────────────────────


def minimize_converged(
    run: Callable[[np.ndarray], optimize.OptimizeResult], start: np.ndarray, what: str
) -> optimize.OptimizeResult:
    """Call ``run(start)``; on failure restart once from the last iterate.

    A restart that stays at the same point and value counts as converged.
    Otherwise a second failure raises :class:`BudgetExceededError`.
    """

    first = run(np.asarray(start, dtype=float))
    if first.success:
        return first
    _LOGGER.warning("%s did not converge (%s); restarting from the last iterate", what, first.message)
    result = run(np.asarray(first.x, dtype=float))
    if result.success:
        return result
    tol = get_settings().oracle_tol
    if np.allclose(result.x, first.x, rtol=0.0, atol=tol) and abs(result.fun - first.fun) <= tol:
        _LOGGER.info("%s stalled at the same point twice; keeping it", what)
        return result
    raise BudgetExceededError(f"{what} did not converge: {result.message}")


def _require_converged(result: optimize.OptimizeResult, what: str) -> optimize.OptimizeResult:
    if not result.success:
        raise BudgetExceededError(f"{what} did not converge: {result.message}")
    return result


def _minimize_unconstrained(objective: Callable[[np.ndarray], float], n: int) -> float:
    settings = get_settings()
    box = settings.oracle_box
    if n == 1:
        result = optimize.minimize_scalar(
            lambda t: objective(np.array([t])),
            bounds=(-box, box),
            method="bounded",
            options={"xatol": settings.oracle_tol, "maxiter": settings.optimizer_max_iterations},
        )
        return float(_require_converged(result, "bounded line search").fun)
    if n > 3:
        raise OraclePathUnsupportedError(f"oracle minimization is limited to n ≤ 3, got n = {n}")
    bounds = [(-box, box)] * n
    options = {
        "xatol": settings.oracle_tol,
        "fatol": settings.oracle_tol,
        "maxiter": 40 * settings.optimizer_max_iterations,
    }
    start = np.zeros(n)
    best = None
    for _ in range(3):
        result = optimize.minimize(objective, start, method="Nelder-Mead", bounds=bounds, options=options)
        if best is not None and abs(best.fun - result.fun) <= settings.oracle_tol:
            best = result if result.fun < best.fun else best
            break
        best = result if best is None or result.fun < best.fun else best
        start = result.x
    return float(_require_converged(best, "Nelder-Mead search").fun)


def _linear_constraints(domain: RationalPolytope) -> Optional[optimize.LinearConstraint]:
    if not domain.halfspaces:
        return None
    matrix = np.array([[float(x) for x in u] for u, _ in domain.halfspaces])
    lower = np.array([to_float(g) for _, g in domain.halfspaces])
    return optimize.LinearConstraint(matrix, lower, np.inf)


def _minimize_on_polytope(objective: Callable[[np.ndarray], float], domain: RationalPolytope) -> Tuple[float, np.ndarray]:
    n = domain.ambient_dim
    centre = np.array([to_float(x) for x in domain.centroid()])
    if domain.affine_dimension() == 0:
        return float(objective(centre)), centre
    if n == 1:
        lo = min(to_float(v[0]) for v in domain.vertices)
        hi = max(to_float(v[0]) for v in domain.vertices)
        result = optimize.minimize_scalar(
            lambda t: objective(np.array([t])),
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": get_settings().oracle_tol, "maxiter": get_settings().optimizer_max_iterations},
        )
        result = _require_converged(result, "bounded line search")
        candidates = [(float(result.fun), np.array([result.x]))]
        candidates += [(float(objective(np.array([e]))), np.array([e])) for e in (lo, hi)]
        return min(candidates, key=lambda c: c[0])
    settings = get_settings()
    constraints = [_linear_constraints(domain)]
    options = {"ftol": settings.oracle_tol, "maxiter": settings.optimizer_max_iterations}
    result = minimize_converged(
        lambda x0: optimize.minimize(objective, x0, method="SLSQP", constraints=constraints, options=options),
        centre,
        "SLSQP on a polytope",
    )
    return float(result.fun), np.asarray(result.x)


def _maximize_on_polytope(evaluator: Evaluator, domain: RationalPolytope) -> Tuple[float, np.ndarray]:
    value, point = _minimize_on_polytope(lambda x: -evaluator(x), domain)
    return -value, point


# ── top-level operations ───────────────────────────────────────────────

AnyFunction = Union[PiecewiseAffineGeneral, PiecewiseAffineConcave, OracleFunction, NumericConcave]


def _generator_constraints(f: Union[PiecewiseAffineGeneral, PiecewiseAffineConcave]) -> List[Halfspace]:
    if isinstance(f, PiecewiseAffineConcave):
        f = f.to_general()
    out = []
    for cell in f.cells:
        for g in cell.recession_generators():
            out.append((g, dot(cell.form.slope, g)))
    return out


def stability_set(f: AnyFunction) -> RationalPolytope:
    """``{x : ⟨x, u⟩ ≥ rec(f)(u) for all u}``; the empty polytope when infeasible."""

    if isinstance(f, OracleFunction):
        return stability_set(f.recession_function)
    if isinstance(f, NumericConcave) or (isinstance(f, PiecewiseAffineConcave) and f.domain is not None):
        raise ConstructionError("stability set of a function on a polytope is not defined")
    if isinstance(f, PiecewiseAffineConcave):
        slopes = [form.slope for form in f.forms]
        if all(is_rational(x) for s in slopes for x in s):
            return RationalPolytope.from_vertices(slopes)
    return RationalPolytope.from_halfspaces(_generator_constraints(f), f.dim, allow_empty=True)


def _dual_forms_from_cells(cells: Sequence[Cell]) -> List[AffineForm]:
    forms = []
    for cell in cells:
        for v in cell.vertices():
            forms.append(AffineForm(tuple(v), -cell.form(v)))
    return forms


def legendre_dual(f: AnyFunction, domain: Optional[RationalPolytope] = None) -> ConcaveFunction:
    """``f^∨(x) = inf_u ⟨x, u⟩ − f(u)``.

    For a function on the whole space the result lives on *domain* (default
    the stability set).  For a concave function on a polytope the result is
    its dual on the whole space.
    """

    if isinstance(f, PiecewiseAffineConcave) and f.domain is not None:
        forms = [AffineForm(tuple(v), -f.evaluate(v)) for v in f.region_vertices()]
        return PiecewiseAffineConcave(tuple(forms))
    if isinstance(f, NumericConcave):
        return _numeric_dual_of_roof(f)
    stab = stability_set(f)
    if stab.is_empty:
        raise EmptyStabilitySetError("the stability set is empty")
    target = domain if domain is not None else stab
    outside = [v for v in target.vertices if not stab.contains(v)]
    if outside:
        raise NotInStabilitySetError(f"domain vertex {tuple(map(str, outside[0]))} is outside stab(f)")
    if isinstance(f, OracleFunction):
        return _numeric_dual_of_oracle(f, target)
    general = f.to_general() if isinstance(f, PiecewiseAffineConcave) else f
    return PiecewiseAffineConcave(tuple(_dual_forms_from_cells(general.cells)), target)


def _numeric_dual_of_oracle(f: OracleFunction, domain: RationalPolytope) -> NumericConcave:
    if f.dim > 3:
        raise OraclePathUnsupportedError(f"oracle duals are limited to n ≤ 3, got n = {f.dim}")
    if not f.concave:
        _LOGGER.info("Dual of a non-concave oracle function is computed by local search")

    def evaluate(x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        return _minimize_unconstrained(lambda u: float(x @ u) - f.evaluator(u), f.dim)

    return NumericConcave(evaluate, domain)


@dataclass(frozen=True, slots=True)
class NumericConvexDual:
    """``u ↦ min_{x∈Δ} ⟨x,u⟩ − ϑ(x)`` for a numeric concave ϑ; concave on ℝⁿ."""

    roof: NumericConcave

    @property
    def dim(self) -> int:
        return self.roof.dim

    def evaluate(self, u: Sequence[float]) -> float:
        u = np.asarray([to_float(c) for c in u], dtype=float)
        value, _ = _minimize_on_polytope(lambda x: float(x @ u) - self.roof.evaluator(x), self.roof.domain)
        return value

    __call__ = evaluate

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        return np.array([self.evaluate(p) for p in np.asarray(points, dtype=float)])


def _numeric_dual_of_roof(f: NumericConcave) -> "NumericConvexDual":
    return NumericConvexDual(f)


def recession(f: Union[PiecewiseAffineGeneral, PiecewiseAffineConcave]) -> Union[PiecewiseAffineGeneral, PiecewiseAffineConcave]:
    """``rec(f)(u) = lim f(λu)/λ``: offsets dropped on the recession cones of the cells."""

    return f.recession()


def concave_envelope(f: Union[PiecewiseAffineGeneral, PiecewiseAffineConcave, OracleFunction]) -> ConcaveFunction:
    """Smallest concave function above *f*, as the double dual."""

    stab = stability_set(f)
    if stab.is_empty:
        raise EmptyStabilitySetError("the stability set is empty")
    if isinstance(f, PiecewiseAffineConcave):
        return f
    return legendre_dual(legendre_dual(f, stab))


def sup_convolution(g: ConcaveFunction, h: ConcaveFunction) -> ConcaveFunction:
    """``(g ⊞ h)(x) = sup_{y+z=x} g(y) + h(z)`` on the Minkowski sum of the domains.

    Exact for piecewise-affine inputs through ``(g^∨ + h^∨)^∨``.  A numeric
    function convolved with a point mass is translated.
    """

    if isinstance(g, NumericConcave) or isinstance(h, NumericConcave):
        numeric, other = (g, h) if isinstance(g, NumericConcave) else (h, g)
        if isinstance(other, PiecewiseAffineConcave) and other.domain is not None and other.domain.affine_dimension() == 0:
            point = other.domain.vertices[0]
            return numeric.shift(tuple(-x for x in point), -other.evaluate(point))
        raise OraclePathUnsupportedError("numeric sup-convolution beyond translation")
    if g.domain is None or h.domain is None:
        raise ConstructionError("sup-convolution needs functions on polytopes")
    dual_sum = legendre_dual(g) + legendre_dual(h)
    domain = g.domain.minkowski_sum(h.domain)
    forms = []
    for cell in dual_sum.to_general().cells:
        for v in cell.vertices():
            forms.append(AffineForm(tuple(v), -cell.form(v)))
    return PiecewiseAffineConcave(tuple(forms), domain)


def is_concave(f: PiecewiseAffineGeneral) -> Tuple[bool, Optional[Tuple[int, int, Point]]]:
    """Concavity test with a witness ``(Λ, Λ′, u_Λ)`` on failure.

    The Λ′-form must dominate the Λ-form on all of Λ: at its vertices and
    along its recession directions.  ``u_Λ`` is a relative-interior point of Λ.
    """

    for i, cell in enumerate(f.cells):
        vertices = cell.vertices()
        directions = cell.recession_generators()
        witness = cell.interior_point()
        for j, other in enumerate(f.cells):
            if i == j:
                continue
            slope = [a - b for a, b in zip(other.form.slope, cell.form.slope)]
            below = any(other.form(v) < cell.form(v) for v in vertices) or any(
                dot(slope, d) < 0 for d in directions
            )
            if below:
                return False, (i, j, witness)
    return True, None


__all__ = [
    "AffineForm",
    "Cell",
    "ConcaveFunction",
    "NumericConcave",
    "NumericConvexDual",
    "OracleFunction",
    "PiecewiseAffineConcave",
    "PiecewiseAffineGeneral",
    "concave_envelope",
    "minimize_converged",
    "is_concave",
    "legendre_dual",
    "recession",
    "stability_set",
    "sup_convolution",
]
