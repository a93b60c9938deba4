"""Exact linear algebra over ℚ with log-rational right-hand sides."""

from __future__ import annotations

import math
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

from .numerics import ZERO, Scalar

Vector = Tuple[Fraction, ...]


def to_fractions(row: Sequence[object]) -> List[Fraction]:
    return [x if isinstance(x, Fraction) else Fraction(x) for x in row]


def _eliminate(
    rows: Sequence[Sequence[Fraction]], rhs: Optional[Sequence[Scalar]] = None
) -> Tuple[List[List[Fraction]], List[Scalar], List[int]]:
    """Reduced row echelon form; pivots are chosen on the rational matrix only."""

    matrix = [to_fractions(r) for r in rows]
    right: List[Scalar] = list(rhs) if rhs is not None else [ZERO] * len(matrix)
    if not matrix:
        return [], [], []
    ncols = len(matrix[0])
    pivots: List[int] = []
    row = 0
    for col in range(ncols):
        pivot = next((r for r in range(row, len(matrix)) if matrix[r][col] != 0), None)
        if pivot is None:
            continue
        matrix[row], matrix[pivot] = matrix[pivot], matrix[row]
        right[row], right[pivot] = right[pivot], right[row]
        inv = 1 / matrix[row][col]
        matrix[row] = [x * inv for x in matrix[row]]
        right[row] = right[row] * inv
        for r in range(len(matrix)):
            if r != row and matrix[r][col] != 0:
                factor = matrix[r][col]
                matrix[r] = [a - factor * b for a, b in zip(matrix[r], matrix[row])]
                right[r] = right[r] - right[row] * factor
        pivots.append(col)
        row += 1
        if row == len(matrix):
            break
    return matrix, right, pivots


def rank(rows: Sequence[Sequence[object]]) -> int:
    if not rows:
        return 0
    return len(_eliminate(rows)[2])


def solve(rows: Sequence[Sequence[object]], rhs: Sequence[Scalar]) -> Optional[Tuple[Scalar, ...]]:
    """Solve ``A x = b`` for a consistent system with a unique solution.

    Returns None when the solution is not unique or the system is
    inconsistent.
    """

    if not rows:
        return None
    ncols = len(rows[0])
    matrix, right, pivots = _eliminate(rows, rhs)
    if len(pivots) != ncols:
        return None
    for r in range(len(pivots), len(matrix)):
        if right[r] != 0:
            return None
    solution: List[Scalar] = [ZERO] * ncols
    for r, col in enumerate(pivots):
        solution[col] = right[r]
    return tuple(solution)


def nullspace(rows: Sequence[Sequence[object]], ncols: int) -> List[Vector]:
    """Rational basis of ``{x : A x = 0}``."""

    if not rows:
        return [tuple(Fraction(int(i == j)) for j in range(ncols)) for i in range(ncols)]
    matrix, _, pivots = _eliminate(rows)
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for f in free:
        vec = [ZERO] * ncols
        vec[f] = Fraction(1)
        for r, col in enumerate(pivots):
            vec[col] = -matrix[r][f]
        basis.append(tuple(vec))
    return basis


def row_space(rows: Sequence[Sequence[object]]) -> List[Vector]:
    matrix, _, pivots = _eliminate(rows)
    return [tuple(matrix[r]) for r in range(len(pivots))]


def det(rows: Sequence[Sequence[object]]) -> Fraction:
    matrix = [to_fractions(r) for r in rows]
    n = len(matrix)
    result = Fraction(1)
    for col in range(n):
        pivot = next((r for r in range(col, n) if matrix[r][col] != 0), None)
        if pivot is None:
            return ZERO
        if pivot != col:
            matrix[col], matrix[pivot] = matrix[pivot], matrix[col]
            result = -result
        result *= matrix[col][col]
        for r in range(col + 1, n):
            factor = matrix[r][col] / matrix[col][col]
            if factor:
                matrix[r] = [a - factor * b for a, b in zip(matrix[r], matrix[col])]
    return result


def clear_denominators(vector: Sequence[object]) -> Tuple[int, ...]:
    values = to_fractions(vector)
    lcm = 1
    for v in values:
        lcm = lcm * v.denominator // math.gcd(lcm, v.denominator)
    return tuple(int(v * lcm) for v in values)


def primitive(vector: Sequence[object]) -> Tuple[int, ...]:
    """The primitive integer vector on the ray through a nonzero rational vector."""

    ints = clear_denominators(vector)
    g = 0
    for x in ints:
        g = math.gcd(g, x)
    if g == 0:
        raise ValueError("zero vector has no primitive representative")
    return tuple(x // g for x in ints)


def _ext_gcd(a: int, b: int) -> Tuple[int, int, int]:
    x0, y0, x1, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    if a < 0:
        return -a, -x0, -y0
    return a, x0, y0


def integer_kernel(rows: Sequence[Sequence[int]], ncols: int) -> List[Tuple[int, ...]]:
    """Lattice basis of ``{x ∈ ℤⁿ : A x = 0}`` by unimodular column operations."""

    matrix = [list(map(int, r)) for r in rows]
    transform = [[int(i == j) for j in range(ncols)] for i in range(ncols)]

    def combine(i: int, j: int, a: int, b: int, c: int, d: int) -> None:
        # columns (i, j) <- (a·Ci + b·Cj, c·Ci + d·Cj)
        for m in (matrix, transform):
            for r in m:
                ci, cj = r[i], r[j]
                r[i], r[j] = a * ci + b * cj, c * ci + d * cj

    col = 0
    for row in matrix:
        if col >= ncols:
            break
        for k in range(col + 1, ncols):
            a, b = row[col], row[k]
            if b == 0:
                continue
            g, x, y = _ext_gcd(a, b)
            combine(col, k, x, y, -b // g, a // g)
        if row[col] != 0:
            col += 1
    return [tuple(transform[r][k] for r in range(ncols)) for k in range(col, ncols)]


def lattice_basis(directions: Sequence[Sequence[object]], ncols: int) -> List[Tuple[int, ...]]:
    """Basis of the saturated lattice ``span(directions) ∩ ℤⁿ``."""

    spanning = row_space(directions) if directions else []
    if not spanning:
        return []
    complement = nullspace(spanning, ncols)
    if not complement:
        return [tuple(int(i == j) for j in range(ncols)) for i in range(ncols)]
    return integer_kernel([clear_denominators(v) for v in complement], ncols)


def coordinates(basis: Sequence[Sequence[object]], vector: Sequence[Scalar]) -> Optional[Tuple[Scalar, ...]]:
    """Coordinates of *vector* in the span of *basis*, or None if outside it."""

    if not basis:
        return () if all(v == 0 for v in vector) else None
    n = len(vector)
    columns = [[Fraction(basis[k][i]) for k in range(len(basis))] for i in range(n)]
    matrix, right, pivots = _eliminate(columns, list(vector))
    if len(pivots) != len(basis):
        return None
    for r in range(len(pivots), len(matrix)):
        if right[r] != 0:
            return None
    result: List[Scalar] = [ZERO] * len(basis)
    for r, col in enumerate(pivots):
        result[col] = right[r]
    return tuple(result)


__all__ = [
    "Vector",
    "clear_denominators",
    "coordinates",
    "det",
    "integer_kernel",
    "lattice_basis",
    "nullspace",
    "primitive",
    "rank",
    "row_space",
    "solve",
    "to_fractions",
]
