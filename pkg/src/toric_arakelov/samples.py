"""Built-in example divisors as specification documents.

Every generator returns a plain JSON-ready dictionary in the format read by
:mod:`toric_arakelov.specfile`, so the same examples can be written to disk,
fed to the command line, or parsed directly in tests.
"""

from __future__ import annotations

import random
from fractions import Fraction
from typing import Any, Callable, Dict, List, Mapping, Sequence, Tuple

from .adelic import INFINITY
from .errors import InvalidParametersError
from .numerics import scalar_to_json

# ── constants ───────────────────────────────────────────────────────────

_RANDOM_DEFAULTS = {"seed": 0, "n": 2, "forms": 4, "degree": 1}

# Slope numerators and denominators drawn by the random generator.
_SLOPE_RANGE = (-3, 3)
_DENOMINATORS = (1, 2, 3, 4)

Document = Dict[str, Any]


def _text(value: object) -> str:
    return scalar_to_json(Fraction(value))


def projective_space(n: int, degree: object = 1) -> Document:
    """The fan of ℙⁿ and ``O(degree)`` with ``Δ = degree·(standard simplex)``.

    Cone ``k`` omits ray ``k``; rays are ``e_1, …, e_n, −(e_1+⋯+e_n)``.
    """

    if n < 1:
        raise InvalidParametersError("ℙⁿ needs n ≥ 1")
    scale = Fraction(degree)
    if scale <= 0:
        raise InvalidParametersError("the degree must be positive")
    rays = [[1 if i == j else 0 for j in range(n)] for i in range(n)]
    rays.append([-1] * n)
    cones = [[i for i in range(n + 1) if i != k] for k in range(n + 1)]
    vectors = [
        [_text(scale if j == k else 0) for j in range(n)] if k < n else [_text(0)] * n
        for k in range(n + 1)
    ]
    return {
        "rank": n,
        "fan": {"rays": rays, "cones": cones},
        "divisor": vectors,
        "places": [{"id": INFINITY, "lambda": "1/1", "weight": "1/1"}],
        "metrics": {},
    }


def canonical_pn(n: int) -> Document:
    """``O(1)`` on ℙⁿ with the canonical metric at every place."""

    return projective_space(n)


def fubini_study(n: int, weights: Sequence[object]) -> Document:
    """``O(1)`` on ℙⁿ with the weighted Fubini–Study metric at ∞."""

    if len(weights) != n + 1:
        raise InvalidParametersError(f"ℙ{n} needs {n + 1} weights, got {len(weights)}")
    try:
        values = [Fraction(w) for w in weights]
    except (ValueError, ZeroDivisionError, TypeError) as exc:
        raise InvalidParametersError(f"bad weight: {exc}") from None
    if any(w <= 0 for w in values):
        raise InvalidParametersError("Fubini–Study weights must be positive")
    document = projective_space(n)
    document["metrics"] = {INFINITY: {"fubini-study": [_text(w) for w in values]}}
    return document


def halfplane_theta() -> Document:
    """ℙ² with roof ``ϑ_∞(x) = 1 − 2(x₁ + x₂)`` at ∞.

    ``Θ`` is the half-size simplex and ``vol̂ = 1/4``.
    """

    document = projective_space(2)
    document["metrics"] = {
        INFINITY: {"pa-theta": {"forms": [{"slope": ["-2/1", "-2/1"], "offset": "1/1"}]}}
    }
    return document


def _random_fraction(rng: random.Random, low: int, high: int) -> Fraction:
    return Fraction(rng.randint(low, high), rng.choice(_DENOMINATORS))


def random_theta(seed: int, n: int = 2, forms: int = 4, degree: int = 1) -> Document:
    """A reproducible theta-mode divisor on ℙⁿ with rational data.

    The roof at ∞ is the minimum of *forms* random affine forms on
    ``degree·Δ``; every third seed also carries a roof at the prime 2.
    """

    if n < 1 or forms < 1 or degree < 1:
        raise InvalidParametersError("random examples need n, forms and degree ≥ 1")
    rng = random.Random(seed)
    document = projective_space(n, degree)
    form_docs: List[Document] = []
    for _ in range(forms):
        slope = [_random_fraction(rng, *_SLOPE_RANGE) for _ in range(n)]
        offset = _random_fraction(rng, -1, 4)
        form_docs.append({"slope": [_text(s) for s in slope], "offset": _text(offset)})
    metrics: Document = {INFINITY: {"pa-theta": {"forms": form_docs}}}
    if seed % 3 == 0:
        finite = {"slope": [_text(0)] * n, "offset": _text(-Fraction(rng.randint(0, 2), 2))}
        metrics["2"] = {"pa-theta": {"forms": [finite]}}
        document["places"].append({"id": 2, "lambda": {"rat": "0/1", "logs": {"2": "1/1"}}, "weight": "1/1"})
    document["metrics"] = metrics
    return document


# ── command-line generator ─────────────────────────────────────────────


def _int_param(name: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise InvalidParametersError(f"{name} must be an integer, got {value!r}") from None


def _keyword_params(params: Sequence[str]) -> Dict[str, int]:
    values = dict(_RANDOM_DEFAULTS)
    positional = [p for p in params if "=" not in p]
    for key, value in zip(("seed", "n", "forms", "degree"), positional):
        values[key] = _int_param(key, value)
    for item in params:
        if "=" not in item:
            continue
        key, _, value = item.partition("=")
        key = key.strip()
        if key not in values:
            raise InvalidParametersError(f"unknown parameter {key!r}")
        values[key] = _int_param(key, value.strip())
    return values


def _generate_fubini_study(params: Sequence[str]) -> Document:
    if not params:
        raise InvalidParametersError("usage: fubini-study N α_0 … α_N")
    return fubini_study(_int_param("n", params[0]), list(params[1:]))


def _generate_canonical(params: Sequence[str]) -> Document:
    if len(params) != 1:
        raise InvalidParametersError("usage: canonical-pn N")
    return canonical_pn(_int_param("n", params[0]))


def _generate_halfplane(params: Sequence[str]) -> Document:
    if params:
        raise InvalidParametersError("halfplane-theta takes no parameters")
    return halfplane_theta()


def _generate_random(params: Sequence[str]) -> Document:
    values = _keyword_params(params)
    return random_theta(values["seed"], values["n"], values["forms"], values["degree"])


GENERATORS: Mapping[str, Callable[[Sequence[str]], Document]] = {
    "fubini-study": _generate_fubini_study,
    "halfplane-theta": _generate_halfplane,
    "canonical-pn": _generate_canonical,
    "random": _generate_random,
}


def generate_example(name: str, params: Sequence[str] = ()) -> Document:
    """Build the named example from command-line style parameters.

    ``fubini-study 2 2 3 4`` gives ℙ² with weights (2, 3, 4);
    ``random seed=7 n=2 forms=5`` (or ``random 7 2 5``) a random theta-mode
    instance.
    """

    generator = GENERATORS.get(name)
    if generator is None:
        raise InvalidParametersError(f"unknown example {name!r}; choose from {', '.join(GENERATORS)}")
    return generator(list(params))


# Documents shipped under ``specs/``.
BUILTIN_SPECS: Tuple[Tuple[str, Callable[[], Document]], ...] = (
    ("fs-234.json", lambda: fubini_study(2, [2, 3, 4])),
    ("fs-333.json", lambda: fubini_study(2, [3, 3, 3])),
    ("fs-11-p1.json", lambda: fubini_study(1, [1, 1])),
    ("fs-half.json", lambda: fubini_study(2, ["1/2", "1/2", "1/2"])),
    ("halfplane-theta.json", halfplane_theta),
    ("canonical-p1.json", lambda: canonical_pn(1)),
)


__all__ = [
    "BUILTIN_SPECS",
    "GENERATORS",
    "canonical_pn",
    "fubini_study",
    "generate_example",
    "halfplane_theta",
    "projective_space",
    "random_theta",
]
