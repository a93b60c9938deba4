from __future__ import annotations

from fractions import Fraction
from pathlib import Path

from toric_arakelov.divisor import ToricMetrizedRDivisor
from toric_arakelov.samples import fubini_study, halfplane_theta, projective_space
from toric_arakelov.specfile import parse_spec

SPECS = Path(__file__).resolve().parents[1] / "specs"

F = Fraction


def vec(*values) -> tuple[Fraction, ...]:
    return tuple(Fraction(v) for v in values)


def build(document: dict) -> ToricMetrizedRDivisor:
    return parse_spec(document, source="<test>").divisor


def fs(*weights) -> ToricMetrizedRDivisor:
    return build(fubini_study(len(weights) - 1, [str(Fraction(w)) for w in weights]))


def halfplane() -> ToricMetrizedRDivisor:
    return build(halfplane_theta())


def canonical(n: int, degree=1) -> ToricMetrizedRDivisor:
    return build(projective_space(n, degree))


def theta_divisor(forms: list[tuple[list[str], str]], n: int = 2, degree=1) -> ToricMetrizedRDivisor:
    """ℙⁿ with a min-of-forms roof at ∞; each form is ``(slope, offset)``."""

    document = projective_space(n, degree)
    document["metrics"] = {
        "inf": {"pa-theta": {"forms": [{"slope": s, "offset": c} for s, c in forms]}}
    }
    return build(document)
