from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from scipy import integrate, optimize

import toric_arakelov.config as config_module
from toric_arakelov.adelic import INFINITY
from toric_arakelov.arakelov import (
    NO,
    YES,
    PositivityReport,
    ZariskiDecomposition,
    ZariskiRefusal,
    arithmetic_multiplicity,
    arithmetic_volumes,
    classify,
    compare_oracle,
    dirichlet_certificate,
    fujita,
    geometric_volume,
    height,
    lattice_sum_oracle,
    small_section,
    theta_region,
    zariski,
)
from toric_arakelov.config import Settings
from toric_arakelov.convex import AffineForm, PiecewiseAffineConcave
from toric_arakelov.divisor import FubiniStudyRoof, ThetaMetric, ToricMetrizedRDivisor, shift
from toric_arakelov.errors import (
    BudgetExceededError,
    ConstructionError,
    InvalidParametersError,
    NotBigError,
    NotPseudoEffectiveError,
    NotSemipositiveError,
    PointNotInThetaError,
    ThetaEmptyError,
)
from toric_arakelov.geometry import VirtualSupportFunction
from toric_arakelov.numerics import LogRational, adaptive_integrate, integrate_over_simplices
from toric_arakelov.samples import random_theta

from .util import build, canonical, fs, halfplane, vec

LOG = LogRational.log_of
LOG2 = LogRational.log_prime(2)
HALF_SIMPLEX = {vec(0, 0), vec(Fraction(1, 2), 0), vec(0, Fraction(1, 2))}


def _negated(divisor: ToricMetrizedRDivisor) -> ToricMetrizedRDivisor:
    zero = VirtualSupportFunction.linear(divisor.fan, vec(*([0] * divisor.dim)))
    return ToricMetrizedRDivisor(zero - divisor.psi)


def _skewed() -> ToricMetrizedRDivisor:
    """ℙ² with the roof ``½ − x₁·log 2 − x₂``, whose Θ has an irrational facet."""

    base = canonical(2)
    form = AffineForm((LOG2, Fraction(1)), Fraction(1, 2))
    roof = PiecewiseAffineConcave((form,), base.delta())
    return ToricMetrizedRDivisor(base.psi, ((INFINITY, ThetaMetric(roof)),))


def _fs_p1_roof(x: float) -> float:
    return FubiniStudyRoof((Fraction(1), Fraction(1, 2))).theta(np.array([x]))


# ── volumes ───────────────────────────────────────────────────────────


@pytest.mark.parametrize(
    "build_divisor, expected",
    [
        pytest.param(lambda: canonical(1), 1, id="p1"),
        pytest.param(lambda: canonical(2), 1, id="p2"),
        pytest.param(lambda: canonical(2, 3), 9, id="p2-degree-3"),
        pytest.param(lambda: _negated(canonical(2)), 0, id="empty"),
    ],
)
def test_geometric_volume(build_divisor, expected):
    assert geometric_volume(build_divisor()) == expected


def test_canonical_metric_has_zero_arithmetic_volume():
    volumes = arithmetic_volumes(canonical(2))
    assert volumes.volume == 0
    assert volumes.chi_volume == 0
    assert volumes.provenance == "exact"


def test_halfplane_volumes_are_exact():
    volumes = arithmetic_volumes(halfplane())
    assert volumes.volume == Fraction(1, 4)
    assert volumes.chi_volume == -1
    assert volumes.provenance == "exact"
    assert volumes.tol is None


@pytest.mark.parametrize(
    "weights, volume, chi",
    [
        pytest.param((1, 1), Fraction(1, 2), Fraction(1, 2), id="p1-unit"),
        pytest.param((2, 3, 4), LOG(24) * Fraction(1, 2) + Fraction(5, 4), None, id="p2-nef"),
        pytest.param(
            (Fraction(1, 2), Fraction(1, 2)), Fraction(0), Fraction(1, 2) - LOG2, id="p1-not-big"
        ),
    ],
)
def test_fubini_study_volumes_in_closed_form(weights, volume, chi):
    volumes = arithmetic_volumes(fs(*weights))
    assert volumes.volume == volume
    assert volumes.chi_volume == (volume if chi is None else chi)
    assert volumes.provenance == "exact"


@pytest.mark.parametrize(
    "weights, bound",
    [
        pytest.param((1, 1), 1e-6, id="p1-unit"),
        pytest.param((2, 3), 1e-6, id="p1-23"),
        pytest.param((2, 3, 4), 1e-5, id="p2-234"),
        pytest.param((1, 1, 1), 1e-5, id="p2-unit"),
    ],
)
def test_fubini_study_closed_form_matches_cubature(weights, bound):
    n = len(weights) - 1
    roof = FubiniStudyRoof(tuple(Fraction(w) for w in weights))
    simplex = [[float(i == j) for j in range(n)] for i in range(-1, n)]
    scale = 2 if n == 1 else 6
    integral = integrate_over_simplices(roof.theta_many, [simplex], bound / (10 * scale))
    volumes = arithmetic_volumes(fs(*weights))
    assert abs(scale * integral - float(volumes.volume)) <= bound
    assert abs(scale * integral - float(volumes.chi_volume)) <= bound


def test_fubini_study_volume_with_small_weight_is_numeric():
    end = theta_region(fs(1, Fraction(1, 2))).polytope.vertices[-1][0]
    reference, _ = integrate.quad(_fs_p1_roof, 0.0, float(end), epsabs=1e-12)
    volumes = arithmetic_volumes(fs(1, Fraction(1, 2)), tol=1e-9)
    assert volumes.provenance == "numeric"
    assert volumes.volume == pytest.approx(2 * reference, abs=1e-6)
    assert volumes.chi_volume == LOG(Fraction(1, 2)) * Fraction(1, 2) + Fraction(1, 2)


@pytest.mark.parametrize("seed", range(6))
def test_random_theta_volume_matches_cubature_of_clamped_roof(seed):
    d = build(random_theta(seed))
    volumes = arithmetic_volumes(d)
    roof = d.roof().global_roof
    clamped = adaptive_integrate(
        lambda p: np.maximum(roof.evaluate_many(p), 0.0), [(0, 0), (1, 0), (0, 1)], 1e-6
    )
    assert float(volumes.volume) == pytest.approx(6 * clamped, abs=1e-4)
    assert volumes.volume >= 0
    assert volumes.volume >= volumes.chi_volume


# ── lattice-sum oracle ────────────────────────────────────────────────


def test_lattice_sum_oracle_on_the_unit_triangle():
    estimate = lattice_sum_oracle(halfplane(), 1)
    assert estimate.points == 3
    assert estimate.volume == 6.0
    assert estimate.chi_volume == -6.0


def test_oracle_converges_for_halfplane():
    rows = compare_oracle(halfplane(), [4, 16, 64])
    assert rows[0].estimate == pytest.approx(0.75)
    assert rows[1].estimate == pytest.approx(6 * 15 / 256)
    assert [r.reference for r in rows] == [0.25] * 3
    assert rows[0].gap > rows[1].gap > rows[2].gap


def test_oracle_converges_for_fubini_study():
    rows = compare_oracle(fs(1, 1), [16, 256])
    assert rows[-1].gap < 1e-3
    assert rows[-1].gap < rows[0].gap


def test_oracle_rejects_zero_ell():
    with pytest.raises(InvalidParametersError):
        lattice_sum_oracle(halfplane(), 0)


# ── heights ───────────────────────────────────────────────────────────


def test_height_of_fubini_study_is_the_chi_volume():
    result = height(fs(2, 3, 4))
    assert result.value == LOG(24) * Fraction(1, 2) + Fraction(5, 4)
    assert result.face_dimension == 2


@pytest.mark.parametrize(
    "cone, value, dimension",
    [
        pytest.param(None, Fraction(-1), 2, id="whole"),
        pytest.param([2], Fraction(-2), 1, id="far-edge"),
        pytest.param([0], Fraction(0), 1, id="axis-edge"),
        pytest.param([0, 1], Fraction(1), 0, id="origin"),
    ],
)
def test_heights_of_halfplane_orbits(cone, value, dimension):
    result = height(halfplane(), cone)
    assert result.value == value
    assert result.face_dimension == dimension
    assert result.provenance == "exact"


def test_height_at_a_vertex_of_fubini_study_is_exact():
    assert height(fs(2, 3), [0]).value == LOG2 * Fraction(1, 2)


def test_height_rejects_rays_outside_a_cone():
    with pytest.raises(InvalidParametersError):
        height(canonical(1), [0, 1])


def test_height_needs_semipositivity():
    with pytest.raises(NotSemipositiveError):
        height(_negated(canonical(2)))


# ── positivity ────────────────────────────────────────────────────────


@pytest.mark.parametrize(
    "weights, flags",
    [
        pytest.param((2, 3, 4), (True, True, True, True, True), id="all"),
        pytest.param((1, 1, 1), (False, True, True, True, True), id="nef-boundary"),
        pytest.param((2, Fraction(1, 2), Fraction(1, 2)), (False, False, True, True, True), id="effective"),
        pytest.param((Fraction(1, 2),) * 3, (False, False, True, True, False), id="big"),
        pytest.param((Fraction(1, 3),) * 3, (False, False, False, True, False), id="pseudo-effective"),
        pytest.param((Fraction(1, 4),) * 3, (False, False, False, False, False), id="nothing"),
    ],
)
def test_classify_fubini_study(weights, flags):
    report = classify(fs(*weights))
    assert (report.ample, report.nef, report.big, report.pseudo_effective, report.effective) == flags
    assert report.uncertain == ()
    assert set(report.witnesses) == set(report.flags())


def test_classify_halfplane():
    report = classify(halfplane())
    assert report.flags() == {
        "ample": False,
        "nef": False,
        "big": True,
        "pseudo_effective": True,
        "effective": True,
    }
    assert report.witnesses["nef"].startswith("min ϑ = -1")


def test_classify_canonical_metric_is_nef_but_not_ample():
    report = classify(canonical(2))
    assert report.nef and not report.ample
    assert report.effective


def test_classify_empty_polytope():
    report = classify(_negated(canonical(2)))
    assert not any(report.flags().values())
    assert report.witnesses["big"] == "Δ_D is empty"


def test_inconsistent_reports_are_rejected():
    with pytest.raises(ConstructionError):
        PositivityReport(True, False, True, True, True)


# ── Θ-region ──────────────────────────────────────────────────────────


def test_theta_of_halfplane_is_the_half_simplex():
    region = theta_region(halfplane())
    assert set(region.polytope.vertices) == HALF_SIMPLEX
    assert region.quasi_rational == YES
    assert region.provenance == "exact"
    assert region.contains(np.array([[0.1, 0.1], [0.4, 0.4]])).tolist() == [True, False]


def test_theta_of_nef_fubini_study_is_delta():
    region = theta_region(fs(2, 3, 4))
    assert set(region.polytope.vertices) == {vec(0, 0), vec(1, 0), vec(0, 1)}


def test_theta_of_curved_fubini_study_is_not_a_polytope():
    region = theta_region(fs(Fraction(1, 2), Fraction(1, 2), Fraction(1, 2)))
    assert region.polytope is None
    assert region.quasi_rational == NO
    assert region.contains(np.array([[1 / 3, 1 / 3]]))[0]


def test_theta_with_negative_maximum_is_empty():
    assert theta_region(fs(Fraction(1, 4), Fraction(1, 4), Fraction(1, 4))).is_empty


def test_theta_with_an_irrational_facet():
    region = theta_region(_skewed())
    assert region.polytope is None
    assert region.quasi_rational == NO


def test_theta_in_dimension_one_has_a_numeric_end():
    region = theta_region(fs(1, Fraction(1, 2)))
    (low,), (high,) = region.polytope.vertices
    assert low == 0
    assert Fraction(1, 2) < high < 1
    assert _fs_p1_roof(float(high)) == pytest.approx(0.0, abs=1e-9)
    assert region.provenance == "numeric"


def test_theta_needs_a_nonempty_delta():
    with pytest.raises(ThetaEmptyError):
        theta_region(_negated(canonical(2)))


# ── Zariski decomposition ─────────────────────────────────────────────


def test_zariski_of_nef_divisor_is_trivial():
    d = fs(2, 3, 4)
    result = zariski(d)
    assert isinstance(result, ZariskiDecomposition)
    assert result.nef_part is d
    assert result.effective_part.is_zero()
    assert result.verified


def test_zariski_of_halfplane():
    result = zariski(halfplane())
    assert isinstance(result, ZariskiDecomposition)
    assert result.strong
    assert set(result.nef_part.delta().vertices) == HALF_SIMPLEX
    assert result.volume == result.nef_volume == Fraction(1, 4)
    assert result.nef_verified and result.effective_verified and result.volume_verified


def test_zariski_refuses_curved_theta():
    result = zariski(fs(Fraction(1, 2), Fraction(1, 2), Fraction(1, 2)))
    assert isinstance(result, ZariskiRefusal)
    assert "quasi-rational" in result.reason
    assert result.theta.quasi_rational == NO


def test_zariski_refuses_an_irrational_facet():
    assert isinstance(zariski(_skewed()), ZariskiRefusal)


def test_zariski_needs_pseudo_effective_input():
    with pytest.raises(NotPseudoEffectiveError):
        zariski(fs(Fraction(1, 4), Fraction(1, 4), Fraction(1, 4)))


# ── Fujita approximation ──────────────────────────────────────────────


def test_fujita_on_halfplane():
    eps = Fraction(1, 20)
    result = fujita(halfplane(), eps)
    assert result.volume == Fraction(1, 4)
    assert Fraction(1, 4) - eps <= result.ample_volume <= Fraction(1, 4)
    assert result.ample_verified
    assert result.effective_verified


@pytest.mark.parametrize(
    "eps", [pytest.param(Fraction(1, 20), id="eps-5e-2"), pytest.param(Fraction(1, 100), id="eps-1e-2")]
)
@pytest.mark.parametrize(
    "build_divisor, target",
    [
        pytest.param(halfplane, Fraction(1, 4), id="halfplane"),
        pytest.param(lambda: fs(3, 3, 3), LOG(27) * Fraction(1, 2) + Fraction(5, 4), id="fs-333"),
    ],
)
def test_fujita_reaches_the_volume_within_eps(build_divisor, target, eps):
    d = build_divisor()
    result = fujita(d, eps, tol=1e-6)
    assert float(result.volume) == pytest.approx(float(target), abs=1e-6)
    assert float(target) - float(eps) - 1e-6 <= float(result.ample_volume) <= float(target) + 1e-6
    assert result.ample_verified
    assert result.effective_verified
    assert all(d.delta().contains(v) for v in result.ample_part.delta().vertices)


def test_fujita_needs_a_big_divisor():
    with pytest.raises(NotBigError):
        fujita(fs(Fraction(1, 3), Fraction(1, 3), Fraction(1, 3)), Fraction(1, 10))


def test_fujita_rejects_non_positive_eps():
    with pytest.raises(InvalidParametersError):
        fujita(halfplane(), 0)


# ── Dirichlet certificates ────────────────────────────────────────────


def test_dirichlet_certificate_at_the_origin():
    certificate = dirichlet_certificate(halfplane(), (0, 0))
    assert certificate.verified
    assert certificate.gammas == {INFINITY: 0}
    assert certificate.betas == {}


@pytest.mark.parametrize("point", [(2, 0), (1, 0)])
def test_dirichlet_certificate_needs_a_point_of_theta(point):
    with pytest.raises(PointNotInThetaError):
        dirichlet_certificate(halfplane(), point)


@pytest.mark.parametrize("seed", range(50))
def test_dirichlet_certificates_for_random_instances(seed):
    d = build(random_theta(seed))
    value, point = d.roof().global_roof.maximum()
    if not classify(d).pseudo_effective:
        with pytest.raises(PointNotInThetaError):
            dirichlet_certificate(d, point)
        return
    certificate = dirichlet_certificate(d, point)
    assert certificate.verified
    assert sum(certificate.gammas.values(), Fraction(0)) == 0
    for place in d.places():
        assert certificate.shifted.local_roof(place)(vec(0, 0)) >= 0


# ── multiplicities and small sections ─────────────────────────────────


@pytest.mark.parametrize(
    "ray, expected",
    [
        pytest.param((1, 0), Fraction(0), id="axis"),
        pytest.param((-1, -1), Fraction(1, 2), id="far-ray"),
        pytest.param((1, 1), Fraction(0), id="interior-ray"),
    ],
)
def test_multiplicity_of_halfplane(ray, expected):
    result = arithmetic_multiplicity(halfplane(), ray)
    assert result.value == expected
    assert result.provenance == "exact"


def test_multiplicity_with_a_numeric_theta_end():
    d = fs(1, Fraction(1, 2))
    end = theta_region(d).polytope.vertices[-1][0]
    result = arithmetic_multiplicity(d, (-1,))
    assert result.provenance == "numeric"
    assert float(result.value) == pytest.approx(1 - float(end))


def _binary_entropy_crossing() -> float:
    def gap(x: float) -> float:
        return -x * np.log(x) - (1 - x) * np.log(1 - x) - x * np.log(2)

    return optimize.brentq(gap, 0.6, 0.95, xtol=1e-14)


def test_multiplicity_over_a_curved_theta():
    d = fs(Fraction(1, 2), Fraction(1, 2), Fraction(1, 2))
    result = arithmetic_multiplicity(d, (-1, 0))
    assert result.provenance == "numeric"
    assert float(result.value) == pytest.approx(1 - _binary_entropy_crossing(), abs=1e-5)


def test_multiplicity_reports_an_optimizer_that_does_not_converge(monkeypatch):
    monkeypatch.setattr(config_module, "_SETTINGS", Settings(optimizer_max_iterations=1))
    with pytest.raises(BudgetExceededError):
        arithmetic_multiplicity(fs(Fraction(1, 2), Fraction(1, 2), Fraction(1, 2)), (-1, 0))


@pytest.mark.parametrize("ray", [(2, 0), (0, 0), (1, 0, 0)])
def test_multiplicity_rejects_non_primitive_rays(ray):
    with pytest.raises(InvalidParametersError):
        arithmetic_multiplicity(halfplane(), ray)


def test_small_section_without_scaling():
    section = small_section(halfplane(), (0, 0), 1)
    assert section.power == 1
    assert section.alpha == 1
    assert section.witness.ok


def test_small_section_with_a_finite_place():
    d = shift(canonical(2), (0, 0), {INFINITY: Fraction(-2), 2: LOG2})
    section = small_section(d, (0, 0), 1)
    assert section.power == 1
    assert section.alpha == 2
    assert section.witness.ok


def test_small_section_needs_positive_roof():
    with pytest.raises(PointNotInThetaError):
        small_section(halfplane(), (1, 0), 1)
