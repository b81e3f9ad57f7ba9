import math

import numpy as np
import pytest

from app.exceptions import ParameterError
from app.models import Region
from app.services.epsreg import (
    BRANCH_LARGE,
    BRANCH_SMALL,
    ball_energies,
    classify,
    collapse_check,
    harnack_probe,
    scan,
    volume_comparison_check,
)

SPHERE_POINT = np.array([1.0, 1.0, 1.0, 0.0])


def test_flat_instance_has_zero_constants(flat_torus):
    report = classify(flat_torus, np.zeros(4), 0.2)
    assert report.branch == BRANCH_SMALL
    assert report.satisfied
    assert report.disjunct == "sup_bound"
    assert report.constants["sup_r2"] == 0.0
    assert report.constants["iii"] == 0.0
    assert report.standard_chain == 0.0
    assert report.small_energy


def test_sphere_small_radius_branch(sphere):
    report = classify(sphere, SPHERE_POINT, 0.3, lam=1.0)
    assert report.branch == BRANCH_SMALL
    assert report.constants["iii"] == pytest.approx(1.0, rel=1e-12)
    assert report.constants["sup_r2"] == pytest.approx(math.sqrt(24.0) * 0.09, rel=1e-12)
    assert report.constants["csc_conclusion"] == pytest.approx(0.5, rel=1e-12)
    assert report.disjunct == "sup_bound"


def test_sphere_large_radius_branch(sphere):
    report = classify(sphere, SPHERE_POINT, 0.3, lam=1.0, K=0.1)
    assert report.branch == BRANCH_LARGE
    assert report.constants["pointwise_csc"] == pytest.approx(0.5, rel=1e-12)
    assert report.disjunct == "csc_alternative"


def test_nonpositive_radius_rejected(sphere):
    with pytest.raises(ParameterError):
        classify(sphere, SPHERE_POINT, 0.0)


def test_sphere_ball_averages(sphere):
    ball = ball_energies(sphere, SPHERE_POINT, 0.3)
    assert ball["average_energy"] == pytest.approx(24.0)
    assert ball["average_csc_weyl"] == pytest.approx(48.0)
    assert ball["volume"] == pytest.approx(sphere.ball_volume(SPHERE_POINT, 0.3))


def test_harnack_on_constant_field(sphere):
    result = harnack_probe(sphere, SPHERE_POINT, 0.3, lam=1.0)
    assert result["c_measured"] == pytest.approx(1.0)
    assert result["delta0"] == pytest.approx(1.0)


def test_harnack_requires_small_radius(sphere):
    with pytest.raises(ParameterError):
        harnack_probe(sphere, SPHERE_POINT, 0.3, lam=1.0, K=0.1)


def test_collapsed_torus_is_detected(collapsed_torus):
    result = collapse_check(collapsed_torus, np.zeros(4), tau=0.02, s=1.0)
    assert result["curvature_radius"] == pytest.approx(1.0)
    assert result["volume_ratio"] == pytest.approx(0.01, rel=1e-6)
    assert result["collapsed"]
    assert result["small_energy"]
    assert result["consistent"]
    assert result["chain_constant"] is None


def test_noncollapsed_torus(flat_torus):
    result = collapse_check(flat_torus, np.zeros(4), tau=0.02, s=0.2)
    assert result["volume_ratio"] == pytest.approx(math.pi**2 / 2.0, rel=1e-9)
    assert not result["collapsed"]


def test_single_point_domain_is_flagged(collapsed_torus):
    domain = collapsed_torus.sample_domain(Region(kind="point", point=(0.0, 0.5, 0.5, 0.5)), 0.1)
    result = collapse_check(collapsed_torus, domain.points[0], tau=0.02, s=1.0, domain=domain)
    assert result["insufficient_sampling"]
    assert result["warnings"]


@pytest.mark.parametrize("fixture", ["flat_torus", "sphere", "hyperbolic"])
def test_volume_comparison_passes(request, fixture):
    model = request.getfixturevalue(fixture)
    p = SPHERE_POINT if fixture == "sphere" else np.zeros(4)
    result = volume_comparison_check(model, p, rho=0.5, beta=0.5)
    assert result["passes"]
    assert result["annulus_ratio"] <= result["ball_ratio"]


def test_hyperbolic_ball_ratio_exceeds_euclidean(hyperbolic):
    result = volume_comparison_check(hyperbolic, np.zeros(4), rho=0.5, beta=0.5)
    assert result["ball_ratio"] > result["euclidean_ratio"]
    assert result["bound"] == pytest.approx(9.0 / 8.0 * 16.0 * math.cosh(math.sqrt(3.0) * 0.5) ** 3)


def test_volume_comparison_parameter_window(hyperbolic):
    with pytest.raises(ParameterError) as info:
        volume_comparison_check(hyperbolic, np.zeros(4), rho=1.0, beta=5.0)
    assert info.value.key == "task.beta"
    with pytest.raises(ParameterError):
        volume_comparison_check(hyperbolic, np.zeros(4), rho=0.5, beta=0.5, gamma=0.5)


def test_scan_grid(flat_torus):
    records = scan(flat_torus, [np.zeros(4), np.full(4, 0.5)], [0.1, 0.2], with_harnack=True)
    assert len(records) == 4
    assert all(r["satisfied"] for r in records)
    assert records[0]["harnack"]["c_measured"] == pytest.approx(1.0)
    assert [r["r"] for r in records] == [0.1, 0.2, 0.1, 0.2]


def test_bump_classification_is_stable_under_refinement(bump):
    p = np.array([0.9, 0.0, 0.0, 0.0])
    coarse = classify(bump, p, 0.3, resolution=0.02)
    fine = classify(bump, p, 0.3, resolution=0.01)
    assert coarse.constants["sup_r2"] > 0.0
    assert fine.constants["sup_r2"] == pytest.approx(coarse.constants["sup_r2"], rel=0.1)
    assert fine.energy == pytest.approx(coarse.energy, rel=0.1)


@pytest.mark.slow
def test_harnack_on_bump(bump):
    result = harnack_probe(bump, np.zeros(4), 0.2)
    refined = harnack_probe(bump, np.zeros(4), 0.2, rtol=1e-3)
    assert math.isfinite(result["c_measured"])
    assert result["c_measured"] > 0.0
    assert 0.0 < result["delta0"] <= 1.0
    assert refined["c_measured"] == pytest.approx(result["c_measured"], rel=0.1)


SCAN_POINTS = {
    "flat_torus": np.zeros(4),
    "sphere": SPHERE_POINT,
    "hyperbolic": np.zeros(4),
    "s2xs2": np.array([1.2, 1.0, 1.2, 1.0]),
    "warped": np.array([1.57, 1.0, 1.0, 1.0]),
    "bump": np.zeros(4),
}


@pytest.mark.parametrize(
    "fixture",
    [
        "flat_torus",
        "sphere",
        "hyperbolic",
        "s2xs2",
        pytest.param("warped", marks=pytest.mark.slow),
        pytest.param("bump", marks=pytest.mark.slow),
    ],
)
def test_scan_across_catalog(request, fixture):
    model = request.getfixturevalue(fixture)
    records = scan(model, [SCAN_POINTS[fixture]], [0.1, 0.3], with_harnack=True)
    assert len(records) == 2
    assert all(r["satisfied"] for r in records)
    for record in records:
        c = record["harnack"]["c_measured"]
        if model.homogeneous:
            assert c == pytest.approx(1.0, abs=1e-9)
        else:
            assert math.isfinite(c)
