import numpy as np
import pytest

from app.exceptions import ParameterError
from app.models import DistanceOracle, Region
from app.services.cover import (
    LABEL_S,
    build_cover_and_verify,
    build_cutoff_cover,
    build_separated_subset,
    check_cutoff_window,
    multiplicity_scaling,
)
from app.services.radius import radius_field


@pytest.fixture
def torus_field(flat_torus_2d):
    domain = flat_torus_2d.sample_domain(None, 0.05)
    return domain, radius_field(flat_torus_2d, domain, 1.0)


@pytest.mark.parametrize("k,l", [(16.0, 8.0 / 7.0), (32.0, 8.0 / 7.0), (8.0, 1.2)])
def test_greedy_cover_on_flat_torus(flat_torus_2d, torus_field, k, l):
    domain, field = torus_field
    oracle = DistanceOracle(flat_torus_2d, domain.points)
    centers = build_separated_subset(flat_torus_2d, domain, field, k, oracle)
    cover, report = build_cover_and_verify(flat_torus_2d, domain, field, centers, k, l, oracle)

    assert report.points == 400
    assert report.coverage_fraction == 1.0
    assert report.separation_violations == 0
    assert report.maximality_violations == 0
    assert report.disjointness_violations == 0
    assert report.sandwich_violations == 0
    assert np.all(cover.covered)
    assert cover.radii == pytest.approx(np.full(len(centers), l / k))


def test_fine_separation_keeps_every_point(flat_torus_2d, torus_field):
    domain, field = torus_field
    centers = build_separated_subset(flat_torus_2d, domain, field, 32.0)
    # 1/32 < 격자 간격 0.05
    assert len(centers) == len(domain)


def test_greedy_order_is_deterministic(flat_torus_2d, torus_field):
    domain, field = torus_field
    a = build_separated_subset(flat_torus_2d, domain, field, 8.0)
    b = build_separated_subset(flat_torus_2d, domain, field, 8.0)
    np.testing.assert_array_equal(a, b)
    assert a[0] == 0


def test_window_flags_without_exception(flat_torus_2d, torus_field):
    domain, field = torus_field
    centers = build_separated_subset(flat_torus_2d, domain, field, 8.0)
    _, report = build_cover_and_verify(flat_torus_2d, domain, field, centers, 8.0, 1.2)
    assert report.coverage_guaranteed
    assert not report.multiplicity_guaranteed
    assert report.warnings


@pytest.mark.parametrize("k", [1.0, 0.5])
def test_separation_parameter_must_exceed_one(flat_torus_2d, torus_field, k):
    domain, field = torus_field
    with pytest.raises(ParameterError) as info:
        build_separated_subset(flat_torus_2d, domain, field, k)
    assert info.value.key == "task.k"


@pytest.mark.parametrize("k,l", [(8.0, 8.0 / 7.0), (8.0, 1.2), (16.0, 1.0)])
def test_cutoff_window_rejects(k, l):
    with pytest.raises(ParameterError):
        check_cutoff_window(k, l)


def test_cutoff_window_accepts_interior():
    check_cutoff_window(16.0, 8.0 / 7.0)


def test_cutoff_cover_on_flat_torus(flat_torus_2d, torus_field):
    domain, field = torus_field
    cover, report = build_cutoff_cover(flat_torus_2d, domain, field, 16.0, 8.0 / 7.0)
    # 평탄 모델은 r = s 이므로 모든 중심이 P^s
    assert set(cover.partition) == {LABEL_S}
    assert report.coverage_fraction == 1.0
    assert report.containment_violations == 0
    assert report.stage2_curvature_ok
    assert report.stage2_curvature_sup == 0.0


def test_multiplicity_constant_is_stable(flat_torus_2d, torus_field):
    domain, field = torus_field
    result = multiplicity_scaling(flat_torus_2d, domain, field, ks=(8.0, 16.0, 32.0), l=1.2)
    assert result["stable"]
    assert result["dimension"] == 2
    assert result["per_k"][32.0]["max_multiplicity"] == 1


def test_cover_rows(flat_torus_2d, torus_field):
    domain, field = torus_field
    centers = build_separated_subset(flat_torus_2d, domain, field, 8.0)
    cover, _ = build_cover_and_verify(flat_torus_2d, domain, field, centers, 8.0, 1.2)
    rows = cover.rows(domain)
    assert len(rows) == len(centers)
    assert {"x0", "x1", "index", "radius_field", "cover_radius", "partition"} == set(rows[0])


@pytest.mark.parametrize("k,l", [(16.0, 8.0 / 7.0), (32.0, 8.0 / 7.0), (8.0, 1.2)])
def test_greedy_cover_across_catalog(catalog_slab, k, l):
    model, domain, s = catalog_slab
    field = radius_field(model, domain, s)
    oracle = DistanceOracle(model, domain.points)
    centers = build_separated_subset(model, domain, field, k, oracle)
    cover, report = build_cover_and_verify(model, domain, field, centers, k, l, oracle)

    assert report.coverage_fraction == 1.0
    assert report.separation_violations == 0
    assert report.maximality_violations == 0
    assert report.disjointness_violations == 0
    assert report.sandwich_violations == 0
    assert np.all(cover.covered)


def test_multiplicity_constant_is_stable_across_catalog(catalog_slab):
    model, domain, s = catalog_slab
    field = radius_field(model, domain, s)
    result = multiplicity_scaling(model, domain, field, ks=(8.0, 16.0, 32.0), l=1.2)
    assert result["stable"]
    assert result["dimension"] == 4


@pytest.mark.slow
def test_bump_cover_skips_distant_pairs(bump):
    # 지지 공 전체를 가로지르는 판: 먼 쌍은 하한만으로 걸러져야 함
    region = Region(kind="box", lower=(-1.3, -1.3, 0.0, 0.0), upper=(1.3, 1.3, 0.02, 0.02))
    domain = bump.sample_domain(region, 0.2)
    field = radius_field(bump, domain, 0.4)
    oracle = DistanceOracle(bump, domain.points)
    centers = build_separated_subset(bump, domain, field, 16.0, oracle)
    _, report = build_cover_and_verify(bump, domain, field, centers, 16.0, 8.0 / 7.0, oracle)

    assert report.coverage_fraction == 1.0
    assert report.separation_violations == 0
    assert report.maximality_violations == 0
    assert report.disjointness_violations == 0
    # 자기 자신과의 거리만 계산
    assert oracle.evaluations <= len(domain)
