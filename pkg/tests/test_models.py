import math

import numpy as np
import pytest

from app.exceptions import ChartCoverageError, ParameterError, ScenarioError
from app.models import CATALOG, DistanceOracle, FlatTorus, Region, Sphere4, build_model
from app.models.flat import clipped_ball_volume


def test_catalog_builds_every_model():
    for name in CATALOG:
        model = build_model(name)
        assert model.name == name
        assert model.dimension == 4


def test_unknown_model_is_scenario_error():
    with pytest.raises(ScenarioError) as info:
        build_model("klein_bottle")
    assert info.value.key == "model.name"


def test_bad_model_parameter_is_scenario_error():
    with pytest.raises(ScenarioError) as info:
        build_model("sphere4", curvature=2.0)
    assert info.value.key == "model.params"


def test_out_of_range_model_parameter_names_params():
    with pytest.raises(ParameterError) as info:
        build_model("sphere4", radius=-1.0)
    assert info.value.key == "model.params"


@pytest.mark.parametrize("radius", [0.0, -1.0])
def test_nonpositive_sphere_radius(radius):
    with pytest.raises(ParameterError):
        Sphere4(radius)


def test_flat_torus_minimum_image_distance(flat_torus):
    P = np.array([[0.1, 0.0, 0.0, 0.0]])
    Q = np.array([[0.9, 0.0, 0.0, 0.0]])
    assert flat_torus.pairwise_distance(P, Q)[0] == pytest.approx(0.2)


def test_clipped_ball_volume_small_radius_is_euclidean():
    r = 0.2
    assert clipped_ball_volume(r, (0.5, 0.5, 0.5, 0.5)) == pytest.approx(math.pi**2 / 2.0 * r**4, rel=1e-12)


def test_collapsed_torus_ball_fills_fundamental_domain(collapsed_torus):
    assert collapsed_torus.ball_volume(np.zeros(4), 1.0) == pytest.approx(0.01, rel=1e-6)


def test_sphere_ball_volume_closed_forms(sphere):
    p = np.array([1.0, 1.0, 1.0, 0.0])
    assert sphere.ball_volume(p, math.pi) == pytest.approx(8.0 * math.pi**2 / 3.0, rel=1e-12)
    r = 1e-2
    assert sphere.ball_volume(p, r) == pytest.approx(math.pi**2 / 2.0 * r**4, rel=1e-4)


def test_hyperbolic_ball_volume_exceeds_euclidean(hyperbolic):
    r = 0.5
    assert hyperbolic.ball_volume(np.zeros(4), r) > math.pi**2 / 2.0 * r**4


def test_hyperbolic_chart_coverage(hyperbolic):
    with pytest.raises(ChartCoverageError) as info:
        hyperbolic.check_chart(np.array([[0.99, 0.0, 0.0, 0.0]]), reach=0.05)
    assert info.value.margin < 0.0


def test_hyperbolic_has_no_full_region(hyperbolic):
    with pytest.raises(ChartCoverageError) as info:
        hyperbolic.sample_domain(None, 0.5)
    assert info.value.key == "domain.region"


def test_hyperbolic_box_outside_ball_names_region(hyperbolic):
    with pytest.raises(ChartCoverageError) as info:
        hyperbolic.sample_domain(Region(kind="box", lower=(-0.9,) * 4, upper=(0.9,) * 4), 0.3)
    assert info.value.key == "domain.region"


def test_sphere_distance_is_geodesic(sphere):
    north = np.array([[0.0, 1.0, 1.0, 0.0]])
    south = np.array([[math.pi, 1.0, 1.0, 0.0]])
    assert sphere.pairwise_distance(north, south)[0] == pytest.approx(math.pi, rel=1e-12)


def test_s2xs2_densities(s2xs2):
    inv = s2xs2.invariants(np.array([[1.0, 0.5, 1.0, 0.5]]))
    assert inv["scalar"][0] == pytest.approx(4.0)
    assert inv["pchi"][0] == pytest.approx(1.0 / (4.0 * math.pi**2), rel=1e-12)
    assert inv["ptau"][0] == pytest.approx(0.0, abs=1e-14)


def test_hyperbolic_ricci_lower_bound(hyperbolic):
    X = np.array([[0.1, 0.2, 0.0, -0.1]])
    check = hyperbolic.ricci_lower_bound_check(X)
    assert check["min_ricci_eigenvalue"] == pytest.approx(-3.0)
    assert check["holds"]


def test_flat_translations_are_killing(flat_torus):
    for kf in flat_torus.killing_fields():
        value = flat_torus.killing_value(kf, np.array([0.3, 0.4, 0.5, 0.6]))
        assert value.killing_residual < 1e-10
        assert value.norm == pytest.approx(1.0)


def test_warped_curvature_matches_finite_differences(warped):
    X = np.array([[1.0, 1.2, 0.5, 2.0]])
    exact = warped.curvature_batch(X)
    fd = warped.curvature_fd(X, h=1e-3)
    np.testing.assert_allclose(fd, exact, atol=1e-4)


def test_bump_is_flat_outside_support(bump):
    X = np.array([[2.0, 0.0, 0.0, 0.0]])
    assert bump.rm_norm(X)[0] == pytest.approx(0.0, abs=1e-8)


def test_sample_domain_weights_sum_to_volume(flat_torus):
    domain = flat_torus.sample_domain(None, 0.25, seed=1)
    assert len(domain) == 256
    assert domain.total_volume == pytest.approx(1.0)
    assert domain.boundary_mask is None


def test_sample_domain_is_deterministic_for_seed(flat_torus):
    a = flat_torus.sample_domain(None, 0.25, seed=7, jitter=0.5)
    b = flat_torus.sample_domain(None, 0.25, seed=7, jitter=0.5)
    np.testing.assert_array_equal(a.points, b.points)


def test_box_domain_marks_boundary_layer(flat_torus):
    region = Region(kind="box", lower=(0.0, 0.0, 0.0, 0.0), upper=(0.5, 0.5, 0.5, 0.5))
    domain = flat_torus.sample_domain(region, 0.125)
    assert len(domain) == 256
    # 4×4×4×4 중 안쪽 2×2×2×2 만 경계가 아님
    assert int(np.sum(~domain.boundary_mask)) == 16


def test_point_region_is_single_sample(flat_torus):
    domain = flat_torus.sample_domain(Region(kind="point", point=(0.5, 0.5, 0.5, 0.5)), 0.1)
    assert len(domain) == 1
    assert domain.weights[0] == pytest.approx(1e-4)


def test_restrict_keeps_parent_indices(flat_torus):
    domain = flat_torus.sample_domain(None, 0.25)
    mask = domain.points[:, 0] < 0.5
    sub = domain.restrict(mask)
    np.testing.assert_array_equal(domain.points[sub.parent_indices], sub.points)


def test_distance_oracle_caches_and_filters(flat_torus):
    domain = flat_torus.sample_domain(None, 0.25)
    oracle = DistanceOracle(flat_torus, domain.points)
    first = oracle.row(0, np.arange(len(domain)))
    evaluations = oracle.evaluations
    second = oracle.row(0, np.arange(len(domain)))
    np.testing.assert_array_equal(first, second)
    assert oracle.evaluations == evaluations
    near = oracle.within(0, 0.3)
    assert np.all(first[near] <= 0.3)


def test_scaled_flat_torus_distances():
    model = FlatTorus(scale=2.0)
    P = np.zeros((1, 4))
    Q = np.array([[0.25, 0.0, 0.0, 0.0]])
    assert model.pairwise_distance(P, Q)[0] == pytest.approx(0.5)
