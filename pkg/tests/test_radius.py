import math

import numpy as np
import pytest

from app.exceptions import ParameterError
from app.models import Region, Sphere4
from app.services.radius import (
    curvature_radius,
    lipschitz_report,
    monotonicity_check,
    radius_diagnostics,
    radius_field,
    resolve_cutoff,
    scaling_check,
)

UNIT_SPHERE_RADIUS = 24.0 ** -0.25


def test_flat_radius_equals_cutoff(flat_torus):
    domain = flat_torus.sample_domain(None, 0.25)
    field = radius_field(flat_torus, domain, 0.3)
    np.testing.assert_array_equal(field.values, np.full(len(domain), 0.3))
    assert np.all(field.cutoff_mask)


def test_sphere_radius_closed_form(sphere):
    p = np.array([1.0, 1.0, 1.0, 0.0])
    assert curvature_radius(sphere, p, math.inf) == pytest.approx(UNIT_SPHERE_RADIUS, rel=1e-12)
    assert curvature_radius(sphere, p, 0.2) == pytest.approx(0.2)


def test_hyperbolic_radius_without_cutoff(hyperbolic):
    assert curvature_radius(hyperbolic, np.zeros(4), math.inf) == pytest.approx(UNIT_SPHERE_RADIUS, rel=1e-12)


def test_infinite_cutoff_resolves_to_diameter(sphere, hyperbolic):
    assert resolve_cutoff(sphere, math.inf) == pytest.approx(math.pi)
    assert math.isinf(resolve_cutoff(hyperbolic, math.inf))


@pytest.mark.parametrize("s", [0.0, -1.0])
def test_nonpositive_cutoff_rejected(sphere, s):
    with pytest.raises(ParameterError) as info:
        curvature_radius(sphere, np.array([1.0, 1.0, 1.0, 0.0]), s)
    assert info.value.key == "task.s"


def test_cutoff_below_resolution_is_flagged(flat_torus):
    domain = flat_torus.sample_domain(None, 0.25)
    field = radius_field(flat_torus, domain, 0.1)
    assert np.all(field.values == 0.1)
    assert field.warnings


def test_warped_radius_is_bounded_by_curvature(warped):
    region = Region(kind="box", lower=(0.4, 0.4, 0.0, 0.0), upper=(2.6, 2.6, 1.2, 1.2))
    domain = warped.sample_domain(region, 0.6)
    field = radius_field(warped, domain, math.inf)
    rm = warped.rm_norm(domain.points)
    # |Rm|(p) < r(p)⁻²
    assert np.all(rm * field.values**2 <= 1.0 + 1e-3)
    assert np.all(field.values > 0.0)


def test_lipschitz_constant_on_warped_model(warped):
    region = Region(kind="box", lower=(0.4, 0.4, 0.0, 0.0), upper=(2.6, 2.6, 1.2, 1.2))
    domain = warped.sample_domain(region, 0.6)
    field = radius_field(warped, domain, math.inf)
    report = lipschitz_report(warped, field)
    assert report.constant <= 1.05
    assert not report.violates


def test_lipschitz_constant_is_zero_on_constant_field(sphere):
    domain = sphere.sample_domain(None, 0.8)
    field = radius_field(sphere, domain, math.inf)
    assert lipschitz_report(sphere, field).constant == 0.0


def test_monotone_in_cutoff(sphere):
    domain = sphere.sample_domain(None, 0.8)
    assert monotonicity_check(sphere, domain, [0.1, 0.3, 1.0])["violations"] == 0


def test_scaling_property():
    result = scaling_check(lambda lam: Sphere4(lam), np.array([1.0, 1.0, 1.0, 0.0]), math.inf, [0.5, 2.0])
    for ratio in result["ratios"].values():
        assert ratio == pytest.approx(1.0, rel=1e-12)


def test_diagnostics_on_sphere(sphere):
    domain = sphere.sample_domain(None, 0.8)
    field = radius_field(sphere, domain, math.inf)
    report = radius_diagnostics(sphere, field)
    assert report["consistency_failures"] == []
    assert report["maximality_failures"] == []


def test_rows_carry_coordinates(flat_torus):
    domain = flat_torus.sample_domain(None, 0.5)
    rows = radius_field(flat_torus, domain, 0.6).rows()
    assert len(rows) == len(domain)
    assert set(rows[0]) == {"x0", "x1", "x2", "x3", "radius"}


def test_bump_radius_reaches_cutoff_outside_support(bump):
    assert curvature_radius(bump, np.zeros(4), 10.0) < 10.0
    assert curvature_radius(bump, np.array([5.0, 0.0, 0.0, 0.0]), 1.0) == 1.0


def test_bump_radius_dips_near_support(bump):
    region = Region(kind="box", lower=(-1.3, -1.3, 0.0, 0.0), upper=(1.3, 1.3, 0.02, 0.02))
    domain = bump.sample_domain(region, 0.2)
    field = radius_field(bump, domain, 0.4)
    far = np.linalg.norm(domain.points, axis=1) >= 1.45

    assert np.any(far)
    assert np.all(field.values[far] == 0.4)
    assert field.values.min() < 0.4
    # sup |Rm| · r² < 1 이 모든 공에서 성립하는 반경 아래로는 내려가지 않음
    assert field.values.min() >= (1.0 - 1e-3) / math.sqrt(bump.curvature_sup())


def test_lipschitz_constant_across_catalog(catalog_slab):
    model, domain, s = catalog_slab
    field = radius_field(model, domain, s)
    report = lipschitz_report(model, field)
    assert report.constant <= 1.05
    assert not report.violates
