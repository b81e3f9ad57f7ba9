import math

import numpy as np
import pytest

from app.exceptions import ChartCoverageError, ParameterError
from app.models import Region
from app.services.integration import (
    full_radius_report,
    gauss_bonnet,
    integration_report,
    refinement_study,
    thickened_sets,
)
from app.services.radius import radius_field


def _setup(model, ambient, mask, s):
    omega = ambient.restrict(mask)
    return radius_field(model, omega, s)


def test_flat_torus_has_only_volume_term(flat_torus):
    ambient = flat_torus.sample_domain(None, 0.25)
    mask = ambient.points[:, 0] < 0.5
    field = _setup(flat_torus, ambient, mask, 0.3)
    report = integration_report(flat_torus, ambient, mask, field, k=4.0, s=0.3, mu=1.0, m=1.0)

    assert report.lhs == pytest.approx(0.5 * 0.3**-4, rel=1e-12)
    assert report.volume_omega == pytest.approx(0.5)
    assert report.energy_term == 0.0
    assert report.c_measured is None
    assert report.warnings
    assert report.holds_with_c1


def test_thickened_sets_contain_each_other(flat_torus):
    ambient = flat_torus.sample_domain(None, 0.25)
    mask = ambient.points[:, 0] < 0.5
    field = _setup(flat_torus, ambient, mask, 0.3)
    sets = thickened_sets(flat_torus, ambient, mask, field, 0.3, 0.5)
    assert all(v == 0 for v in sets.containment_violations().values())
    assert sets.omega.total_volume == pytest.approx(0.5)
    with pytest.raises(ParameterError):
        sets.thickening_mask(1.0)


def test_cover_decomposition_matches_constant_field(flat_torus):
    ambient = flat_torus.sample_domain(None, 0.25)
    mask = ambient.points[:, 0] < 0.5
    field = _setup(flat_torus, ambient, mask, 0.3)
    report = integration_report(
        flat_torus, ambient, mask, field, k=4.0, s=0.3, mu=1.0, m=1.0, with_cover_decomposition=True,
    )
    assert report.cover_decomposition_rel_diff == pytest.approx(0.0, abs=1e-12)


def test_sphere_constant_is_bounded(sphere):
    ambient = sphere.sample_domain(None, 1.0)
    mask = np.ones(len(ambient), dtype=bool)
    field = _setup(sphere, ambient, mask, 10.0)
    report = integration_report(sphere, ambient, mask, field, k=4.0, s=10.0, mu=1.0, m=1.0, candidates=[1.0, 2.0])

    assert report.energy_term > 0.0
    assert report.c_measured <= 1.05
    assert report.ratios["1"] <= 1.0
    assert report.m_source == "given"


def test_full_radius_variant_on_sphere(sphere):
    ambient = sphere.sample_domain(None, 1.0)
    mask = np.ones(len(ambient), dtype=bool)
    result = full_radius_report(sphere, ambient, mask, k=4.0)
    assert result["s"] == pytest.approx(math.pi)
    assert result["c_measured"] == pytest.approx(1.0, rel=1e-9)


def test_full_radius_requires_compact_model(hyperbolic):
    ambient = hyperbolic.sample_domain(Region(kind="box", lower=(-0.3,) * 4, upper=(0.3,) * 4), 0.3)
    with pytest.raises(ParameterError):
        full_radius_report(hyperbolic, ambient, np.ones(len(ambient), dtype=bool), k=4.0)


def test_thickening_past_ambient_box_is_rejected(flat_torus):
    region = Region(kind="box", lower=(0.0, 0.0, 0.0, 0.0), upper=(0.5, 0.5, 0.5, 0.5))
    ambient = flat_torus.sample_domain(region, 0.125)
    mask = ~ambient.boundary_mask
    field = _setup(flat_torus, ambient, mask, 0.3)
    with pytest.raises(ChartCoverageError):
        integration_report(flat_torus, ambient, mask, field, k=4.0, s=0.3, mu=1.0, m=1.0)


@pytest.mark.parametrize("mu", [0.0, 1.5])
def test_mu_out_of_range(flat_torus, mu):
    ambient = flat_torus.sample_domain(None, 0.25)
    mask = ambient.points[:, 0] < 0.5
    field = _setup(flat_torus, ambient, mask, 0.3)
    with pytest.raises(ParameterError) as info:
        integration_report(flat_torus, ambient, mask, field, k=4.0, s=0.3, mu=mu, m=1.0)
    assert info.value.key == "task.mu"


def test_nonpositive_exponent(flat_torus):
    ambient = flat_torus.sample_domain(None, 0.25)
    mask = ambient.points[:, 0] < 0.5
    field = _setup(flat_torus, ambient, mask, 0.3)
    with pytest.raises(ParameterError):
        integration_report(flat_torus, ambient, mask, field, k=0.0, s=0.3, mu=1.0)


def test_sphere_euler_characteristic(sphere):
    result = gauss_bonnet(sphere, 0.2)
    assert result["euler_integral"] == pytest.approx(2.0, rel=1e-2)
    assert result["euler_rounded"] == 2
    assert result["signature_integral"] == pytest.approx(0.0, abs=1e-10)
    assert result["volume"] == pytest.approx(8.0 * math.pi**2 / 3.0, rel=1e-2)


def test_product_of_spheres_euler_characteristic(s2xs2):
    result = gauss_bonnet(s2xs2, 0.3)
    assert result["euler_integral"] == pytest.approx(4.0, rel=1e-2)
    assert result["euler_rounded"] == 4


def test_flat_torus_euler_characteristic(flat_torus):
    result = gauss_bonnet(flat_torus, 0.25)
    assert result["euler_integral"] == 0.0
    assert result["euler_rounded"] == 0


def test_refinement_study_reports_relative_changes():
    study = refinement_study(lambda h: 1.0 + h, [0.5, 0.25])
    assert study["values"] == [1.5, 1.25]
    assert study["relative_changes"][0] == pytest.approx(0.25 / 1.5)
