import math

import numpy as np
import pytest

from app.exceptions import OrientationError, PolarizationError
from app.models import Region
from app.models.base import KillingField
from app.services.transgression import (
    curvature_form_residual,
    k_form,
    modified_curvature,
    stokes_check,
    stokes_refinement,
    transgression_density,
)

P = np.array([1.0, 1.2, 0.5, 2.0])


def _theta(model):
    return [kf for kf in model.killing_fields() if kf.name == "rotation_theta"]


def test_levi_civita_curvature_matches_tensor(sphere):
    assert curvature_form_residual(sphere, P) < 1e-4


def test_k_form_contraction_on_warped_model(warped):
    value = k_form(warped, _theta(warped), P)
    assert value.skew_residual < 1e-8
    assert value.contraction_residual < 1e-6
    assert value.norms[0] == pytest.approx(1.0 + 0.3 * math.cos(1.0), rel=1e-12)


def test_modified_curvature_annihilates_killing_direction(warped):
    value = modified_curvature(warped, _theta(warped), P, h=2e-4)
    assert value.iv_residual_scaled <= 1e-6
    assert value.pff_scaled <= 1e-6
    assert value.curvature_radius > 0.0


def test_flat_translations_have_vanishing_k_form(flat_torus):
    value = k_form(flat_torus, flat_torus.killing_fields(), np.array([0.2, 0.4, 0.6, 0.8]))
    np.testing.assert_allclose(value.frame, 0.0, atol=1e-10)
    assert value.orthogonality == pytest.approx(0.0, abs=1e-12)


def test_flat_transgression_is_zero(flat_torus):
    value = transgression_density(flat_torus, flat_torus.killing_fields()[:1], np.array([0.2, 0.4, 0.6, 0.8]), s=0.3)
    assert value.frame_norm == pytest.approx(0.0, abs=1e-10)
    assert value.bound_constant == pytest.approx(0.0, abs=1e-10)


def test_vanishing_field_is_not_polarized(flat_torus):
    dead = KillingField("zero", lambda X: np.zeros_like(np.atleast_2d(X), dtype=float))
    with pytest.raises(PolarizationError):
        k_form(flat_torus, [dead], np.array([0.2, 0.4, 0.6, 0.8]))


def test_point_region_has_no_boundary(warped):
    with pytest.raises(OrientationError):
        stokes_check(warped, _theta(warped), Region(kind="point", point=tuple(P)), (4, 4, 1, 1))


def test_flat_stokes_identity_is_trivial(flat_torus):
    region = Region(kind="box", lower=(0.1, 0.1, 0.1, 0.1), upper=(0.4, 0.4, 0.4, 0.4))
    report = stokes_check(flat_torus, flat_torus.killing_fields()[:1], region, (2, 2, 2, 2))
    assert report.residual == pytest.approx(0.0, abs=1e-10)
    # 평탄 토러스의 모든 축은 주기 축
    assert report.faces == []


@pytest.mark.slow
def test_stokes_residual_halves_under_refinement(warped):
    region = Region(kind="box", lower=(0.8, 0.0, 0.0, 0.0), upper=(1.6, math.pi, 2.0 * math.pi, 2.0 * math.pi))
    result = stokes_refinement(warped, _theta(warped), region, (4, 4, 1, 1), levels=3)
    assert len(result["residuals"]) == 3
    assert result["halving"]
    assert set(result["reports"][0].faces) == {"x0=upper", "x0=lower"}
