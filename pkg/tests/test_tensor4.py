import math

import numpy as np
import pytest

from app.exceptions import SymmetryError
from app.services import tensor4


@pytest.fixture
def corpus(rng):
    return [tensor4.random_curvature(rng) for _ in range(1000)]


def test_decomposition_identity_on_random_corpus(corpus):
    for rm in corpus:
        norms = tensor4.norms_and_identities(tensor4.decompose(rm))
        assert abs(norms.residual) <= 1e-10 * norms.rm_sq


def test_energy_identity_on_random_corpus(corpus):
    for rm in corpus:
        dens = tensor4.characteristic_densities(tensor4.decompose(rm))
        assert abs(dens.energy_residual) <= 1e-10 * rm.norm_squared()


def test_brute_force_norm_matches(corpus):
    for rm in corpus[:50]:
        assert tensor4.brute_force_norm(rm.components) == pytest.approx(rm.norm_squared(), rel=1e-12)


def test_unit_sphere_densities():
    rm = tensor4.CurvatureTensor.constant_curvature(1.0)
    dec = tensor4.decompose(rm)
    norms = tensor4.norms_and_identities(dec)
    dens = tensor4.characteristic_densities(dec)
    assert dec.scalar == pytest.approx(12.0)
    assert norms.rm_sq == pytest.approx(24.0)
    assert norms.ric0_sq == pytest.approx(0.0, abs=1e-12)
    assert norms.weyl_sq == pytest.approx(0.0, abs=1e-12)
    assert dens.pchi == pytest.approx(3.0 / (4.0 * math.pi**2), rel=1e-12)
    assert dens.ptau == pytest.approx(0.0, abs=1e-14)


def test_flat_tensor_is_all_zero():
    dec = tensor4.decompose(tensor4.CurvatureTensor.zero())
    dens = tensor4.characteristic_densities(dec)
    assert dec.scalar == 0.0
    assert dens.pchi == 0.0
    assert dens.ptau == 0.0


def test_four_form_density_matches_pchi_on_sphere():
    comps = tensor4.CurvatureTensor.constant_curvature(1.0).components
    assert tensor4.four_form_density(comps) == pytest.approx(3.0 / (4.0 * math.pi**2), rel=1e-12)


def test_norms_invariant_under_rotation(rng, corpus):
    for rm in corpus[:20]:
        frame = tensor4.random_rotation(rng)
        a = tensor4.norms_and_identities(tensor4.decompose(rm))
        b = tensor4.norms_and_identities(tensor4.decompose(rm.rotated(frame)))
        assert b.rm_sq == pytest.approx(a.rm_sq, rel=1e-10)
        assert b.wplus_sq == pytest.approx(a.wplus_sq, rel=1e-9, abs=1e-12)
        assert b.wminus_sq == pytest.approx(a.wminus_sq, rel=1e-9, abs=1e-12)


def test_reflection_swaps_selfdual_parts(corpus):
    for rm in corpus[:20]:
        a = tensor4.norms_and_identities(tensor4.decompose(rm))
        b = tensor4.norms_and_identities(tensor4.decompose(tensor4.reflect(rm, axis=2)))
        assert b.wplus_sq == pytest.approx(a.wminus_sq, rel=1e-9, abs=1e-12)
        assert b.wminus_sq == pytest.approx(a.wplus_sq, rel=1e-9, abs=1e-12)


def test_reassemble_roundtrip(corpus):
    rm = corpus[0]
    back = tensor4.reassemble(tensor4.decompose(rm))
    np.testing.assert_allclose(back.components, rm.components, atol=1e-12)


def test_batch_invariants_match_pointwise(corpus):
    comps = np.stack([rm.components for rm in corpus[:30]])
    batch = tensor4.batch_invariants(comps)
    for i, rm in enumerate(corpus[:30]):
        dec = tensor4.decompose(rm)
        dens = tensor4.characteristic_densities(dec)
        assert batch["pchi"][i] == pytest.approx(dens.pchi, rel=1e-9, abs=1e-14)
        assert batch["ptau"][i] == pytest.approx(dens.ptau, rel=1e-9, abs=1e-14)


@pytest.mark.parametrize("orientation", [1, -1])
def test_orientation_flips_signature_density(corpus, orientation):
    dec = tensor4.decompose(corpus[1], orientation=orientation)
    base = tensor4.decompose(corpus[1], orientation=1)
    dens = tensor4.characteristic_densities(dec)
    ref = tensor4.characteristic_densities(base)
    assert dens.ptau == pytest.approx(orientation * ref.ptau, rel=1e-9, abs=1e-14)


def test_symmetry_violation_is_named(rng):
    with pytest.raises(SymmetryError) as info:
        tensor4.CurvatureTensor.from_array(rng.normal(size=(4, 4, 4, 4)))
    assert info.value.symmetry
    assert info.value.residual > 0.0


def test_wrong_shape_rejected():
    with pytest.raises(SymmetryError):
        tensor4.CurvatureTensor.from_array(np.zeros((3, 3, 3, 3)))


def test_alternative_normalisation_is_not_flagged(corpus):
    # W⁺ ≠ W⁻ 이면 (P_χ + P_τ) 변형은 항등식을 만족하지 않습니다
    mismatched = 0
    for rm in corpus[:20]:
        dens = tensor4.characteristic_densities(tensor4.decompose(rm))
        if not dens.alternative_matches:
            mismatched += 1
    assert mismatched == 20
