import pytest

from invofactor.core.errors import PreconditionViolation
from invofactor.linalg import Mat
from invofactor.normalform import ShiftNormalForm, needs_normal_form
from invofactor.opcore import BasisIndex, FiniteBlock, LinComb, RepAut, ShiftBlock, equal_on_window
from invofactor.services.factorization_service import FactorizationService


def S(k: int) -> BasisIndex:
    return BasisIndex("S0", k)


@pytest.fixture
def spread_shift(F5):
    """The shift on F5[t, 1/t] with e_0 ↦ 2e_1 + e_5."""
    return RepAut(F5, shift_blocks=[ShiftBlock("S0", F5(1))], perturbation={S(0): {S(1): F5(1), S(5): F5(1)}})


@pytest.fixture
def block_into_shift(F5):
    """A fixed line M ⊕ the shift, with e_2 ↦ e_3 + e_M."""
    return RepAut(
        F5,
        finite_blocks=[FiniteBlock("M", Mat.diag(F5, [2]))],
        shift_blocks=[ShiftBlock("S0", F5(1))],
        perturbation={S(2): {BasisIndex("M", 0): F5(1)}},
    )


def test_needs_normal_form(shift5, spread_shift, block_into_shift):
    assert not needs_normal_form(shift5)
    assert needs_normal_form(spread_shift)
    assert needs_normal_form(block_into_shift)


def test_spread_shift_is_free_of_rank_one(F5, spread_shift):
    nf = ShiftNormalForm(spread_shift)
    assert nf.to_dict()["free_rank"] == 1
    assert nf.torsion_basis == []
    assert nf.to_dict()["region"] == {"S0": [0, 6]}
    W = spread_shift.default_window(12)
    assert equal_on_window(nf.transport(nf.aut), spread_shift, W).passed


def test_block_into_shift_keeps_its_torsion(F5, block_into_shift):
    nf = ShiftNormalForm(block_into_shift)
    assert len(nf.free) == 1
    assert len(nf.torsion_basis) == 1
    fixed = nf.torsion_basis[0]
    assert block_into_shift.apply_vec(fixed) == fixed.scaled(F5(2))
    W = block_into_shift.default_window(12)
    assert equal_on_window(nf.transport(nf.aut), block_into_shift, W).passed


def test_normal_images_invert_source_images(F5, spread_shift):
    nf = ShiftNormalForm(spread_shift)
    for k in (-9, -1, 0, 3, 6, 14):
        assert nf.to_source(nf.normal_image(S(k))) == LinComb.basis(S(k), F5)


def test_normal_form_needs_a_shift(golden5):
    with pytest.raises(PreconditionViolation):
        ShiftNormalForm(golden5)


@pytest.mark.parametrize("fixture", ["spread_shift", "block_into_shift"])
def test_perturbed_shifts_factor_through_the_normal_form(request, inv5, fixture):
    u = request.getfixturevalue(fixture)
    cert = FactorizationService(window=12).factor(u, [inv5] * 3)
    assert cert.passed
    assert cert.provenance["branch"] == "normal-form"
    assert cert.provenance["normal_form"]["free_rank"] == 1
