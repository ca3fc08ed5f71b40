import pytest

from invofactor.algebra import AcceptKind, QuadPoly, acceptable, get_field, root_products
from invofactor.core.decorators import retry_with_seed
from invofactor.core.errors import BuilderStuck, RefusalReason, Refused, ShapeMismatch, UnsupportedField
from invofactor.glsearch import general_linear, product_membership
from invofactor.linalg import Mat, direct_sum
from invofactor.models import Flavor
from invofactor.opcore import BasisIndex, PeriodicBlock, RepAut, Window, compose, equal_on_window
from invofactor.services.factorization_service import FactorizationService, classify3, flavor_of


def e(copy: int) -> BasisIndex:
    return BasisIndex("P0", 0, copy)


@pytest.fixture
def service():
    return FactorizationService(window=16)


def test_flavor_of(F5, inv5, unip5):
    assert flavor_of([inv5] * 3) == Flavor.INVOLUTIONS
    assert flavor_of([unip5] * 3) == Flavor.UNIPOTENTS
    assert flavor_of([unip5, inv5, inv5]) == Flavor.MIXED
    assert flavor_of([inv5, unip5, unip5]) == Flavor.INVOLUTION_UNIPOTENTS
    assert flavor_of([inv5, inv5, QuadPoly.from_roots(F5(2), F5(3))]) is None
    assert flavor_of([inv5] * 4) is None


def test_classify3(F5, F7, golden5, rank_one7):
    assert classify3(golden5, Flavor.INVOLUTIONS).product
    refused = classify3(rank_one7, Flavor.INVOLUTIONS)
    assert not refused.product
    assert refused.condition == "(i)"
    assert refused.dominant_eigenvalue == 3

    obstructed = RepAut.scalar(F5, 1, perturbation={e(0): {e(0): F5(1)}})
    decision = classify3(obstructed, Flavor.UNIPOTENTS)
    assert not decision.product
    assert decision.condition == "(ii)"
    assert decision.induced_det == 2
    assert classify3(obstructed, Flavor.INVOLUTIONS).condition == "(ii)"

    minus = RepAut.scalar(F5, -1, perturbation={e(0): {e(0): F5(2)}})
    assert classify3(minus, Flavor.UNIPOTENTS).product
    assert classify3(minus, Flavor.MIXED).product


def finite_rank_family(F5):
    """
    (λ, W) for λ·id + w over F5 with [w] = W invertible and λ·I + W invertible:
    every 1×1 block, and per λ every scalar 2×2 block plus one non-scalar
    block per determinant.
    """
    for lam in map(F5, range(1, 5)):
        for w in range(1, 5):
            if not (lam + w).is_zero():
                yield lam, Mat.from_rows(F5, [[w]])
        seen = set()
        for key in general_linear(2, 5):
            W = Mat.from_rows(F5, [key[:2], key[2:]])
            A = W + Mat.scalar(F5, 2, lam)
            scalar = W == Mat.scalar(F5, 2, W[0, 0])
            kind = (A.det(), W[0, 0] if scalar else None)
            if A.det().is_zero() or kind in seen:
                continue
            seen.add(kind)
            yield lam, W


def perturbed_scalar(lam, W) -> RepAut:
    k = W.rows
    return RepAut.scalar(
        lam.field,
        lam,
        perturbation={e(i): {e(j): W[j, i] for j in range(k) if not W[j, i].is_zero()} for i in range(k)},
    )


def padded_member(A, lam, polys, max_size: int = 3):
    """Least q with A ⊕ λ·I_q a product, for sizes up to max_size."""
    for q in range(max_size - A.rows + 1):
        T = direct_sum(A, Mat.scalar(A.field, q, lam)) if q else A
        if product_membership(T, polys).member:
            return q
    return None


@pytest.mark.parametrize("flavor", list(Flavor))
def test_classify3_agrees_with_finite_search(F5, inv5, unip5, flavor):
    polys = {
        Flavor.INVOLUTIONS: [inv5] * 3,
        Flavor.UNIPOTENTS: [unip5] * 3,
        Flavor.MIXED: [unip5, inv5, inv5],
        Flavor.INVOLUTION_UNIPOTENTS: [inv5, unip5, unip5],
    }[flavor]
    assert flavor_of(polys) == flavor
    for lam, W in finite_rank_family(F5):
        A = W + Mat.scalar(F5, W.rows, lam)
        decision = classify3(perturbed_scalar(lam, W), flavor)
        assert decision.dominant_eigenvalue == lam
        if decision.condition == "(i)":
            assert acceptable(lam, *polys).kind == AcceptKind.NO
            continue
        assert acceptable(lam, *polys).kind != AcceptKind.NO
        if decision.product:
            assert padded_member(A, lam, polys) is not None, (str(lam), str(A))
        else:
            assert all(A.det() * lam ** q not in root_products(polys, W.rows + q) for q in range(8)), (str(lam), str(A))


def test_three_involutions_agree_with_one_involution_and_two_unipotents(F5):
    for lam, W in finite_rank_family(F5):
        u = perturbed_scalar(lam, W)
        assert classify3(u, Flavor.INVOLUTIONS).product == classify3(u, Flavor.INVOLUTION_UNIPOTENTS).product

def test_scalar_operator(service, F5, inv5):
    u = RepAut.scalar(F5, 2)
    cert = service.factor(u, [inv5] * 3)
    assert cert.passed
    assert cert.provenance["pipeline"] == "scalar_id"
    assert cert.provenance["acceptable"] == "NormSquare"


def test_finite_rank_operator(service, F5, inv5):
    u = RepAut.scalar(F5, 2, perturbation={e(0): {e(0): F5(1)}})
    cert = service.factor(u, [inv5] * 3)
    assert cert.passed
    assert cert.provenance["pipeline"] == "finite_rank_three"
    assert cert.provenance["rank"] == 1
    assert cert.provenance["q"] == 1
    assert equal_on_window(compose(cert.ops), u, u.default_window()).passed


def test_not_acceptable_is_refused(service, F7, inv7):
    with pytest.raises(Refused) as exc:
        service.factor(RepAut.scalar(F7, 3), [inv7] * 3)
    assert exc.value.reason == RefusalReason.NOT_ACCEPTABLE
    assert exc.value.to_dict()["reason"] == "NotAcceptable"


def test_determinant_obstruction_is_refused(service, F5, unip5):
    u = RepAut.scalar(F5, 1, perturbation={e(0): {e(0): F5(1)}})
    with pytest.raises(Refused) as exc:
        service.factor(u, [unip5] * 3)
    assert exc.value.reason == RefusalReason.DETERMINANT_OBSTRUCTION


def test_rationals_without_finite_search():
    Q = get_field("Q")
    polys = [QuadPoly.from_roots(Q(1), Q(2)), QuadPoly.from_roots(Q(1), Q("1/2")), QuadPoly.of(Q, 1, 0, -1)]
    service = FactorizationService(window=4)
    assert service.factor(RepAut.scalar(Q, 1), polys).passed
    with pytest.raises(UnsupportedField):
        service.factor(RepAut.scalar(Q, 1, perturbation={e(0): {e(0): Q(1)}}), polys)


def test_shift_takes_the_free_branch(service, shift5, inv5):
    cert = service.factor(shift5, [inv5] * 3)
    assert cert.passed
    assert cert.provenance["branch"] == "free"
    assert cert.provenance["evidence"] == "window-certified"
    assert all(r.independent for r in cert.evidence)


def test_scaled_shift_mixed(service, F7, inv7):
    u = RepAut.shift(F7, 3)
    unip = QuadPoly.of(F7, 1, -2, 1)
    assert service.factor(u, [unip, inv7, unip]).passed


def test_torsion_branch(service, golden5, inv5, unip5):
    cert = service.factor(golden5, [inv5, unip5, inv5])
    assert cert.passed
    assert cert.provenance["branch"] == "torsion"
    assert cert.provenance["strata"]["tail_rule"]["templates"][0]["dim"] == 2


def test_torsion_branch_pairs_one_dimensional_pieces(service, F5, inv5):
    u = RepAut(F5, periodic_blocks=[PeriodicBlock("P0", Mat.diag(F5, [2, 2, 3]))])
    cert = service.factor(u, [inv5] * 3)
    assert cert.passed
    assert cert.provenance["branch"] == "torsion"
    assert cert.provenance["strata"]["tail_rule"]["pairing"]
    assert equal_on_window(compose(cert.ops), u, u.default_window(6)).passed


def test_four_factors_kill_dominant(service, rank_one7, inv7):
    cert = service.factor(rank_one7, [inv7] * 4)
    assert cert.passed
    assert cert.provenance["branch"] == "kill-dominant"
    assert cert.provenance["core_end"] == 2
    assert cert.provenance["inner"]["branch"] == "torsion"


def test_four_factor_product_holds_on_a_doubled_window(service, rank_one7, inv7):
    cert = service.factor(rank_one7, [inv7] * 4)
    product = compose(cert.ops)
    assert equal_on_window(product, rank_one7, cert.window).passed
    copies = 1 + max(i.copy for i in cert.window)
    doubled = Window.of(i for c in range(2 * copies) for i in rank_one7.copy_indices(c))
    assert len(doubled) == 2 * len(cert.window)
    report = equal_on_window(product, rank_one7, doubled)
    assert report.passed, report.to_dict()


def test_four_factors_scalar_prefix(service, shift5, unip5):
    cert = service.factor_four(shift5, [unip5] * 4)
    assert cert.passed
    assert cert.provenance["branch"] == "scalar-prefix"


def test_polynomial_count(service, shift5, inv5):
    with pytest.raises(ShapeMismatch):
        service.factor(shift5, [inv5] * 2)


def test_retry_with_seed_moves_to_the_next_seed():
    seen = []

    @retry_with_seed(max_retries=4)
    def flaky(*, seed: int = 0):
        seen.append(seed)
        if seed < 2:
            raise BuilderStuck("stuck", seed=seed)
        return seed

    assert flaky(seed=0) == 2
    assert seen == [0, 1, 2]


def test_retry_with_seed_reports_attempts():
    @retry_with_seed(max_retries=3)
    def stuck(*, seed: int = 0):
        raise BuilderStuck("always stuck")

    with pytest.raises(BuilderStuck) as exc:
        stuck(seed=5)
    assert [a["seed"] for a in exc.value.detail["attempts"]] == [5, 6, 7]
