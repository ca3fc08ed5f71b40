import pytest

from invofactor.core.errors import BuilderStuck, PreconditionViolation
from invofactor.linalg import Mat, companion, direct_sum
from invofactor.algebra import QuadPoly
from invofactor.modulestruct import (
    ClosureResult,
    FreeDetected,
    Stratification,
    Stratum,
    build_strat_periodic,
    closure,
    is_semi_good,
    quotient_strata,
    verify_strat,
)
from invofactor.opcore import BasisIndex, FiniteBlock, LinComb, PeriodicBlock, RepAut, ShiftBlock, Window, lin_sum


def test_closure_of_a_torsion_vector(F5, golden5):
    result = closure(golden5, [LinComb.basis(BasisIndex("P0", 0, 3), F5)])
    assert isinstance(result, ClosureResult)
    assert result.dim == 2


def test_closure_detects_free_part(F5, shift5):
    result = closure(shift5, [LinComb.basis(BasisIndex("S0", 0), F5)], bound=16)
    assert isinstance(result, FreeDetected)
    assert result.report.independent


def test_build_strat_periodic_is_semi_good(F5, golden5):
    s = build_strat_periodic(golden5)
    assert s.is_infinite
    assert is_semi_good(s)
    assert s.stratum(5).dim == 2
    W = Window.of(i for c in range(4) for i in golden5.copy_indices(c))
    assert verify_strat(s, W).passed


def test_build_strat_periodic_with_a_finite_core(F7):
    u = RepAut(
        F7,
        finite_blocks=[FiniteBlock("C", Mat.from_rows(F7, [[1, 3], [3, 0]]))],
        periodic_blocks=[PeriodicBlock("K", Mat.from_rows(F7, [[0, 3], [3, 0]]))],
    )
    s = build_strat_periodic(u)
    assert s.prefix[0].dim >= 2
    assert is_semi_good(s)
    W = Window.of(u.finite_indices() + [i for c in range(3) for i in u.copy_indices(c)])
    assert verify_strat(s, W).passed


def test_build_strat_periodic_preconditions(F5, shift5, rank_one7):
    with pytest.raises(PreconditionViolation):
        build_strat_periodic(shift5)
    with pytest.raises(PreconditionViolation):
        build_strat_periodic(rank_one7)


def test_one_dimensional_pieces_are_paired(F5):
    u = RepAut(F5, periodic_blocks=[PeriodicBlock("P0", Mat.diag(F5, [2, 2, 3]))])
    s = build_strat_periodic(u)
    assert s.tail.pairing
    assert is_semi_good(s)
    assert [s.stratum(k).dim for k in range(9)] == [2] * 9
    W = Window.of(i for c in range(4) for i in u.copy_indices(c))
    assert verify_strat(s, W).passed


def test_paired_coordinates_rebuild_the_index(F5):
    u = RepAut(F5, periodic_blocks=[PeriodicBlock("P0", Mat.diag(F5, [2, 2, 3]))])
    s = build_strat_periodic(u)
    for idx in u.copy_indices(3):
        vec = lin_sum((c, s.orbit(k)[l]) for (k, l), c in s.coordinates(idx).items())
        assert vec == LinComb.basis(idx, F5)


def test_pairing_with_a_single_prime_gets_stuck(F5):
    jordan = Mat.from_rows(F5, [[2, 0], [1, 2]])
    u = RepAut(F5, periodic_blocks=[PeriodicBlock("P0", direct_sum(Mat.diag(F5, [2]), jordan))])
    with pytest.raises(BuilderStuck):
        build_strat_periodic(u)


def test_semi_good_rejects_a_last_finite_stratum(F5, golden5):
    s = Stratification(golden5, [Stratum(LinComb.basis(BasisIndex("P0", 0, 0), F5), 2)])
    report = is_semi_good(s)
    assert not report
    assert "greatest element" in report.reasons[0]


def test_quotient_strata_of_shift_plus_block(F5):
    u = RepAut(
        F5,
        finite_blocks=[FiniteBlock("M", companion(QuadPoly.of(F5, 1, -1, -1)))],
        shift_blocks=[ShiftBlock("S0", F5(1))],
    )
    s = quotient_strata(u)
    assert [st.dim for st in s.prefix] == [2]
    assert not s.is_infinite
    assert s.to_dict()["tail_rule"] is None


def test_quotient_strata_rejects_perturbed_shift(F5):
    u = RepAut(
        F5,
        finite_blocks=[FiniteBlock("M", Mat.identity(F5, 1))],
        shift_blocks=[ShiftBlock("S0", F5(1))],
        perturbation={BasisIndex("S0", 2): {BasisIndex("M", 0): F5(1)}},
    )
    with pytest.raises(PreconditionViolation):
        quotient_strata(u)
