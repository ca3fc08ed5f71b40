from concurrent.futures import ThreadPoolExecutor

import pytest

from invofactor.algebra import QuadPoly
from invofactor.core.errors import MalformedInput, NotInvertible, NoWitness, UnknownIndex
from invofactor.linalg import Mat
from invofactor.opcore import (
    BasisIndex,
    FiniteBlock,
    LazyOp,
    LinComb,
    OrbitBasis,
    PeriodicBlock,
    RepAut,
    Relabeling,
    ShiftBlock,
    TorsionEnumeration,
    Window,
    check_annihilated,
    compose,
    cyclic_window_cert,
    equal_on_window,
    invert,
)


def S(k):
    return BasisIndex("S0", k)


def test_lincomb_drops_zeros(F5):
    x = LinComb([(S(0), F5(2)), (S(1), F5(3)), (S(0), F5(3))])
    assert S(0) not in x
    assert x[S(1)] == 3
    assert (x - x).is_zero()
    assert x.scaled(F5(2))[S(1)] == 1


def test_repaut_needs_an_infinite_block(F5):
    with pytest.raises(MalformedInput):
        RepAut(F5, finite_blocks=[FiniteBlock("F", Mat.identity(F5, 2))])


def test_repaut_rejects_singular_blocks(F5):
    with pytest.raises(NotInvertible):
        RepAut(F5, periodic_blocks=[PeriodicBlock("P", Mat.from_rows(F5, [[1, 2], [2, 4]]))])
    with pytest.raises(NotInvertible):
        RepAut.scalar(F5, 1, perturbation={BasisIndex("P0", 0, 0): {BasisIndex("P0", 0, 0): F5(-1)}})


def test_index_validation(F5, shift5, golden5):
    shift5.check_index(S(-7))
    with pytest.raises(UnknownIndex):
        shift5.check_index(BasisIndex("S0", 0, 1))
    with pytest.raises(UnknownIndex):
        golden5.check_index(BasisIndex("P0", 2, 0))
    with pytest.raises(UnknownIndex):
        golden5.check_index(BasisIndex("P0", 0))


def test_coupled_operator_inverse(F5):
    u = RepAut(
        F5,
        finite_blocks=[FiniteBlock("F", Mat.from_rows(F5, [[2, 1], [0, 3]]))],
        shift_blocks=[ShiftBlock("S0", F5(2))],
        coupling={BasisIndex("F", 0): {S(4): F5(1)}},
        perturbation={S(0): {BasisIndex("F", 1): F5(1)}},
    )
    for idx in [BasisIndex("F", 0), BasisIndex("F", 1)] + [S(k) for k in range(-3, 7)]:
        assert u.apply_vec(u.inverse_apply(idx)) == LinComb.basis(idx, F5)


def test_dominant_eigenvalue(F5, F7, shift5, golden5, rank_one7):
    assert shift5.dominant_eigenvalue() is None
    assert golden5.dominant_eigenvalue() is None
    assert rank_one7.dominant_eigenvalue() == 3
    assert rank_one7.max_touched_copy() == 1
    assert set(rank_one7.deviation(F7(3))) == {BasisIndex("P0", 0, 0)}


def test_default_window_covers_perturbation(rank_one7):
    W = rank_one7.default_window(radius=4, margin=2)
    assert BasisIndex("P0", 0, 3) in W
    assert BasisIndex("P0", 0, 4) not in W


def test_default_window_on_shift(shift5):
    W = shift5.default_window(radius=5)
    assert len(W) == 11
    assert S(-5) in W and S(5) in W


def test_scalar_and_matrix_ops(F5):
    s = LazyOp.scalar(F5, 2)
    assert s.apply(S(3)) == {S(3): F5(2)}
    assert s.inverse_apply(S(3)) == {S(3): F5(3)}
    M = LazyOp.from_matrix(Mat.from_rows(F5, [[0, 1], [1, 0]]))
    assert M.apply(BasisIndex("F0", 0)) == {BasisIndex("F0", 1): F5(1)}
    with pytest.raises(UnknownIndex):
        M.apply(BasisIndex("F0", 2))


def test_inverse_from_annihilator(F5, inv5):
    swap = LazyOp(lambda i: {BasisIndex("X", i.slot ^ 1): F5(1)}, F5, annihilator=inv5)
    inv = invert(swap)
    assert inv.annihilator.same_roots_as(inv5)
    assert inv.apply(BasisIndex("X", 4)) == {BasisIndex("X", 5): F5(1)}
    with pytest.raises(NoWitness):
        invert(LazyOp(lambda i: {i: F5(1)}, F5))


def test_compose_applies_right_to_left(F5, shift5):
    double = LazyOp.scalar(F5, 2)
    op = compose([shift5, double])
    assert op.apply(S(0)) == {S(1): F5(2)}
    assert op.inverse_apply(S(1)) == {S(0): F5(3)}


def test_window_checks(F5, shift5, inv5):
    W = Window.shift_slots("S0", -8, 8)
    assert check_annihilated(LazyOp.scalar(F5, 4), inv5, W).passed
    report = check_annihilated(shift5, inv5, W)
    assert not report.passed
    assert report.checked == 17
    assert equal_on_window(shift5, compose([shift5]), W, jobs=3).passed
    mismatch = equal_on_window(shift5, LazyOp.scalar(F5, 1), W)
    assert len(mismatch.failures) == 17
    assert mismatch.to_dict()["passed"] is False


def test_relabeling_transport(F5):
    # new index X_n <-> old index S0_{n-10}
    relabel = Relabeling(lambda i: BasisIndex("X", i.slot + 10), lambda i: BasisIndex("S0", i.slot - 10))
    step = LazyOp(lambda i: {BasisIndex("X", i.slot + 1): F5(1)}, F5, inverse_rule=lambda i: {BasisIndex("X", i.slot - 1): F5(1)})
    moved = relabel.transport(step)
    assert moved.apply(S(0)) == {S(1): F5(1)}
    assert moved.inverse_apply(S(0)) == {S(-1): F5(1)}


def test_cyclic_window_cert(F5, shift5, golden5):
    report = cyclic_window_cert(shift5, LinComb.basis(S(0), F5), 10)
    assert report.independent
    assert report.rank == 21
    torsion = cyclic_window_cert(golden5, LinComb.basis(BasisIndex("P0", 0, 0), F5), 3)
    assert not torsion.independent
    assert torsion.rank == 2


def test_orbit_basis_expresses_targets(F5, shift5):
    orbit = OrbitBasis(shift5, LinComb.basis(S(0), F5), max_depth=20)
    assert orbit.express(LinComb.basis(S(-3), F5)) == {-3: F5(1)}


def test_torsion_enumeration(F5):
    u = RepAut(
        F5,
        finite_blocks=[FiniteBlock("F", Mat.identity(F5, 1))],
        periodic_blocks=[PeriodicBlock("P", Mat.from_rows(F5, [[0, 1], [1, 1]]))],
    )
    enum = TorsionEnumeration(u)
    assert enum.index_at(0) == BasisIndex("F", 0)
    assert enum.index_at(4) == BasisIndex("P", 1, 1)
    assert enum.position(BasisIndex("P", 0, 2)) == 5


def test_memo_tables_are_shared_across_threads(F5, shift5):
    op = LazyOp(lambda i: {S(i.slot + 1): F5(2)}, F5, annihilator=QuadPoly.of(F5, 1, 0, -4))
    indices = [S(k % 13) for k in range(400)]
    with ThreadPoolExecutor(max_workers=8) as pool:
        images = list(pool.map(op.apply, indices))
        inverses = list(pool.map(op.inverse_apply, indices))
        shifted = list(pool.map(shift5.inverse_apply, indices))
    for idx, image, inverse, back in zip(indices, images, inverses, shifted):
        assert image is op.apply(idx)
        assert inverse is op.inverse_apply(idx)
        assert back is shift5.inverse_apply(idx)
    assert set(op.table()) == set(indices)


def test_window_checks_report_library_errors(F5):
    def domain(i: BasisIndex):
        if i.slot >= 3:
            raise NoWitness(f"no entry for {i}")

    op = LazyOp(lambda i: {i: F5(1)}, F5, domain=domain)
    report = equal_on_window(op, LazyOp.scalar(F5, 1), Window.shift_slots("S0", 0, 5), jobs=2)
    assert not report.passed
    assert [f.index.slot for f in report.failures] == [3, 4, 5]
    assert report.failures[0].detail.startswith("NoWitness")
