import pytest
from hypothesis import given, settings as hsettings, strategies as st

from invofactor.algebra import AcceptKind, QuadPoly, acceptable, get_field
from invofactor.constructions import (
    FiniteRankLayout,
    adjacency_free,
    adjacency_strat,
    elementary_factor_pq,
    invariant_closure,
    kill_dominant,
    scalar_id_factors,
    scalar_triple_2x2,
    shift_form,
    shift_pair,
)
from invofactor.constructions.killer import CORE_BLOCK, TAIL_BLOCK
from invofactor.constructions.shift import MODEL_BLOCK
from invofactor.core.errors import HypothesisViolation, NoFreePart, NotAcceptable, NotSemiGood
from invofactor.linalg import Mat, SparseEchelon, annihilates, companion, direct_sum
from invofactor.modulestruct import Stratification, Stratum, build_strat_periodic
from invofactor.opcore import (
    BasisIndex,
    FiniteBlock,
    LazyOp,
    LinComb,
    RepAut,
    ShiftBlock,
    Window,
    check_annihilated,
    compose,
    cyclic_window_cert,
    equal_on_window,
    invert,
)


def x(n):
    return BasisIndex(MODEL_BLOCK, n)


# --- scalar triples -------------------------------------------------------


def test_scalar_triple_norm_square(F5, inv5):
    A, B, C = scalar_triple_2x2(F5(2), inv5, inv5, inv5)
    assert A == Mat.diag(F5, [1, 4])
    assert B == Mat.from_rows(F5, [[0, 1], [1, 0]])
    assert C == Mat.from_rows(F5, [[0, 3], [2, 0]])
    assert A @ B @ C == Mat.scalar(F5, 2, 2)
    assert (A @ B @ C).det() == inv5.norm ** 3


def test_scalar_triple_product_of_roots(F5, inv5):
    mats = scalar_triple_2x2(F5(1), inv5, inv5, inv5)
    assert all(M == Mat.identity(F5, 1) for M in mats)


def test_scalar_triple_mixed_polys(F7, inv7):
    unip = QuadPoly.of(F7, 1, -2, 1)
    third = QuadPoly.from_roots(F7(2), F7(6))
    lam = F7(3)
    A, B, C = scalar_triple_2x2(lam, inv7, unip, third)
    assert A.rows == 2
    assert A @ B @ C == Mat.scalar(F7, 2, lam)
    assert annihilates(B, unip)
    assert annihilates(C, third)


def test_scalar_triple_refuses(F7, inv7):
    with pytest.raises(NotAcceptable):
        scalar_triple_2x2(F7(3), inv7, inv7, inv7)


roots7 = st.integers(1, 6)


@given(st.integers(1, 6), roots7, roots7, roots7, roots7, roots7, roots7)
def test_scalar_triple_whenever_acceptable(lam, x1, y1, x2, y2, x3, y3):
    F7 = get_field("F7")
    polys = [QuadPoly.from_roots(F7(x), F7(y)) for x, y in ((x1, y1), (x2, y2), (x3, y3))]
    if acceptable(F7(lam), *polys).kind == AcceptKind.NO:
        with pytest.raises(NotAcceptable):
            scalar_triple_2x2(F7(lam), *polys)
        return
    mats = scalar_triple_2x2(F7(lam), *polys)
    n = mats[0].rows
    assert mats[0] @ mats[1] @ mats[2] == Mat.scalar(F7, n, lam)
    assert all(annihilates(M, p) for M, p in zip(mats, polys))


def test_scalar_id_factors_tile_the_basis(F5, inv5, shift5, golden5):
    for space in (shift5, golden5):
        records = scalar_id_factors(F5(2), [inv5] * 3, space)
        W = space.default_window(6)
        for r in records:
            assert check_annihilated(r.op, inv5, W).passed
        assert equal_on_window(compose([r.op for r in records]), LazyOp.scalar(F5, 2), W).passed


# --- shift pairs ----------------------------------------------------------


def test_shift_pair_rules(F5, inv5):
    a, b = shift_pair(inv5, inv5)
    ab = compose([a, b])
    assert ab.apply(x(4)) == {x(5): F5(-1)}
    assert ab.apply(x(5)) == {x(4): F5(1), x(7): F5(1)}
    slots = Window.of(x(k) for k in range(64))
    assert check_annihilated(a, inv5, slots).passed
    assert check_annihilated(b, inv5, slots).passed
    assert cyclic_window_cert(ab, LinComb.basis(x(1), F5), 16).independent


def test_shift_pair_with_unipotent(F5, inv5, unip5):
    a, b = shift_pair(unip5, inv5)
    slots = Window.of(x(k) for k in range(32))
    assert check_annihilated(a, unip5, slots).passed
    assert check_annihilated(b, inv5, slots).passed


@pytest.mark.parametrize("multiplier, tag", [(1, "F5"), (3, "F7")])
def test_elementary_factor_pq_on_shift(multiplier, tag):
    from invofactor.algebra import get_field

    fld = get_field(tag)
    inv = QuadPoly.of(fld, 1, 0, -1)
    v = RepAut.shift(fld, multiplier)
    form = shift_form(v.as_lazy(), [("S0", fld(multiplier))])
    f, g, _ = elementary_factor_pq(form, inv, inv)
    W = Window.shift_slots("S0", -16, 16)
    assert check_annihilated(f, inv, W).passed
    assert check_annihilated(g, inv, W).passed
    assert equal_on_window(compose([f, g]), v, W).passed


def test_elementary_factor_pq_on_two_shifts(F5, inv5, unip5):
    v = RepAut(F5, shift_blocks=[ShiftBlock("S0", F5(1)), ShiftBlock("S1", F5(2))])
    form = shift_form(v.as_lazy(), [("S0", F5(1)), ("S1", F5(2))])
    f, g, _ = elementary_factor_pq(form, inv5, unip5)
    W = v.default_window(8)
    assert check_annihilated(g, unip5, W).passed
    assert equal_on_window(compose([f, g]), v, W).passed


# --- adjacency ------------------------------------------------------------


def test_adjacency_strat_on_golden_copies(F5, inv5, golden5):
    s = build_strat_periodic(golden5)
    pair = adjacency_strat(golden5, s, inv5)
    x0, x1 = s.stratum(0).generator, s.stratum(1).generator
    u_x0 = golden5.apply_vec(x0)
    assert pair.a.apply_vec(x0) == x0.scaled(F5(-1)) + golden5.apply_vec(x1)
    assert pair.a.apply_vec(u_x0) == u_x0
    W = golden5.default_window()
    assert check_annihilated(pair.a, inv5, W).passed
    assert equal_on_window(compose([invert(pair.a), pair.v]), golden5, W).passed
    assert pair.evidence and all(r.independent for r in pair.evidence)


def test_adjacency_strat_on_shifts(F5, inv5, shift5):
    s = Stratification(shift5, [Stratum(LinComb.basis(BasisIndex("S0", 0), F5), None)])
    pair = adjacency_strat(shift5, s, inv5)
    assert pair.a.apply(BasisIndex("S0", 3)) == {BasisIndex("S0", 3): F5(1)}


def test_adjacency_strat_needs_semi_good(F5, inv5, golden5):
    s = Stratification(golden5, [Stratum(LinComb.basis(BasisIndex("P0", 0, 0), F5), 2)])
    with pytest.raises(NotSemiGood):
        adjacency_strat(golden5, s, inv5)


def test_adjacency_free_shift_only(F5, inv5, shift5):
    pair = adjacency_free(shift5, inv5)
    assert pair.a.apply(BasisIndex("S0", 7)) == {BasisIndex("S0", 7): F5(1)}
    assert pair.notes["evidence"] == "window-certified"


def test_adjacency_free_with_block(F5, inv5):
    u = RepAut(
        F5,
        finite_blocks=[FiniteBlock("M", companion(QuadPoly.of(F5, 1, -1, -1)))],
        shift_blocks=[ShiftBlock("S0", F5(1))],
    )
    pair = adjacency_free(u, inv5)
    W = u.default_window(12)
    assert check_annihilated(pair.a, inv5, W).passed
    assert equal_on_window(compose([invert(pair.a), pair.v]), u, W).passed
    assert all(r.independent for r in pair.evidence)


def test_adjacency_free_needs_a_shift(inv5, golden5):
    with pytest.raises(NoFreePart):
        adjacency_free(golden5, inv5)


# --- dominant eigenvalue removal -----------------------------------------


def test_kill_dominant_scalar(F7, inv7):
    u = RepAut.scalar(F7, 3)
    pair = kill_dominant(u, inv7)
    assert pair.aut.dominant_eigenvalue() is None
    assert pair.aut.block(TAIL_BLOCK).matrix == Mat.from_rows(F7, [[0, 3], [3, 0]])
    W = u.default_window()
    assert check_annihilated(pair.a, inv7, W).passed
    assert equal_on_window(pair.v, pair.relabeling.transport(pair.aut), W).passed


def test_kill_dominant_rank_one(F7, inv7, rank_one7):
    pair = kill_dominant(rank_one7, inv7)
    assert pair.aut.block(CORE_BLOCK).matrix == Mat.from_rows(F7, [[1, 3], [3, 0]])
    assert pair.notes["core_end"] == 2
    W = rank_one7.default_window()
    assert equal_on_window(pair.v, pair.relabeling.transport(pair.aut), W).passed
    assert equal_on_window(compose([invert(pair.a), pair.v]), rank_one7, W).passed


def test_kill_dominant_without_dominant_eigenvalue(F5, inv5, shift5):
    pair = kill_dominant(shift5, inv5)
    assert pair.notes["branch"] == "generic"
    assert pair.aut is None
    assert check_annihilated(pair.a, inv5, shift5.default_window(8)).passed


# --- invariant closure ----------------------------------------------------


def test_invariant_closure_identity(F5):
    one = LazyOp.scalar(F5, 1)
    W = [LinComb.basis(BasisIndex("S0", 0), F5)]
    assert len(invariant_closure(one, one, one, W)) == 1


def test_invariant_closure_of_scalar_triple(F5, inv5):
    A, B, C = scalar_triple_2x2(F5(2), inv5, inv5, inv5)
    ops = [LazyOp.from_matrix(M, annihilator=inv5) for M in (A, B, C)]
    W = [LinComb.basis(BasisIndex("F0", 0), F5)]
    basis = invariant_closure(*ops, W)
    assert 1 <= len(basis) <= 8


def test_invariant_closure_flags_non_quadratic(F5, shift5):
    one = LazyOp.scalar(F5, 1)
    with pytest.raises(HypothesisViolation):
        invariant_closure(shift5, one, one, [LinComb.basis(BasisIndex("S0", 0), F5)])


@st.composite
def quadratic_triples(draw, n: int = 4):
    """Three quadratic matrices in GL_n over F3 or F5 in random bases, a nonzero λ and a vector."""
    fld = get_field(draw(st.sampled_from(["F3", "F5"])))
    units = st.integers(1, fld.p - 1)
    entries = st.lists(st.integers(0, fld.p - 1), min_size=n * n, max_size=n * n)

    def quadratic() -> Mat:
        x, y = fld(draw(units)), fld(draw(units))
        p = QuadPoly.from_roots(x, y)
        blocks = draw(st.integers(0, n // 2))
        roots = draw(st.lists(st.sampled_from([x, y]), min_size=n - 2 * blocks, max_size=n - 2 * blocks))
        D = direct_sum(*([companion(p)] * blocks + [Mat.scalar(fld, 1, r) for r in roots]))
        P = draw(entries.map(lambda xs: Mat.from_rows(fld, [xs[i * n:(i + 1) * n] for i in range(n)])).filter(lambda M: not M.det().is_zero()))
        return P @ D @ P.inverse()

    mats = [quadratic() for _ in range(3)]
    lam = fld(draw(units))
    extra = draw(st.lists(st.integers(0, fld.p - 1), min_size=n, max_size=n))
    return fld, mats, lam, extra


def columns_of(M: Mat):
    return [LinComb((BasisIndex("F0", r), c) for r, c in enumerate(M.column(j)) if not c.is_zero()) for j in range(M.cols)]


@hsettings(max_examples=50)
@given(quadratic_triples())
def test_invariant_closure_on_random_triples(triple):
    fld, (A, B, C), lam, extra = triple
    w = A @ B @ C - Mat.scalar(fld, A.rows, lam)
    W = columns_of(w) + [LinComb((BasisIndex("F0", r), fld(c)) for r, c in enumerate(extra) if c)]
    W = [v for v in W if v]
    a, b, c = (LazyOp.from_matrix(M, label=name) for M, name in zip((A, B, C), "abc"))
    basis = invariant_closure(a, b, c, W)

    span = SparseEchelon(fld, track=False)
    for v in basis:
        span.insert(v)
    given_span = SparseEchelon(fld, track=False)
    for v in W:
        given_span.insert(v)
    assert all(span.contains(v) for v in W)
    assert all(span.contains(op.apply_vec(v)) for op in (a, b, c) for v in basis)
    assert len(basis) <= 8 * len(given_span)


def test_finite_rank_layout(F7, rank_one7):
    layout = FiniteRankLayout(rank_one7, F7(3))
    assert layout.rank == 2
    assert layout.matrix.det() == F7(9)
    e5 = BasisIndex("P0", 0, 5)
    (label, c), = layout.coordinates(e5).items()
    assert layout.expand(label).scaled(c) == LinComb.basis(e5, F7)
