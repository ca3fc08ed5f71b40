import pytest
from hypothesis import assume, given, settings as hsettings, strategies as st

from invofactor.algebra import QuadPoly, get_field
from invofactor.core.errors import NoDominantEigenvalue, NotAnnihilated, ShapeMismatch, Singular
from invofactor.linalg import (
    Mat,
    SparseEchelon,
    annihilates,
    companion,
    compress,
    direct_sum,
    induced_det,
    invariant_factors,
    minimal_polynomial,
    similar_to_inverse,
    star_mat,
)
from invofactor.opcore import BasisIndex, RepAut

F7 = get_field("F7")


def matrices(n: int):
    return st.lists(st.integers(0, 6), min_size=n * n, max_size=n * n).map(
        lambda xs: Mat.from_rows(F7, [xs[i * n:(i + 1) * n] for i in range(n)])
    )


@given(matrices(3), matrices(3))
def test_det_is_multiplicative(A, B):
    assert (A @ B).det() == A.det() * B.det()


@given(matrices(3))
def test_inverse(A):
    assume(not A.det().is_zero())
    assert A @ A.inverse() == Mat.identity(F7, 3)


@given(matrices(3))
def test_rank_nullity(A):
    assert A.rank() + len(A.kernel()) == 3
    for v in A.kernel():
        assert all(x.is_zero() for x in A.apply(v))


@hsettings(max_examples=30)
@given(matrices(2))
def test_similar_to_inverse_is_invariant_under_conjugation(A):
    assume(not A.det().is_zero())
    P = Mat.from_rows(F7, [[1, 2], [0, 1]])
    assert similar_to_inverse(A) == similar_to_inverse(P @ A @ P.inverse())


def test_singular_inverse():
    with pytest.raises(Singular):
        Mat.from_rows(F7, [[1, 2], [2, 4]]).inverse()


def test_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        Mat.identity(F7, 2) @ Mat.identity(F7, 3)


def test_direct_sum_and_companion():
    p = QuadPoly.of(F7, 1, -1, -1)
    C = companion(p)
    assert annihilates(C, p)
    D = direct_sum(C, Mat.scalar(F7, 1, 3))
    assert D.rows == 3
    assert D[2, 2] == 3
    assert D[0, 2] == 0


def test_star_mat():
    p = QuadPoly.of(F7, 1, 0, -1)
    A = Mat.from_rows(F7, [[0, 1], [1, 0]])
    assert A @ star_mat(A, p) == Mat.scalar(F7, 2, p.norm)
    with pytest.raises(NotAnnihilated):
        star_mat(Mat.identity(F7, 2).scale(2), p)


def test_minimal_polynomial_and_invariant_factors():
    A = Mat.diag(F7, [2, 2, 3])
    m = minimal_polynomial(A)
    assert len(m) == 3
    assert sorted(len(f) for f in invariant_factors(A)) == [2, 3]


def test_sparse_echelon_tracks_combinations():
    ech = SparseEchelon(F7)
    assert ech.insert({"a": F7(1), "b": F7(1)}, label=0) is None
    assert ech.insert({"b": F7(1)}, label=1) is None
    combo = ech.insert({"a": F7(2), "b": F7(5)}, label=2)
    assert combo == {0: F7(2), 1: F7(3)}
    assert ech.contains({"a": F7(1)})
    assert not ech.contains({"c": F7(1)})
    assert len(ech) == 2


def test_compress_rank_one():
    e0, e1 = BasisIndex("P0", 0, 0), BasisIndex("P0", 0, 1)
    data = compress({e0: {e1: F7(1)}}, F7)
    assert data.image_rank == 1
    assert data.matrix.rows == 2
    assert data.matrix[0, 1] == 1
    assert data.matrix[1, 0] == 0


def test_induced_det(rank_one7, F7):
    assert induced_det(rank_one7) == 3
    doubled = RepAut.scalar(F7, 3, perturbation={BasisIndex("P0", 0, 0): {BasisIndex("P0", 0, 0): F7(1)}})
    assert induced_det(doubled) == 4
    with pytest.raises(NoDominantEigenvalue):
        induced_det(RepAut.shift(F7))


@given(st.integers(1, 6), st.integers(1, 6))
def test_star_of_companion_inverts_up_to_norm(x, y):
    p = QuadPoly.from_roots(F7(x), F7(y))
    C = companion(p)
    assert annihilates(C, p)
    assert C @ star_mat(C, p) == Mat.scalar(F7, 2, p.norm)


@given(st.integers(1, 6), st.integers(1, 6), matrices(2))
def test_annihilation_survives_conjugation(x, y, P):
    assume(P.det() != 0)
    p = QuadPoly.from_roots(F7(x), F7(y))
    C = companion(p)
    assert annihilates(P @ C @ P.inverse(), p)


@st.composite
def quadratic_pairs(draw, n: int = 4):
    """Two (A, p) with p(A) = 0 over one of F3, F5, F7: companion blocks and roots of p on the diagonal, in a random basis."""
    fld = get_field(draw(st.sampled_from(["F3", "F5", "F7"])))
    entries = st.lists(st.integers(0, fld.p - 1), min_size=n * n, max_size=n * n)
    bases = entries.map(lambda xs: Mat.from_rows(fld, [xs[i * n:(i + 1) * n] for i in range(n)])).filter(
        lambda M: not M.det().is_zero()
    )

    def quadratic():
        x, y = fld(draw(st.integers(1, fld.p - 1))), fld(draw(st.integers(1, fld.p - 1)))
        p = QuadPoly.from_roots(x, y)
        blocks = draw(st.integers(0, n // 2))
        roots = draw(st.lists(st.sampled_from([x, y]), min_size=n - 2 * blocks, max_size=n - 2 * blocks))
        D = direct_sum(*([companion(p)] * blocks + [Mat.scalar(fld, 1, r) for r in roots]))
        P = draw(bases)
        return P @ D @ P.inverse(), p

    return quadratic(), quadratic()


@hsettings(max_examples=200)
@given(quadratic_pairs())
def test_factors_commute_with_the_star_sum(pair):
    (A, p), (B, q) = pair
    assert annihilates(A, p) and annihilates(B, q)
    Z = A @ star_mat(B, q) + B @ star_mat(A, p)
    assert A @ Z == Z @ A
    assert B @ Z == Z @ B


@hsettings(max_examples=200)
@given(quadratic_pairs())
def test_factors_commute_with_the_norm_twisted_product(pair):
    (A, p), (B, q) = pair
    AB = A @ B
    Z = AB + AB.inverse().scale(p.norm * q.norm)
    assert A @ Z == Z @ A
    assert B @ Z == Z @ B
