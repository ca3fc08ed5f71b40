from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from invofactor.algebra import (
    AcceptKind,
    QuadPoly,
    acceptable,
    get_field,
    reciprocal,
    root_products,
    roots,
    split_roots,
)
from invofactor.core.errors import DerogatoryInput, DivisionByZero, FieldMismatch, MalformedInput, NotSplit, ZeroLambda


def test_prime_field_arithmetic(F5):
    assert F5(3) + F5(4) == 2
    assert F5(2) * 3 == 1
    assert F5(2).inverse() == 3
    assert F5(2) ** -1 == 3
    assert F5(Fraction(1, 2)) == 3
    assert -F5(1) == 4


def test_plain_numbers_hash_like_the_scalars_they_equal(F5):
    assert F5(3) == 3 and hash(F5(3)) == hash(3)
    assert F5(3) != 8
    assert {F5(3): "three"}[3] == "three"
    assert len({F5(3), 3, F5(8)}) == 1
    Q = get_field("Q")
    assert Q("1/2") == Fraction(1, 2)
    assert hash(Q("1/2")) == hash(Fraction(1, 2))
    assert {Q(2), 2} == {2}


def test_rational_field():
    Q = get_field("Q")
    half = Q("1/2")
    assert half + half == 1
    assert str(half * 3) == "3/2"
    assert half ** -2 == 4


def test_fields_do_not_mix(F5, F7):
    with pytest.raises(FieldMismatch):
        F5(F7(1))


def test_bad_field_tags():
    with pytest.raises(MalformedInput):
        get_field("F4")
    with pytest.raises(MalformedInput):
        get_field("R")


def test_vanishing_denominator(F5):
    with pytest.raises(DivisionByZero):
        F5(Fraction(1, 5))


def test_roots_are_canonically_ordered(F5, inv5, unip5):
    assert split_roots(inv5) == (F5(1), F5(4))
    assert split_roots(unip5) == (F5(1), F5(1))


def test_irreducible_quadratic_does_not_split(F5):
    p = QuadPoly.of(F5, 1, 0, -2)
    assert roots(p) is None
    with pytest.raises(NotSplit):
        split_roots(p)


def test_rational_roots():
    Q = get_field("Q")
    assert split_roots(QuadPoly.of(Q, 4, 0, -1)) == (Q("-1/2"), Q("1/2"))
    assert roots(QuadPoly.of(Q, 1, 0, -2)) is None


def test_norm_trace_and_reciprocal(F5):
    p = QuadPoly.of(F5, 1, -3, 2)
    assert p.norm == 2
    assert p.trace == 3
    r = reciprocal(p)
    assert split_roots(r) == tuple(sorted((x.inverse() for x in split_roots(p)), key=lambda s: s.sort_key()))
    with pytest.raises(DerogatoryInput):
        reciprocal(QuadPoly.of(F5, 1, 1, 0))


def test_acceptable_examples(F5, F7, inv5, inv7):
    assert acceptable(F5(1), inv5, inv5, inv5).kind == AcceptKind.PRODUCT_OF_ROOTS
    assert acceptable(F5(2), inv5, inv5, inv5).kind == AcceptKind.NORM_SQUARE
    verdict = acceptable(F7(3), inv7, inv7, inv7)
    assert verdict.kind == AcceptKind.NO
    assert not verdict


def test_acceptable_input_errors(F5, inv5):
    with pytest.raises(ZeroLambda):
        acceptable(F5(0), inv5, inv5, inv5)
    with pytest.raises(DerogatoryInput):
        acceptable(F5(1), QuadPoly.of(F5, 1, 1, 0), inv5, inv5)


def test_root_products_for_involutions(F5, inv5):
    assert root_products([inv5], 2) == {F5(1), F5(4)}


@given(st.integers(1, 6), st.integers(1, 6))
def test_from_roots_recovers_roots(x, y):
    F7 = get_field("F7")
    p = QuadPoly.from_roots(F7(x), F7(y))
    assert set(split_roots(p)) == {F7(x), F7(y)}
    assert p.norm == F7(x * y)
