import pytest

from invofactor.algebra import QuadPoly, get_field
from invofactor.core.errors import MalformedInput
from invofactor.core.normalization import PolyParser


@pytest.mark.parametrize("tag, expected", [("F5", "F5"), ("F<5>", "F5"), ("GF(7)", "F7"), ("Q", "Q"), (" GF( 5 ) ", "F5")])
def test_parse_field_spellings(tag, expected):
    assert PolyParser.parse_field(tag).tag == expected


@pytest.mark.parametrize("tag", ["", "F", "GF5", "Z", "F6"])
def test_parse_field_rejects(tag):
    with pytest.raises(MalformedInput):
        PolyParser.parse_field(tag)


def test_parse_poly_variants(F5):
    assert PolyParser.parse_poly("t^2-1", F5) == QuadPoly.of(F5, 1, 0, -1)
    assert PolyParser.parse_poly("2*t^2 - 3*t + 1", F5) == QuadPoly.of(F5, 2, -3, 1)
    assert PolyParser.parse_poly("-t^2+2t-1", F5) == QuadPoly.of(F5, -1, 2, -1)
    assert PolyParser.parse_poly("t^2 - 1/2", get_field("Q")).c0 == get_field("Q")("-1/2")


@pytest.mark.parametrize("text", ["", "t^3-1", "t-1", "t^2 t", "x^2-1", "t^2-1+"])
def test_parse_poly_rejects(F5, text):
    with pytest.raises(MalformedInput):
        PolyParser.parse_poly(text, F5)


def test_parse_poly_list(F5):
    polys = PolyParser.parse_poly_list("t^2-1; t^2-2t+1", F5)
    assert len(polys) == 2
    assert polys[1] == QuadPoly.of(F5, 1, -2, 1)
    with pytest.raises(MalformedInput):
        PolyParser.parse_poly_list(" ; ", F5)


def test_parse_scalar(F7):
    assert PolyParser.parse_scalar("3", F7) == 3
    assert PolyParser.parse_scalar("-1/2", F7) == 3
    with pytest.raises(MalformedInput):
        PolyParser.parse_scalar("3.5", F7)
