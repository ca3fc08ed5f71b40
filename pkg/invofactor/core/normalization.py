import re
from fractions import Fraction
from typing import List

from invofactor.algebra import Field, QuadPoly, Scalar, get_field
from invofactor.core.errors import MalformedInput

_FIELD_RE = re.compile(r"^(?:F<?(\d+)>?|GF\((\d+)\)|Q)$")
_TERM_RE = re.compile(r"([+-]?)\s*(\d+(?:/\d+)?)?\s*\*?\s*(t(?:\s*\^\s*(\d+))?)?")


class PolyParser:
    @staticmethod
    def parse_field(tag: str) -> Field:
        """
        Field tag in any of the accepted spellings.
        Example: "F<5>", "F5", "GF(5)" -> F5; "Q" -> Q
        """
        if not tag:
            raise MalformedInput("missing field tag")
        cleaned = re.sub(r"\s+", "", tag)
        match = _FIELD_RE.match(cleaned)
        if not match:
            raise MalformedInput(f"unknown field tag {tag!r}")
        p = match.group(1) or match.group(2)
        return get_field(f"F{p}" if p else "Q")

    @staticmethod
    def parse_scalar(text: str, field: Field) -> Scalar:
        cleaned = re.sub(r"\s+", "", str(text))
        if not re.fullmatch(r"[+-]?\d+(/\d+)?", cleaned):
            raise MalformedInput(f"bad scalar literal {text!r}")
        return field(Fraction(cleaned))

    @staticmethod
    def parse_poly(text: str, field: Field) -> QuadPoly:
        """
        Degree-2 polynomial in t.
        Example: "2*t^2-3*t+1", "t^2 - 1", "-t^2+2t-1"
        """
        cleaned = re.sub(r"\s+", "", text or "")
        if not cleaned:
            raise MalformedInput("empty polynomial")
        coeffs = {0: field.zero, 1: field.zero, 2: field.zero}
        pos = 0
        while pos < len(cleaned):
            match = _TERM_RE.match(cleaned, pos)
            if not match or match.end() == pos or not (match.group(2) or match.group(3)):
                raise MalformedInput(f"cannot parse polynomial {text!r} near position {pos}")
            if pos > 0 and not match.group(1):
                raise MalformedInput(f"missing sign between terms in {text!r}")
            sign, literal, var, power = match.groups()
            coef = field(Fraction(literal)) if literal else field.one
            if sign == "-":
                coef = -coef
            degree = 0 if not var else int(power) if power else 1
            if degree > 2:
                raise MalformedInput(f"degree {degree} term in {text!r}; only degree 2 is supported")
            coeffs[degree] = coeffs[degree] + coef
            pos = match.end()
        if coeffs[2].is_zero():
            raise MalformedInput(f"{text!r} does not have degree 2 over {field.tag}")
        return QuadPoly(coeffs[2], coeffs[1], coeffs[0])

    @staticmethod
    def parse_poly_list(text: str, field: Field) -> List[QuadPoly]:
        parts = [part for part in (text or "").split(";") if part.strip()]
        if not parts:
            raise MalformedInput("no polynomials given")
        return [PolyParser.parse_poly(part, field) for part in parts]
