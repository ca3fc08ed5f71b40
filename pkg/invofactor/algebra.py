"""
Exact field arithmetic and the degree-2 polynomial toolkit.

Two kinds of field are supported: prime fields F_p and the rationals Q.
Every value is a `Scalar` bound to its field; mixing fields raises
`FieldMismatch`.
"""
import enum
import functools
import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, List, Optional, Sequence, Tuple, Union

from sympy import Poly, QQ, Rational, integer_nthroot, isprime, symbols
from sympy.ntheory.residue_ntheory import sqrt_mod

from invofactor.core.errors import (
    DerogatoryInput,
    DivisionByZero,
    FieldMismatch,
    MalformedInput,
    NotSplit,
    ZeroLambda,
)

logger = logging.getLogger(__name__)

MAX_PRIME = 2 ** 31

Number = Union[int, Fraction, str, "Scalar"]


class Field:
    """Base class for the supported ground fields; raw values are ints (F_p) or Fractions (Q)."""

    tag: str = ""
    characteristic: int = 0
    is_prime: bool = False

    def __call__(self, value: Number) -> "Scalar":
        if isinstance(value, Scalar):
            if value.field != self:
                raise FieldMismatch(f"{value} lives in {value.field.tag}, expected {self.tag}")
            return value
        return Scalar(self, self.raw(value))

    @property
    def zero(self) -> "Scalar":
        return self(0)

    @property
    def one(self) -> "Scalar":
        return self(1)

    def raw(self, value) -> Union[int, Fraction]:
        raise NotImplementedError

    def add(self, a, b):
        raise NotImplementedError

    def sub(self, a, b):
        raise NotImplementedError

    def mul(self, a, b):
        raise NotImplementedError

    def neg(self, a):
        raise NotImplementedError

    def inv(self, a):
        raise NotImplementedError

    def format(self, a) -> str:
        raise NotImplementedError

    def sort_key(self, a):
        return a

    def __eq__(self, other) -> bool:
        return isinstance(other, Field) and other.tag == self.tag

    def __hash__(self) -> int:
        return hash(self.tag)

    def __repr__(self) -> str:
        return f"Field({self.tag})"


class PrimeField(Field):
    is_prime = True

    def __init__(self, p: int):
        if p < 2 or p > MAX_PRIME or not isprime(p):
            raise MalformedInput(f"F{p} is not a supported prime field", p=p)
        self.p = p
        self.characteristic = p
        self.tag = f"F{p}"

    def raw(self, value) -> int:
        if isinstance(value, bool):
            raise MalformedInput("booleans are not field elements")
        if isinstance(value, int):
            return value % self.p
        if isinstance(value, str):
            value = _parse_fraction(value)
        if isinstance(value, Fraction):
            den = value.denominator % self.p
            if den == 0:
                raise DivisionByZero(f"denominator of {value} vanishes in {self.tag}")
            return (value.numerator * pow(den, -1, self.p)) % self.p
        raise MalformedInput(f"cannot coerce {value!r} into {self.tag}")

    def add(self, a, b):
        return (a + b) % self.p

    def sub(self, a, b):
        return (a - b) % self.p

    def mul(self, a, b):
        return (a * b) % self.p

    def neg(self, a):
        return (-a) % self.p

    def inv(self, a):
        if a == 0:
            raise DivisionByZero(f"division by zero in {self.tag}")
        return pow(a, -1, self.p)

    def format(self, a) -> str:
        return str(a)

    def elements(self) -> Iterator["Scalar"]:
        for value in range(self.p):
            yield Scalar(self, value)


class RationalField(Field):
    tag = "Q"
    characteristic = 0

    def raw(self, value) -> Fraction:
        if isinstance(value, bool):
            raise MalformedInput("booleans are not field elements")
        if isinstance(value, int):
            return Fraction(value)
        if isinstance(value, str):
            return _parse_fraction(value)
        if isinstance(value, Fraction):
            return value
        raise MalformedInput(f"cannot coerce {value!r} into Q")

    def add(self, a, b):
        return a + b

    def sub(self, a, b):
        return a - b

    def mul(self, a, b):
        return a * b

    def neg(self, a):
        return -a

    def inv(self, a):
        if a == 0:
            raise DivisionByZero("division by zero in Q")
        return 1 / a

    def format(self, a) -> str:
        return str(a.numerator) if a.denominator == 1 else f"{a.numerator}/{a.denominator}"


def _parse_fraction(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as e:
        raise MalformedInput(f"bad scalar literal {text!r}") from e


@functools.lru_cache(maxsize=None)
def get_field(tag: str) -> Field:
    """Field from its tag: `F<p>` or `Q`."""
    tag = tag.strip()
    if tag == "Q":
        return RationalField()
    if tag.startswith("F") and tag[1:].isdigit():
        return PrimeField(int(tag[1:]))
    raise MalformedInput(f"unknown field tag {tag!r}")


class Scalar:
    __slots__ = ("field", "value")

    def __init__(self, field: Field, value):
        self.field = field
        self.value = value

    def _other(self, other) -> Union[int, Fraction]:
        if isinstance(other, Scalar):
            if other.field != self.field:
                raise FieldMismatch(f"cannot combine {self.field.tag} with {other.field.tag}")
            return other.value
        return self.field.raw(other)

    def __add__(self, other) -> "Scalar":
        return Scalar(self.field, self.field.add(self.value, self._other(other)))

    __radd__ = __add__

    def __sub__(self, other) -> "Scalar":
        return Scalar(self.field, self.field.sub(self.value, self._other(other)))

    def __rsub__(self, other) -> "Scalar":
        return Scalar(self.field, self.field.sub(self._other(other), self.value))

    def __mul__(self, other) -> "Scalar":
        return Scalar(self.field, self.field.mul(self.value, self._other(other)))

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Scalar":
        return Scalar(self.field, self.field.mul(self.value, self.field.inv(self._other(other))))

    def __rtruediv__(self, other) -> "Scalar":
        return Scalar(self.field, self.field.mul(self._other(other), self.field.inv(self.value)))

    def __neg__(self) -> "Scalar":
        return Scalar(self.field, self.field.neg(self.value))

    def __pow__(self, exponent: int) -> "Scalar":
        base = self.value
        if exponent < 0:
            base = self.field.inv(base)
            exponent = -exponent
        result = self.field.raw(1)
        while exponent:
            if exponent & 1:
                result = self.field.mul(result, base)
            base = self.field.mul(base, base)
            exponent >>= 1
        return Scalar(self.field, result)

    def inverse(self) -> "Scalar":
        return Scalar(self.field, self.field.inv(self.value))

    def is_zero(self) -> bool:
        return self.value == 0

    def __bool__(self) -> bool:
        return self.value != 0

    def __eq__(self, other) -> bool:
        # plain numbers compare against the canonical representative only
        if isinstance(other, Scalar):
            return self.field == other.field and self.value == other.value
        if isinstance(other, (int, Fraction)):
            return self.value == other
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.value)

    def __int__(self) -> int:
        if isinstance(self.value, Fraction):
            if self.value.denominator != 1:
                raise ValueError(f"{self} is not an integer")
            return int(self.value)
        return self.value

    def sort_key(self):
        return self.field.sort_key(self.value)

    def __str__(self) -> str:
        return self.field.format(self.value)

    def __repr__(self) -> str:
        return f"{self}@{self.field.tag}"


# ---------------------------------------------------------------------------
# Degree-2 polynomials


@dataclass(frozen=True)
class QuadPoly:
    """leading·t² + c1·t + c0"""

    leading: Scalar
    c1: Scalar
    c0: Scalar

    def __post_init__(self):
        if not (self.leading.field == self.c1.field == self.c0.field):
            raise FieldMismatch("polynomial coefficients must share a field")
        if self.leading.is_zero():
            raise MalformedInput("leading coefficient of a degree-2 polynomial must be nonzero")

    @classmethod
    def of(cls, field: Field, leading: Number, c1: Number, c0: Number) -> "QuadPoly":
        return cls(field(leading), field(c1), field(c0))

    @classmethod
    def from_roots(cls, x: Scalar, y: Scalar) -> "QuadPoly":
        field = x.field
        return cls(field.one, -(x + y), x * y)

    @property
    def field(self) -> Field:
        return self.leading.field

    def monic(self) -> "QuadPoly":
        return QuadPoly(self.field.one, self.c1 / self.leading, self.c0 / self.leading)

    @property
    def is_non_derogatory(self) -> bool:
        return not self.c0.is_zero()

    @property
    def norm(self) -> Scalar:
        return self.c0 / self.leading

    @property
    def trace(self) -> Scalar:
        return -self.c1 / self.leading

    def evaluate(self, x: Scalar) -> Scalar:
        return self.leading * x * x + self.c1 * x + self.c0

    def coefficients(self) -> Tuple[Scalar, Scalar, Scalar]:
        """Coefficients from low to high degree."""
        return (self.c0, self.c1, self.leading)

    def same_roots_as(self, other: "QuadPoly") -> bool:
        return self.monic() == other.monic()

    def __str__(self) -> str:
        return format_dense(self.coefficients())


def norm_trace(p: QuadPoly) -> Tuple[Scalar, Scalar]:
    return p.norm, p.trace


def reciprocal(p: QuadPoly) -> QuadPoly:
    """p#(t) = t²·p(1/t)."""
    if not p.is_non_derogatory:
        raise DerogatoryInput(f"{p} has zero constant term", poly=str(p))
    return QuadPoly(p.c0, p.c1, p.leading)


def roots(p: QuadPoly) -> Optional[Tuple[Scalar, Scalar]]:
    """Roots in canonical ascending order, or None when p does not split."""
    field = p.field
    norm, trace = norm_trace(p)
    if field.is_prime and field.characteristic == 2:
        found = [x for x in field.elements() if p.evaluate(x).is_zero()]
        if not found:
            return None
        if len(found) == 1:
            return found[0], found[0]
        return found[0], found[1]

    disc = trace * trace - 4 * norm
    if field.is_prime:
        r = sqrt_mod(int(disc), field.characteristic)
        if r is None:
            return None
        s = field(r)
    else:
        value = disc.value
        if value < 0:
            return None
        num, exact_num = integer_nthroot(value.numerator, 2)
        den, exact_den = integer_nthroot(value.denominator, 2)
        if not (exact_num and exact_den):
            return None
        s = field(Fraction(int(num), int(den)))
    half = field(2).inverse()
    x, y = (trace - s) * half, (trace + s) * half
    if y.sort_key() < x.sort_key():
        x, y = y, x
    return x, y


def split_roots(p: QuadPoly) -> Tuple[Scalar, Scalar]:
    found = roots(p)
    if found is None:
        raise NotSplit(f"{p} does not split over {p.field.tag}", poly=str(p))
    return found


class AcceptKind(str, enum.Enum):
    PRODUCT_OF_ROOTS = "ProductOfRoots"
    NORM_SQUARE = "NormSquare"
    NO = "No"


@dataclass(frozen=True)
class Acceptability:
    kind: AcceptKind
    witness: Optional[Tuple[Scalar, Scalar, Scalar]] = None

    def __bool__(self) -> bool:
        return self.kind != AcceptKind.NO

    def to_dict(self) -> dict:
        payload = {"kind": self.kind.value}
        if self.witness is not None:
            payload["witness"] = [str(w) for w in self.witness]
        return payload


def acceptable(lam: Scalar, p1: QuadPoly, p2: QuadPoly, p3: QuadPoly) -> Acceptability:
    if lam.is_zero():
        raise ZeroLambda("lambda must be nonzero")
    polys = (p1, p2, p3)
    for p in polys:
        if not p.is_non_derogatory:
            raise DerogatoryInput(f"{p} has zero constant term", poly=str(p))
    root_pairs = [split_roots(p) for p in polys]
    for combo in itertools.product(*root_pairs):
        if combo[0] * combo[1] * combo[2] == lam:
            return Acceptability(AcceptKind.PRODUCT_OF_ROOTS, combo)
    if lam * lam == p1.norm * p2.norm * p3.norm:
        return Acceptability(AcceptKind.NORM_SQUARE)
    return Acceptability(AcceptKind.NO)


def root_products(polys: Sequence[QuadPoly], size: int) -> set:
    """All determinants a product of `size`-dimensional elements annihilated by `polys` can have."""
    field = polys[0].field
    values = {field.one}
    for p in polys:
        x, y = split_roots(p)
        per_factor = {x ** a * y ** (size - a) for a in range(size + 1)}
        values = {v * w for v in values for w in per_factor}
    return values


# ---------------------------------------------------------------------------
# Dense polynomials: tuples of Scalars, low degree first, no trailing zeros

DensePoly = Tuple[Scalar, ...]

_T = symbols("t")


def poly_trim(coeffs: Sequence[Scalar]) -> DensePoly:
    coeffs = list(coeffs)
    while coeffs and coeffs[-1].is_zero():
        coeffs.pop()
    return tuple(coeffs)


def poly_degree(f: DensePoly) -> int:
    return len(f) - 1


def poly_from_quad(p: QuadPoly) -> DensePoly:
    return poly_trim(p.coefficients())


def poly_monic(f: DensePoly) -> DensePoly:
    lead = f[-1]
    return tuple(c / lead for c in f)


def poly_mul(f: DensePoly, g: DensePoly) -> DensePoly:
    if not f or not g:
        return ()
    field = f[0].field
    out = [field.zero] * (len(f) + len(g) - 1)
    for i, a in enumerate(f):
        if a.is_zero():
            continue
        for j, b in enumerate(g):
            out[i + j] = out[i + j] + a * b
    return poly_trim(out)


def poly_sub(f: DensePoly, g: DensePoly) -> DensePoly:
    if not g:
        return f
    field = g[0].field
    size = max(len(f), len(g))
    out = [
        (f[i] if i < len(f) else field.zero) - (g[i] if i < len(g) else field.zero)
        for i in range(size)
    ]
    return poly_trim(out)


def poly_add(f: DensePoly, g: DensePoly) -> DensePoly:
    if not f:
        return g
    return poly_sub(f, tuple(-c for c in g))


def poly_divmod(f: DensePoly, g: DensePoly) -> Tuple[DensePoly, DensePoly]:
    if not g:
        raise DivisionByZero("polynomial division by zero")
    field = g[0].field
    rem = list(f)
    quot = [field.zero] * max(len(f) - len(g) + 1, 1)
    inv_lead = g[-1].inverse()
    while len(rem) >= len(g) and rem:
        shift = len(rem) - len(g)
        factor = rem[-1] * inv_lead
        quot[shift] = factor
        for i, c in enumerate(g):
            rem[shift + i] = rem[shift + i] - factor * c
        rem = list(poly_trim(rem))
    return poly_trim(quot), tuple(rem)


def poly_gcd(f: DensePoly, g: DensePoly) -> DensePoly:
    while g:
        f, g = g, poly_divmod(f, g)[1]
    return poly_monic(f) if f else f


def poly_lcm(f: DensePoly, g: DensePoly) -> DensePoly:
    if not f:
        return g
    if not g:
        return f
    quot, _ = poly_divmod(poly_mul(f, g), poly_gcd(f, g))
    return poly_monic(quot)


def factor_dense(f: DensePoly) -> List[Tuple[DensePoly, int]]:
    """Monic irreducible factors with multiplicities, via sympy over GF(p) or QQ."""
    field = f[0].field
    if field.is_prime:
        sym = Poly([int(c) for c in reversed(f)], _T, modulus=field.characteristic)
    else:
        sym = Poly([Rational(c.value.numerator, c.value.denominator) for c in reversed(f)], _T, domain=QQ)
    _, factors = sym.factor_list()
    result = []
    for factor, exponent in factors:
        coeffs = []
        for c in reversed(factor.all_coeffs()):
            if field.is_prime:
                coeffs.append(field(int(c)))
            else:
                c = Rational(c)
                coeffs.append(field(Fraction(int(c.p), int(c.q))))
        result.append((poly_monic(poly_trim(coeffs)), int(exponent)))
    return result


def format_dense(f: Sequence[Scalar]) -> str:
    """Signed terms, highest degree first; readable back by the polynomial parser."""
    out = ""
    for degree in range(len(f) - 1, -1, -1):
        c = f[degree]
        if c.is_zero():
            continue
        text = str(c)
        sign = "-" if text.startswith("-") else "+"
        text = text.lstrip("-")
        var = "" if degree == 0 else "t" if degree == 1 else f"t^{degree}"
        if var and text == "1":
            term = var
        elif var:
            term = f"{text}*{var}"
        else:
            term = text
        out += term if not out and sign == "+" else f"{sign}{term}"
    return out or "0"
