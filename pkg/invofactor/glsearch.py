"""
Exhaustive oracle over GL_n(F_q).

Matrices are handled as row-major tuples of ints mod q ("keys") and packed
into base-q integers for storage. Every search is bounded by an explicit
work budget; exceeding it raises `BudgetExceeded` instead of running away.
"""
import itertools
import logging
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from invofactor.algebra import Field, QuadPoly, Scalar, acceptable, get_field, root_products, roots, split_roots
from invofactor.core.config import settings
from invofactor.core.errors import BudgetExceeded, FieldMismatch, ShapeMismatch, UnsupportedField
from invofactor.linalg import Mat, annihilates, direct_sum, similar_to_inverse

logger = logging.getLogger(__name__)

Key = Tuple[int, ...]


# ---------------------------------------------------------------------------
# Matrix space


@dataclass(frozen=True)
class MatrixSpace:
    """n×n matrices over F_q as integer tuples."""

    n: int
    q: int

    @cached_property
    def field(self) -> Field:
        return get_field(f"F{self.q}")

    @cached_property
    def identity(self) -> Key:
        return tuple(1 if i == j else 0 for i in range(self.n) for j in range(self.n))

    @property
    def universe(self) -> int:
        return self.q ** (self.n * self.n)

    def mul(self, a: Key, b: Key) -> Key:
        n, q = self.n, self.q
        return tuple(
            sum(a[i * n + k] * b[k * n + j] for k in range(n)) % q
            for i in range(n)
            for j in range(n)
        )

    def scale(self, s: int, a: Key) -> Key:
        return tuple((s * x) % self.q for x in a)

    def pack(self, a: Key) -> int:
        value = 0
        for x in a:
            value = value * self.q + x
        return value

    def unpack(self, value: int) -> Key:
        digits = []
        for _ in range(self.n * self.n):
            value, digit = divmod(value, self.q)
            digits.append(digit)
        return tuple(reversed(digits))

    def to_mat(self, a: Key) -> Mat:
        n = self.n
        return Mat.from_rows(self.field, [a[i * n:(i + 1) * n] for i in range(n)])

    def from_mat(self, M: Mat) -> Key:
        if M.field != self.field:
            raise FieldMismatch(f"matrix over {M.field.tag}, expected {self.field.tag}")
        if M.rows != self.n or M.cols != self.n:
            raise ShapeMismatch(f"expected {self.n}x{self.n}, got {M.rows}x{M.cols}")
        return tuple(int(x) for row in M.entries for x in row)

    def det(self, a: Key) -> Scalar:
        return self.to_mat(a).det()

    def inverse(self, a: Key) -> Key:
        return self.from_mat(self.to_mat(a).inverse())


def gaussian_binomial(n: int, k: int, q: int) -> int:
    if k < 0 or k > n:
        return 0
    num = den = 1
    for i in range(k):
        num *= q ** (n - i) - 1
        den *= q ** (i + 1) - 1
    return num // den


def gl_order(n: int, q: int) -> int:
    order = 1
    for i in range(n):
        order *= q ** n - q ** i
    return order


def class_size(n: int, q: int, p: QuadPoly) -> int:
    """Number of n×n matrices over F_q annihilated by a split p."""
    x, y = split_roots(p)
    if x != y:
        return sum(q ** (r * (n - r)) * gaussian_binomial(n, r, q) for r in range(n + 1))
    total = 0
    for r in range(n // 2 + 1):
        total += gaussian_binomial(n, n - r, q) * gaussian_binomial(n - r, r, q) * gl_order(r, q)
    return total


def _check_prime(p: QuadPoly, q: int):
    if not p.field.is_prime:
        raise UnsupportedField("exhaustive search runs over prime fields only")
    if p.field.characteristic != q:
        raise FieldMismatch(f"{p} is not over F{q}")


# ---------------------------------------------------------------------------
# Enumeration


def subspaces(n: int, dim: int, q: int) -> Iterator[List[Tuple[int, ...]]]:
    """Every dim-dimensional subspace of F_q^n, once, as the rows of its RREF basis."""
    for pivots in itertools.combinations(range(n), dim):
        free = [(i, j) for i, pc in enumerate(pivots) for j in range(pc + 1, n) if j not in pivots]
        for values in itertools.product(range(q), repeat=len(free)):
            rows = [[0] * n for _ in range(dim)]
            for i, pc in enumerate(pivots):
                rows[i][pc] = 1
            for (i, j), v in zip(free, values):
                rows[i][j] = v
            yield [tuple(r) for r in rows]


def _invertible(n: int, q: int) -> Iterator[Key]:
    space = MatrixSpace(n, q)
    for entries in itertools.product(range(q), repeat=n * n):
        if n == 0 or not space.det(entries).is_zero():
            yield tuple(entries)


def general_linear(n: int, q: int, budget: Optional[int] = None) -> Iterator[Key]:
    budget = settings.INVOFACTOR_BUDGET if budget is None else budget
    if q ** (n * n) > budget:
        raise BudgetExceeded(f"GL_{n}(F_{q}) enumeration exceeds the budget", required=q ** (n * n), budget=budget)
    return _invertible(n, q)


def enum_annihilated(n: int, q: int, p: QuadPoly, budget: Optional[int] = None) -> List[Key]:
    """
    All n×n matrices over F_q annihilated by the split polynomial p.
    Distinct roots x≠y: A = x·I + (y−x)·E with E idempotent, one per pair
    (im E, ker E) of complementary subspaces. Double root x: A = x·I + N
    with N² = 0, one per (ker N ⊇ im N, isomorphism V/ker N -> im N).
    """
    budget = settings.INVOFACTOR_BUDGET if budget is None else budget
    _check_prime(p, q)
    size = class_size(n, q, p)
    if size > budget:
        raise BudgetExceeded(f"{size} elements annihilated by {p} in M_{n}(F_{q})", required=size, budget=budget)
    space = MatrixSpace(n, q)
    field = space.field
    out: List[Key] = []
    if n == 0:
        return [()]
    x, y = split_roots(p)
    base = Mat.scalar(field, n, x)
    if x != y:
        delta = y - x
        for r in range(n + 1):
            for U in subspaces(n, r, q):
                for K in subspaces(n, n - r, q):
                    P = Mat.from_columns(field, U + K, rows=n)
                    if P.det().is_zero():
                        continue
                    E = P @ Mat.diag(field, [1] * r + [0] * (n - r)) @ P.inverse()
                    out.append(space.from_mat(base + E.scale(delta)))
        return out

    for r in range(n // 2 + 1):
        for K in subspaces(n, n - r, q):
            pivots = [row.index(1) for row in K]
            complement = [tuple(1 if i == j else 0 for i in range(n)) for j in range(n) if j not in pivots]
            inv = Mat.from_columns(field, complement + K, rows=n).inverse()
            for coeffs in subspaces(n - r, r, q):
                U = [tuple(sum(c * K[k][i] for k, c in enumerate(row)) % q for i in range(n)) for row in coeffs]
                for G in _invertible(r, q):
                    images = [
                        tuple(sum(U[k][i] * G[k * r + j] for k in range(r)) % q for i in range(n))
                        for j in range(r)
                    ]
                    zero_cols = [(0,) * n] * (n - r)
                    N = Mat.from_columns(field, images + zero_cols, rows=n) @ inv
                    out.append(space.from_mat(base + N))
    return out


def enum_annihilated_bruteforce(n: int, q: int, p: QuadPoly, budget: Optional[int] = None) -> List[Key]:
    """Cross-check for the structured enumeration: scan all of M_n(F_q)."""
    budget = settings.INVOFACTOR_BUDGET if budget is None else budget
    _check_prime(p, q)
    space = MatrixSpace(n, q)
    if space.universe > budget:
        raise BudgetExceeded(f"M_{n}(F_{q}) has {space.universe} elements", required=space.universe, budget=budget)
    return [
        tuple(entries)
        for entries in itertools.product(range(q), repeat=n * n)
        if annihilates(space.to_mat(entries), p)
    ]


# ---------------------------------------------------------------------------
# Product sets


class ProductSet:
    """
    Products a_1···a_m with a_i from factor_sets[i], built right to left.
    Each level maps a product to the (left factor, rest) pair that first produced it.
    """

    def __init__(self, space: MatrixSpace, factor_sets: Sequence[Sequence[Key]], budget: int):
        self.space = space
        self.empty = not factor_sets
        self.work = 0
        self.levels: List[Dict[Key, Optional[Tuple[Key, Key]]]] = []
        if not factor_sets:
            self.levels.append({space.identity: None})
            return
        self.levels.append({a: None for a in factor_sets[-1]})
        for elements in reversed(factor_sets[:-1]):
            current = self.levels[-1]
            nxt: Dict[Key, Optional[Tuple[Key, Key]]] = {}
            for a in elements:
                for rest in current:
                    self.work += 1
                    if self.work > budget:
                        raise BudgetExceeded("product set exceeds the budget", required=self.work, budget=budget)
                    key = space.mul(a, rest)
                    if key not in nxt:
                        nxt[key] = (a, rest)
            self.levels.append(nxt)

    @property
    def members(self) -> Dict[Key, Optional[Tuple[Key, Key]]]:
        return self.levels[-1]

    def __contains__(self, key: Key) -> bool:
        return key in self.levels[-1]

    def __len__(self) -> int:
        return len(self.levels[-1])

    def witness(self, key: Key) -> List[Key]:
        if self.empty:
            return []
        factors = []
        for level in reversed(self.levels):
            entry = level[key]
            if entry is None:
                factors.append(key)
                break
            a, key = entry
            factors.append(a)
        return factors


@dataclass
class Membership:
    member: bool
    witness: Optional[List[Mat]] = None
    method: str = "meet-in-the-middle"
    work: int = 0

    def __bool__(self) -> bool:
        return self.member

    def to_dict(self) -> dict:
        return {
            "member": self.member,
            "method": self.method,
            "work": self.work,
            "witness": None if self.witness is None else [[[str(x) for x in row] for row in M.entries] for M in self.witness],
        }


def verify_witness(T: Mat, polys: Sequence[QuadPoly], witness: Sequence[Mat]) -> bool:
    if len(witness) != len(polys):
        return False
    product = Mat.identity(T.field, T.rows)
    for M, p in zip(witness, polys):
        if not annihilates(M, p):
            return False
        product = product @ M
    return product == T


def _two_involution_split(polys: Sequence[QuadPoly]) -> bool:
    return len(polys) >= 2 and all(p.trace.is_zero() and roots(p) is not None for p in polys[-2:])


def _scan(items: List, check, jobs: int):
    """First non-None result of check over items, in item order."""
    if jobs <= 1 or len(items) < 2 * jobs:
        for item in items:
            found = check(item)
            if found is not None:
                return found
        return None
    chunks = [items[k::jobs] for k in range(jobs)]

    def run(chunk):
        for item in chunk:
            found = check(item)
            if found is not None:
                return found
        return None

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        results = [r for r in pool.map(run, chunks) if r is not None]
    return results[0] if results else None


def product_membership(
    T: Mat,
    polys: Sequence[QuadPoly],
    budget: Optional[int] = None,
    jobs: Optional[int] = None,
) -> Membership:
    """
    Decide whether T = a_1···a_k with p_i(a_i) = 0. The longer suffix is
    precomputed as a product set; prefixes are scanned against it.
    """
    budget = settings.INVOFACTOR_BUDGET if budget is None else budget
    jobs = settings.JOBS if jobs is None else jobs
    if not 1 <= len(polys) <= 4:
        raise ShapeMismatch("product membership takes one to four polynomials")
    T._require_square("product membership")
    q = T.field.characteristic
    for p in polys:
        _check_prime(p, q)
    n = T.rows
    space = MatrixSpace(n, q)
    target = space.from_mat(T)

    if T.det() not in root_products(polys, n):
        return Membership(False, method="determinant")

    sizes = [class_size(n, q, p) for p in polys]
    h = len(polys) // 2
    cost = math.prod(sizes[h:])
    prefix_cost = math.prod(sizes[:h])

    if cost + prefix_cost > budget:
        if _two_involution_split(polys):
            return _two_involution_membership(T, polys, space, budget, jobs)
        raise BudgetExceeded(
            f"meet-in-the-middle for {len(polys)} factors in GL_{n}(F_{q})",
            required=cost + prefix_cost,
            budget=budget,
        )

    sets = [enum_annihilated(n, q, p, budget) for p in polys]
    suffix = ProductSet(space, sets[h:], budget)
    prefixes = ProductSet(space, sets[:h], budget)
    work = suffix.work + prefixes.work

    def check(prefix: Key):
        rest = space.mul(space.inverse(prefix), target)
        if rest in suffix:
            return prefix, rest
        return None

    found = _scan(list(prefixes.members), check, jobs)
    work += len(prefixes)
    if found is None:
        return Membership(False, work=work)
    prefix, rest = found
    keys = prefixes.witness(prefix) + suffix.witness(rest)
    witness = [space.to_mat(k) for k in keys]
    if not verify_witness(T, polys, witness):
        raise RuntimeError("meet-in-the-middle produced an invalid witness")
    return Membership(True, witness, work=work)


def _two_involution_membership(T: Mat, polys: Sequence[QuadPoly], space: MatrixSpace, budget: int, jobs: int) -> Membership:
    """
    The last two annihilators have roots ±x2 and ±x3, so a_{k-1}·a_k is
    x2·x3 times a product of two involutions, i.e. a matrix similar to its inverse.
    """
    n, q = space.n, space.q
    x2, _ = split_roots(polys[-2])
    x3, _ = split_roots(polys[-1])
    s_inv = (x2 * x3).inverse()
    head = list(polys[:-2])
    prefix_cost = math.prod(class_size(n, q, p) for p in head)
    involution = QuadPoly.of(space.field, 1, 0, -1)
    if prefix_cost + class_size(n, q, involution) > budget:
        raise BudgetExceeded(
            f"two-involution reduction in GL_{n}(F_{q})",
            required=prefix_cost + class_size(n, q, involution),
            budget=budget,
        )
    logger.info(f"Using the two-involution reduction for {len(polys)} factors in GL_{n}(F_{q})")
    prefixes = ProductSet(space, [enum_annihilated(n, q, p, budget) for p in head], budget)
    target = space.from_mat(T)

    def check(prefix: Key):
        rest = space.mul(space.inverse(prefix), target)
        R = space.to_mat(rest).scale(s_inv)
        return (prefix, R) if similar_to_inverse(R) else None

    found = _scan(list(prefixes.members), check, jobs)
    work = prefixes.work + len(prefixes)
    if found is None:
        return Membership(False, method="two-involution", work=work)
    prefix, R = found
    ident = Mat.identity(space.field, n)
    for key in enum_annihilated(n, q, involution, budget):
        s2 = space.to_mat(key)
        partner = s2 @ R
        if partner @ partner == ident:
            witness = [space.to_mat(k) for k in prefixes.witness(prefix)]
            witness += [s2.scale(x2), partner.scale(x3)]
            if not verify_witness(T, polys, witness):
                raise RuntimeError("two-involution reduction produced an invalid witness")
            return Membership(True, witness, method="two-involution", work=work)
    raise RuntimeError("matrix similar to its inverse without an involution splitting")


# ---------------------------------------------------------------------------
# Census


@dataclass
class CensusResult:
    n: int
    q: int
    k: int
    poly: QuadPoly
    members: List[int]
    counts_by_det: Dict[int, int] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return len(self.members)

    def header(self) -> dict:
        return {
            "n": self.n,
            "q": self.q,
            "k": self.k,
            "poly": str(self.poly),
            "total": self.total,
            "counts_by_det": {str(d): c for d, c in sorted(self.counts_by_det.items())},
        }


def census(n: int, q: int, k: int, p: QuadPoly, budget: Optional[int] = None) -> CensusResult:
    """All products of exactly k elements annihilated by p, counted by determinant."""
    budget = settings.INVOFACTOR_BUDGET if budget is None else budget
    if k < 1:
        raise ShapeMismatch("census needs at least one factor")
    space = MatrixSpace(n, q)
    elements = enum_annihilated(n, q, p, budget)
    current = set(elements)
    work = len(elements)
    for _ in range(k - 1):
        nxt = set()
        for a in elements:
            for b in current:
                work += 1
                if work > budget:
                    raise BudgetExceeded(f"census of GL_{n}(F_{q})", required=work, budget=budget)
                nxt.add(space.mul(a, b))
        current = nxt
    counts = Counter(int(space.det(key)) for key in current)
    members = sorted(space.pack(key) for key in current)
    logger.info(f"Census n={n} q={q} k={k} p={p}: {len(members)} products")
    return CensusResult(n, q, k, p, members, dict(counts))


def count_similar_to_inverse(n: int, q: int, budget: Optional[int] = None) -> int:
    space = MatrixSpace(n, q)
    return sum(1 for key in general_linear(n, q, budget) if similar_to_inverse(space.to_mat(key)))


# ---------------------------------------------------------------------------
# λ-stable search


@dataclass
class StableSearch:
    q: Optional[int]
    witness: Optional[List[Mat]] = None
    reasons: Dict[int, str] = field(default_factory=dict)
    complete: bool = False

    def to_dict(self) -> dict:
        return {
            "q": self.q,
            "complete": self.complete,
            "reasons": {str(k): v for k, v in sorted(self.reasons.items())},
            "witness": None if self.witness is None else [[[str(x) for x in row] for row in M.entries] for M in self.witness],
        }


def stable_search_report(
    A: Mat,
    lam: Scalar,
    polys: Sequence[QuadPoly],
    qmax: Optional[int] = None,
    budget: Optional[int] = None,
    jobs: Optional[int] = None,
) -> StableSearch:
    """
    Least q ≤ qmax with A ⊕ λI_q a (p1,p2,p3)-product. Each q is decided by the
    determinant semigroup or by enumeration. A q out of budget is decided by the
    invariant-subspace bound when that applies, and raises BudgetExceeded otherwise.
    """
    qmax = settings.QMAX if qmax is None else qmax
    budget = settings.INVOFACTOR_BUDGET if budget is None else budget
    if not A.field.is_prime:
        raise UnsupportedField("lambda-stable search runs over prime fields only")
    A._require_square("lambda-stable search")
    n = A.rows
    field_ = A.field
    lam = field_(lam)
    accept = acceptable(lam, *polys)
    deviation_rank = (A - Mat.scalar(field_, n, lam)).rank()
    det_a = A.det()
    report = StableSearch(q=None)

    for q in range(qmax + 1):
        size = n + q
        if size == 0:
            continue
        if det_a * lam ** q not in root_products(polys, size):
            report.reasons[q] = "determinant"
            continue
        T = direct_sum(A, Mat.scalar(field_, q, lam)) if q else A
        try:
            result = product_membership(T, polys, budget=budget, jobs=jobs)
        except BudgetExceeded:
            if not accept and size > 8 * deviation_rank:
                report.reasons[q] = "invariant-subspace"
                continue
            report.reasons[q] = "budget"
            logger.warning(f"lambda-stable search: q={q} is out of budget")
            raise
        report.reasons[q] = "enumerated"
        if result.member:
            report.q = q
            report.witness = result.witness
            return report

    report.complete = qmax >= 7 * n
    return report


def lambda_stable_search(
    A: Mat,
    lam: Scalar,
    polys: Sequence[QuadPoly],
    qmax: Optional[int] = None,
    budget: Optional[int] = None,
) -> Optional[int]:
    return stable_search_report(A, lam, polys, qmax=qmax, budget=budget).q
