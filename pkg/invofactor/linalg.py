"""
Exact dense matrices over a declared field, plus the finite-dimensional
module tools the constructions need (cyclic decompositions, finite-rank
compression, incremental sparse echelon forms).
"""
import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, Hashable, Iterable, List, Mapping, Optional, Sequence, Tuple

from invofactor.algebra import (
    DensePoly,
    Field,
    Number,
    QuadPoly,
    Scalar,
    factor_dense,
    poly_add,
    poly_divmod,
    poly_lcm,
    poly_monic,
    poly_mul,
    poly_sub,
    poly_trim,
)
from invofactor.core.errors import (
    FieldMismatch,
    NoDominantEigenvalue,
    NotAnnihilated,
    ShapeMismatch,
    Singular,
)

logger = logging.getLogger(__name__)

Vector = Tuple[Scalar, ...]


def _rref(rows: List[List[Scalar]], ncols: int) -> Tuple[List[List[Scalar]], List[int]]:
    """Gauss-Jordan elimination in place; lowest column first."""
    pivots = []
    r = 0
    for c in range(ncols):
        pivot_row = next((i for i in range(r, len(rows)) if not rows[i][c].is_zero()), None)
        if pivot_row is None:
            continue
        rows[r], rows[pivot_row] = rows[pivot_row], rows[r]
        inv = rows[r][c].inverse()
        rows[r] = [x * inv for x in rows[r]]
        for i in range(len(rows)):
            if i != r and not rows[i][c].is_zero():
                factor = rows[i][c]
                rows[i] = [a - factor * b for a, b in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
        if r == len(rows):
            break
    return rows, pivots


@dataclass(frozen=True)
class Mat:
    field: Field
    rows: int
    cols: int
    entries: Tuple[Tuple[Scalar, ...], ...]

    def __post_init__(self):
        if len(self.entries) != self.rows or any(len(row) != self.cols for row in self.entries):
            raise ShapeMismatch(f"entries do not form a {self.rows}x{self.cols} grid")
        for row in self.entries:
            for x in row:
                if x.field != self.field:
                    raise FieldMismatch(f"entry {x!r} is not in {self.field.tag}")

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_rows(cls, field: Field, rows: Sequence[Sequence[Number]], cols: Optional[int] = None) -> "Mat":
        grid = tuple(tuple(field(x) for x in row) for row in rows)
        if cols is None:
            cols = len(grid[0]) if grid else 0
        return cls(field, len(grid), cols, grid)

    @classmethod
    def from_columns(cls, field: Field, columns: Sequence[Sequence[Number]], rows: Optional[int] = None) -> "Mat":
        if rows is None:
            rows = len(columns[0]) if columns else 0
        grid = tuple(tuple(field(columns[j][i]) for j in range(len(columns))) for i in range(rows))
        return cls(field, rows, len(columns), grid)

    @classmethod
    def zeros(cls, field: Field, rows: int, cols: Optional[int] = None) -> "Mat":
        cols = rows if cols is None else cols
        zero = field.zero
        return cls(field, rows, cols, tuple(tuple(zero for _ in range(cols)) for _ in range(rows)))

    @classmethod
    def identity(cls, field: Field, n: int) -> "Mat":
        return cls.scalar(field, n, field.one)

    @classmethod
    def scalar(cls, field: Field, n: int, value: Number) -> "Mat":
        return cls.diag(field, [value] * n)

    @classmethod
    def diag(cls, field: Field, values: Sequence[Number]) -> "Mat":
        n = len(values)
        zero = field.zero
        return cls(
            field, n, n,
            tuple(tuple(field(values[i]) if i == j else zero for j in range(n)) for i in range(n)),
        )

    # -- access ------------------------------------------------------------

    def __getitem__(self, ij: Tuple[int, int]) -> Scalar:
        i, j = ij
        return self.entries[i][j]

    def row(self, i: int) -> Vector:
        return self.entries[i]

    def column(self, j: int) -> Vector:
        return tuple(row[j] for row in self.entries)

    def columns(self) -> List[Vector]:
        return [self.column(j) for j in range(self.cols)]

    @property
    def is_square(self) -> bool:
        return self.rows == self.cols

    def _require_square(self, what: str):
        if not self.is_square:
            raise ShapeMismatch(f"{what} needs a square matrix, got {self.rows}x{self.cols}")

    # -- arithmetic --------------------------------------------------------

    def _check_same_shape(self, other: "Mat"):
        if other.field != self.field:
            raise FieldMismatch(f"{self.field.tag} vs {other.field.tag}")
        if (self.rows, self.cols) != (other.rows, other.cols):
            raise ShapeMismatch(f"{self.rows}x{self.cols} vs {other.rows}x{other.cols}")

    def __add__(self, other: "Mat") -> "Mat":
        self._check_same_shape(other)
        return Mat(self.field, self.rows, self.cols, tuple(
            tuple(a + b for a, b in zip(r1, r2)) for r1, r2 in zip(self.entries, other.entries)
        ))

    def __sub__(self, other: "Mat") -> "Mat":
        self._check_same_shape(other)
        return Mat(self.field, self.rows, self.cols, tuple(
            tuple(a - b for a, b in zip(r1, r2)) for r1, r2 in zip(self.entries, other.entries)
        ))

    def __neg__(self) -> "Mat":
        return self.scale(-self.field.one)

    def scale(self, s: Number) -> "Mat":
        s = self.field(s)
        return Mat(self.field, self.rows, self.cols, tuple(tuple(s * x for x in row) for row in self.entries))

    def __matmul__(self, other):
        if isinstance(other, Mat):
            if other.field != self.field:
                raise FieldMismatch(f"{self.field.tag} vs {other.field.tag}")
            if self.cols != other.rows:
                raise ShapeMismatch(f"cannot multiply {self.rows}x{self.cols} by {other.rows}x{other.cols}")
            other_cols = other.columns()
            zero = self.field.zero
            return Mat(self.field, self.rows, other.cols, tuple(
                tuple(sum((a * b for a, b in zip(row, col)), zero) for col in other_cols)
                for row in self.entries
            ))
        return self.apply(other)

    def apply(self, vector: Sequence[Scalar]) -> Vector:
        if len(vector) != self.cols:
            raise ShapeMismatch(f"vector of length {len(vector)} for {self.cols} columns")
        zero = self.field.zero
        return tuple(sum((a * b for a, b in zip(row, vector)), zero) for row in self.entries)

    def transpose(self) -> "Mat":
        if not self.rows:
            return Mat.zeros(self.field, self.cols, 0)
        return Mat(self.field, self.cols, self.rows, tuple(zip(*self.entries)))

    def power(self, k: int) -> "Mat":
        self._require_square("power")
        base = self if k >= 0 else self.inverse()
        k = abs(k)
        result = Mat.identity(self.field, self.rows)
        while k:
            if k & 1:
                result = result @ base
            base = base @ base
            k >>= 1
        return result

    def evaluate(self, f: DensePoly) -> "Mat":
        """f(A) by Horner's rule."""
        self._require_square("polynomial evaluation")
        result = Mat.zeros(self.field, self.rows)
        ident = Mat.identity(self.field, self.rows)
        for c in reversed(f):
            result = result @ self + ident.scale(c)
        return result

    # -- elimination -------------------------------------------------------

    def rref(self) -> Tuple["Mat", List[int]]:
        rows, pivots = _rref([list(r) for r in self.entries], self.cols)
        return Mat(self.field, self.rows, self.cols, tuple(tuple(r) for r in rows)), pivots

    def rank(self) -> int:
        return len(self.rref()[1])

    def det(self) -> Scalar:
        self._require_square("det")
        rows = [list(r) for r in self.entries]
        n = self.rows
        result = self.field.one
        for c in range(n):
            pivot = next((i for i in range(c, n) if not rows[i][c].is_zero()), None)
            if pivot is None:
                return self.field.zero
            if pivot != c:
                rows[c], rows[pivot] = rows[pivot], rows[c]
                result = -result
            result = result * rows[c][c]
            inv = rows[c][c].inverse()
            for i in range(c + 1, n):
                if not rows[i][c].is_zero():
                    factor = rows[i][c] * inv
                    rows[i] = [a - factor * b for a, b in zip(rows[i], rows[c])]
        return result

    def inverse(self) -> "Mat":
        self._require_square("inverse")
        n = self.rows
        one, zero = self.field.one, self.field.zero
        aug = [list(row) + [one if i == j else zero for j in range(n)] for i, row in enumerate(self.entries)]
        rows, pivots = _rref(aug, n)
        if [p for p in pivots if p < n] != list(range(n)):
            raise Singular("matrix is not invertible")
        return Mat(self.field, n, n, tuple(tuple(r[n:]) for r in rows))

    def kernel(self) -> List[Vector]:
        """Basis of the null space, one vector per free column."""
        rows, pivots = _rref([list(r) for r in self.entries], self.cols)
        free = [c for c in range(self.cols) if c not in pivots]
        basis = []
        for f in free:
            vec = [self.field.zero] * self.cols
            vec[f] = self.field.one
            for r, p in enumerate(pivots):
                vec[p] = -rows[r][f]
            basis.append(tuple(vec))
        return basis

    def image(self) -> List[Vector]:
        """Basis of the column space: the pivot columns of the matrix itself."""
        _, pivots = self.rref()
        return [self.column(p) for p in pivots]

    def solve(self, b: Sequence[Scalar]) -> Optional[Vector]:
        """One solution of A·x = b, or None."""
        aug = [list(row) + [b[i]] for i, row in enumerate(self.entries)]
        rows, pivots = _rref(aug, self.cols + 1)
        if self.cols in pivots:
            return None
        x = [self.field.zero] * self.cols
        for r, p in enumerate(pivots):
            x[p] = rows[r][self.cols]
        return tuple(x)

    # -- predicates --------------------------------------------------------

    def is_zero(self) -> bool:
        return all(x.is_zero() for row in self.entries for x in row)

    def is_scalar(self) -> bool:
        return self.is_square and self == Mat.scalar(self.field, self.rows, self.entries[0][0] if self.rows else 0)

    def is_identity(self) -> bool:
        return self.is_square and self == Mat.identity(self.field, self.rows)

    def __str__(self) -> str:
        return "[" + ", ".join("[" + ", ".join(str(x) for x in row) + "]" for row in self.entries) + "]"


def direct_sum(*mats: Mat) -> Mat:
    field = mats[0].field
    n = sum(m.rows for m in mats)
    k = sum(m.cols for m in mats)
    grid = [[field.zero] * k for _ in range(n)]
    r0 = c0 = 0
    for m in mats:
        for i in range(m.rows):
            for j in range(m.cols):
                grid[r0 + i][c0 + j] = m[i, j]
        r0 += m.rows
        c0 += m.cols
    return Mat(field, n, k, tuple(tuple(r) for r in grid))


def annihilates(A: Mat, p: QuadPoly) -> bool:
    A._require_square("annihilation")
    return A.evaluate(p.coefficients()).is_zero()


def star_mat(A: Mat, p: QuadPoly) -> Mat:
    """A⋆ = tr(p)·I − A, so that A·A⋆ = N(p)·I."""
    if not annihilates(A, p):
        raise NotAnnihilated(f"matrix is not annihilated by {p}")
    return Mat.scalar(A.field, A.rows, p.trace) - A


def companion(p: QuadPoly) -> Mat:
    m = p.monic()
    return Mat.from_rows(p.field, [[0, -m.c0], [1, -m.c1]])


def dense_companion(f: DensePoly) -> Mat:
    """Companion matrix of f made monic: e_l ↦ e_(l+1), e_(d-1) ↦ −Σ f_l·e_l."""
    f = poly_monic(f)
    field, d = f[0].field, len(f) - 1
    columns = [tuple(field.one if i == l + 1 else field.zero for i in range(d)) for l in range(d - 1)]
    columns.append(tuple(-c for c in f[:d]))
    return Mat.from_columns(field, columns, rows=d)


# ---------------------------------------------------------------------------
# Sparse incremental echelon form


def index_key(key: Hashable) -> Any:
    sort_key = getattr(key, "sort_key", None)
    return sort_key() if callable(sort_key) else key


class SparseEchelon:
    """
    Reduced echelon basis of sparse vectors (mappings key -> Scalar).

    Rows are kept fully reduced: every pivot occurs in exactly one row,
    so reduction can visit rows in any order. With `track=True` each row
    remembers the combination of inserted vectors it came from, which lets
    `express` write a vector in terms of the inserted ones.
    """

    def __init__(self, field: Field, track: bool = True):
        self.field = field
        self.track = track
        self._rows: Dict[Hashable, Tuple[Dict[Hashable, Scalar], Dict[Hashable, Scalar]]] = {}

    def __len__(self) -> int:
        return len(self._rows)

    @property
    def pivots(self) -> List[Hashable]:
        return list(self._rows)

    def rows(self) -> List[Dict[Hashable, Scalar]]:
        return [row for row, _ in self._rows.values()]

    def reduce(self, vector: Mapping[Hashable, Scalar]) -> Tuple[Dict[Hashable, Scalar], Dict[Hashable, Scalar]]:
        residual = {k: c for k, c in vector.items() if not c.is_zero()}
        combo: Dict[Hashable, Scalar] = {}
        for pivot in [k for k in residual if k in self._rows]:
            c = residual.get(pivot)
            if c is None:
                continue
            row, origin = self._rows[pivot]
            axpy(residual, -c, row)
            if self.track:
                axpy(combo, c, origin)
        return residual, combo

    def insert(self, vector: Mapping[Hashable, Scalar], label: Hashable = None) -> Optional[Dict[Hashable, Scalar]]:
        """Add a vector. Returns None if it was independent, else its expression in earlier labels."""
        residual, combo = self.reduce(vector)
        if not residual:
            return combo
        origin: Dict[Hashable, Scalar] = {}
        if self.track:
            origin = {k: -c for k, c in combo.items()}
            axpy(origin, self.field.one, {label: self.field.one})
        pivot = min(residual, key=index_key)
        inv = residual[pivot].inverse()
        residual = {k: c * inv for k, c in residual.items()}
        origin = {k: c * inv for k, c in origin.items()}
        for other_pivot, (row, row_origin) in self._rows.items():
            c = row.get(pivot)
            if c is not None:
                axpy(row, -c, residual)
                if self.track:
                    axpy(row_origin, -c, origin)
        self._rows[pivot] = (residual, origin)
        return None

    def contains(self, vector: Mapping[Hashable, Scalar]) -> bool:
        return not self.reduce(vector)[0]

    def express(self, vector: Mapping[Hashable, Scalar]) -> Optional[Dict[Hashable, Scalar]]:
        residual, combo = self.reduce(vector)
        return None if residual else combo


def axpy(target: Dict[Hashable, Scalar], scale: Scalar, source: Mapping[Hashable, Scalar]):
    """target += scale·source, dropping zeros."""
    for k, c in source.items():
        value = target.get(k)
        value = scale * c if value is None else value + scale * c
        if value.is_zero():
            target.pop(k, None)
        else:
            target[k] = value


# ---------------------------------------------------------------------------
# Cyclic decomposition


def _dense(vector: Sequence[Scalar]) -> Dict[int, Scalar]:
    return {i: c for i, c in enumerate(vector) if not c.is_zero()}


def local_minpoly(A: Mat, v: Sequence[Scalar]) -> DensePoly:
    """Monic generator of the annihilator ideal of v under A."""
    field = A.field
    ech = SparseEchelon(field)
    w = tuple(v)
    k = 0
    while True:
        combo = ech.insert(_dense(w), label=k)
        if combo is not None:
            coeffs = [-combo.get(j, field.zero) for j in range(k)] + [field.one]
            return poly_trim(coeffs)
        w = A.apply(w)
        k += 1


def minimal_polynomial(A: Mat) -> DensePoly:
    m: DensePoly = (A.field.one,)
    for e in _unit_vectors(A.field, A.rows):
        m = poly_lcm(m, local_minpoly(A, e))
    return m


def _unit_vectors(field: Field, n: int) -> List[Vector]:
    return [tuple(field.one if i == j else field.zero for i in range(n)) for j in range(n)]


def _multiplicity(f: DensePoly, pi: DensePoly) -> int:
    count = 0
    while len(f) > 1:
        quot, rem = poly_divmod(f, pi)
        if rem:
            break
        f, count = quot, count + 1
    return count


def _maximal_vector(A: Mat, m: DensePoly) -> Vector:
    """A vector whose local minimal polynomial is the minimal polynomial m."""
    field = A.field
    units = _unit_vectors(field, A.rows)
    locals_ = [local_minpoly(A, e) for e in units]
    g = tuple(field.zero for _ in range(A.rows))
    for pi, exponent in factor_dense(m):
        pi_power: DensePoly = (field.one,)
        for _ in range(exponent):
            pi_power = poly_mul(pi_power, pi)
        i = next(i for i, f in enumerate(locals_) if _multiplicity(f, pi) == exponent)
        cofactor, _ = poly_divmod(locals_[i], pi_power)
        part = A.evaluate(cofactor).apply(units[i])
        g = tuple(a + b for a, b in zip(g, part))
    return g


def frobenius(A: Mat) -> List[Tuple[Vector, int]]:
    """
    Cyclic decomposition: generators g_i whose A-orbits span complementary
    invariant subspaces, degrees weakly decreasing (the invariant factors).
    """
    A._require_square("frobenius")
    if A.rows and A.det().is_zero():
        raise Singular("frobenius decomposition requires an invertible matrix")
    return _frobenius(A)


def _frobenius(A: Mat) -> List[Tuple[Vector, int]]:
    field, n = A.field, A.rows
    if n == 0:
        return []
    m = minimal_polynomial(A)
    g = _maximal_vector(A, m)
    d = len(m) - 1
    krylov = [g]
    for _ in range(d - 1):
        krylov.append(A.apply(krylov[-1]))
    if d == n:
        return [(g, d)]

    # complete the Krylov vectors to a basis; f reads off the last Krylov coordinate
    basis = list(krylov)
    ech = SparseEchelon(field, track=False)
    for v in basis:
        ech.insert(_dense(v))
    for e in _unit_vectors(field, n):
        if ech.insert(_dense(e)) is None:
            basis.append(e)
    f = Mat.from_columns(field, basis).inverse().row(d - 1)

    functionals = [f]
    for _ in range(d - 1):
        functionals.append((Mat.from_rows(field, [functionals[-1]]) @ A).row(0))
    complement = Mat.from_rows(field, functionals).kernel()

    # A restricted to the complement, in the kernel basis
    C = Mat.from_columns(field, complement)
    images = [A.apply(c) for c in complement]
    restricted_cols = [C.solve(img) for img in images]
    R = Mat.from_columns(field, restricted_cols, rows=len(complement))
    result = [(g, d)]
    for sub_g, sub_d in _frobenius(R):
        result.append((C.apply(sub_g), sub_d))
    return result


def primary_pieces(A: Mat) -> List[Tuple[Vector, int, DensePoly]]:
    """
    Splits every cyclic piece of the Frobenius decomposition along the prime
    factors of its local minimal polynomial. Returns (generator, dimension, π)
    with the generator annihilated by a power of the monic irreducible π.
    """
    pieces = []
    for g, _ in frobenius(A):
        f = local_minpoly(A, g)
        for pi, exponent in factor_dense(f):
            power: DensePoly = (A.field.one,)
            for _ in range(exponent):
                power = poly_mul(power, pi)
            cofactor, _ = poly_divmod(f, power)
            pieces.append((A.evaluate(cofactor).apply(g), exponent * (len(pi) - 1), pi))
    return pieces


def invariant_factors(A: Mat) -> List[DensePoly]:
    return [local_minpoly(A, g) for g, _ in frobenius(A)]


def similar_to_inverse(A: Mat) -> bool:
    return invariant_factors(A) == invariant_factors(A.inverse())


# ---------------------------------------------------------------------------
# Finite-rank operators


@dataclass(frozen=True)
class FiniteRankCompression:
    """A minimal W with im w ⊆ W and W + ker w = V, and the matrix of w|W."""

    matrix: Mat
    support: Tuple[Hashable, ...]
    basis: Tuple[Dict[Hashable, Scalar], ...]
    image_rank: int


def compress(w: Mapping[Hashable, Mapping[Hashable, Scalar]], field: Field) -> FiniteRankCompression:
    support = set(w)
    for image in w.values():
        support.update(k for k, c in image.items() if not c.is_zero())
    support = tuple(sorted(support, key=index_key))
    pos = {k: i for i, k in enumerate(support)}
    n = len(support)
    if n == 0:
        return FiniteRankCompression(Mat.zeros(field, 0), (), (), 0)

    columns = []
    for k in support:
        col = [field.zero] * n
        for target, c in w.get(k, {}).items():
            col[pos[target]] = col[pos[target]] + c
        columns.append(tuple(col))
    Wm = Mat.from_columns(field, columns, rows=n)

    image = Wm.image()
    ech = SparseEchelon(field, track=False)
    for v in image + Wm.kernel():
        ech.insert(_dense(v))
    completion = []
    for e in _unit_vectors(field, n):
        if ech.insert(_dense(e)) is None:
            completion.append(e)
    basis = image + completion
    if not basis:
        return FiniteRankCompression(Mat.zeros(field, 0), support, (), 0)

    B = Mat.from_columns(field, basis)
    coords = [B.solve(Wm.apply(b)) for b in basis]
    matrix = Mat.from_columns(field, coords, rows=len(basis))
    return FiniteRankCompression(
        matrix=matrix,
        support=support,
        basis=tuple({support[i]: c for i, c in enumerate(b) if not c.is_zero()} for b in basis),
        image_rank=len(image),
    )


def compress_finite_rank(w: Mapping[Hashable, Mapping[Hashable, Scalar]], field: Field) -> Mat:
    """Representative of the similarity class [w]."""
    return compress(w, field).matrix


def induced_det(u) -> Scalar:
    """Determinant of u on im(u − λ·id), λ the dominant eigenvalue."""
    lam = u.dominant_eigenvalue()
    if lam is None:
        raise NoDominantEigenvalue("operator has no dominant eigenvalue")
    data = compress(u.deviation(lam), u.field)
    r = data.image_rank
    if r == 0:
        return u.field.one
    block = Mat.from_rows(u.field, [[data.matrix[i, j] for j in range(r)] for i in range(r)])
    return (block + Mat.scalar(u.field, r, lam)).det()


def operator_matrix(apply: Callable[[Vector], Vector], field: Field, n: int) -> Mat:
    return Mat.from_columns(field, [apply(e) for e in _unit_vectors(field, n)], rows=n)


# ---------------------------------------------------------------------------
# Polynomial matrices


PolyMatrix = List[List[DensePoly]]


def poly_diagonal_form(field: Field, R: Sequence[Sequence[DensePoly]]) -> Tuple[List[DensePoly], PolyMatrix, PolyMatrix]:
    """
    Diagonal form D = U·R·V of a polynomial matrix by elementary operations
    over F[t]. Returns the diagonal of D, U and U⁻¹; V is not kept. The
    diagonal entries need not divide each other.
    """
    A = [list(row) for row in R]
    n = len(A)
    m = len(A[0]) if A else 0
    U = [[(field.one,) if i == j else () for j in range(n)] for i in range(n)]
    U_inv = [list(row) for row in U]

    def swap_rows(i: int, k: int):
        A[i], A[k] = A[k], A[i]
        U[i], U[k] = U[k], U[i]
        for row in U_inv:
            row[i], row[k] = row[k], row[i]

    def subtract_row(i: int, k: int, q: DensePoly):
        # row_i -= q·row_k
        A[i] = [poly_sub(a, poly_mul(q, b)) for a, b in zip(A[i], A[k])]
        U[i] = [poly_sub(a, poly_mul(q, b)) for a, b in zip(U[i], U[k])]
        for row in U_inv:
            row[k] = poly_add(row[k], poly_mul(q, row[i]))

    diagonal: List[DensePoly] = []
    for k in range(min(n, m)):
        while True:
            entries = [(len(A[i][j]), i, j) for i in range(k, n) for j in range(k, m) if A[i][j]]
            if not entries:
                diagonal.extend(() for _ in range(min(n, m) - k))
                return diagonal, U, U_inv
            _, i, j = min(entries)
            if i != k:
                swap_rows(i, k)
            if j != k:
                for row in A:
                    row[j], row[k] = row[k], row[j]
            pivot = A[k][k]
            clean = True
            for i in range(k + 1, n):
                if A[i][k]:
                    q, r = poly_divmod(A[i][k], pivot)
                    subtract_row(i, k, q)
                    clean = clean and not r
            for j in range(k + 1, m):
                if A[k][j]:
                    q, r = poly_divmod(A[k][j], pivot)
                    for row in A:
                        row[j] = poly_sub(row[j], poly_mul(q, row[k]))
                    clean = clean and not r
            if clean:
                break
        diagonal.append(A[k][k])
    return diagonal, U, U_inv
