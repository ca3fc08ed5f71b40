"""
Module structure of a representable automorphism u, viewed as a module over
F[t, t⁻¹]: submodule closures, free-part detection, stratifications and the
semi-good predicate, quotient strata of the torsion part and representative
adjustment for the shift-containing construction.
"""
import logging
import threading
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

from invofactor.algebra import DensePoly, Scalar, format_dense
from invofactor.core.config import settings
from invofactor.core.errors import BoundExceeded, BuilderStuck, PreconditionViolation, UnknownIndex
from invofactor.linalg import Mat, SparseEchelon, axpy, direct_sum, frobenius, primary_pieces
from invofactor.opcore import (
    BasisIndex,
    BlockKind,
    CyclicReport,
    LinComb,
    RepAut,
    Window,
    cyclic_window_cert,
    lin_sum,
)

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Stratifications


@dataclass
class Stratum:
    generator: LinComb
    dim: Optional[int] = None  # None: infinite

    @property
    def is_finite(self) -> bool:
        return self.dim is not None

    def to_dict(self) -> dict:
        return {"generator": lincomb_to_dict(self.generator), "dim": self.dim}


@dataclass(frozen=True)
class Piece:
    """A cyclic piece of one periodic copy: generator in copy_indices order, dimension, prime (None when mixed)."""

    generator: Tuple[Scalar, ...]
    dim: int
    prime: Optional[DensePoly] = None


class TailRule:
    """
    Strata over the periodic copies from start_copy on. Piece i of copy
    start_copy + r sits at position r·m + i, m the number of pieces per copy.
    Without pairing every piece is a stratum. With pairing, a one-dimensional
    piece is joined to the earliest unused piece of a different prime, on its
    own copy or a later one, so every stratum has dimension at least two.
    """

    def __init__(self, u: RepAut, start_copy: int, pieces: Sequence[Piece], pairing: bool = False):
        self.u = u
        self.start_copy = start_copy
        self.pieces = list(pieces)
        self.pairing = pairing
        self.layout = [(i.block, i.slot) for i in u.copy_indices(0)]
        if pairing and any(p.dim < 2 for p in self.pieces):
            primes = {p.prime for p in self.pieces}
            if None in primes or len(primes) < 2:
                raise BuilderStuck(
                    "one-dimensional pieces need a piece of another prime to pair with",
                    templates=[p.dim for p in self.pieces],
                )
        self._primes = sorted({p.prime for p in self.pieces if p.prime is not None}, key=format_dense)
        self._groups: List[Tuple[int, ...]] = []
        self._owner: Dict[int, int] = {}
        self._scan = 0
        self._cursor: Dict[DensePoly, int] = {}
        self._inverses: Dict[Tuple[int, ...], Mat] = {}
        self._lock = threading.RLock()

    @property
    def period(self) -> int:
        return len(self.pieces)

    @property
    def min_dim(self) -> int:
        dims = [p.dim for p in self.pieces if p.dim >= 2 or not self.pairing]
        if self.pairing and any(p.dim < 2 for p in self.pieces):
            dims.append(2)
        return min(dims)

    # -- pairing -----------------------------------------------------------

    def _next_free(self, prime: DensePoly, after: int) -> int:
        m = self.period
        n = max(self._cursor.get(prime, 0), after + 1)
        while self.pieces[n % m].prime != prime or n in self._owner:
            n += 1
        self._cursor[prime] = n
        return n

    def _advance(self):
        while self._scan in self._owner:
            self._scan += 1
        lead = self._scan
        piece = self.pieces[lead % self.period]
        group: Tuple[int, ...] = (lead,)
        if self.pairing and piece.dim < 2:
            partner = min(self._next_free(pi, lead) for pi in self._primes if pi != piece.prime)
            group = (lead, partner)
        k = len(self._groups)
        self._groups.append(group)
        for pos in group:
            self._owner[pos] = k

    def group(self, k: int) -> Tuple[int, ...]:
        """Positions of the pieces summed into tail stratum k."""
        with self._lock:
            while len(self._groups) <= k:
                self._advance()
            return self._groups[k]

    def owner(self, pos: int) -> int:
        with self._lock:
            while pos not in self._owner:
                self._advance()
            return self._owner[pos]

    # -- strata ------------------------------------------------------------

    def _lift(self, pos: int) -> LinComb:
        copy, i = divmod(pos, self.period)
        return LinComb(
            (BasisIndex(block, slot, self.start_copy + copy), c)
            for (block, slot), c in zip(self.layout, self.pieces[i].generator)
            if not c.is_zero()
        )

    def stratum(self, k: int) -> Stratum:
        group = self.group(k)
        generator = lin_sum((self.u.field.one, self._lift(pos)) for pos in group)
        return Stratum(generator, sum(self.pieces[pos % self.period].dim for pos in group))

    def strata_through_copy(self, copy: int) -> int:
        """Number of tail strata needed to cover every copy up to `copy`."""
        last = (copy - self.start_copy + 1) * self.period
        if last <= 0:
            return 0
        return 1 + max(self.owner(pos) for pos in range(last))

    # -- coordinates -------------------------------------------------------

    @cached_property
    def _offsets(self) -> List[int]:
        offsets, total = [], 0
        for p in self.pieces:
            offsets.append(total)
            total += p.dim
        return offsets

    @cached_property
    def _piece_inverse(self) -> Mat:
        P = period_matrix(self.u)
        columns = []
        for p in self.pieces:
            vec = p.generator
            for _ in range(p.dim):
                columns.append(vec)
                vec = P.apply(vec)
        return Mat.from_columns(self.u.field, columns, rows=len(self.layout)).inverse()

    def _group_inverse(self, kinds: Tuple[int, ...]) -> Mat:
        """Orbit of a sum of pieces, in the concatenated orbit bases of the pieces."""
        with self._lock:
            if kinds in self._inverses:
                return self._inverses[kinds]
        P = period_matrix(self.u)
        dims = [self.pieces[i].dim for i in kinds]
        vecs = [self.pieces[i].generator for i in kinds]
        columns = []
        for _ in range(sum(dims)):
            col: List[Scalar] = []
            for i, vec in zip(kinds, vecs):
                coords = self._piece_inverse.apply(vec)
                col.extend(coords[self._offsets[i]:self._offsets[i] + self.pieces[i].dim])
            columns.append(col)
            vecs = [P.apply(v) for v in vecs]
        inverse = Mat.from_columns(self.u.field, columns, rows=sum(dims)).inverse()
        with self._lock:
            self._inverses[kinds] = inverse
        return inverse

    def coordinates(self, idx: BasisIndex) -> Dict[Tuple[int, int], Scalar]:
        """The tail index idx in the orbit basis of the tail strata: {(k, l): c}."""
        m = self.period
        col = self._piece_inverse.column(self.layout.index((idx.block, idx.slot)))
        base = (idx.copy - self.start_copy) * m
        out: Dict[Tuple[int, int], Scalar] = {}
        for i, p in enumerate(self.pieces):
            pos = base + i
            k = self.owner(pos)
            group = self.group(k)
            shift = sum(self.pieces[q % m].dim for q in group[:group.index(pos)])
            inverse = self._group_inverse(tuple(q % m for q in group)) if len(group) > 1 else None
            for l in range(p.dim):
                c = col[self._offsets[i] + l]
                if c.is_zero():
                    continue
                if inverse is None:
                    axpy(out, c, {(k, l): self.u.field.one})
                else:
                    axpy(out, c, {(k, j): d for j, d in enumerate(inverse.column(shift + l)) if not d.is_zero()})
        return out

    def to_dict(self) -> dict:
        return {
            "periodic_copies_from": self.start_copy,
            "pairing": self.pairing,
            "templates": [
                {
                    "generator": {f"{b},{s}": str(c) for (b, s), c in zip(self.layout, p.generator) if not c.is_zero()},
                    "dim": p.dim,
                    "prime": format_dense(p.prime) if p.prime is not None else None,
                }
                for p in self.pieces
            ],
        }





@dataclass
class Stratification:
    """
    Strata (generator, dim) in order: a finite prefix, then optionally the
    strata of a tail rule over the periodic copies. `core` lists the torsion
    indices spanned by the prefix orbits.
    """

    ambient: RepAut
    prefix: List[Stratum]
    tail: Optional[TailRule] = None
    core: List[BasisIndex] = field(default_factory=list)

    @property
    def is_infinite(self) -> bool:
        return self.tail is not None and self.tail.period > 0

    def stratum(self, k: int) -> Stratum:
        if k < len(self.prefix):
            return self.prefix[k]
        if not self.is_infinite:
            raise IndexError(f"stratification has {len(self.prefix)} strata")
        return self.tail.stratum(k - len(self.prefix))

    def strata(self, count: Optional[int] = None) -> Iterator[Stratum]:
        k = 0
        while count is None or k < count:
            if k >= len(self.prefix) and not self.is_infinite:
                return
            yield self.stratum(k)
            k += 1

    def orbit(self, k: int) -> List[LinComb]:
        """u^l(x_k) for 0 <= l < n_k, computed with the ambient operator."""
        st = self.stratum(k)
        if not st.is_finite:
            raise PreconditionViolation(f"stratum {k} is infinite")
        return orbit(self.ambient, st.generator, st.dim)

    # -- torsion coordinates -------------------------------------------------

    @cached_property
    def _core_inverse(self) -> Optional[Mat]:
        if not self.core:
            return None
        columns = []
        for k in range(len(self.prefix)):
            for vec in self.orbit(k):
                columns.append(_dense_on(torsion_part(self.ambient, vec), self.core, self.ambient.field))
        return Mat.from_columns(self.ambient.field, columns, rows=len(self.core)).inverse()

    @cached_property
    def _core_pos(self) -> Dict[BasisIndex, int]:
        return {idx: n for n, idx in enumerate(self.core)}

    @cached_property
    def _orbit_labels(self) -> List[Tuple[int, int]]:
        return [(k, l) for k in range(len(self.prefix)) for l in range(self.prefix[k].dim)]

    def coordinates(self, idx: BasisIndex) -> Dict[Tuple[int, int], Scalar]:
        """
        The torsion index idx in the orbit basis: {(k, l): c} with
        idx ≡ Σ c·u^l(x_k) modulo the shift blocks.
        """
        pos = self._core_pos.get(idx)
        if pos is not None:
            col = self._core_inverse.column(pos)
            return {self._orbit_labels[n]: c for n, c in enumerate(col) if not c.is_zero()}
        if idx.copy is None or not self.is_infinite or idx.copy < self.tail.start_copy:
            raise UnknownIndex(f"{idx} is not covered by the stratification", index=idx)
        base = len(self.prefix)
        return {(base + k, l): c for (k, l), c in self.tail.coordinates(idx).items()}

    def to_dict(self) -> dict:
        return {
            "prefix": [st.to_dict() for st in self.prefix],
            "tail_rule": self.tail.to_dict() if self.tail else None,
        }


def lincomb_to_dict(vec: Mapping) -> Dict[str, str]:
    return {str(k): str(c) for k, c in LinComb(vec).terms()}


def orbit(u: RepAut, x: Mapping, n: int) -> List[LinComb]:
    out = [LinComb(x)]
    for _ in range(n - 1):
        out.append(u.apply_vec(out[-1]))
    return out[:n]


def torsion_part(u: RepAut, vec: Mapping) -> LinComb:
    return LinComb((k, c) for k, c in vec.items() if u.kind(k.block) != BlockKind.SHIFT)


def shift_part(u: RepAut, vec: Mapping) -> LinComb:
    return LinComb((k, c) for k, c in vec.items() if u.kind(k.block) == BlockKind.SHIFT)


def _dense_on(vec: Mapping, indices: Sequence[BasisIndex], fld) -> Tuple[Scalar, ...]:
    pos = {idx: n for n, idx in enumerate(indices)}
    out = [fld.zero] * len(indices)
    for k, c in vec.items():
        if k not in pos:
            raise PreconditionViolation(f"{k} leaves the core")
        out[pos[k]] = c
    return tuple(out)


def period_matrix(u: RepAut) -> Mat:
    """The matrix u induces on one periodic copy, in copy_indices order."""
    return direct_sum(*[b.matrix for b in u.periodic_blocks])


def require_shift_stable(u: RepAut):
    """The span of the shift blocks must be u-stable: no perturbation key may be a shift index."""
    bad = [k for k in u.perturbation if u.kind(k.block) == BlockKind.SHIFT]
    if bad:
        raise PreconditionViolation(
            f"perturbation on shift indices {', '.join(map(str, sorted(bad, key=BasisIndex.sort_key)))}",
        )


class TorsionLayout:
    """Core (finite blocks and the first copies) and untouched tail of the torsion part of u."""

    def __init__(self, u: RepAut, start_copy: Optional[int] = None):
        self.u = u
        self.start_copy = 1 + u.max_touched_copy() if start_copy is None else start_copy
        self.core = u.finite_indices() + [i for c in range(self.start_copy) for i in u.copy_indices(c)]

    def core_matrix(self) -> Mat:
        """Torsion part of u restricted to the core."""
        u = self.u
        columns = [_dense_on(torsion_part(u, u.apply(i)), self.core, u.field) for i in self.core]
        return Mat.from_columns(u.field, columns, rows=len(self.core))

    def lift(self, vec: Sequence[Scalar]) -> LinComb:
        return LinComb((idx, c) for idx, c in zip(self.core, vec) if not c.is_zero())


def frobenius_pieces(u: RepAut) -> List[Piece]:
    if not u.periodic_blocks:
        return []
    return [Piece(tuple(g), degree) for g, degree in frobenius(period_matrix(u))]


def prime_pieces(u: RepAut) -> List[Piece]:
    """Primary pieces of one periodic copy, ordered by dimension, largest first."""
    if not u.periodic_blocks:
        return []
    pieces = [Piece(tuple(g), d, pi) for g, d, pi in primary_pieces(period_matrix(u))]
    return sorted(pieces, key=lambda p: -p.dim)


# ---------------------------------------------------------------------------
# Closures


@dataclass
class ClosureResult:
    basis: List[LinComb]

    @property
    def dim(self) -> int:
        return len(self.basis)


@dataclass
class FreeDetected:
    witness: LinComb
    report: CyclicReport


def closure(u: RepAut, seed: Sequence[Mapping], bound: Optional[int] = None) -> Union[ClosureResult, FreeDetected]:
    """
    Submodule generated by seed, closed under u and u⁻¹. Once the span enters
    a shift block or grows past bound, a vector whose orbit stays independent
    to depth bound is reported instead.
    """
    bound = settings.ORBIT_MAX if bound is None else bound
    echelon = SparseEchelon(u.field, track=False)
    basis: List[LinComb] = []
    queue = deque(LinComb(s) for s in seed)
    free_suspect = False
    seen_support = set()

    while queue:
        vec = queue.popleft()
        if vec.is_zero() or echelon.insert(vec) is not None:
            continue
        basis.append(vec)
        seen_support.update(vec)
        if any(u.kind(k.block) == BlockKind.SHIFT for k in vec) or len(basis) > bound:
            free_suspect = True
            break
        queue.append(u.apply_vec(vec))
        queue.append(lin_sum((c, u.inverse_apply(k)) for k, c in vec.items()))

    if not free_suspect:
        logger.debug(f"closure stabilized at dimension {len(basis)}")
        return ClosureResult(basis)

    candidates = [LinComb(s) for s in seed] + [
        LinComb.basis(k, u.field) for k in sorted(seen_support, key=BasisIndex.sort_key)
    ]
    for x in candidates:
        if x.is_zero():
            continue
        report = cyclic_window_cert(u, x, bound, label="closure")
        if report.independent:
            return FreeDetected(x, report)
    raise BoundExceeded(f"closure neither stabilized nor certified free within {bound}", bound=bound)


def is_stable(u: RepAut, basis: Sequence[Mapping]) -> bool:
    echelon = SparseEchelon(u.field, track=False)
    for vec in basis:
        echelon.insert(vec)
    return all(
        echelon.contains(u.apply_vec(vec)) and echelon.contains(lin_sum((c, u.inverse_apply(k)) for k, c in vec.items()))
        for vec in basis
    )


# ---------------------------------------------------------------------------
# Semi-good predicate


@dataclass
class SemiGoodReport:
    passed: bool
    reasons: List[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.passed

    def to_dict(self) -> dict:
        return {"passed": self.passed, "reasons": list(self.reasons)}


def is_semi_good(s: Stratification) -> SemiGoodReport:
    """The finite strata have no last element and every finite stratum after the first has dim > 1."""
    reasons = []
    has_finite = any(st.is_finite for st in s.prefix) or s.is_infinite
    if has_finite and not s.is_infinite:
        reasons.append("the finite strata end at a greatest element")
    for k, st in enumerate(s.prefix):
        if k > 0 and st.is_finite and st.dim < 2:
            reasons.append(f"stratum {k} has dimension {st.dim}")
    if s.is_infinite:
        if s.tail.min_dim < 2:
            reasons.append(f"tail strata of dimension {s.tail.min_dim}")
    return SemiGoodReport(not reasons, reasons)


# ---------------------------------------------------------------------------
# Quotient strata and representatives


def quotient_strata(u: RepAut) -> Stratification:
    """
    Stratification of the torsion quotient V/W, W the span of the shift
    blocks: cyclic pieces of the core, then the Frobenius pieces of every
    untouched copy.
    """
    require_shift_stable(u)
    if not u.finite_blocks and not u.periodic_blocks:
        return Stratification(u, [])
    layout = TorsionLayout(u)
    prefix = []
    if layout.core:
        for g, degree in frobenius(layout.core_matrix()):
            prefix.append(Stratum(layout.lift(g), degree))
    tail = TailRule(u, layout.start_copy, frobenius_pieces(u)) if u.periodic_blocks else None
    return Stratification(u, prefix, tail, layout.core)


def adjust_reps(u: RepAut, strata: Stratification, reps: Optional[Sequence[Mapping]] = None) -> List[LinComb]:
    """
    Representatives x_k of the prefix strata with u^{n_k}(x_k) in
    W_0 + span of the earlier orbit vectors, W_0 being every shift block
    but the first plus the first one's slots <= 0.
    """
    reps = [LinComb(r) for r in (reps if reps is not None else [st.generator for st in strata.prefix])]
    if not u.has_shift:
        return reps
    s0 = u.shift_blocks[0]
    mu_inv = s0.multiplier.inverse()
    exact: Dict[Tuple[int, int], LinComb] = {}
    adjusted: List[LinComb] = []

    for k, (st, z) in enumerate(zip(strata.prefix, reps)):
        n = st.dim
        while True:
            vectors = orbit(u, z, n + 1)
            trial = SparseEchelon(u.field)
            labels = list(exact)
            for label in labels:
                trial.insert(torsion_part(u, exact[label]), label)
            for l in range(n):
                trial.insert(torsion_part(u, vectors[l]), (k, l))
            combo = trial.express(torsion_part(u, vectors[n]))
            if combo is None:
                raise PreconditionViolation(f"stratum {k} is not closed modulo the earlier strata")
            w = vectors[n] - lin_sum((c, exact[label] if label in exact else vectors[label[1]]) for label, c in combo.items())
            peel = {i: c for i, c in w.items() if i.block == s0.id and i.slot > 0}
            if not peel:
                break
            scale = mu_inv ** n
            z = z - LinComb((BasisIndex(s0.id, i.slot - n), c * scale) for i, c in peel.items())
        for l, vec in enumerate(vectors[:n]):
            exact[(k, l)] = vec
        adjusted.append(z)
        if z != reps[k]:
            logger.debug(f"adjusted representative of stratum {k}: {z!r}")
    return adjusted


# ---------------------------------------------------------------------------
# Semi-good stratifications of torsion operators


def _orbit_dim(M: Mat, echelon_rows: List[Tuple[Scalar, ...]], y: Tuple[Scalar, ...]) -> Tuple[int, List[Tuple[Scalar, ...]]]:
    """Number of independent iterates of y modulo the span of echelon_rows, and the enlarged spanning list."""
    ech = SparseEchelon(M.field, track=False)
    for row in echelon_rows:
        ech.insert(_sparse(row))
    rows = list(echelon_rows)
    d = 0
    vec = y
    while ech.insert(_sparse(vec)) is None:
        rows.append(vec)
        d += 1
        vec = M.apply(vec)
    return d, rows


def _sparse(vec: Sequence[Scalar]) -> Dict[int, Scalar]:
    return {i: c for i, c in enumerate(vec) if not c.is_zero()}


def _candidates(M: Mat, rows: List[Tuple[Scalar, ...]], first: bool, support: int) -> List[Tuple[Scalar, ...]]:
    fld, m = M.field, M.rows
    ech = SparseEchelon(fld, track=False)
    for row in rows:
        ech.insert(_sparse(row))
    free = [j for j in range(m) if j not in set(ech.pivots)]

    # quotient matrix on the non-pivot coordinates
    pos = {j: n for n, j in enumerate(free)}
    columns = []
    for j in free:
        image = M.apply(tuple(fld.one if i == j else fld.zero for i in range(m)))
        residual, _ = ech.reduce(_sparse(image))
        col = [fld.zero] * len(free)
        for i, c in residual.items():
            col[pos[i]] = c
        columns.append(col)
    pieces = frobenius(Mat.from_columns(fld, columns, rows=len(free))) if free else []
    lifted = []
    for g, degree in pieces:
        vec = [fld.zero] * m
        for n, c in enumerate(g):
            vec[free[n]] = c
        lifted.append((tuple(vec), degree))
    if first:
        lifted.sort(key=lambda gd: (gd[1] != 1, -gd[1]))
    else:
        lifted.sort(key=lambda gd: -gd[1])

    unit = [tuple(fld.one if i == j else fld.zero for i in range(m)) for j in free + [j for j in range(m) if j not in pos]]
    out = [g for g, _ in lifted] + unit
    if support >= 2:
        out += [tuple(a + b for a, b in zip(unit[i], unit[j])) for i in range(len(free)) for j in range(i + 1, len(free))]
        out += [
            tuple(a + b for a, b in zip(lifted[i][0], lifted[j][0]))
            for i in range(len(lifted))
            for j in range(i + 1, len(lifted))
        ]
    seen, unique = set(), []
    for vec in out:
        key = tuple(vec)
        if key not in seen and any(not c.is_zero() for c in vec):
            seen.add(key)
            unique.append(vec)
    return unique


def _search_core(layout: TorsionLayout, support: int, node_budget: int) -> Optional[List[Stratum]]:
    if not layout.core:
        return []
    M = layout.core_matrix()
    m = M.rows
    nodes = 0

    def dfs(rows: List[Tuple[Scalar, ...]], found: List[Tuple[Tuple[Scalar, ...], int]]):
        nonlocal nodes
        if len(rows) == m:
            return found
        for y in _candidates(M, rows, not found, support):
            nodes += 1
            if nodes > node_budget:
                return None
            d, grown = _orbit_dim(M, rows, y)
            if d == 0 or (found and d < 2):
                continue
            result = dfs(grown, found + [(y, d)])
            if result is not None:
                return result
        return None

    found = dfs([], [])
    if found is None:
        logger.debug(f"core search failed after {nodes} nodes on {m} dimensions")
        return None
    return [Stratum(layout.lift(y), d) for y, d in found]


def build_strat_periodic(
    v: RepAut,
    search_support: Optional[int] = None,
    backtrack: Optional[int] = None,
    node_budget: Optional[int] = None,
) -> Stratification:
    """
    Semi-good stratification of a torsion operator with no dominant
    eigenvalue. The core is covered by a bounded depth-first search; when it
    gets stuck the next periodic copy is absorbed into the core. When a copy
    splits off one-dimensional cyclic pieces the tail works with primary
    pieces and pairs every one-dimensional piece with a piece of another
    prime.
    """
    search_support = settings.STRAT_SEARCH_SUPPORT if search_support is None else search_support
    backtrack = settings.STRAT_BACKTRACK if backtrack is None else backtrack
    node_budget = settings.STRAT_NODE_BUDGET if node_budget is None else node_budget
    if v.has_shift:
        raise PreconditionViolation("build_strat_periodic needs an operator without shift blocks")
    if v.dominant_eigenvalue() is not None:
        raise PreconditionViolation(f"operator has dominant eigenvalue {v.dominant_eigenvalue()}")

    pieces = frobenius_pieces(v)
    pairing = any(p.dim < 2 for p in pieces)
    if pairing:
        pieces = prime_pieces(v)
        logger.info(f"One-dimensional cyclic pieces in the period matrix, pairing {len(pieces)} primary pieces")

    start = 1 + v.max_touched_copy()
    for attempt in range(backtrack + 1):
        layout = TorsionLayout(v, start + attempt)
        prefix = _search_core(layout, search_support, node_budget)
        if prefix is not None:
            s = Stratification(v, prefix, TailRule(v, layout.start_copy, pieces, pairing), layout.core)
            logger.info(
                f"Stratification found: prefix dims {[st.dim for st in prefix]}, "
                f"tail from copy {layout.start_copy} with piece dims {[p.dim for p in pieces]}"
            )
            return s
        logger.info(f"Core search stuck with {len(layout.core)} dimensions, absorbing copy {layout.start_copy}")
    raise BuilderStuck(
        f"no semi-good stratification found after absorbing {backtrack} copies",
        search_support=search_support,
        backtrack=backtrack,
    )


# ---------------------------------------------------------------------------
# Verification


@dataclass
class StratReport:
    independent: bool
    checked: int
    unspanned: List[BasisIndex] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.independent and not self.unspanned

    def __bool__(self) -> bool:
        return self.passed

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "independent": self.independent,
            "checked": self.checked,
            "unspanned": [str(i) for i in self.unspanned],
        }


def verify_strat(s: Stratification, W: Window) -> StratReport:
    """
    Exact check on the window: the orbit family of the strata reaching the
    window is independent and spans every window index those strata cover.
    Infinite strata contribute u^k(x) for |k| up to the largest shift slot in W.
    """
    u = s.ambient
    shift_slots = [abs(i.slot) for i in W if u.kind(i.block) == BlockKind.SHIFT]
    radius = max(shift_slots, default=settings.DEFAULT_WINDOW)
    copies = [i.copy for i in W if i.copy is not None]
    count = len(s.prefix)
    if s.is_infinite and copies and max(copies) >= s.tail.start_copy:
        count = len(s.prefix) + s.tail.strata_through_copy(max(copies))

    family: List[LinComb] = []
    for k, st in enumerate(s.strata(count)):
        if st.is_finite:
            family.extend(orbit(u, st.generator, st.dim))
            continue
        forward = backward = st.generator
        family.append(st.generator)
        for _ in range(radius):
            forward = u.apply_vec(forward)
            backward = lin_sum((c, u.inverse_apply(i)) for i, c in backward.items())
            family.extend([forward, backward])

    echelon = SparseEchelon(u.field, track=False)
    independent = True
    for vec in family:
        if echelon.insert(vec) is not None:
            independent = False

    covered_copy = max(copies, default=-1) if s.is_infinite else -1
    core = set(s.core)

    def reachable(i: BasisIndex) -> bool:
        kind = u.kind(i.block)
        if kind == BlockKind.SHIFT:
            return any(not st.is_finite and i.block in {k.block for k in st.generator} for st in s.prefix)
        if i in core:
            return True
        return s.is_infinite and i.copy is not None and s.tail.start_copy <= i.copy <= covered_copy

    unspanned = [i for i in W if reachable(i) and not echelon.contains(LinComb.basis(i, u.field))]
    return StratReport(independent, len(family), unspanned)
