"""
Representable automorphisms of a countably-infinite-dimensional space and
lazily evaluated locally-finite operators.

Every vector is a finite linear combination of basis vectors indexed by
`BasisIndex`. Operators are never materialized: a rule maps one basis index
to a `LinComb`, and identities are checked exactly on finite windows.
"""
import enum
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from functools import cached_property
from typing import Callable, Dict, Iterable, Iterator, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

from invofactor.algebra import Field, QuadPoly, Scalar, reciprocal
from invofactor.core.config import settings
from invofactor.core.errors import (
    FieldMismatch,
    InvofactorError,
    MalformedInput,
    NoDominantEigenvalue,
    NotInvertible,
    NoWitness,
    NotReached,
    ShapeMismatch,
    Singular,
    UnknownIndex,
)
from invofactor.linalg import Mat, SparseEchelon, axpy, index_key

logger = logging.getLogger(__name__)


class BasisIndex(NamedTuple):
    block: str
    slot: int
    copy: Optional[int] = None

    def sort_key(self) -> Tuple[str, int, int]:
        return (self.block, -1 if self.copy is None else self.copy, self.slot)

    def __str__(self) -> str:
        if self.copy is None:
            return f"({self.block},{self.slot})"
        return f"({self.block},c{self.copy},{self.slot})"


class LinComb(Mapping):
    """Finite linear combination of basis vectors; zero coefficients are never stored."""

    __slots__ = ("_terms",)

    def __init__(self, terms: Union[Mapping, Iterable, None] = None):
        if terms is None:
            self._terms: Dict[BasisIndex, Scalar] = {}
            return
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: Dict[BasisIndex, Scalar] = {}
        for k, c in items:
            prev = acc.get(k)
            acc[k] = c if prev is None else prev + c
        self._terms = {k: c for k, c in acc.items() if not c.is_zero()}

    @classmethod
    def _wrap(cls, terms: Dict[BasisIndex, Scalar]) -> "LinComb":
        lc = cls.__new__(cls)
        lc._terms = terms
        return lc

    @classmethod
    def basis(cls, index: BasisIndex, field: Field) -> "LinComb":
        return cls._wrap({index: field.one})

    def __getitem__(self, key: BasisIndex) -> Scalar:
        return self._terms[key]

    def __iter__(self) -> Iterator[BasisIndex]:
        return iter(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def __contains__(self, key) -> bool:
        return key in self._terms

    __hash__ = None

    def coef(self, key: BasisIndex, field: Field) -> Scalar:
        return self._terms.get(key, field.zero)

    @property
    def support(self) -> frozenset:
        return frozenset(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def terms(self) -> List[Tuple[BasisIndex, Scalar]]:
        return sorted(self._terms.items(), key=lambda kv: kv[0].sort_key())

    def __add__(self, other: Mapping) -> "LinComb":
        out = dict(self._terms)
        for k, c in other.items():
            value = out.get(k)
            value = c if value is None else value + c
            if value.is_zero():
                out.pop(k, None)
            else:
                out[k] = value
        return LinComb._wrap(out)

    def __sub__(self, other: Mapping) -> "LinComb":
        out = dict(self._terms)
        for k, c in other.items():
            value = out.get(k)
            value = -c if value is None else value - c
            if value.is_zero():
                out.pop(k, None)
            else:
                out[k] = value
        return LinComb._wrap(out)

    def __neg__(self) -> "LinComb":
        return LinComb._wrap({k: -c for k, c in self._terms.items()})

    def scaled(self, s: Scalar) -> "LinComb":
        if s.is_zero():
            return LinComb()
        return LinComb._wrap({k: s * c for k, c in self._terms.items()})

    def __mul__(self, s: Scalar) -> "LinComb":
        return self.scaled(s)

    __rmul__ = __mul__

    def relabel(self, mapping: Callable[[BasisIndex], BasisIndex]) -> "LinComb":
        return LinComb((mapping(k), c) for k, c in self._terms.items())

    def __repr__(self) -> str:
        if not self._terms:
            return "0"
        return " + ".join(f"{c}·{k}" for k, c in self.terms())


def lin_sum(parts: Iterable[Tuple[Scalar, Mapping]]) -> LinComb:
    """Σ coef·vector."""
    acc: Dict[BasisIndex, Scalar] = {}
    for coef, vec in parts:
        if not coef.is_zero():
            axpy(acc, coef, vec)
    return LinComb._wrap(acc)


# ---------------------------------------------------------------------------
# Blocks and representable automorphisms


class BlockKind(str, enum.Enum):
    FINITE = "finite"
    SHIFT = "shift"
    PERIODIC = "periodic"


@dataclass(frozen=True)
class FiniteBlock:
    id: str
    matrix: Mat
    kind = BlockKind.FINITE

    @property
    def dim(self) -> int:
        return self.matrix.rows


@dataclass(frozen=True)
class ShiftBlock:
    id: str
    multiplier: Scalar
    kind = BlockKind.SHIFT


@dataclass(frozen=True)
class PeriodicBlock:
    """Infinitely many copies (indexed by ω) of one invertible matrix."""

    id: str
    matrix: Mat
    kind = BlockKind.PERIODIC

    @property
    def dim(self) -> int:
        return self.matrix.rows


Block = Union[FiniteBlock, ShiftBlock, PeriodicBlock]


class RepAut:
    """
    Finite blocks ⊕ shift blocks ⊕ periodic block families, plus a one-way
    coupling (finite-block index -> shift-block vector) and a finite-rank
    perturbation. Validated on construction, including invertibility.
    """

    def __init__(
        self,
        field: Field,
        finite_blocks: Sequence[FiniteBlock] = (),
        shift_blocks: Sequence[ShiftBlock] = (),
        periodic_blocks: Sequence[PeriodicBlock] = (),
        coupling: Optional[Mapping[BasisIndex, Mapping]] = None,
        perturbation: Optional[Mapping[BasisIndex, Mapping]] = None,
    ):
        self.field = field
        self.finite_blocks = tuple(finite_blocks)
        self.shift_blocks = tuple(shift_blocks)
        self.periodic_blocks = tuple(periodic_blocks)
        self.coupling = {k: LinComb(v) for k, v in (coupling or {}).items() if len(LinComb(v))}
        self.perturbation = {k: LinComb(v) for k, v in (perturbation or {}).items() if len(LinComb(v))}
        self._blocks: Dict[str, Block] = {}
        self._cache: Dict[BasisIndex, LinComb] = {}
        self._inverse_cache: Dict[BasisIndex, LinComb] = {}
        self._lock = threading.Lock()
        self.validate()

    # -- constructors ------------------------------------------------------

    @classmethod
    def scalar(cls, field: Field, lam, block_id: str = "P0", perturbation=None) -> "RepAut":
        return cls(field, periodic_blocks=[PeriodicBlock(block_id, Mat.scalar(field, 1, lam))], perturbation=perturbation)

    @classmethod
    def shift(cls, field: Field, multiplier=1, block_id: str = "S0") -> "RepAut":
        return cls(field, shift_blocks=[ShiftBlock(block_id, field(multiplier))])

    # -- validation --------------------------------------------------------

    def validate(self):
        for block in self.finite_blocks + self.shift_blocks + self.periodic_blocks:
            if block.id in self._blocks:
                raise MalformedInput(f"duplicate block id {block.id}")
            self._blocks[block.id] = block
            if isinstance(block, ShiftBlock):
                if block.multiplier.field != self.field:
                    raise FieldMismatch(f"block {block.id} is not over {self.field.tag}")
                if block.multiplier.is_zero():
                    raise NotInvertible(f"shift block {block.id} has multiplier 0")
                continue
            if block.matrix.field != self.field:
                raise FieldMismatch(f"block {block.id} is not over {self.field.tag}")
            if not block.matrix.is_square or block.matrix.rows == 0:
                raise MalformedInput(f"block {block.id} must be a nonempty square matrix")
            if block.matrix.det().is_zero():
                raise NotInvertible(f"block {block.id} is singular")
        if not self.shift_blocks and not self.periodic_blocks:
            raise MalformedInput("a representable automorphism needs a shift or periodic block")
        for key, image in self.coupling.items():
            self.check_index(key)
            if self.kind(key.block) != BlockKind.FINITE:
                raise MalformedInput(f"coupling must start in a finite block, got {key}")
            for target in image:
                self.check_index(target)
                if self.kind(target.block) != BlockKind.SHIFT:
                    raise MalformedInput(f"coupling must land in shift blocks, got {target}")
        for key, image in self.perturbation.items():
            self.check_index(key)
            for target in image:
                self.check_index(target)
        if self.perturbation:
            Z, _, _ = self._correction
            for z in Z:
                back = self.apply_vec(self.inverse_apply(z))
                if back != LinComb.basis(z, self.field):
                    raise NotInvertible(f"inverse certificate fails at {z}")

    def block(self, block_id: str) -> Block:
        try:
            return self._blocks[block_id]
        except KeyError:
            raise UnknownIndex(f"no block named {block_id}")

    def kind(self, block_id: str) -> BlockKind:
        return self.block(block_id).kind

    def check_index(self, idx: BasisIndex):
        block = self._blocks.get(idx.block)
        if block is None:
            raise UnknownIndex(f"no block named {idx.block}", index=idx)
        if isinstance(block, ShiftBlock):
            if idx.copy is not None:
                raise UnknownIndex(f"shift index {idx} carries a copy number", index=idx)
            return
        if not 0 <= idx.slot < block.dim:
            raise UnknownIndex(f"slot out of range in {idx}", index=idx)
        if isinstance(block, PeriodicBlock):
            if idx.copy is None or idx.copy < 0:
                raise UnknownIndex(f"periodic index {idx} needs a copy number", index=idx)
        elif idx.copy is not None:
            raise UnknownIndex(f"finite index {idx} carries a copy number", index=idx)

    # -- structure queries -------------------------------------------------

    @property
    def has_shift(self) -> bool:
        return bool(self.shift_blocks)

    @property
    def copy_dim(self) -> int:
        return sum(b.dim for b in self.periodic_blocks)

    def finite_indices(self) -> List[BasisIndex]:
        return [BasisIndex(b.id, j) for b in self.finite_blocks for j in range(b.dim)]

    def copy_indices(self, copy: int) -> List[BasisIndex]:
        return [BasisIndex(b.id, j, copy) for b in self.periodic_blocks for j in range(b.dim)]

    def perturbation_support(self) -> set:
        support = set(self.perturbation)
        for image in self.perturbation.values():
            support.update(image)
        return support

    def max_touched_copy(self) -> int:
        """Largest periodic copy met by the perturbation, -1 if none."""
        copies = [idx.copy for idx in self.perturbation_support() if idx.copy is not None]
        return max(copies, default=-1)

    # -- evaluation --------------------------------------------------------

    def structured_apply(self, idx: BasisIndex) -> LinComb:
        block = self.block(idx.block)
        if isinstance(block, ShiftBlock):
            return LinComb._wrap({BasisIndex(idx.block, idx.slot + 1): block.multiplier})
        col = block.matrix.column(idx.slot)
        out = {BasisIndex(idx.block, i, idx.copy): c for i, c in enumerate(col) if not c.is_zero()}
        coupled = self.coupling.get(idx)
        if coupled is not None:
            out.update(coupled)
        return LinComb._wrap(out)

    def apply(self, idx: BasisIndex) -> LinComb:
        cached = self._cache.get(idx)
        if cached is not None:
            return cached
        self.check_index(idx)
        image = self.structured_apply(idx)
        extra = self.perturbation.get(idx)
        if extra is not None:
            image = image + extra
        with self._lock:
            return self._cache.setdefault(idx, image)

    def apply_vec(self, vec: Mapping) -> LinComb:
        return lin_sum((c, self.apply(k)) for k, c in vec.items())

    def structured_inverse_apply(self, idx: BasisIndex) -> LinComb:
        """S⁻¹ = D⁻¹ − D⁻¹·N·D⁻¹ for the block-diagonal part D and the coupling N."""
        block = self.block(idx.block)
        if isinstance(block, ShiftBlock):
            return LinComb._wrap({BasisIndex(idx.block, idx.slot - 1): block.multiplier.inverse()})
        inv = self._block_inverses[block.id]
        y = {BasisIndex(idx.block, i, idx.copy): c for i, c in enumerate(inv.column(idx.slot)) if not c.is_zero()}
        if isinstance(block, PeriodicBlock) or not self.coupling:
            return LinComb._wrap(y)
        coupled = lin_sum((c, self.coupling[k]) for k, c in y.items() if k in self.coupling)
        correction = lin_sum((c, self.structured_inverse_apply(k)) for k, c in coupled.items())
        return LinComb._wrap(y) - correction

    @cached_property
    def _block_inverses(self) -> Dict[str, Mat]:
        return {b.id: b.matrix.inverse() for b in self.finite_blocks + self.periodic_blocks}

    @cached_property
    def _correction(self):
        """(Z, positions, inverse of I + P·S⁻¹ on span Z) for the perturbation P."""
        if not self.perturbation:
            return (), {}, None
        X = set(self.perturbation)
        Y = set()
        for image in self.perturbation.values():
            Y.update(image)
        candidates = set()
        finite = self.finite_indices()
        for x in X:
            kind = self.kind(x.block)
            if kind == BlockKind.SHIFT:
                candidates.add(BasisIndex(x.block, x.slot + 1))
                candidates.update(finite)
            elif kind == BlockKind.FINITE:
                candidates.update(BasisIndex(x.block, j) for j in range(self.block(x.block).dim))
            else:
                candidates.update(BasisIndex(x.block, j, x.copy) for j in range(self.block(x.block).dim))
        touched = [i for i in candidates if X & self.structured_inverse_apply(i).support]
        Z = tuple(sorted(set(touched) | Y, key=BasisIndex.sort_key))
        pos = {z: n for n, z in enumerate(Z)}
        columns = []
        for z in Z:
            sinv = self.structured_inverse_apply(z)
            col = [self.field.zero] * len(Z)
            col[pos[z]] = self.field.one
            k_image = lin_sum((sinv[x], self.perturbation[x]) for x in X if x in sinv)
            for target, c in k_image.items():
                col[pos[target]] = col[pos[target]] + c
            columns.append(col)
        try:
            inverse = Mat.from_columns(self.field, columns, rows=len(Z)).inverse()
        except Singular as e:
            raise NotInvertible("perturbed operator is not invertible") from e
        return Z, pos, inverse

    def inverse_apply(self, idx: BasisIndex) -> LinComb:
        cached = self._inverse_cache.get(idx)
        if cached is not None:
            return cached
        self.check_index(idx)
        Z, pos, inverse = self._correction
        if idx in pos:
            col = inverse.column(pos[idx])
            pre = {Z[n]: c for n, c in enumerate(col) if not c.is_zero()}
            image = lin_sum((c, self.structured_inverse_apply(k)) for k, c in pre.items())
        else:
            image = self.structured_inverse_apply(idx)
        with self._lock:
            return self._inverse_cache.setdefault(idx, image)

    def as_lazy(self, label: str = "u") -> "LazyOp":
        return LazyOp(self.apply, self.field, inverse_rule=self.inverse_apply, label=label, domain=self.check_index)

    # -- dominant eigenvalue -----------------------------------------------

    def dominant_eigenvalue(self) -> Optional[Scalar]:
        """λ with u − λ·id of finite rank: no shifts, every periodic block equal to λ·I."""
        if self.shift_blocks or not self.periodic_blocks:
            return None
        first = self.periodic_blocks[0].matrix
        if not first.is_scalar():
            return None
        lam = first[0, 0]
        for block in self.periodic_blocks:
            if block.matrix != Mat.scalar(self.field, block.dim, lam):
                return None
        return lam

    def deviation(self, lam: Scalar) -> Dict[BasisIndex, LinComb]:
        """The finite-rank operator w = u − λ·id as an explicit table."""
        if self.dominant_eigenvalue() != lam:
            raise NoDominantEigenvalue(f"{lam} is not a dominant eigenvalue")
        table: Dict[BasisIndex, LinComb] = {}
        for block in self.finite_blocks:
            for j in range(block.dim):
                idx = BasisIndex(block.id, j)
                table[idx] = self.structured_apply(idx) - {idx: lam}
        for idx, image in self.perturbation.items():
            table[idx] = table.get(idx, LinComb()) + image
        return {k: v for k, v in table.items() if not v.is_zero()}

    def scaled(self, s: Scalar) -> "RepAut":
        return RepAut(
            self.field,
            [FiniteBlock(b.id, b.matrix.scale(s)) for b in self.finite_blocks],
            [ShiftBlock(b.id, b.multiplier * s) for b in self.shift_blocks],
            [PeriodicBlock(b.id, b.matrix.scale(s)) for b in self.periodic_blocks],
            {k: v.scaled(s) for k, v in self.coupling.items()},
            {k: v.scaled(s) for k, v in self.perturbation.items()},
        )

    def default_window(self, radius: Optional[int] = None, margin: Optional[int] = None) -> "Window":
        radius = settings.DEFAULT_WINDOW if radius is None else radius
        margin = settings.WINDOW_MARGIN if margin is None else margin
        indices = set(self.finite_indices())
        last_copy = 0
        support = self.perturbation_support() | set(self.coupling)
        for image in self.coupling.values():
            support.update(image)
        if self.max_touched_copy() >= 0:
            last_copy = self.max_touched_copy() + margin
        for c in range(last_copy + 1):
            indices.update(self.copy_indices(c))
        for block in self.shift_blocks:
            slots = [i.slot for i in support if i.block == block.id]
            lo = min([-radius] + [s - margin for s in slots])
            hi = max([radius] + [s + margin for s in slots])
            indices.update(BasisIndex(block.id, k) for k in range(lo, hi + 1))
        return Window.of(indices)

    def __repr__(self) -> str:
        return (
            f"RepAut({self.field.tag}, finite={[b.id for b in self.finite_blocks]}, "
            f"shift={[b.id for b in self.shift_blocks]}, periodic={[b.id for b in self.periodic_blocks]}, "
            f"coupling={len(self.coupling)}, perturbation={len(self.perturbation)})"
        )


class TorsionEnumeration:
    """Canonical ω-enumeration of the non-shift basis: finite blocks, then copy 0, copy 1, ..."""

    def __init__(self, u: RepAut):
        self.finite = u.finite_indices()
        self.layout = [(b.id, j) for b in u.periodic_blocks for j in range(b.dim)]
        self._finite_pos = {idx: n for n, idx in enumerate(self.finite)}
        self._layout_pos = {key: n for n, key in enumerate(self.layout)}

    @property
    def is_infinite(self) -> bool:
        return bool(self.layout)

    def index_at(self, pos: int) -> BasisIndex:
        if pos < len(self.finite):
            return self.finite[pos]
        if not self.layout:
            raise UnknownIndex(f"position {pos} past the end of a finite enumeration")
        copy, offset = divmod(pos - len(self.finite), len(self.layout))
        block, slot = self.layout[offset]
        return BasisIndex(block, slot, copy)

    def position(self, idx: BasisIndex) -> int:
        if idx.copy is None:
            try:
                return self._finite_pos[idx]
            except KeyError:
                raise UnknownIndex(f"{idx} is not a torsion index")
        return len(self.finite) + idx.copy * len(self.layout) + self._layout_pos[(idx.block, idx.slot)]

    def __iter__(self) -> Iterator[BasisIndex]:
        pos = 0
        while True:
            try:
                yield self.index_at(pos)
            except UnknownIndex:
                return
            pos += 1


# ---------------------------------------------------------------------------
# Lazy operators


class LazyOp:
    """
    A rule-defined operator. The inverse witness is either an explicit
    inverse rule or a non-derogatory annihilator p, in which case
    op⁻¹ = (tr(p)·id − op)/N(p).
    """

    def __init__(
        self,
        rule: Callable[[BasisIndex], Mapping],
        field: Field,
        *,
        inverse_rule: Optional[Callable[[BasisIndex], Mapping]] = None,
        annihilator: Optional[QuadPoly] = None,
        label: str = "op",
        domain: Optional[Callable[[BasisIndex], None]] = None,
        tail: Optional[dict] = None,
    ):
        self.rule = rule
        self.field = field
        self.inverse_rule = inverse_rule
        self.annihilator = annihilator
        self.label = label
        self.domain = domain
        self.tail = tail
        self._memo: Dict[BasisIndex, LinComb] = {}
        self._inverse_memo: Dict[BasisIndex, LinComb] = {}
        self._lock = threading.Lock()

    @classmethod
    def scalar(cls, field: Field, s: Scalar, annihilator: Optional[QuadPoly] = None, label: str = "scalar") -> "LazyOp":
        s = field(s)
        inv = s.inverse()
        return cls(
            lambda i: LinComb._wrap({i: s}),
            field,
            inverse_rule=lambda i: LinComb._wrap({i: inv}),
            annihilator=annihilator,
            label=label,
            tail={"kind": "scalar", "value": str(s)},
        )

    @classmethod
    def from_matrix(cls, M: Mat, block: str = "F0", annihilator: Optional[QuadPoly] = None, label: str = "matrix") -> "LazyOp":
        inverse = M.inverse()

        def column_rule(matrix: Mat):
            def rule(i: BasisIndex) -> LinComb:
                if i.block != block or not 0 <= i.slot < matrix.cols:
                    raise UnknownIndex(f"{i} is outside block {block}")
                return LinComb((BasisIndex(block, r), c) for r, c in enumerate(matrix.column(i.slot)))
            return rule

        return cls(column_rule(M), M.field, inverse_rule=column_rule(inverse), annihilator=annihilator, label=label)

    def apply(self, idx: BasisIndex) -> LinComb:
        cached = self._memo.get(idx)
        if cached is not None:
            return cached
        if self.domain is not None:
            self.domain(idx)
        image = self.rule(idx)
        if not isinstance(image, LinComb):
            image = LinComb(image)
        with self._lock:
            return self._memo.setdefault(idx, image)

    def apply_vec(self, vec: Mapping) -> LinComb:
        return lin_sum((c, self.apply(k)) for k, c in vec.items())

    def __call__(self, arg: Union[BasisIndex, Mapping]) -> LinComb:
        if isinstance(arg, BasisIndex):
            return self.apply(arg)
        return self.apply_vec(arg)

    @property
    def has_inverse(self) -> bool:
        return self.inverse_rule is not None or (self.annihilator is not None and self.annihilator.is_non_derogatory)

    def inverse_apply(self, idx: BasisIndex) -> LinComb:
        cached = self._inverse_memo.get(idx)
        if cached is not None:
            return cached
        if self.inverse_rule is not None:
            image = self.inverse_rule(idx)
            if not isinstance(image, LinComb):
                image = LinComb(image)
        elif self.annihilator is not None and self.annihilator.is_non_derogatory:
            p = self.annihilator
            image = (LinComb._wrap({idx: p.trace}) - self.apply(idx)).scaled(p.norm.inverse())
        else:
            raise NoWitness(f"{self.label} has no inverse witness")
        with self._lock:
            return self._inverse_memo.setdefault(idx, image)

    def inverse_apply_vec(self, vec: Mapping) -> LinComb:
        return lin_sum((c, self.inverse_apply(k)) for k, c in vec.items())

    def table(self) -> Dict[BasisIndex, LinComb]:
        """Snapshot of every image computed so far."""
        with self._lock:
            return dict(self._memo)

    def __repr__(self) -> str:
        return f"LazyOp({self.label}, annihilator={self.annihilator})"


Operator = Union[LazyOp, RepAut]


def as_lazy(op: Operator) -> LazyOp:
    return op.as_lazy() if isinstance(op, RepAut) else op


def apply(op: Operator, i: BasisIndex) -> LinComb:
    return op.apply(i)


def invert(op: Operator) -> LazyOp:
    op = as_lazy(op)
    if not op.has_inverse:
        raise NoWitness(f"{op.label} has no inverse witness")
    annihilator = reciprocal(op.annihilator) if op.annihilator is not None and op.annihilator.is_non_derogatory else None
    return LazyOp(
        op.inverse_apply,
        op.field,
        inverse_rule=op.apply,
        annihilator=annihilator,
        label=f"{op.label}^-1",
        domain=op.domain,
    )


def compose(ops: Sequence[Operator], label: Optional[str] = None) -> LazyOp:
    """Product op_1 ∘ ... ∘ op_n, applied right to left."""
    lazies = [as_lazy(op) for op in ops]
    if not lazies:
        raise ShapeMismatch("compose needs at least one operator")
    field = lazies[0].field
    if any(op.field != field for op in lazies):
        raise ShapeMismatch("composed operators live over different fields")

    def rule(i: BasisIndex) -> LinComb:
        vec: Mapping = LinComb.basis(i, field)
        for op in reversed(lazies):
            vec = op.apply_vec(vec)
        return vec

    inverse_rule = None
    if all(op.has_inverse for op in lazies):
        def inverse_rule(i: BasisIndex) -> LinComb:
            vec: Mapping = LinComb.basis(i, field)
            for op in lazies:
                vec = op.inverse_apply_vec(vec)
            return vec

    return LazyOp(
        rule,
        field,
        inverse_rule=inverse_rule,
        label=label or "∘".join(op.label for op in lazies),
        domain=lazies[-1].domain,
    )


class Relabeling:
    """A bijection between two index sets, used to move operators across them."""

    def __init__(self, to_new: Callable[[BasisIndex], BasisIndex], to_old: Callable[[BasisIndex], BasisIndex]):
        self.to_new = to_new
        self.to_old = to_old

    def transport(self, op: Operator, label: Optional[str] = None) -> LazyOp:
        """Given op on the new index set, the same operator on the old one."""
        op = as_lazy(op)
        to_new, to_old = self.to_new, self.to_old

        def rule(i: BasisIndex) -> LinComb:
            return op.apply(to_new(i)).relabel(to_old)

        inverse_rule = None
        if op.has_inverse:
            def inverse_rule(i: BasisIndex) -> LinComb:
                return op.inverse_apply(to_new(i)).relabel(to_old)

        return LazyOp(rule, op.field, inverse_rule=inverse_rule, annihilator=op.annihilator, label=label or op.label)


# ---------------------------------------------------------------------------
# Windows and reports


@dataclass(frozen=True)
class Window:
    indices: Tuple[BasisIndex, ...]

    @classmethod
    def of(cls, indices: Iterable[BasisIndex]) -> "Window":
        return cls(tuple(sorted(set(indices), key=BasisIndex.sort_key)))

    @classmethod
    def shift_slots(cls, block: str, lo: int, hi: int) -> "Window":
        return cls.of(BasisIndex(block, k) for k in range(lo, hi + 1))

    def __iter__(self) -> Iterator[BasisIndex]:
        return iter(self.indices)

    def __len__(self) -> int:
        return len(self.indices)

    @cached_property
    def _members(self) -> frozenset:
        return frozenset(self.indices)

    def __contains__(self, idx) -> bool:
        return idx in self._members

    def union(self, other: "Window") -> "Window":
        return Window.of(self.indices + other.indices)


@dataclass
class WindowFailure:
    index: BasisIndex
    detail: str

    def to_dict(self) -> dict:
        return {"index": str(self.index), "detail": self.detail}


@dataclass
class WindowReport:
    check: str
    checked: int = 0
    failures: List[WindowFailure] = dc_field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def __bool__(self) -> bool:
        return self.passed

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "checked": self.checked,
            "passed": self.passed,
            "failures": [f.to_dict() for f in self.failures],
        }


def run_window(indices: Sequence[BasisIndex], check: Callable[[BasisIndex], Optional[str]], jobs: Optional[int] = None) -> List[WindowFailure]:
    """Runs `check` on every index; a non-None return or a library error is a failure detail."""
    jobs = settings.JOBS if jobs is None else jobs
    indices = list(indices)

    def run(chunk: Sequence[BasisIndex]) -> List[WindowFailure]:
        out = []
        for idx in chunk:
            try:
                detail = check(idx)
            except InvofactorError as e:
                detail = f"{e.code}: {e.message}"
            if detail is not None:
                out.append(WindowFailure(idx, detail))
        return out

    if jobs <= 1 or len(indices) < 2:
        return run(indices)
    chunks = [indices[k::jobs] for k in range(jobs)]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        results = list(pool.map(run, chunks))
    failures = [f for part in results for f in part]
    return sorted(failures, key=lambda f: f.index.sort_key())


def check_annihilated(op: Operator, p: QuadPoly, W: Iterable[BasisIndex], jobs: Optional[int] = None) -> WindowReport:
    op = as_lazy(op)
    indices = list(W)

    def check(i: BasisIndex) -> Optional[str]:
        once = op.apply(i)
        twice = op.apply_vec(once)
        residual = lin_sum([(p.leading, twice), (p.c1, once), (p.c0, LinComb.basis(i, op.field))])
        return None if residual.is_zero() else f"p(op)(e) = {residual!r}"

    return WindowReport(f"annihilated:{op.label}:{p}", len(indices), run_window(indices, check, jobs))


def equal_on_window(op1: Operator, op2: Operator, W: Iterable[BasisIndex], jobs: Optional[int] = None) -> WindowReport:
    op1, op2 = as_lazy(op1), as_lazy(op2)
    indices = list(W)

    def check(i: BasisIndex) -> Optional[str]:
        left, right = op1.apply(i), op2.apply(i)
        return None if left == right else f"{left!r} != {right!r}"

    return WindowReport(f"equal:{op1.label}:{op2.label}", len(indices), run_window(indices, check, jobs))


def dominant_eigenvalue(u: RepAut) -> Optional[Scalar]:
    return u.dominant_eigenvalue()


# ---------------------------------------------------------------------------
# Orbits


class OrbitBasis:
    """
    The family {v^k(x) : -N <= k <= N}, grown on demand and kept in a
    tracked echelon form so targets can be written in orbit coordinates.
    """

    def __init__(self, v: Operator, x: Mapping, max_depth: Optional[int] = None):
        self.v = as_lazy(v)
        self.field = self.v.field
        self.x = LinComb(x)
        self.max_depth = settings.ORBIT_MAX if max_depth is None else max_depth
        self._forward: List[LinComb] = [self.x]
        self._backward: List[LinComb] = [self.x]
        self._echelon = SparseEchelon(self.field)
        self.independent = self._echelon.insert(self.x, 0) is None and not self.x.is_zero()
        self.depth = 0
        self._lock = threading.RLock()

    def vector(self, k: int) -> LinComb:
        with self._lock:
            side = self._forward if k >= 0 else self._backward
            while len(side) <= abs(k):
                if k >= 0:
                    side.append(self.v.apply_vec(side[-1]))
                else:
                    side.append(self.v.inverse_apply_vec(side[-1]))
            return side[abs(k)]

    def grow(self, steps: int = 1):
        with self._lock:
            for _ in range(steps):
                d = self.depth + 1
                for k in (d, -d):
                    if self._echelon.insert(self.vector(k), k) is not None:
                        self.independent = False
                self.depth = d

    def express(self, target: Mapping) -> Dict[int, Scalar]:
        with self._lock:
            while True:
                combo = self._echelon.express(target)
                if combo is not None:
                    return combo
                if self.depth >= self.max_depth:
                    raise NotReached(f"target not in the orbit span at depth {self.depth}", depth=self.depth)
                self.grow(max(1, min(self.depth // 4, self.max_depth - self.depth)))

    def spans(self, target: Mapping) -> bool:
        with self._lock:
            return self._echelon.contains(target)


def express_in_orbit_basis(v: Operator, x: Mapping, target: Mapping, maxN: int) -> Dict[int, Scalar]:
    return OrbitBasis(v, x, max_depth=maxN).express(target)


@dataclass
class CyclicReport:
    label: str
    depth: int
    independent: bool
    rank: int
    spanned: List[BasisIndex] = dc_field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.independent

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "depth": self.depth,
            "independent": self.independent,
            "rank": self.rank,
            "spanned": [str(i) for i in self.spanned],
        }


def cyclic_window_cert(v: Operator, x: Mapping, N: int, label: str = "cyclic") -> CyclicReport:
    orbit = OrbitBasis(v, x, max_depth=N)
    orbit.grow(N)
    support = set()
    for k in range(-N, N + 1):
        support.update(orbit.vector(k))
    spanned = sorted(
        (i for i in support if orbit.spans(LinComb.basis(i, orbit.field))),
        key=BasisIndex.sort_key,
    )
    return CyclicReport(
        label=label,
        depth=N,
        independent=orbit.independent,
        rank=len(orbit._echelon),
        spanned=spanned,
    )
