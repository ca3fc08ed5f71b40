"""
Direct sums of small matrices laid over a countable basis.

`PairedCells` cuts the basis of a representable shape into cells of one or
two indices; `tiled_factor` repeats a fixed matrix on every cell.
`FiniteRankLayout` is the adapted basis of λ·id + w (compression basis, kernel
completion, untouched indices) on which finite factorizations are glued to
scalar ones.
"""
import bisect
import logging
from functools import cached_property
from typing import Dict, List, Mapping, Optional, Tuple

from invofactor.algebra import QuadPoly, Scalar
from invofactor.core.errors import PreconditionViolation
from invofactor.linalg import Mat, SparseEchelon, compress
from invofactor.opcore import BasisIndex, BlockKind, LazyOp, LinComb, RepAut, TorsionEnumeration, lin_sum

logger = logging.getLogger(__name__)

Cell = Tuple[BasisIndex, ...]
Label = Tuple[str, int]


class PairedCells:
    """
    Torsion indices are paired at enumeration positions (2j + off, 2j + 1 + off);
    off = seed mod 2 and with off = 1 position 0 is a cell on its own. Shift
    slots are paired (2k, 2k + 1). A finite torsion part of odd length hands its
    last index to slot 0 of the first shift block, which is then paired from slot 1.
    """

    def __init__(self, u: RepAut, seed: int = 0):
        self.u = u
        self.field = u.field
        self.offset = seed % 2
        self.enum = TorsionEnumeration(u)
        self.s0 = u.shift_blocks[0].id if u.shift_blocks else None
        self.leftover: Optional[int] = None
        if not self.enum.is_infinite:
            n = len(self.enum.finite)
            if n and (n - self.offset) % 2 == 1 and self.s0 is not None:
                self.leftover = n - 1

    def cell_of(self, idx: BasisIndex) -> Tuple[Cell, int]:
        """The cell containing idx and idx's position in it."""
        self.u.check_index(idx)
        if self.u.kind(idx.block) == BlockKind.SHIFT:
            return self._shift_cell(idx)
        pos = self.enum.position(idx)
        if self.leftover is not None and pos == self.leftover:
            return (idx, BasisIndex(self.s0, 0)), 0
        if self.offset and pos == 0:
            return (idx,), 0
        j = pos - self.offset
        if j % 2 == 0:
            partner = pos + 1
            if not self.enum.is_infinite and partner >= len(self.enum.finite):
                return (idx,), 0
            return (idx, self.enum.index_at(partner)), 0
        return (self.enum.index_at(pos - 1), idx), 1

    def _shift_cell(self, idx: BasisIndex) -> Tuple[Cell, int]:
        slot, block = idx.slot, idx.block
        if block == self.s0 and self.leftover is not None:
            if slot == 0:
                return (self.enum.index_at(self.leftover), idx), 1
            if slot > 0:
                if slot % 2 == 1:
                    return (idx, BasisIndex(block, slot + 1)), 0
                return (BasisIndex(block, slot - 1), idx), 1
        if slot % 2 == 0:
            return (idx, BasisIndex(block, slot + 1)), 0
        return (BasisIndex(block, slot - 1), idx), 1


def tiled_factor(
    cells: PairedCells,
    matrices: Mapping[int, Mat],
    annihilator: Optional[QuadPoly] = None,
    label: str = "tiled",
) -> LazyOp:
    """The direct sum of matrices[len(cell)] over all cells."""
    inverses = {size: M.inverse() for size, M in matrices.items()}

    def make(table: Mapping[int, Mat]):
        def rule(i: BasisIndex) -> LinComb:
            cell, j = cells.cell_of(i)
            M = table.get(len(cell))
            if M is None:
                raise PreconditionViolation(f"no {len(cell)}x{len(cell)} cell matrix for {label}", index=str(i))
            return LinComb((cell[r], M[r, j]) for r in range(len(cell)))
        return rule

    return LazyOp(
        make(matrices),
        cells.field,
        inverse_rule=make(inverses),
        annihilator=annihilator,
        label=label,
        domain=cells.u.check_index,
    )


# ---------------------------------------------------------------------------
# Finite-rank layouts


class FiniteRankLayout:
    """
    Adapted basis of u = λ·id + w: the compression basis W (labels ("W", j)),
    then a stream ("S", j) made of kernel vectors completing W inside the
    span of the support, followed by the remaining torsion indices in
    enumeration order. Every stream vector is a λ-eigenvector of u.
    """

    def __init__(self, u: RepAut, lam: Scalar):
        self.u = u
        self.lam = lam
        self.field = u.field
        self.data = compress(u.deviation(lam), u.field)
        self.support: Tuple[BasisIndex, ...] = self.data.support
        self.enum = TorsionEnumeration(u)
        self._support_set = frozenset(self.support)
        self._support_pos = sorted(self.enum.position(i) for i in self.support)
        self.kernel_completion = self._kernel_completion()

    @property
    def rank(self) -> int:
        return len(self.data.basis)

    @property
    def matrix(self) -> Mat:
        """u on W, in the W basis."""
        return self.data.matrix + Mat.scalar(self.field, self.rank, self.lam)

    def _kernel_completion(self) -> List[Dict[BasisIndex, Scalar]]:
        fld, support = self.field, self.support
        n = len(support)
        if n == 0:
            return []
        pos = {k: i for i, k in enumerate(support)}
        deviation = self.u.deviation(self.lam)
        columns = []
        for k in support:
            col = [fld.zero] * n
            for target, c in deviation.get(k, {}).items():
                col[pos[target]] = col[pos[target]] + c
            columns.append(col)
        kernel = Mat.from_columns(fld, columns, rows=n).kernel()
        echelon = SparseEchelon(fld, track=False)
        for b in self.data.basis:
            echelon.insert(b)
        out = []
        for vec in kernel:
            sparse = {support[i]: c for i, c in enumerate(vec) if not c.is_zero()}
            if echelon.insert(sparse) is None:
                out.append(sparse)
        if len(out) + self.rank != n:
            raise PreconditionViolation("compression basis and kernel do not span the support")
        return out

    @cached_property
    def _support_inverse(self) -> Mat:
        vectors = list(self.data.basis) + self.kernel_completion
        columns = [[vec.get(k, self.field.zero) for k in self.support] for vec in vectors]
        return Mat.from_columns(self.field, columns, rows=len(self.support)).inverse()

    def stream_index(self, j: int) -> BasisIndex:
        """Torsion index carried by stream position j past the kernel completion."""
        target = j - len(self.kernel_completion)
        tpos = target
        for sp in self._support_pos:
            if sp <= tpos:
                tpos += 1
            else:
                break
        return self.enum.index_at(tpos)

    def expand(self, label: Label) -> LinComb:
        kind, j = label
        if kind == "W":
            return LinComb(self.data.basis[j])
        if j < len(self.kernel_completion):
            return LinComb(self.kernel_completion[j])
        return LinComb.basis(self.stream_index(j), self.field)

    def coordinates(self, idx: BasisIndex) -> Dict[Label, Scalar]:
        if idx in self._support_set:
            col = self._support_inverse.column(self.support.index(idx))
            r = self.rank
            return {("W", n) if n < r else ("S", n - r): c for n, c in enumerate(col) if not c.is_zero()}
        tpos = self.enum.position(idx)
        before = bisect.bisect_left(self._support_pos, tpos)
        return {("S", len(self.kernel_completion) + tpos - before): self.field.one}


class FiniteRankFactor:
    """
    A factor of u = λ·id + w on the adapted basis: `cell` acts on W plus the
    first q stream vectors, and `stream_cells[size]` tiles the rest of the
    stream in consecutive cells of that size.
    """

    def __init__(self, layout: FiniteRankLayout, q: int, cell: Mat, stream_cells: Mapping[int, Mat]):
        if len(stream_cells) != 1:
            raise PreconditionViolation("stream cells must all have one size")
        self.layout = layout
        self.q = q
        self.cell = cell
        self.size, self.stream_matrix = next(iter(stream_cells.items()))
        self.cell_labels: List[Label] = [("W", j) for j in range(layout.rank)] + [("S", j) for j in range(q)]
        self._cell_pos = {label: n for n, label in enumerate(self.cell_labels)}

    def _on_label(self, label: Label, cell: Mat, stream: Mat) -> Dict[Label, Scalar]:
        n = self._cell_pos.get(label)
        if n is not None:
            return {self.cell_labels[r]: cell[r, n] for r in range(cell.rows) if not cell[r, n].is_zero()}
        m, pos = divmod(label[1] - self.q, self.size)
        base = self.q + m * self.size
        return {("S", base + r): stream[r, pos] for r in range(self.size) if not stream[r, pos].is_zero()}

    def _rule(self, cell: Mat, stream: Mat):
        layout = self.layout

        def rule(idx: BasisIndex) -> LinComb:
            parts = []
            for label, c in layout.coordinates(idx).items():
                for target, d in self._on_label(label, cell, stream).items():
                    parts.append((c * d, layout.expand(target)))
            return lin_sum(parts)

        return rule

    def as_lazy(self, annihilator: Optional[QuadPoly] = None, label: str = "finite-rank") -> LazyOp:
        return LazyOp(
            self._rule(self.cell, self.stream_matrix),
            self.layout.field,
            inverse_rule=self._rule(self.cell.inverse(), self.stream_matrix.inverse()),
            annihilator=annihilator,
            label=label,
            domain=self.layout.u.check_index,
        )
