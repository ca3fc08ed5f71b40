import logging
from typing import Dict, List, Optional, Tuple

from invofactor.algebra import QuadPoly, Scalar, split_roots
from invofactor.linalg import Mat, companion, direct_sum
from invofactor.models import AdjacentPair
from invofactor.opcore import (
    BasisIndex,
    FiniteBlock,
    LazyOp,
    LinComb,
    PeriodicBlock,
    RepAut,
    Relabeling,
    compose,
)
from invofactor.constructions.cells import PairedCells, tiled_factor

logger = logging.getLogger(__name__)

CORE_BLOCK = "C"
TAIL_BLOCK = "K"


class DominantLayout:
    """
    Cells for u = λ·id + w: the core (finite blocks and copies below an even
    bound past every touched copy) rotated by the seed and paired in order,
    then copies 2j and 2j+1 of the tail paired slot by slot.
    """

    def __init__(self, u: RepAut, seed: int = 0):
        self.u = u
        first_free = 1 + u.max_touched_copy()
        self.core_end = first_free + (first_free % 2)
        core = u.finite_indices() + [i for c in range(self.core_end) for i in u.copy_indices(c)]
        self.core = core
        shift = seed % len(core) if core else 0
        rotated = core[shift:] + core[:shift]
        self.cells: List[Tuple[BasisIndex, ...]] = [tuple(rotated[k:k + 2]) for k in range(0, len(rotated), 2)]
        self._cell_of: Dict[BasisIndex, Tuple[Tuple[BasisIndex, ...], int]] = {
            idx: (cell, n) for cell in self.cells for n, idx in enumerate(cell)
        }
        self._core_pos = {idx: n for n, idx in enumerate(core)}
        self.copy_layout = [(i.block, i.slot) for i in u.copy_indices(0)]
        self._layout_pos = {key: n for n, key in enumerate(self.copy_layout)}

    def cell_of(self, idx: BasisIndex) -> Tuple[Tuple[BasisIndex, ...], int]:
        found = self._cell_of.get(idx)
        if found is not None:
            return found
        j, r = divmod(idx.copy - self.core_end, 2)
        base = self.core_end + 2 * j
        return (BasisIndex(idx.block, idx.slot, base), BasisIndex(idx.block, idx.slot, base + 1)), r

    def to_new(self, idx: BasisIndex) -> BasisIndex:
        pos = self._core_pos.get(idx)
        if pos is not None:
            return BasisIndex(CORE_BLOCK, pos)
        j, r = divmod(idx.copy - self.core_end, 2)
        return BasisIndex(TAIL_BLOCK, 2 * self._layout_pos[(idx.block, idx.slot)] + r, j)

    def to_old(self, idx: BasisIndex) -> BasisIndex:
        if idx.block == CORE_BLOCK:
            return self.core[idx.slot]
        s, r = divmod(idx.slot, 2)
        block, slot = self.copy_layout[s]
        return BasisIndex(block, slot, self.core_end + 2 * idx.copy + r)


def kill_dominant(u: RepAut, p: QuadPoly, seed: int = 0) -> AdjacentPair:
    """
    a, a direct sum of cyclic cells annihilated by p, with v = a∘u free of a
    dominant eigenvalue. When u has one, v is also returned as a representable
    automorphism (core block C, periodic block K) with the relabeling back to u.
    """
    fld = u.field
    comp = companion(p)
    root, _ = split_roots(p)
    single = Mat.scalar(fld, 1, root)
    lam = u.dominant_eigenvalue()

    if lam is None:
        cells = PairedCells(u, seed)
        a = tiled_factor(cells, {2: comp, 1: single}, annihilator=p, label="a")
        v = compose([a, u], label="v")
        logger.info(f"kill_dominant: no dominant eigenvalue, tiled companion({p}) with seed {seed}")
        return AdjacentPair(a, v, notes={"pipeline": "kill_dominant", "branch": "generic", "seed": seed})

    layout = DominantLayout(u, seed)

    def rule(idx: BasisIndex) -> LinComb:
        cell, j = layout.cell_of(idx)
        M = comp if len(cell) == 2 else single
        return LinComb((cell[r], M[r, j]) for r in range(len(cell)))

    a = LazyOp(rule, fld, annihilator=p, label="a", domain=u.check_index)
    v = compose([a, u], label="v")

    blocks = []
    if layout.core:
        pos = {idx: n for n, idx in enumerate(layout.core)}
        columns = []
        for idx in layout.core:
            col = [fld.zero] * len(layout.core)
            for target, c in v.apply(idx).items():
                col[pos[target]] = c
            columns.append(col)
        blocks.append(FiniteBlock(CORE_BLOCK, Mat.from_columns(fld, columns, rows=len(layout.core))))
    tail = direct_sum(*[comp] * len(layout.copy_layout)).scale(lam)
    aut = RepAut(fld, finite_blocks=blocks, periodic_blocks=[PeriodicBlock(TAIL_BLOCK, tail)])
    relabeling = Relabeling(layout.to_new, layout.to_old)
    logger.info(
        f"kill_dominant: eigenvalue {lam} removed; core of {len(layout.core)} indices, "
        f"tail pairs copies from {layout.core_end}"
    )
    return AdjacentPair(
        a,
        v,
        aut=aut,
        relabeling=relabeling,
        notes={"pipeline": "kill_dominant", "branch": "dominant", "seed": seed, "core_end": layout.core_end},
    )
