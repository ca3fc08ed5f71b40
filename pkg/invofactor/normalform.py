"""
Normal form of a shift-containing automorphism whose perturbation or
coupling reaches into its shift blocks.

The touched region M (finite blocks, the touched periodic copies and a slot
range of every shift block) together with one anchor slot per shift block
generates a finitely presented F[t, t⁻¹]-module. A diagonal form of its
presentation matrix splits it into free generators and cyclic torsion
pieces, and u is conjugate to an operator with untouched shift blocks (one
per free generator, multiplier 1), one finite block for the torsion and the
untouched periodic copies.
"""
import logging
import threading
from typing import Dict, List, Mapping, Tuple

from invofactor.algebra import DensePoly, format_dense, poly_sub
from invofactor.core.errors import PreconditionViolation
from invofactor.linalg import dense_companion, direct_sum, poly_diagonal_form
from invofactor.opcore import (
    BasisIndex,
    BlockKind,
    FiniteBlock,
    LazyOp,
    LinComb,
    Operator,
    RepAut,
    ShiftBlock,
    as_lazy,
    lin_sum,
)

logger = logging.getLogger(__name__)

FREE_PREFIX = "Z"
TORSION_BLOCK = "T"


def needs_normal_form(u: RepAut) -> bool:
    """A shift index carries a perturbation, or the torsion part reaches a shift block other than the first."""
    if not u.has_shift:
        return False
    if any(u.kind(k.block) == BlockKind.SHIFT for k in u.perturbation):
        return True
    others = {b.id for b in u.shift_blocks[1:]}
    images = list(u.coupling.values()) + list(u.perturbation.values())
    return any(t.block in others for image in images for t in image)


def _poly_apply(op, f: DensePoly, vec: Mapping) -> LinComb:
    """f(op)·vec by Horner's rule."""
    out = LinComb()
    for c in reversed(f):
        out = op.apply_vec(out) + LinComb(vec).scaled(c)
    return out


class ShiftNormalForm:
    """
    `aut` is the normal form, `to_source` and `to_normal` the conjugating
    isomorphism and its inverse: u = to_source ∘ aut ∘ to_normal.
    """

    def __init__(self, u: RepAut):
        if not u.has_shift:
            raise PreconditionViolation("normal form needs a shift block")
        self.source = u
        self.field = fld = u.field
        self.offset = 1 + u.max_touched_copy()
        self.bounds = self._bounds()
        self.region = (
            u.finite_indices()
            + [i for c in range(self.offset) for i in u.copy_indices(c)]
            + [BasisIndex(b.id, j) for b in u.shift_blocks for j in range(*self.bounds[b.id])]
        )
        self.anchors = [BasisIndex(b.id, self.bounds[b.id][1]) for b in u.shift_blocks]
        generators = self.region + self.anchors
        pos = {g: n for n, g in enumerate(generators)}

        # t·z − u(z) for every z in the region
        m = len(self.region)
        R: List[List[DensePoly]] = [[() for _ in range(m)] for _ in range(len(generators))]
        for j, z in enumerate(self.region):
            R[j][j] = (fld.zero, fld.one)
            for target, c in u.apply(z).items():
                n = pos.get(target)
                if n is None:
                    raise PreconditionViolation(f"{target} leaves the touched region", index=target)
                R[n][j] = poly_sub(R[n][j], (c,))
        diagonal, U, U_inv = poly_diagonal_form(fld, R)
        if any(not d for d in diagonal):
            raise PreconditionViolation("presentation of the touched region is degenerate")

        def generator(k: int) -> LinComb:
            return lin_sum((fld.one, _poly_apply(u, U_inv[g][k], LinComb.basis(h, fld))) for g, h in enumerate(generators) if U_inv[g][k])

        taken = {b.id for b in u.periodic_blocks}

        def fresh(name: str) -> str:
            while name in taken:
                name += "_"
            taken.add(name)
            return name

        # torsion: F[t, t⁻¹]/(d) with the power of t stripped from d
        self.torsion_block = fresh(TORSION_BLOCK)
        self.torsion_basis: List[LinComb] = []
        self.torsion_factors: List[DensePoly] = []
        self._torsion_slot: Dict[int, int] = {}
        companions = []
        for k in range(m):
            d = diagonal[k]
            lowest = next(i for i, c in enumerate(d) if not c.is_zero())
            d = d[lowest:]
            if len(d) < 2:
                continue
            y = generator(k)
            if not _poly_apply(u, d, y).is_zero():
                raise PreconditionViolation(f"torsion generator {k} is not annihilated by {format_dense(d)}")
            self._torsion_slot[k] = len(self.torsion_basis)
            vec = y
            for _ in range(len(d) - 1):
                self.torsion_basis.append(vec)
                vec = u.apply_vec(vec)
            self.torsion_factors.append(d)
            companions.append(dense_companion(d))

        # free generators
        self.free_blocks = [fresh(f"{FREE_PREFIX}{i}") for i in range(len(self.anchors))]
        self.free: List[LinComb] = [generator(k) for k in range(m, len(generators))]
        self._free_slot = {k: i for i, k in enumerate(range(m, len(generators)))}

        self.aut = RepAut(
            fld,
            finite_blocks=[FiniteBlock(self.torsion_block, direct_sum(*companions))] if companions else [],
            shift_blocks=[ShiftBlock(b, fld.one) for b in self.free_blocks],
            periodic_blocks=u.periodic_blocks,
        )

        self._lock = threading.RLock()
        self._free_powers: Dict[Tuple[int, int], LinComb] = {(i, 0): f for i, f in enumerate(self.free)}
        self._normal: Dict[BasisIndex, LinComb] = {}
        for n, g in enumerate(generators):
            self._normal[g] = lin_sum(self._coordinate(k, U[k][n]) for k in range(len(generators)) if U[k][n])
        for g in generators:
            if self.to_source(self._normal[g]) != LinComb.basis(g, fld):
                raise PreconditionViolation(f"normal form does not reproduce {g}", index=g)
        logger.info(
            f"Shift normal form: region of {m} indices, free rank {len(self.free)}, "
            f"torsion {[format_dense(d) for d in self.torsion_factors]}"
        )

    def _bounds(self) -> Dict[str, Tuple[int, int]]:
        u = self.source
        touched: Dict[str, List[int]] = {}
        support = set(u.perturbation_support())
        for image in u.coupling.values():
            support.update(image)
        for idx in support:
            if u.kind(idx.block) == BlockKind.SHIFT:
                touched.setdefault(idx.block, []).append(idx.slot)
        bounds = {}
        for b in u.shift_blocks:
            slots = touched.get(b.id)
            bounds[b.id] = (min(0, min(slots)), 1 + max(slots)) if slots else (0, 0)
        return bounds

    def _coordinate(self, k: int, f: DensePoly) -> Tuple:
        """f(t)·ε_k in the normal form, ε_k the k-th generator of the diagonal presentation."""
        fld = self.field
        if k in self._free_slot:
            block = self.free_blocks[self._free_slot[k]]
            return fld.one, LinComb((BasisIndex(block, l), c) for l, c in enumerate(f) if not c.is_zero())
        if k in self._torsion_slot:
            start = BasisIndex(self.torsion_block, self._torsion_slot[k])
            return fld.one, _poly_apply(self.aut, f, LinComb.basis(start, fld))
        return fld.one, LinComb()

    # -- the conjugating isomorphism ---------------------------------------

    def _free_power(self, i: int, j: int) -> LinComb:
        """u^j(f_i)."""
        u = self.source
        with self._lock:
            cached = self._free_powers.get((i, j))
            if cached is not None:
                return cached
            step = 1 if j > 0 else -1
            k = j - step
            while (i, k) not in self._free_powers:
                k -= step
            vec = self._free_powers[(i, k)]
            while k != j:
                k += step
                vec = u.apply_vec(vec) if step > 0 else lin_sum((c, u.inverse_apply(x)) for x, c in vec.items())
                self._free_powers[(i, k)] = vec
            return vec

    def source_image(self, idx: BasisIndex) -> LinComb:
        """The source vector of a normal-form basis index."""
        fld = self.field
        if idx.block in self.free_blocks:
            return self._free_power(self.free_blocks.index(idx.block), idx.slot)
        if idx.block == self.torsion_block and self.torsion_basis:
            return self.torsion_basis[idx.slot]
        return LinComb.basis(BasisIndex(idx.block, idx.slot, idx.copy + self.offset), fld)

    def to_source(self, vec: Mapping) -> LinComb:
        return lin_sum((c, self.source_image(i)) for i, c in vec.items())

    def normal_image(self, idx: BasisIndex) -> LinComb:
        """The normal-form vector of a source basis index."""
        u, fld = self.source, self.field
        kind = u.kind(idx.block)
        if kind == BlockKind.PERIODIC and idx.copy >= self.offset:
            return LinComb.basis(BasisIndex(idx.block, idx.slot, idx.copy - self.offset), fld)
        with self._lock:
            cached = self._normal.get(idx)
            if cached is not None:
                return cached
        if kind != BlockKind.SHIFT:
            raise PreconditionViolation(f"{idx} is outside the normal form", index=idx)
        mu = u.block(idx.block).multiplier
        step = 1 if idx.slot > self.bounds[idx.block][1] else -1
        with self._lock:
            # e_(B, j+1) = μ⁻¹·u(e_(B, j)) above the region, e_(B, j−1) = μ·u⁻¹(e_(B, j)) below it
            slot = idx.slot - step
            while BasisIndex(idx.block, slot) not in self._normal:
                slot -= step
            vec = self._normal[BasisIndex(idx.block, slot)]
            while slot != idx.slot:
                slot += step
                if step > 0:
                    vec = self.aut.apply_vec(vec).scaled(mu.inverse())
                else:
                    vec = lin_sum((c, self.aut.inverse_apply(x)) for x, c in vec.items()).scaled(mu)
                self._normal[BasisIndex(idx.block, slot)] = vec
            return vec

    def to_normal(self, vec: Mapping) -> LinComb:
        return lin_sum((c, self.normal_image(i)) for i, c in vec.items())

    def transport(self, op: Operator, label: str = None) -> LazyOp:
        """Given op on the normal form, the conjugate operator on the source."""
        op = as_lazy(op)

        def rule(i: BasisIndex) -> LinComb:
            return self.to_source(op.apply_vec(self.normal_image(i)))

        inverse_rule = None
        if op.has_inverse:
            def inverse_rule(i: BasisIndex) -> LinComb:
                return self.to_source(op.inverse_apply_vec(self.normal_image(i)))

        return LazyOp(
            rule,
            self.field,
            inverse_rule=inverse_rule,
            annihilator=op.annihilator,
            label=label or op.label,
            domain=self.source.check_index,
            tail=op.tail,
        )

    def to_dict(self) -> dict:
        return {
            "free_rank": len(self.free),
            "torsion": [format_dense(d) for d in self.torsion_factors],
            "region": {b: list(bounds) for b, bounds in self.bounds.items()},
            "periodic_offset": self.offset,
        }
