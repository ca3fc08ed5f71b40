"""
Structural tails of table-defined operators.

A tail class covers one residue class of a lane past a window edge. A lane
is a shift block read upwards or downwards, or one slot of a periodic block
read along its copies. Writing I_n for the image of the index n periods past
the class start, the class stores the seeds I_0 .. I_(L-1) and a recurrence

    I_n = Σ c · T^s(I_(n-lag))

where T^s moves every shift or periodic term s positions along its own lane
and leaves finite terms alone.
"""
import itertools
import logging
import threading
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from invofactor.algebra import Scalar
from invofactor.core.config import settings
from invofactor.core.errors import InvofactorError
from invofactor.linalg import SparseEchelon
from invofactor.opcore import BasisIndex, LazyOp, LinComb, RepAut, Window, lin_sum

logger = logging.getLogger(__name__)

Lane = Tuple[str, Optional[int]]
IsFinite = Callable[[BasisIndex], bool]


def lane_of(idx: BasisIndex) -> Lane:
    """(block, slot) along periodic copies, (block, None) along shift slots."""
    return (idx.block, idx.slot) if idx.copy is not None else (idx.block, None)


def position(idx: BasisIndex) -> int:
    return idx.copy if idx.copy is not None else idx.slot


def finite_test(u: RepAut) -> IsFinite:
    finite = {b.id for b in u.finite_blocks}
    return lambda idx: idx.block in finite


def translate(vec: LinComb, s: int, is_finite: IsFinite) -> LinComb:
    if not s:
        return vec
    out = {}
    for idx, c in vec.items():
        if is_finite(idx):
            out[idx] = c
        elif idx.copy is not None:
            out[BasisIndex(idx.block, idx.slot, idx.copy + s)] = c
        else:
            out[BasisIndex(idx.block, idx.slot + s)] = c
    return LinComb._wrap(out)


@dataclass(frozen=True)
class TailStep:
    lag: int
    shift: int
    coef: Scalar


@dataclass
class TailClass:
    start: BasisIndex
    period: int
    seeds: List[LinComb]
    steps: List[TailStep]
    _images: List[LinComb] = field(default_factory=list, init=False, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False)

    @property
    def lane(self) -> Lane:
        return lane_of(self.start)

    def periods(self, idx: BasisIndex) -> Optional[int]:
        """n when idx lies n ≥ 0 periods past the start, else None."""
        d = position(idx) - position(self.start)
        if d % self.period:
            return None
        n = d // self.period
        return n if n >= 0 else None

    def image(self, n: int, is_finite: IsFinite) -> LinComb:
        with self._lock:
            if not self._images:
                self._images.extend(self.seeds)
            while len(self._images) <= n:
                k = len(self._images)
                self._images.append(
                    lin_sum((st.coef, translate(self._images[k - st.lag], st.shift, is_finite)) for st in self.steps)
                )
            return self._images[n]


class PeriodicTail:
    def __init__(self, classes: Sequence[TailClass], u: RepAut):
        self.classes = list(classes)
        self._is_finite = finite_test(u)
        self._lanes: Dict[Lane, List[TailClass]] = defaultdict(list)
        for cls in self.classes:
            self._lanes[cls.lane].append(cls)

    def image(self, idx: BasisIndex) -> Optional[LinComb]:
        for cls in self._lanes.get(lane_of(idx), ()):
            n = cls.periods(idx)
            if n is not None:
                return cls.image(n, self._is_finite)
        return None

    def __len__(self) -> int:
        return len(self.classes)


# ---------------------------------------------------------------------------
# Fitting


def _drifts(images: Sequence[LinComb], is_finite: IsFinite) -> List[int]:
    """How far the extreme terms of each lane move between the last two images, plus 0 and ±1."""
    drifts = {-1, 0, 1}
    if len(images) < 2:
        return sorted(drifts)

    def extremes(vec: LinComb) -> Dict[Lane, Tuple[int, int]]:
        out: Dict[Lane, Tuple[int, int]] = {}
        for idx in vec:
            if is_finite(idx):
                continue
            p = position(idx)
            lo, hi = out.get(lane_of(idx), (p, p))
            out[lane_of(idx)] = (min(lo, p), max(hi, p))
        return out

    before, after = extremes(images[-2]), extremes(images[-1])
    for lane in before.keys() & after.keys():
        drifts.add(after[lane][0] - before[lane][0])
        drifts.add(after[lane][1] - before[lane][1])
    return sorted(drifts)


def _stacked(parts: Sequence[Tuple[int, LinComb]]) -> Dict[tuple, Scalar]:
    return {(n, idx.block, idx.slot, -1 if idx.copy is None else idx.copy): c for n, vec in parts for idx, c in vec.items()}


def fit_recurrence(images: Sequence[LinComb], order: int, is_finite: IsFinite, field) -> Optional[List[TailStep]]:
    """Steps of a recurrence of the given order that reproduces every image, or None."""
    if len(images) < order + 6:
        return None
    drifts = _drifts(images, is_finite)
    unknowns = [
        (lag, shift)
        for lag in range(1, order + 1)
        for shift in sorted({sum(c) for c in itertools.combinations_with_replacement(drifts, lag)})
    ]

    def solve(ns: Sequence[int]) -> Optional[Dict]:
        echelon = SparseEchelon(field)
        for key in unknowns:
            lag, shift = key
            echelon.insert(_stacked([(n, translate(images[n - lag], shift, is_finite)) for n in ns]), key)
        return echelon.express(_stacked([(n, images[n]) for n in ns]))

    # a few equations reject most candidates cheaply
    if solve(range(order, order + 3)) is None:
        return None
    # fitted on two thirds, checked on all; trusted only if the unseen third outweighs the unknowns
    split = order + (len(images) - order) * 2 // 3
    if sum(len(images[n]) or 1 for n in range(split, len(images))) <= len(unknowns):
        return None
    combo = solve(range(order, split))
    if combo is None:
        return None
    steps = [TailStep(lag, shift, c) for (lag, shift), c in sorted(combo.items()) if not c.is_zero()]
    for n in range(order, len(images)):
        if lin_sum((st.coef, translate(images[n - st.lag], st.shift, is_finite)) for st in steps) != images[n]:
            return None
    return steps


def _lanes(u: RepAut, window: Window) -> List[Tuple[str, Optional[int], int, int]]:
    """(block, slot, edge, direction) for every lane leaving the window."""
    lanes = []
    for b in u.shift_blocks:
        slots = [i.slot for i in window if i.block == b.id]
        if slots:
            lanes.append((b.id, None, max(slots), 1))
            lanes.append((b.id, None, min(slots), -1))
    for b in u.periodic_blocks:
        last = max((i.copy for i in window if i.block == b.id), default=-1)
        lanes.extend((b.id, j, last, 1) for j in range(b.dim))
    return lanes


def _fit_lane(op: LazyOp, u: RepAut, lane: Tuple[str, Optional[int], int, int], samples: int, period_max: int, order_max: int):
    block, slot, edge, direction = lane
    points = [
        BasisIndex(block, edge + direction * (1 + j)) if slot is None else BasisIndex(block, slot, edge + 1 + j)
        for j in range(samples)
    ]
    try:
        images = [op.apply(x) for x in points]
    except InvofactorError as e:
        logger.warning(f"{op.label}: cannot sample lane {block}/{slot}: {e.message}")
        return None
    is_finite = finite_test(u)
    offsets = [0] + [2 ** k for k in range(samples.bit_length()) if 2 ** k < samples]
    for period in range(1, period_max + 1):
        for offset in offsets:
            for order in range(1, order_max + 1):
                if offset + period * (order + 6) > samples:
                    break
                classes = []
                for r in range(period):
                    seq = images[offset + r::period]
                    steps = fit_recurrence(seq, order, is_finite, u.field)
                    if steps is None:
                        break
                    classes.append(TailClass(points[offset + r], direction * period, list(seq[:order]), steps))
                else:
                    return classes, {points[j]: images[j] for j in range(offset)}
    return None


def fit_tail(
    op: LazyOp,
    u: RepAut,
    window: Window,
    samples: Optional[int] = None,
    period_max: Optional[int] = None,
    order_max: Optional[int] = None,
) -> Tuple[List[TailClass], Dict[BasisIndex, LinComb]]:
    """
    Tail classes of op on every lane past the window, plus the table entries
    between the window edge and the first class. A lane without a fit is
    left uncovered.
    """
    samples = settings.TAIL_SAMPLES if samples is None else samples
    period_max = settings.TAIL_PERIOD_MAX if period_max is None else period_max
    order_max = settings.TAIL_ORDER_MAX if order_max is None else order_max
    classes: List[TailClass] = []
    prefix: Dict[BasisIndex, LinComb] = {}
    for lane in _lanes(u, window):
        fitted = _fit_lane(op, u, lane, samples, period_max, order_max)
        if fitted is None:
            logger.warning(f"{op.label}: no periodic tail on lane {lane[0]}/{lane[1]} past {lane[2]}")
            continue
        lane_classes, lane_prefix = fitted
        classes.extend(lane_classes)
        prefix.update(lane_prefix)
    logger.debug(f"{op.label}: {len(classes)} tail classes, {len(prefix)} extra table entries")
    return classes, prefix
