"""
(p, q)-factorizations of elementary automorphisms.

`shift_pair` builds a, b on an abstract basis (x_n) with p(a) = 0, q(b) = 0
and ab super-elementary with cyclic vector x_1. Each component of an
elementary v (a scaled shift block, or a cyclic vector) is identified with
that model by y_k = (ab)^k(x_1) <-> v^k(c), and a, b are carried across.
"""
import logging
import threading
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

from invofactor.algebra import QuadPoly, Scalar, split_roots
from invofactor.core.config import settings
from invofactor.core.errors import NotElementaryEvidence, ShapeMismatch
from invofactor.opcore import (
    BasisIndex,
    CyclicReport,
    LazyOp,
    LinComb,
    OrbitBasis,
    compose,
    cyclic_window_cert,
    lin_sum,
)

logger = logging.getLogger(__name__)

MODEL_BLOCK = "X"


def shift_pair(p: QuadPoly, q: QuadPoly) -> Tuple[LazyOp, LazyOp]:
    alpha, beta = split_roots(p)
    fld = p.field
    lam_q = q.trace
    mu_q = -q.norm

    def check(i: BasisIndex):
        if i.block != MODEL_BLOCK or i.slot < 0 or i.copy is not None:
            raise ShapeMismatch(f"{i} is not a model basis index")

    def x(n: int) -> BasisIndex:
        return BasisIndex(MODEL_BLOCK, n)

    def a_rule(i: BasisIndex) -> LinComb:
        n = i.slot
        if n % 2 == 0:
            return LinComb([(x(n), alpha), (x(n + 3), fld.one)])
        return LinComb([(x(n), beta)])

    def b_rule(i: BasisIndex) -> LinComb:
        n = i.slot
        if n % 2 == 0:
            return LinComb([(x(n + 1), fld.one)])
        return LinComb([(x(n - 1), mu_q), (x(n), lam_q)])

    a = LazyOp(a_rule, fld, annihilator=p, label="a", domain=check)
    b = LazyOp(b_rule, fld, annihilator=q, label="b", domain=check)
    return a, b


class ShiftPairModel:
    """
    The pair (a, b) with w = ab, plus the coordinates of a(y_k) and b(y_k)
    in the orbit basis y_k = w^k(x_1).
    """

    def __init__(self, p: QuadPoly, q: QuadPoly, max_depth: Optional[int] = None):
        self.p, self.q = p, q
        self.field = p.field
        self.a, self.b = shift_pair(p, q)
        self.w = compose([self.a, self.b], label="ab")
        self.x1 = LinComb.basis(BasisIndex(MODEL_BLOCK, 1), self.field)
        self.orbit = OrbitBasis(self.w, self.x1, max_depth=max_depth)
        self._delta: Dict[Tuple[str, int], Dict[int, Scalar]] = {}
        self._lock = threading.RLock()

    def y(self, k: int) -> LinComb:
        return self.orbit.vector(k)

    def delta(self, which: str, k: int) -> Dict[int, Scalar]:
        """Coordinates of a(y_k) (which="a") or b(y_k) (which="b") in the y basis."""
        key = (which, k)
        with self._lock:
            cached = self._delta.get(key)
            if cached is None:
                op = self.a if which == "a" else self.b
                cached = self.orbit.express(op.apply_vec(self.y(k)))
                self._delta[key] = cached
            return cached


@dataclass
class ShiftComponent:
    """A shift block on which v(e_(S,k)) = m·e_(S,k+1)."""

    block: str
    multiplier: Scalar


@dataclass
class CyclicComponent:
    """A v-stable part spanned by the two-sided v-orbit of c."""

    c: LinComb
    label: str = "cyclic"


Component = Union[ShiftComponent, CyclicComponent]


@dataclass
class ElementaryForm:
    """An elementary v as a direct sum of components; route sends a basis index to its component."""

    v: LazyOp
    components: List[Component]
    route: Callable[[BasisIndex], int]
    evidence: List[CyclicReport] = field(default_factory=list)


def _transport_shift(model: ShiftPairModel, which: str, comp: ShiftComponent, idx: BasisIndex) -> LinComb:
    m = comp.multiplier
    k = idx.slot
    scale = m ** (-k)
    return lin_sum(
        (scale * d * m ** j, LinComb.basis(BasisIndex(comp.block, j), model.field))
        for j, d in model.delta(which, k).items()
    )


class _CyclicTransport:
    def __init__(self, model: ShiftPairModel, v: LazyOp, comp: CyclicComponent, max_depth: Optional[int]):
        self.model = model
        self.orbit = OrbitBasis(v, comp.c, max_depth=max_depth)

    def apply(self, which: str, idx: BasisIndex) -> LinComb:
        gamma = self.orbit.express(LinComb.basis(idx, self.model.field))
        acc: Dict[int, Scalar] = {}
        for k, g in gamma.items():
            for j, d in self.model.delta(which, k).items():
                acc[j] = acc.get(j, self.model.field.zero) + g * d
        return lin_sum((c, self.orbit.vector(j)) for j, c in acc.items() if not c.is_zero())


def certify_components(form: ElementaryForm, depth: Optional[int] = None) -> List[CyclicReport]:
    """Window evidence that every cyclic component's orbit is free; raises when it is not."""
    depth = settings.EVIDENCE_DEPTH if depth is None else depth
    reports = []
    for comp in form.components:
        if isinstance(comp, CyclicComponent):
            report = cyclic_window_cert(form.v, comp.c, depth, label=comp.label)
            if not report.independent:
                raise NotElementaryEvidence(
                    f"orbit of the {comp.label} vector is dependent at depth {depth}",
                    depth=depth,
                    rank=report.rank,
                )
            reports.append(report)
    return reports


def elementary_factor_pq(
    form: ElementaryForm,
    p: QuadPoly,
    q: QuadPoly,
    max_depth: Optional[int] = None,
) -> Tuple[LazyOp, LazyOp, List[CyclicReport]]:
    """
    f, g with fg = v, p(f) = 0 and q(g) = 0, carried component by component
    from the shift-pair model.
    """
    if p.field != form.v.field or q.field != form.v.field:
        raise ShapeMismatch("polynomials and operator live over different fields")
    evidence = form.evidence or certify_components(form)
    model = ShiftPairModel(p, q, max_depth=max_depth)
    transports: Dict[int, _CyclicTransport] = {
        n: _CyclicTransport(model, form.v, comp, max_depth)
        for n, comp in enumerate(form.components)
        if isinstance(comp, CyclicComponent)
    }

    def make(which: str):
        def rule(idx: BasisIndex) -> LinComb:
            n = form.route(idx)
            comp = form.components[n]
            if isinstance(comp, ShiftComponent):
                return _transport_shift(model, which, comp, idx)
            return transports[n].apply(which, idx)
        return rule

    f = LazyOp(make("a"), form.v.field, annihilator=p, label="f", domain=form.v.domain)
    g = LazyOp(make("b"), form.v.field, annihilator=q, label="g", domain=form.v.domain)
    logger.debug(f"Transported ({p}, {q}) pair across {len(form.components)} components")
    return f, g, evidence


def shift_form(v: LazyOp, shifts: Sequence[Tuple[str, Scalar]]) -> ElementaryForm:
    """Elementary form of a direct sum of scaled shift blocks."""
    components = [ShiftComponent(block, m) for block, m in shifts]
    position = {block: n for n, (block, _) in enumerate(shifts)}
    return ElementaryForm(v, components, lambda idx: position[idx.block])
