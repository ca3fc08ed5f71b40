"""
Adjacency: given u and a split p, an operator a with p(a) = 0 such that
v = a∘u is elementary. One construction works on a semi-good
stratification, the other on the free part of a shift-containing u.
"""
import logging
from typing import Dict, List, Tuple

from invofactor.algebra import QuadPoly, Scalar, split_roots
from invofactor.core.errors import NoFreePart, NotSemiGood, PreconditionViolation
from invofactor.models import AdjacentPair
from invofactor.modulestruct import (
    Stratification,
    adjust_reps,
    is_semi_good,
    orbit,
    quotient_strata,
    require_shift_stable,
    shift_part,
)
from invofactor.opcore import BasisIndex, BlockKind, LazyOp, LinComb, RepAut, compose, lin_sum
from invofactor.constructions.shift import CyclicComponent, ElementaryForm, ShiftComponent, certify_components

logger = logging.getLogger(__name__)


def adjacency_strat(u: RepAut, s: Stratification, p: QuadPoly) -> AdjacentPair:
    """
    With p = (t−λ)(t−μ): a(x_α) = μ·x_α + u^{n_{α+1}−1}(x_{α+1}) on the
    generators of finite strata, a = λ on every other orbit vector.
    """
    report = is_semi_good(s)
    if not report:
        raise NotSemiGood("stratification is not semi-good", reasons=report.reasons)
    lam, mu = split_roots(p)
    fld = u.field

    if not any(st.is_finite for st in s.prefix) and not s.is_infinite:
        if u.finite_blocks or u.periodic_blocks:
            raise PreconditionViolation("infinite strata are only supported for operators made of shift blocks")
        a = LazyOp.scalar(fld, lam, annihilator=p, label="a")
        v = compose([a, u], label="v")
        blocks = [next(iter(st.generator)).block for st in s.prefix]
        form = ElementaryForm(
            v,
            [ShiftComponent(b, lam * u.block(b).multiplier) for b in blocks],
            _block_router(blocks),
        )
        return AdjacentPair(a, v, [], form, notes={"pipeline": "adjacency_strat", "strata": "infinite"})

    if u.has_shift:
        raise PreconditionViolation("adjacency on finite strata needs an operator without shift blocks")

    successors: Dict[int, LinComb] = {}

    def special(k: int) -> LinComb:
        vec = successors.get(k)
        if vec is None:
            x = s.stratum(k).generator
            nxt = s.stratum(k + 1)
            top = orbit(u, nxt.generator, nxt.dim)[-1] if nxt.is_finite else nxt.generator
            vec = x.scaled(mu - lam) + top
            successors[k] = vec
        return vec

    def rule(idx: BasisIndex) -> LinComb:
        parts = [(lam, LinComb.basis(idx, fld))]
        for (k, l), c in s.coordinates(idx).items():
            if l == 0 and s.stratum(k).is_finite:
                parts.append((c, special(k)))
        return lin_sum(parts)

    a = LazyOp(rule, fld, annihilator=p, label="a", domain=u.check_index)
    v = compose([a, u], label="v")
    first = s.stratum(0)
    c = orbit(u, first.generator, first.dim)[-1]
    form = ElementaryForm(v, [CyclicComponent(c, "stratified")], lambda idx: 0)
    form.evidence = certify_components(form)
    logger.info(f"Stratified adjacency built; cyclic evidence rank {form.evidence[0].rank}")
    return AdjacentPair(a, v, form.evidence, form, notes={"pipeline": "adjacency_strat"})


def _block_router(blocks: List[str]):
    position = {block: n for n, block in enumerate(blocks)}
    return lambda idx: position[idx.block]


def adjacency_free(u: RepAut, p: QuadPoly) -> AdjacentPair:
    """
    c = e_(S0,0) for the first shift block S0. With p = t² − λt − μ and the
    adjusted quotient representatives x_k: a(u^{k+1}(c)) = x_k and
    a(x_k) = λ·x_k + μ·u^{k+1}(c) for every quotient stratum k, a = α
    (the first root of p) on every other basis vector.
    """
    if not u.has_shift:
        raise NoFreePart("operator has no shift block")
    require_shift_stable(u)
    s0 = u.shift_blocks[0]
    others = [b.id for b in u.shift_blocks[1:]]
    leaks = [
        t
        for image in list(u.coupling.values()) + list(u.perturbation.values())
        for t in image
        if t.block in others
    ]
    if leaks:
        raise PreconditionViolation(f"torsion part leaks into shift block {leaks[0].block}")

    fld = u.field
    alpha, _ = split_roots(p)
    lam_p, mu_p = p.trace, -p.norm
    mu0 = s0.multiplier
    strata = quotient_strata(u)
    reps = adjust_reps(u, strata)
    count = None if strata.is_infinite else len(strata.prefix)
    exact: Dict[Tuple[int, int], LinComb] = {}

    def in_d(k: int) -> bool:
        return k >= 0 and (count is None or k < count)

    def rep(k: int) -> LinComb:
        return reps[k] if k < len(reps) else strata.stratum(k).generator

    def orbit_vector(k: int, l: int) -> LinComb:
        vec = exact.get((k, l))
        if vec is None:
            vec = rep(k) if l == 0 else u.apply_vec(orbit_vector(k, l - 1))
            exact[(k, l)] = vec
        return vec

    def c_power(j: int) -> LinComb:
        return LinComb.basis(BasisIndex(s0.id, j), fld).scaled(mu0 ** j)

    def on_shift(idx: BasisIndex) -> LinComb:
        if idx.block == s0.id and idx.slot > 0 and in_d(idx.slot - 1):
            return rep(idx.slot - 1).scaled(mu0 ** (-idx.slot))
        return LinComb.basis(idx, fld).scaled(alpha)

    def on_orbit(k: int, l: int) -> LinComb:
        if l > 0:
            return orbit_vector(k, l).scaled(alpha)
        return lin_sum([(lam_p, rep(k)), (mu_p, c_power(k + 1))])

    def rule(idx: BasisIndex) -> LinComb:
        if u.kind(idx.block) == BlockKind.SHIFT:
            return on_shift(idx)
        coords = strata.coordinates(idx)
        residual = LinComb.basis(idx, fld) - lin_sum((c, orbit_vector(k, l)) for (k, l), c in coords.items())
        parts = [(c, on_orbit(k, l)) for (k, l), c in coords.items()]
        parts += [(c, on_shift(i)) for i, c in shift_part(u, residual).items()]
        return lin_sum(parts)

    a = LazyOp(rule, fld, annihilator=p, label="a", domain=u.check_index)
    v = compose([a, u], label="v")
    components = [ShiftComponent(b, alpha * u.block(b).multiplier) for b in others]
    if count == 0:
        components.append(ShiftComponent(s0.id, alpha * mu0))
    else:
        components.append(CyclicComponent(LinComb.basis(BasisIndex(s0.id, 0), fld), "free"))
    position = {b: n for n, b in enumerate(others)}
    last = len(components) - 1
    form = ElementaryForm(v, components, lambda idx: position.get(idx.block, last))
    form.evidence = certify_components(form)
    logger.info(f"Free adjacency built on {s0.id} with {'infinitely many' if count is None else count} quotient strata")
    return AdjacentPair(
        a,
        v,
        form.evidence,
        form,
        notes={"pipeline": "adjacency_free", "evidence": "window-certified", "strata": strata.to_dict()},
    )
