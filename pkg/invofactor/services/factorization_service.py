import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

from invofactor.algebra import AcceptKind, Acceptability, QuadPoly, Scalar, acceptable, reciprocal, split_roots
from invofactor.core.config import settings
from invofactor.core.decorators import retry_with_seed
from invofactor.core.errors import (
    BuilderStuck,
    PreconditionViolation,
    Refused,
    RefusalReason,
    ShapeMismatch,
    UnsupportedField,
)
from invofactor.constructions.adjacency import adjacency_free, adjacency_strat
from invofactor.constructions.cells import FiniteRankFactor, FiniteRankLayout
from invofactor.constructions.killer import kill_dominant
from invofactor.constructions.scalar import scalar_id_factors, scalar_triple_2x2
from invofactor.constructions.shift import elementary_factor_pq
from invofactor.glsearch import stable_search_report
from invofactor.linalg import Mat, induced_det
from invofactor.models import Certificate, Decision, FactorRecord, Flavor
from invofactor.modulestruct import build_strat_periodic
from invofactor.normalform import ShiftNormalForm, needs_normal_form
from invofactor.opcore import CyclicReport, FiniteBlock, LazyOp, PeriodicBlock, RepAut, invert
from invofactor.services.certificate_service import CertificateService

logger = logging.getLogger(__name__)


@dataclass
class Construction:
    """Factors of a pipeline before certification, with the trace of how they were built."""

    factors: List[FactorRecord]
    provenance: Dict[str, Any] = field(default_factory=dict)
    evidence: List[CyclicReport] = field(default_factory=list)


def _records(ops: Sequence[LazyOp], polys: Sequence[QuadPoly]) -> List[FactorRecord]:
    records = []
    for n, (op, p) in enumerate(zip(ops, polys)):
        op.annihilator = p
        op.label = f"a{n + 1}"
        records.append(FactorRecord(op, p, op.label))
    return records


def _poly_names(polys: Sequence[QuadPoly]) -> List[str]:
    return [str(p) for p in polys]


# ---------------------------------------------------------------------------
# Classification


def _is_involution_poly(p: QuadPoly) -> bool:
    return p.same_roots_as(QuadPoly.of(p.field, 1, 0, -1))


def _is_unipotent_poly(p: QuadPoly) -> bool:
    return p.same_roots_as(QuadPoly.of(p.field, 1, -2, 1))


def flavor_of(polys: Sequence[QuadPoly]) -> Optional[Flavor]:
    """The classification flavor a triple belongs to, if any."""
    if len(polys) != 3:
        return None
    kinds = []
    for p in polys:
        if _is_involution_poly(p):
            kinds.append("I")
        elif _is_unipotent_poly(p):
            kinds.append("U")
        else:
            return None
    return {
        "III": Flavor.INVOLUTIONS,
        "UUU": Flavor.UNIPOTENTS,
        "IIU": Flavor.MIXED,
        "IUU": Flavor.INVOLUTION_UNIPOTENTS,
    }["".join(sorted(kinds))]


def classify3(u: RepAut, flavor: Flavor) -> Decision:
    """
    Whether u is a product of three factors of the given flavor. Only
    operators with a dominant eigenvalue can fail; the verdict names the
    condition that fired.
    """
    lam = u.dominant_eigenvalue()
    if lam is None:
        return Decision(True, flavor, reasons=["no dominant eigenvalue"])
    det = induced_det(u)
    one = u.field.one

    def refuse(condition: str, reason: str) -> Decision:
        return Decision(False, flavor, condition, [reason], lam, det)

    if flavor in (Flavor.INVOLUTIONS, Flavor.INVOLUTION_UNIPOTENTS):
        if lam ** 4 != 1:
            return refuse("(i)", f"λ⁴ = {lam ** 4} ≠ 1")
        allowed = {s * lam ** k for k in range(4) for s in (1, -1)}
        if det not in allowed:
            return refuse("(ii)", f"induced determinant {det} is not ±λ^k")
    elif flavor == Flavor.UNIPOTENTS:
        if lam ** 2 != 1:
            return refuse("(i)", f"λ² = {lam ** 2} ≠ 1")
        if lam == 1 and det != 1:
            return refuse("(ii)", f"induced determinant {det} ≠ 1")
        if lam == -one and det != 1 and det != -one:
            return refuse("(iii)", f"induced determinant {det} is not ±1")
    elif flavor == Flavor.MIXED:
        if lam ** 2 != 1:
            return refuse("(i)", f"λ² = {lam ** 2} ≠ 1")
        if det != 1 and det != -one:
            return refuse("(ii)", f"induced determinant {det} is not ±1")
    return Decision(True, flavor, reasons=["conditions do not hold"], dominant_eigenvalue=lam, induced_det=det)


# ---------------------------------------------------------------------------
# Pipelines


def scalar_id_construction(lam: Scalar, polys: Sequence[QuadPoly], space: RepAut, seed: int = 0) -> Construction:
    factors = scalar_id_factors(lam, list(polys), space, seed=seed)
    verdict = acceptable(lam, *polys)
    return Construction(
        factors,
        {"pipeline": "scalar_id", "lambda": str(lam), "acceptable": verdict.kind.value, "seed": seed},
    )


def finite_rank_construction(
    u: RepAut,
    polys: Sequence[QuadPoly],
    qmax: Optional[int] = None,
    budget: Optional[int] = None,
    jobs: Optional[int] = None,
) -> Construction:
    """
    u = λ·id + w: A = u on the compression of w is padded with λ until the
    exhaustive search finds a finite factorization, which is glued to scalar
    triples on the rest of the basis.
    """
    lam = u.dominant_eigenvalue()
    if lam is None:
        raise PreconditionViolation("finite-rank pipeline needs a dominant eigenvalue")
    p1, p2, p3 = polys
    verdict = acceptable(lam, p1, p2, p3)
    if verdict.kind == AcceptKind.NO:
        logger.warning(f"Refusing: {lam} is not acceptable for {_poly_names(polys)}")
        raise Refused(RefusalReason.NOT_ACCEPTABLE, f"{lam} is not a product of roots and λ² ≠ N(p1)N(p2)N(p3)", lam=str(lam))

    flavor = flavor_of(polys)
    if flavor is not None:
        decision = classify3(u, flavor)
        if not decision.product:
            logger.warning(f"Refusing by the {flavor.value} conditions: {decision.reasons}")
            reason = RefusalReason.NOT_ACCEPTABLE if decision.condition == "(i)" else RefusalReason.DETERMINANT_OBSTRUCTION
            raise Refused(reason, "; ".join(decision.reasons), condition=decision.condition)

    layout = FiniteRankLayout(u, lam)
    if layout.rank == 0:
        logger.info(f"Operator is {lam}·id; tiling scalar triples")
        return scalar_id_construction(lam, polys, u)

    if not u.field.is_prime:
        raise UnsupportedField(f"finite factor search over {u.field.tag} is not available")

    A = layout.matrix
    report = stable_search_report(A, lam, polys, qmax=qmax, budget=budget, jobs=jobs)
    if report.q is None:
        raise Refused(
            RefusalReason.SEARCH_EXHAUSTED,
            f"no q ≤ {max(report.reasons, default=0)} makes A ⊕ {lam}·I_q a product",
            reasons=report.reasons,
            complete=report.complete,
        )
    stream = scalar_triple_2x2(lam, p1, p2, p3)
    size = stream[0].rows
    ops = [
        FiniteRankFactor(layout, report.q, cell, {size: M}).as_lazy(p)
        for cell, M, p in zip(report.witness, stream, polys)
    ]
    logger.info(f"Finite-rank factorization found with q={report.q} on a rank {layout.rank} compression")
    return Construction(
        _records(ops, polys),
        {
            "pipeline": "finite_rank_three",
            "lambda": str(lam),
            "acceptable": verdict.kind.value,
            "rank": layout.rank,
            "q": report.q,
            "search": report.to_dict(),
        },
    )


def three_factor_construction(
    u: RepAut,
    polys: Sequence[QuadPoly],
    qmax: Optional[int] = None,
    budget: Optional[int] = None,
    jobs: Optional[int] = None,
) -> Construction:
    if len(polys) != 3:
        raise ShapeMismatch("three-factor pipeline takes three polynomials")
    p1, p2, p3 = polys
    for p in polys:
        split_roots(p)

    if u.dominant_eigenvalue() is not None:
        logger.info("Dominant eigenvalue present: finite-rank branch")
        return finite_rank_construction(u, polys, qmax=qmax, budget=budget, jobs=jobs)

    if needs_normal_form(u):
        logger.info("Perturbation reaches the shift blocks: conjugating to the shift normal form")
        nf = ShiftNormalForm(u)
        inner = three_factor_construction(nf.aut, polys, qmax=qmax, budget=budget, jobs=jobs)
        ops = [nf.transport(f.op) for f in inner.factors]
        provenance = {
            "pipeline": "factor_three",
            "branch": "normal-form",
            "polys": _poly_names(polys),
            "normal_form": nf.to_dict(),
            "inner": inner.provenance,
        }
        return Construction(_records(ops, polys), provenance, inner.evidence)

    if u.has_shift:
        logger.info("Shift block present: free adjacency branch")
        pair = adjacency_free(u, reciprocal(p1))
        branch = "free"
    else:
        if not u.periodic_blocks:
            raise PreconditionViolation("operator acts on a finite-dimensional space")
        logger.info("Torsion operator without dominant eigenvalue: stratified adjacency branch")
        strat = build_strat_periodic(u)
        pair = adjacency_strat(u, strat, reciprocal(p1))
        pair.notes["strata"] = strat.to_dict()
        branch = "torsion"

    f, g, evidence = elementary_factor_pq(pair.components, p2, p3)
    ops = [invert(pair.a), f, g]
    provenance = {"pipeline": "factor_three", "branch": branch, "polys": _poly_names(polys)}
    provenance.update({k: v for k, v in pair.notes.items() if k != "pipeline"})
    return Construction(_records(ops, polys), provenance, list(evidence))


@retry_with_seed(max_retries=settings.SEED_RETRIES, exceptions=(BuilderStuck,))
def four_factor_construction(
    u: RepAut,
    polys: Sequence[QuadPoly],
    *,
    seed: int = 0,
    qmax: Optional[int] = None,
    budget: Optional[int] = None,
    jobs: Optional[int] = None,
) -> Construction:
    """
    Without a dominant eigenvalue the first factor is a root of p1 times id.
    Otherwise u is first made p1#-adjacent to an operator without one.
    """
    if len(polys) != 4:
        raise ShapeMismatch("four-factor pipeline takes four polynomials")
    p1, rest = polys[0], list(polys[1:])
    fld = u.field
    omega, _ = split_roots(p1)

    if u.dominant_eigenvalue() is None:
        inner = three_factor_construction(u.scaled(omega.inverse()), rest, qmax=qmax, budget=budget, jobs=jobs)
        first = LazyOp.scalar(fld, omega)
        ops = [first] + [f.op for f in inner.factors]
        provenance = {"pipeline": "factor_four", "branch": "scalar-prefix", "seed": seed, "inner": inner.provenance}
        return Construction(_records(ops, polys), provenance, inner.evidence)

    pair = kill_dominant(u, reciprocal(p1), seed=seed)
    inner = three_factor_construction(pair.aut, rest, qmax=qmax, budget=budget, jobs=jobs)
    ops = [invert(pair.a)] + [pair.relabeling.transport(f.op) for f in inner.factors]
    provenance = {
        "pipeline": "factor_four",
        "branch": "kill-dominant",
        "seed": seed,
        "core_end": pair.notes.get("core_end"),
        "inner": inner.provenance,
    }
    return Construction(_records(ops, polys), provenance, inner.evidence)


# ---------------------------------------------------------------------------
# Service


class FactorizationService:
    """Runs the pipelines with configured bounds and certifies every result."""

    def __init__(
        self,
        window: Optional[int] = None,
        qmax: Optional[int] = None,
        budget: Optional[int] = None,
        jobs: Optional[int] = None,
    ):
        self.window = settings.DEFAULT_WINDOW if window is None else window
        self.qmax = settings.QMAX if qmax is None else qmax
        self.budget = settings.INVOFACTOR_BUDGET if budget is None else budget
        self.jobs = settings.JOBS if jobs is None else jobs
        self.certificates = CertificateService(jobs=self.jobs)

    def acceptable(self, lam: Scalar, polys: Sequence[QuadPoly]) -> Acceptability:
        if len(polys) != 3:
            raise ShapeMismatch("acceptability takes three polynomials")
        return acceptable(lam, *polys)

    def classify(self, u: RepAut, flavor: Flavor) -> Decision:
        return classify3(u, flavor)

    def construct(self, u: RepAut, polys: Sequence[QuadPoly], seed: int = 0) -> Construction:
        if len(polys) == 3:
            return three_factor_construction(u, polys, qmax=self.qmax, budget=self.budget, jobs=self.jobs)
        if len(polys) == 4:
            return four_factor_construction(u, polys, seed=seed, qmax=self.qmax, budget=self.budget, jobs=self.jobs)
        raise ShapeMismatch(f"factorization takes three or four polynomials, got {len(polys)}")

    def _certify(self, u: RepAut, polys: Sequence[QuadPoly], construction: Construction) -> Certificate:
        construction.provenance.setdefault("polys", _poly_names(polys))
        return self.certificates.certify(
            u,
            list(polys),
            construction.factors,
            provenance=construction.provenance,
            evidence=construction.evidence,
            window=u.default_window(self.window),
        )

    def factor(self, u: RepAut, polys: Sequence[QuadPoly], seed: int = 0) -> Certificate:
        return self._certify(u, polys, self.construct(u, polys, seed=seed))

    def factor_three(self, u: RepAut, polys: Sequence[QuadPoly]) -> Certificate:
        return self._certify(u, polys, three_factor_construction(u, polys, qmax=self.qmax, budget=self.budget, jobs=self.jobs))

    def factor_four(self, u: RepAut, polys: Sequence[QuadPoly], seed: int = 0) -> Certificate:
        construction = four_factor_construction(u, polys, seed=seed, qmax=self.qmax, budget=self.budget, jobs=self.jobs)
        return self._certify(u, polys, construction)

    def finite_rank_three(self, u: RepAut, polys: Sequence[QuadPoly]) -> Certificate:
        construction = finite_rank_construction(u, polys, qmax=self.qmax, budget=self.budget, jobs=self.jobs)
        return self._certify(u, polys, construction)

    def scalar_id(self, lam: Scalar, polys: Sequence[QuadPoly], space: RepAut, seed: int = 0) -> Certificate:
        """λ·id on the basis of `space`; the target is a RepAut unless `space` has shift blocks."""
        fld = space.field
        lam = fld(lam)
        construction = scalar_id_construction(lam, polys, space, seed=seed)
        if space.has_shift:
            target = LazyOp.scalar(fld, lam, label="λ·id")
        else:
            target = RepAut(
                fld,
                finite_blocks=[FiniteBlock(b.id, Mat.scalar(fld, b.dim, lam)) for b in space.finite_blocks],
                periodic_blocks=[PeriodicBlock(b.id, Mat.scalar(fld, b.dim, lam)) for b in space.periodic_blocks],
            )
        construction.provenance["polys"] = _poly_names(polys)
        return self.certificates.certify(
            target,
            list(polys),
            construction.factors,
            provenance=construction.provenance,
            window=space.default_window(self.window),
        )
