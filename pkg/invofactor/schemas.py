from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, Field as PydanticField

from invofactor.algebra import Field
from invofactor.core.errors import MalformedInput
from invofactor.core.normalization import PolyParser
from invofactor.linalg import Mat
from invofactor.models import Flavor
from invofactor.opcore import BasisIndex, FiniteBlock, LinComb, PeriodicBlock, RepAut, ShiftBlock, WindowReport
from invofactor.tails import TailClass, TailStep

Number = Union[int, str]


def parse_matrix(rows: List[List[Number]], field: Field) -> Mat:
    if not rows or any(len(row) != len(rows[0]) for row in rows):
        raise MalformedInput("matrix rows must be nonempty and of equal length")
    return Mat.from_rows(field, [[PolyParser.parse_scalar(str(x), field) for x in row] for row in rows])


def dump_matrix(M: Mat) -> List[List[str]]:
    return [[str(x) for x in row] for row in M.entries]


# --- Indices and vectors ---
class IndexSchema(BaseModel):
    block: str
    slot: int
    copy_: Optional[int] = PydanticField(None, alias="copy")

    model_config = {"populate_by_name": True}

    def to_domain(self) -> BasisIndex:
        return BasisIndex(self.block, self.slot, self.copy_)

    @classmethod
    def from_domain(cls, idx: BasisIndex) -> "IndexSchema":
        return cls(block=idx.block, slot=idx.slot, copy=idx.copy)


class TermSchema(IndexSchema):
    coef: Number = 1


def parse_lincomb(terms: List[TermSchema], field: Field) -> LinComb:
    return LinComb((t.to_domain(), PolyParser.parse_scalar(str(t.coef), field)) for t in terms)


def dump_lincomb(vec: LinComb) -> List[TermSchema]:
    return [TermSchema(block=k.block, slot=k.slot, copy=k.copy, coef=str(c)) for k, c in vec.terms()]


class ImageSchema(BaseModel):
    index: IndexSchema
    image: List[TermSchema]


# --- Operators ---
class FiniteBlockSchema(BaseModel):
    id: str
    matrix: List[List[Number]]


class ShiftBlockSchema(BaseModel):
    id: str
    multiplier: Number = 1


class PeriodicBlockSchema(BaseModel):
    id: str
    matrix: List[List[Number]]


class RepAutSchema(BaseModel):
    field: str
    finite_blocks: List[FiniteBlockSchema] = []
    shift_blocks: List[ShiftBlockSchema] = []
    periodic_blocks: List[PeriodicBlockSchema] = []
    coupling: List[ImageSchema] = []
    perturbation: List[ImageSchema] = []

    def to_domain(self) -> RepAut:
        fld = PolyParser.parse_field(self.field)
        return RepAut(
            fld,
            finite_blocks=[FiniteBlock(b.id, parse_matrix(b.matrix, fld)) for b in self.finite_blocks],
            shift_blocks=[ShiftBlock(b.id, PolyParser.parse_scalar(str(b.multiplier), fld)) for b in self.shift_blocks],
            periodic_blocks=[PeriodicBlock(b.id, parse_matrix(b.matrix, fld)) for b in self.periodic_blocks],
            coupling={e.index.to_domain(): parse_lincomb(e.image, fld) for e in self.coupling},
            perturbation={e.index.to_domain(): parse_lincomb(e.image, fld) for e in self.perturbation},
        )

    @classmethod
    def from_domain(cls, u: RepAut) -> "RepAutSchema":
        def images(table) -> List[ImageSchema]:
            return [
                ImageSchema(index=IndexSchema.from_domain(k), image=dump_lincomb(v))
                for k, v in sorted(table.items(), key=lambda kv: kv[0].sort_key())
            ]

        return cls(
            field=u.field.tag,
            finite_blocks=[FiniteBlockSchema(id=b.id, matrix=dump_matrix(b.matrix)) for b in u.finite_blocks],
            shift_blocks=[ShiftBlockSchema(id=b.id, multiplier=str(b.multiplier)) for b in u.shift_blocks],
            periodic_blocks=[PeriodicBlockSchema(id=b.id, matrix=dump_matrix(b.matrix)) for b in u.periodic_blocks],
            coupling=images(u.coupling),
            perturbation=images(u.perturbation),
        )


# --- Certificates ---
class TailStepSchema(BaseModel):
    lag: int = PydanticField(..., ge=1)
    shift: int = 0
    coef: Number = 1


class TailClassSchema(BaseModel):
    start: IndexSchema
    period: int
    seeds: List[List[TermSchema]]
    steps: List[TailStepSchema] = []

    def to_domain(self, field: Field) -> TailClass:
        if not self.period:
            raise MalformedInput("tail period must be nonzero")
        if any(s.lag > len(self.seeds) for s in self.steps):
            raise MalformedInput("tail recurrence reaches behind its seeds")
        steps = [TailStep(s.lag, s.shift, PolyParser.parse_scalar(str(s.coef), field)) for s in self.steps]
        return TailClass(self.start.to_domain(), self.period, [parse_lincomb(v, field) for v in self.seeds], steps)

    @classmethod
    def from_domain(cls, tail: TailClass) -> "TailClassSchema":
        return cls(
            start=IndexSchema.from_domain(tail.start),
            period=tail.period,
            seeds=[dump_lincomb(v) for v in tail.seeds],
            steps=[TailStepSchema(lag=s.lag, shift=s.shift, coef=str(s.coef)) for s in tail.steps],
        )


class TailSchema(BaseModel):
    kind: Literal["scalar", "periodic"]
    value: Optional[str] = None
    classes: List[TailClassSchema] = []


class FactorRuleSchema(BaseModel):
    kind: Literal["table"] = "table"
    entries: List[ImageSchema]
    tail: TailSchema


class FactorSchema(BaseModel):
    label: str
    annihilator: str
    rule: FactorRuleSchema


class WindowReportSchema(BaseModel):
    check: str
    checked: int
    passed: bool
    failures: List[Dict[str, str]] = []

    @classmethod
    def from_domain(cls, report: WindowReport) -> "WindowReportSchema":
        return cls(**report.to_dict())


class CertificateSchema(BaseModel):
    format: Literal["invofactor-certificate"] = "invofactor-certificate"
    version: int = 2
    field: str
    target: RepAutSchema
    polys: List[str]
    factors: List[FactorSchema]
    window: List[IndexSchema]
    report: List[WindowReportSchema] = []
    provenance: Dict[str, Any] = {}
    evidence: List[Dict[str, Any]] = []


# --- API bodies ---
class AcceptableRequest(BaseModel):
    field: str
    lam: Number = PydanticField(..., alias="lambda")
    polys: str

    model_config = {"populate_by_name": True}


class AcceptableResponse(BaseModel):
    kind: str
    witness: Optional[List[str]] = None


class ClassifyRequest(BaseModel):
    operator: RepAutSchema
    flavor: Flavor


class DecisionOut(BaseModel):
    product: bool
    flavor: Flavor
    condition: Optional[str] = None
    reasons: List[str] = []
    dominant_eigenvalue: Optional[str] = None
    induced_det: Optional[str] = None


class FactorRequest(BaseModel):
    operator: RepAutSchema
    polys: str
    seed: int = 0
    window: Optional[int] = PydanticField(None, ge=1)


class VerifyRequest(BaseModel):
    operator: RepAutSchema
    certificate: CertificateSchema
    window: Optional[int] = PydanticField(None, ge=1)


class VerifyResponse(BaseModel):
    passed: bool
    reports: List[WindowReportSchema]


class SearchRequest(BaseModel):
    field: str
    target: List[List[Number]]
    polys: str
    budget: Optional[int] = PydanticField(None, ge=1)


class MembershipOut(BaseModel):
    member: bool
    method: str
    work: int
    witness: Optional[List[List[List[str]]]] = None


class CensusOut(BaseModel):
    n: int
    q: int
    k: int
    poly: str
    total: int
    counts_by_det: Dict[str, int]


class CensusJobRequest(BaseModel):
    n: int = PydanticField(..., ge=1, le=3)
    q: int = PydanticField(..., ge=2)
    k: int = PydanticField(..., ge=1, le=4)
    poly: str
    budget: Optional[int] = PydanticField(None, ge=1)
