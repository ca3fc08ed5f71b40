"""
Certification, verification and JSON (de)serialization of factorizations.

A serialized factor is the table of every image computed while the
certificate was checked, plus a structural tail for indices outside it:
`scalar` (α·e) or `periodic` (tail classes fitted lane by lane past the
window, see `invofactor.tails`). Verification reads nothing else. Table
entries always win over the tail, so a tampered coefficient is always
located.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

from pydantic import ValidationError

from invofactor.algebra import QuadPoly, split_roots
from invofactor.core.config import settings
from invofactor.core.errors import DerogatoryInput, MalformedInput, NoWitness, ShapeMismatch
from invofactor.core.normalization import PolyParser
from invofactor.models import Certificate, FactorRecord
from invofactor.opcore import (
    BasisIndex,
    CyclicReport,
    LazyOp,
    LinComb,
    Operator,
    RepAut,
    Window,
    WindowReport,
    check_annihilated,
    compose,
    equal_on_window,
)
from invofactor.schemas import (
    CertificateSchema,
    FactorRuleSchema,
    FactorSchema,
    ImageSchema,
    IndexSchema,
    RepAutSchema,
    TailClassSchema,
    TailSchema,
    WindowReportSchema,
    dump_lincomb,
    parse_lincomb,
)
from invofactor.tails import PeriodicTail, fit_tail

logger = logging.getLogger(__name__)


@dataclass
class VerificationReport:
    reports: List[WindowReport] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.reports) and all(r.passed for r in self.reports)

    def __bool__(self) -> bool:
        return self.passed

    @property
    def first_failure(self) -> Optional[str]:
        for report in self.reports:
            if report.failures:
                return f"{report.check} at {report.failures[0].index}"
        return None

    def to_dict(self) -> dict:
        return {"passed": self.passed, "reports": [r.to_dict() for r in self.reports]}


class CertificateService:
    def __init__(self, jobs: Optional[int] = None):
        self.jobs = settings.JOBS if jobs is None else jobs

    # -- checking ----------------------------------------------------------

    def check(self, target: Operator, factors: Sequence[FactorRecord], W: Window) -> List[WindowReport]:
        """Every declared annihilation, then the product identity, on W."""
        reports = [check_annihilated(f.op, f.annihilator, W, jobs=self.jobs) for f in factors]
        product = compose([f.op for f in factors], label="product")
        reports.append(equal_on_window(product, target, W, jobs=self.jobs))
        return reports

    def certify(
        self,
        target: Operator,
        polys: List[QuadPoly],
        factors: List[FactorRecord],
        provenance: Optional[Dict[str, Any]] = None,
        evidence: Optional[List[CyclicReport]] = None,
        window: Optional[Window] = None,
    ) -> Certificate:
        if not 1 <= len(factors) <= 4:
            raise ShapeMismatch(f"a certificate has one to four factors, got {len(factors)}")
        for f in factors:
            if not f.annihilator.is_non_derogatory:
                raise DerogatoryInput(f"{f.annihilator} has zero constant term")
            split_roots(f.annihilator)
        W = window if window is not None else target.default_window()
        reports = self.check(target, factors, W)
        cert = Certificate(target, polys, factors, W, reports, dict(provenance or {}), list(evidence or []))
        if cert.passed:
            logger.info(f"Certificate passed on {len(W)} indices ({cert.provenance.get('pipeline')})")
        else:
            failed = [r.check for r in reports if not r.passed]
            logger.error(f"Certificate failed on its own window: {failed}")
        return cert

    def verify(self, u: Operator, cert: Certificate, radius: Optional[int] = None) -> VerificationReport:
        """Re-checks cert against u on u's default window (of the given radius) and the certificate window."""
        W = cert.window
        if isinstance(u, RepAut):
            W = W.union(u.default_window(radius))
        report = VerificationReport(self.check(u, cert.factors, W))
        if not report.passed:
            logger.warning(f"Verification failed: {report.first_failure}")
        return report

    # -- serialization -----------------------------------------------------

    def _factor_schema(self, record: FactorRecord, target: RepAut, window: Window) -> FactorSchema:
        op = record.op
        for idx in window:
            op.apply(idx)
        table = op.table()
        if op.tail and op.tail.get("kind") == "scalar":
            tail = TailSchema(kind="scalar", value=op.tail["value"])
        else:
            classes, prefix = fit_tail(op, target, window)
            table.update(prefix)
            tail = TailSchema(kind="periodic", classes=[TailClassSchema.from_domain(c) for c in classes])
        entries = [
            ImageSchema(index=IndexSchema.from_domain(idx), image=dump_lincomb(table[idx]))
            for idx in sorted(table, key=BasisIndex.sort_key)
        ]
        return FactorSchema(
            label=record.label,
            annihilator=str(record.annihilator),
            rule=FactorRuleSchema(entries=entries, tail=tail),
        )

    def to_schema(self, cert: Certificate) -> CertificateSchema:
        if not isinstance(cert.target, RepAut):
            raise ShapeMismatch("only certificates for representable targets can be serialized")
        return CertificateSchema(
            field=cert.target.field.tag,
            target=RepAutSchema.from_domain(cert.target),
            polys=[str(p) for p in cert.polys],
            factors=[self._factor_schema(f, cert.target, cert.window) for f in cert.factors],
            window=[IndexSchema.from_domain(i) for i in cert.window],
            report=[WindowReportSchema.from_domain(r) for r in cert.reports],
            provenance=cert.provenance,
            evidence=[e.to_dict() for e in cert.evidence],
        )

    def from_schema(self, schema: CertificateSchema) -> Certificate:
        fld = PolyParser.parse_field(schema.field)
        target = schema.target.to_domain()
        if target.field != fld:
            raise MalformedInput(f"certificate field {fld.tag} does not match its target")
        polys = [PolyParser.parse_poly(p, fld) for p in schema.polys]

        def table_rule(label: str, table: Dict[BasisIndex, LinComb], scalar, tail: PeriodicTail):
            def rule(idx: BasisIndex) -> LinComb:
                image = table.get(idx)
                if image is not None:
                    return image
                if scalar is not None:
                    return LinComb({idx: scalar})
                image = tail.image(idx)
                if image is None:
                    raise NoWitness(f"{label}: no table entry or tail class covers {idx}", index=idx)
                return image

            return rule

        factors = []
        for fs in schema.factors:
            p = PolyParser.parse_poly(fs.annihilator, fld)
            table = {e.index.to_domain(): parse_lincomb(e.image, fld) for e in fs.rule.entries}
            scalar, tail_dict = None, None
            if fs.rule.tail.kind == "scalar":
                if fs.rule.tail.value is None:
                    raise MalformedInput(f"scalar tail of {fs.label} has no value")
                scalar = PolyParser.parse_scalar(fs.rule.tail.value, fld)
                tail_dict = {"kind": "scalar", "value": str(scalar)}
            tail = PeriodicTail([c.to_domain(fld) for c in fs.rule.tail.classes], target)
            op = LazyOp(
                table_rule(fs.label, table, scalar, tail),
                fld,
                annihilator=p,
                label=fs.label,
                domain=target.check_index,
                tail=tail_dict,
            )
            factors.append(FactorRecord(op, p, fs.label))
        window = Window.of(i.to_domain() for i in schema.window)
        return Certificate(target, polys, factors, window, [], dict(schema.provenance))

    def dumps(self, cert: Certificate) -> str:
        return self.to_schema(cert).model_dump_json(by_alias=True, indent=2)

    def loads(self, text: Union[str, bytes]) -> Certificate:
        try:
            schema = CertificateSchema.model_validate_json(text)
        except ValidationError as e:
            raise MalformedInput(f"invalid certificate: {e.error_count()} errors", errors=e.errors())
        return self.from_schema(schema)

    def save(self, cert: Certificate, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.write_text(self.dumps(cert), encoding="utf-8")
        logger.info(f"Certificate written to {path}")
        return path

    def load(self, path: Union[str, Path]) -> Certificate:
        return self.loads(Path(path).read_text(encoding="utf-8"))
