"""
Domain result objects shared by the pipelines, the services and the API.
"""
import enum
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Union

from invofactor.algebra import QuadPoly, Scalar
from invofactor.opcore import CyclicReport, LazyOp, RepAut, Relabeling, Window, WindowReport


class Flavor(str, enum.Enum):
    INVOLUTIONS = "involutions"
    UNIPOTENTS = "unipotents"
    MIXED = "mixed"
    INVOLUTION_UNIPOTENTS = "involution-unipotents"


@dataclass
class Decision:
    """Verdict of a classification: product or not, and which condition fired."""

    product: bool
    flavor: Flavor
    condition: Optional[str] = None
    reasons: List[str] = field(default_factory=list)
    dominant_eigenvalue: Optional[Scalar] = None
    induced_det: Optional[Scalar] = None

    def to_dict(self) -> dict:
        return {
            "product": self.product,
            "flavor": self.flavor.value,
            "condition": self.condition,
            "reasons": list(self.reasons),
            "dominant_eigenvalue": None if self.dominant_eigenvalue is None else str(self.dominant_eigenvalue),
            "induced_det": None if self.induced_det is None else str(self.induced_det),
        }


@dataclass
class AdjacentPair:
    """a with p(a) = 0 and v = a∘u, plus the evidence that v is elementary (when claimed)."""

    a: LazyOp
    v: LazyOp
    evidence: List[CyclicReport] = field(default_factory=list)
    components: Any = None
    aut: Optional[RepAut] = None
    relabeling: Optional[Relabeling] = None
    notes: Dict[str, Any] = field(default_factory=dict)


@dataclass
class FactorRecord:
    op: LazyOp
    annihilator: QuadPoly
    label: str

    def to_dict(self) -> dict:
        return {"label": self.label, "annihilator": str(self.annihilator)}


@dataclass
class Certificate:
    target: Union[RepAut, LazyOp]
    polys: List[QuadPoly]
    factors: List[FactorRecord]
    window: Window
    reports: List[WindowReport] = field(default_factory=list)
    provenance: Dict[str, Any] = field(default_factory=dict)
    evidence: List[CyclicReport] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.reports) and all(r.passed for r in self.reports)

    @property
    def ops(self) -> List[LazyOp]:
        return [f.op for f in self.factors]
