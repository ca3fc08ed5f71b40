import logging
from typing import Optional

from fastapi import APIRouter, BackgroundTasks, HTTPException, Query

from invofactor.core.config import settings
from invofactor.core.errors import BudgetExceeded, InvofactorError, MalformedInput, Refused
from invofactor.core.normalization import PolyParser
from invofactor.glsearch import product_membership
from invofactor.schemas import (
    AcceptableRequest,
    AcceptableResponse,
    CensusJobRequest,
    CensusOut,
    CertificateSchema,
    ClassifyRequest,
    DecisionOut,
    FactorRequest,
    MembershipOut,
    SearchRequest,
    VerifyRequest,
    VerifyResponse,
    WindowReportSchema,
    parse_matrix,
)
from invofactor.services.census_service import CensusService
from invofactor.services.factorization_service import FactorizationService

logger = logging.getLogger(__name__)

router = APIRouter()


def _http_error(e: InvofactorError) -> HTTPException:
    if isinstance(e, Refused):
        return HTTPException(status_code=409, detail=e.to_dict())
    if isinstance(e, BudgetExceeded):
        return HTTPException(status_code=507, detail=e.to_dict())
    return HTTPException(status_code=422, detail=e.to_dict())


@router.post("/acceptable", response_model=AcceptableResponse, response_model_exclude_none=True)
async def check_acceptable(body: AcceptableRequest):
    """
    Whether λ is a product of roots of the three polynomials, or satisfies λ² = N(p1)N(p2)N(p3).
    """
    try:
        fld = PolyParser.parse_field(body.field)
        lam = PolyParser.parse_scalar(str(body.lam), fld)
        polys = PolyParser.parse_poly_list(body.polys, fld)
        verdict = FactorizationService().acceptable(lam, polys)
    except InvofactorError as e:
        raise _http_error(e)
    return verdict.to_dict()


@router.post("/classify", response_model=DecisionOut)
async def classify(body: ClassifyRequest):
    try:
        u = body.operator.to_domain()
        decision = FactorizationService().classify(u, body.flavor)
    except InvofactorError as e:
        raise _http_error(e)
    return decision.to_dict()


@router.post("/factor", response_model=CertificateSchema)
def factor(body: FactorRequest):
    """
    Factor the operator into three or four factors annihilated by the given polynomials.
    Refusals (the necessary conditions fail) come back as 409 with the reason.
    """
    try:
        u = body.operator.to_domain()
        polys = PolyParser.parse_poly_list(body.polys, u.field)
        service = FactorizationService(window=body.window)
        cert = service.factor(u, polys, seed=body.seed)
        return service.certificates.to_schema(cert)
    except InvofactorError as e:
        logger.warning(f"factor request failed: {e.code}: {e.message}")
        raise _http_error(e)


@router.post("/verify", response_model=VerifyResponse)
def verify(body: VerifyRequest):
    try:
        u = body.operator.to_domain()
        service = FactorizationService()
        cert = service.certificates.from_schema(body.certificate)
        report = service.certificates.verify(u, cert, radius=body.window)
    except InvofactorError as e:
        raise _http_error(e)
    return VerifyResponse(passed=report.passed, reports=[WindowReportSchema.from_domain(r) for r in report.reports])


@router.post("/search", response_model=MembershipOut, response_model_exclude_none=True)
def search(body: SearchRequest):
    """
    Exhaustive membership of a matrix in the set of (p1,...,pk)-products over a prime field.
    """
    try:
        fld = PolyParser.parse_field(body.field)
        if not fld.is_prime:
            raise MalformedInput("search runs over prime fields only")
        T = parse_matrix(body.target, fld)
        polys = PolyParser.parse_poly_list(body.polys, fld)
        result = product_membership(T, polys, budget=body.budget)
    except InvofactorError as e:
        raise _http_error(e)
    return result.to_dict()


@router.get("/census", response_model=CensusOut)
def get_census(
    n: int = Query(2, ge=1, le=2),
    q: int = Query(3, ge=2, le=7),
    k: int = Query(4, ge=1, le=4),
    poly: str = "t^2-1",
    budget: Optional[int] = Query(None, ge=1),
):
    """
    Census computed on the spot; only small groups are accepted here.
    """
    try:
        result = CensusService(budget=budget).run(n, q, k, poly)
    except InvofactorError as e:
        raise _http_error(e)
    return result.header()


@router.post("/admin/census")
async def trigger_census(body: CensusJobRequest, background_tasks: BackgroundTasks):
    """
    Run a census in the background and write it to the census directory.
    """
    service = CensusService(budget=body.budget)
    background_tasks.add_task(service.run_and_store, body.n, body.q, body.k, body.poly)
    return {"message": "Census triggered in background", "directory": settings.CENSUS_DIR}
