import logging
from typing import List, Tuple

from invofactor.algebra import AcceptKind, QuadPoly, Scalar, acceptable, split_roots
from invofactor.core.errors import NotAcceptable, NotAnnihilated
from invofactor.linalg import Mat, annihilates
from invofactor.models import FactorRecord
from invofactor.opcore import LazyOp, RepAut
from invofactor.constructions.cells import PairedCells, tiled_factor

logger = logging.getLogger(__name__)


def scalar_triple_2x2(lam: Scalar, p1: QuadPoly, p2: QuadPoly, p3: QuadPoly) -> Tuple[Mat, Mat, Mat]:
    """
    A, B, C with ABC = λ·I and p_i annihilating the i-th matrix: 1×1 when λ is a
    product of roots, 2×2 when only λ² = N(p1)N(p2)N(p3) holds.
    """
    fld = lam.field
    verdict = acceptable(lam, p1, p2, p3)
    if verdict.kind == AcceptKind.NO:
        raise NotAcceptable(f"{lam} is not acceptable for ({p1}, {p2}, {p3})", lam=str(lam))

    if verdict.kind == AcceptKind.PRODUCT_OF_ROOTS:
        w1, w2, w3 = verdict.witness
        return Mat.scalar(fld, 1, w1), Mat.scalar(fld, 1, w2), Mat.scalar(fld, 1, w3)

    x, _ = split_roots(p1)
    beta, gamma = p2.norm, p3.norm
    mu = p2.trace / beta
    nu = p3.trace / gamma
    B_prime = Mat.from_rows(fld, [[0, -beta.inverse()], [1, mu]])
    C_prime = Mat.from_rows(fld, [[nu, lam.inverse() * x], [-(x.inverse() * gamma.inverse() * lam), 0]])
    B = B_prime.inverse()
    C = C_prime.inverse()
    A = (C_prime @ B_prime).scale(lam)

    for M, p in ((A, p1), (B, p2), (C, p3)):
        if not annihilates(M, p):
            raise NotAnnihilated(f"scalar triple factor is not annihilated by {p}", poly=str(p))
    return A, B, C


def scalar_id_factors(lam: Scalar, polys: List[QuadPoly], space: RepAut, seed: int = 0) -> List[FactorRecord]:
    """λ·id on the basis of `space` as a direct sum of scalar triples, one per cell."""
    p1, p2, p3 = polys
    mats = scalar_triple_2x2(lam, p1, p2, p3)
    size = mats[0].rows
    if size == 1:
        return [
            FactorRecord(LazyOp.scalar(space.field, M[0, 0], annihilator=p, label=f"scalar{n + 1}"), p, f"scalar{n + 1}")
            for n, (M, p) in enumerate(zip(mats, polys))
        ]
    cells = PairedCells(space, seed)
    logger.debug(f"Tiling 2x2 scalar triple for {lam} over {space!r}")
    return [
        FactorRecord(tiled_factor(cells, {2: M}, annihilator=p, label=f"scalar{n + 1}"), p, f"scalar{n + 1}")
        for n, (M, p) in enumerate(zip(mats, polys))
    ]
