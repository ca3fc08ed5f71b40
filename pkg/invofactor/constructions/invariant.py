from typing import List, Mapping, Sequence

from invofactor.core.errors import HypothesisViolation
from invofactor.linalg import SparseEchelon
from invofactor.opcore import LinComb, Operator, as_lazy


def invariant_closure(a: Operator, b: Operator, c: Operator, W: Sequence[Mapping]) -> List[LinComb]:
    """
    Basis of W + a(W) + b(W) + c(W) + ba(W) + cb(W) + ac(W) + ca(W) for quadratic
    a, b, c whose product is a scalar plus an operator with image in W.
    """
    a, b, c = as_lazy(a), as_lazy(b), as_lazy(c)
    W = [LinComb(w) for w in W]
    fld = a.field

    base = SparseEchelon(fld, track=False)
    for w in W:
        base.insert(w)
    dim_w = len(base)

    images = list(W)
    for first, second in ((None, a), (None, b), (None, c), (a, b), (b, c), (c, a), (a, c)):
        for w in W:
            vec = w if first is None else first.apply_vec(w)
            images.append(second.apply_vec(vec))

    echelon = SparseEchelon(fld, track=False)
    basis = [vec for vec in images if echelon.insert(vec) is None]
    if len(basis) > 8 * dim_w:
        raise HypothesisViolation(f"closure has dimension {len(basis)} > 8·{dim_w}")
    for op in (a, b, c):
        for vec in basis:
            if not echelon.contains(op.apply_vec(vec)):
                raise HypothesisViolation(f"closure is not stable under {op.label}", label=op.label)
    return basis
