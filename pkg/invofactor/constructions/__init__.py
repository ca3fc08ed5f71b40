from invofactor.constructions.adjacency import adjacency_free, adjacency_strat
from invofactor.constructions.cells import FiniteRankFactor, FiniteRankLayout, PairedCells, tiled_factor
from invofactor.constructions.invariant import invariant_closure
from invofactor.constructions.killer import kill_dominant
from invofactor.constructions.scalar import scalar_id_factors, scalar_triple_2x2
from invofactor.constructions.shift import ElementaryForm, ShiftPairModel, elementary_factor_pq, shift_form, shift_pair

__all__ = [
    "ElementaryForm",
    "FiniteRankFactor",
    "FiniteRankLayout",
    "PairedCells",
    "ShiftPairModel",
    "adjacency_free",
    "adjacency_strat",
    "elementary_factor_pq",
    "invariant_closure",
    "kill_dominant",
    "scalar_id_factors",
    "scalar_triple_2x2",
    "shift_form",
    "shift_pair",
    "tiled_factor",
]
