"""Numerical toolkit for minimum-attaining perturbations of closed operators.

The library answers three related questions for a representable operator T
(finite matrix, lazy diagonal on l2, or diagonal plus finite rank):

* does ||Tx|| attain its infimum over unit vectors, and at which witness;
* how to construct an arbitrarily small perturbation S so that T + S does
  attain, with certified ||S|| and gap distance;
* how far apart two operators are in the gap metric, computed by
  independent routes that cross-check one another.
"""

from .operators import (
    ConvergesTo,
    DeclaredAccumulation,
    DiagSeq,
    DiagonalOp,
    FiniteRange,
    InconclusiveError,
    MatrixOp,
    NormBound,
    NotRepresentableError,
    OperatorError,
    OperatorRep,
    Periodic,
    RankOneTerm,
    SumOp,
    UnboundedOperatorError,
    Vec,
    add_operators,
    add_rank_one,
    compose_operators,
    constant_seq,
    diagonal_seq,
    list_generators,
    map_seq,
    matrix_op,
    named_diagonal,
    operator_from_json,
    operator_norm,
    operator_to_json,
    scale_shift,
    truncate,
    zero_like,
)
from .spectral import (
    AttainmentCertificate,
    PolarParts,
    SpectrumReport,
    WeylReport,
    essential_spectrum,
    is_minimum_attaining,
    minimum_modulus,
    modulus,
    polar,
    square_root,
    weyl_check,
)
from .gap import (
    DefectPair,
    GapBoundReport,
    GapResult,
    defect_resolvent,
    gap_upper_bound_check,
    operator_gap_closed_form,
    operator_gap_diagonal,
    operator_gap_graph,
    subspace_gap,
)
from .perturbation import (
    PerturbationCase,
    PerturbationResult,
    PerturbationVerification,
    attainment_perturbation,
    attainment_perturbation_positive,
    bounded_below_perturbation,
    near_minimizer,
    rank_one_cap,
    verify_perturbation,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
