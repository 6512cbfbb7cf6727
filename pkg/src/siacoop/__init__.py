"""Interference alignment with partial receiver cooperation.

A verification-grade simulator of the K = M + 2 alignment scheme:
symbol-extended diagonal channels, the successive elimination that
isolates one interferer per cooperating subspace, exponent-indexed
transmit bases whose containment conditions hold as exact column
identities, decodability rank certificates over a large prime field,
and a finite-SNR link simulation whose rate slope estimates the
achieved degrees of freedom.
"""

__version__ = "0.1.0"

from .channel import (ChannelSet, CooperationSet, SchemeParams, build_params,
                      cooperation_set, sample_channels)
from .errors import (DegenerateChannelError, ResourceBoundError,
                     SiaInvariantError)
from .precoding import (AlignmentReport, GeneratorSet, PrecodingBasis,
                        build_all_bases, build_basis, check_alignment,
                        enumerate_indices, extract_generators)
from .rings import (MERSENNE61, DenseMatrix, DiagonalOperator, ScalarRing,
                    diag_compose, diag_linear, diag_pow, rank)
from .sia import (DecoderState, ProcessedState, cramer_check, sia_oracle,
                  sia_run, sia_step, stack_decoder)
from .verifier import (DofReport, RankReport, assemble_condition,
                       assemble_full_matrix, check_rank_conditions,
                       dof_table)
from .linksim import RateReport, estimate_dof_slope, run_link

__all__ = [
    "__version__",
    "ScalarRing", "DiagonalOperator", "DenseMatrix", "MERSENNE61",
    "diag_compose", "diag_linear", "diag_pow", "rank",
    "SchemeParams", "CooperationSet", "ChannelSet",
    "build_params", "cooperation_set", "sample_channels",
    "DecoderState", "ProcessedState",
    "stack_decoder", "sia_step", "sia_run", "sia_oracle", "cramer_check",
    "GeneratorSet", "PrecodingBasis", "AlignmentReport",
    "extract_generators", "enumerate_indices", "build_basis",
    "build_all_bases", "check_alignment",
    "RankReport", "DofReport",
    "assemble_condition", "assemble_full_matrix", "check_rank_conditions",
    "dof_table",
    "RateReport", "run_link", "estimate_dof_slope",
    "ResourceBoundError", "DegenerateChannelError", "SiaInvariantError",
]
