"""Polynomial representations of threshold functions and the batch
algorithms built on them: offline exact/approximate nearest-neighbor
search and exact MAX-SAT, all validated against brute-force oracles."""

__version__ = "0.1.0"

from .maxsat import CnfFormula, MaxSatResult, brute_force_maxsat, max_ksat, maxsat_width_reduce
from .multilinear import (
    FeatureMatrixPair,
    MultilinearPoly,
    eval_all_points,
    expand_symmetric,
    hamming_agreement_substitute,
    matmul,
    split_features,
)
from .neighbors import (
    approx_mst,
    approx_nn,
    hamming_decide,
    l1_to_hamming,
    l2_to_l1,
    offline_hamming_nn,
)
from .points import BinaryPointSet, IntegerPointSet, NeighborReport, brute_force_nn
from .prob_ptf import (
    ProbPtfSample,
    calibrate_c0,
    eval_prob_ptf,
    or_thresholds_det,
    or_thresholds_prob,
    sample_prob_ptf,
)
from .prob_threshold import (
    SampledThresholdPoly,
    WindowPoly,
    empirical_error,
    eval_sampled,
    sample_threshold_poly,
    window_poly,
)
from .randomness import (
    KWiseGenerator,
    Seed,
    Stream,
    kwise_indices,
    new_kwise,
    random_bit_budget,
)
from .univariate import (
    BinomialBasisPoly,
    UnivariatePoly,
    chebyshev,
    discrete_chebyshev,
    eval_exact,
    eval_float_guarded,
    from_binomial_basis,
    ptf_threshold,
    to_binomial_basis,
)

__all__ = [name for name in dir() if not name.startswith("_")]
