"""Critically sampled M-band spectral filter bank for graph signals.

Two transform routes share one coefficient format: an exact route built on
the dense eigendecomposition (perfect reconstruction, small graphs) and a
fast route built on polynomial filters, randomized vertex sampling, and
iterative interpolation (large graphs, approximate). Band layout comes from
an estimated cumulative spectral density, optionally adapted to one signal.
"""

from .chebyshev import (ChebyshevBasisCache, PolynomialFilter,
                        allpass_coefficients, apply_filter, build_basis_cache,
                        chebyshev_apply, chebyshev_fit, estimate_eigencount,
                        jackson_damping, make_polynomial_filter,
                        step_filter_coefficients)
from .coeffs import (AnalysisCoefficients, read_coefficients_csv,
                     write_coefficients_csv)
from .density import SpectralDensityEstimate, cdf_inverse, estimate_cdf
from .design import (SPACINGS, FilterBankDesign, adjust_band_ends,
                     build_filter_bank, initial_band_ends)
from .exact import (EigenDecomposition, SpectralPartition, VertexPartition,
                    atom, band_ends_from_eigenvalues, build_dictionary,
                    dense_eigendecomposition, exact_analyze, exact_synthesize,
                    greedy_uniqueness_set, omp_sparse_code, partition_spectrum,
                    partition_uniqueness_sets)
from .graph import (Graph, LaplacianOperator, build_laplacian,
                    estimate_lambda_max, generate_graph, generate_signal,
                    load_graph, load_signal, validate_signal, write_edge_list,
                    write_signal)
from .sampling import (BandPlan, SamplingPlan, adapt_weights_to_signal,
                       allocate_counts, build_sampling_plan, compute_weights,
                       fast_analyze, sample_without_replacement)
from .synthesis import (PenaltyFilter, SynthesisConfig, build_penalty,
                        pcg_solve, solve_band, synthesize_fast)
from .util import InputError, NumericalError, nmse

__version__ = "0.1.0"

__all__ = [
    "AnalysisCoefficients",
    "BandPlan",
    "ChebyshevBasisCache",
    "EigenDecomposition",
    "FilterBankDesign",
    "Graph",
    "InputError",
    "LaplacianOperator",
    "NumericalError",
    "PenaltyFilter",
    "PolynomialFilter",
    "SPACINGS",
    "SamplingPlan",
    "SpectralDensityEstimate",
    "SpectralPartition",
    "SynthesisConfig",
    "VertexPartition",
    "adapt_weights_to_signal",
    "adjust_band_ends",
    "allocate_counts",
    "allpass_coefficients",
    "apply_filter",
    "atom",
    "band_ends_from_eigenvalues",
    "build_basis_cache",
    "build_dictionary",
    "build_filter_bank",
    "build_laplacian",
    "build_penalty",
    "build_sampling_plan",
    "cdf_inverse",
    "chebyshev_apply",
    "chebyshev_fit",
    "compute_weights",
    "dense_eigendecomposition",
    "estimate_cdf",
    "estimate_eigencount",
    "estimate_lambda_max",
    "exact_analyze",
    "exact_synthesize",
    "fast_analyze",
    "generate_graph",
    "generate_signal",
    "greedy_uniqueness_set",
    "initial_band_ends",
    "jackson_damping",
    "load_graph",
    "load_signal",
    "make_polynomial_filter",
    "nmse",
    "omp_sparse_code",
    "partition_spectrum",
    "partition_uniqueness_sets",
    "pcg_solve",
    "read_coefficients_csv",
    "sample_without_replacement",
    "solve_band",
    "step_filter_coefficients",
    "synthesize_fast",
    "validate_signal",
    "write_coefficients_csv",
    "write_edge_list",
    "write_signal",
]
