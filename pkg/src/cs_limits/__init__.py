"""Information-theoretic limits and decoders for noisy sparse recovery."""
from .bounds import (BoundReport, approx_support_sufficient, bayes_explicit_corollary, bayes_thresholds,
                     binary_entropy, fano_continuous_distortion_lb, fano_discrete_distortion_lb,
                     fano_kl_lb, fano_kl_mean_lb, fano_uniform_lb, mi_cap, necessary_threshold_input,
                     necessary_thresholds_output, rd_binary_hamming, rd_mixture_gaussian,
                     sensing_capacity_ratio, sufficient_thresholds_deterministic,
                     sufficient_thresholds_output)
from .decoders import (Codebook, MLSupportDecoder, RDCodebookQuantizer, build_codebook, codebook_error_upper_bound,
                       greedy_cover_codebook, ml_support_decode, rd_min_distance_decode,
                       verify_event_bounds, verify_superposition_containment)
from .exceptions import BudgetExceededError, ConvergenceError, CoverageWarning, OutOfRegimeError
from .harness import ExperimentConfig, ExperimentResult, phase_diagram, run_experiment, verify_fano
from .model import (BayesPrior, Channel, Ensemble, Measurement, Metric, PriorKind, SensingInstance,
                    SignalClass, SignalKind, SparseSignal, apply_channel, distortion, measure,
                    sample_matrix, sample_signal)
from .spectral import (certify, concentration_certificates, sigma_g_min, sigma_g_min_sampled,
                       verify_concentration)

__version__ = "0.1.0"
