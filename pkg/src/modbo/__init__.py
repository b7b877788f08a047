"""Bayesian optimization with modulated (latent-input) Gaussian-process surrogates."""

from .acq_optimizer import CoverConfig, delta_cover_maximize
from .acquisition import AcquisitionSpec, MarginalAcquisition, ei, lcb_score, marginal_acquisition
from .benchmarks import Benchmark, benchmark_names, estimate_extrema, get_benchmark
from .bo_driver import BOConfig, RunTrace, rescale_from_unit, rescale_to_unit, run_bo
from .errors import (
    DomainError,
    ModboError,
    NumericalError,
    ParameterError,
    ProtocolError,
    SamplerError,
    StructuralError,
)
from .metrics import gap, mark_equivalent_to_best, regret_curve, wilcoxon_two_sided
from .samplers import ChainConfig, PosteriorEnsemble, chain_profile, infer_posterior
from .surrogates import Dataset, SurrogateSample, Variant, log_joint, log_joint_grad, predict

__version__ = "0.1.0"
