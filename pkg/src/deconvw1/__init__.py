"""Deconvolution under the L1-Wasserstein metric.

A library and benchmark CLI for recovering the law of a latent signal X
from noisy observations Y = X + eps with a known ordinary-smooth error law:
a spectral kernel deconvolution estimator, a Dirichlet-process mixture
sampler for Laplace noise, exact and max-sliced Wasserstein machinery, and
numerical verifiers for the supporting inequalities.
"""

from .errors import (
    BandTooWide,
    ConfigError,
    DeconvError,
    DimensionError,
    DomainError,
    EmptyChain,
    GridMismatch,
    GridTooNarrow,
    ImagTooLarge,
    NotUnitVector,
    NumericalUnderflow,
    PreconditionViolated,
    SpectralDivergence,
    SupportMismatch,
    TooFewPoints,
    TooLarge,
    UnsupportedModel,
)
from .grids import GridFunction1D, GridSpec, cumulative_cdf, grid_fft, grid_ifft
from .kernels import KernelSpec, bump_chi, fractional_derivative, spatial_kernel, spectrum
from .measures import EmpiricalMeasure, project_measure
from .mixtures import GaussianMixture1D
from .noise import NoiseModel, cf, density, reciprocal_cf, sample_noise, verify_ordinary_smooth
from .wasserstein import (
    DirectionNet,
    build_direction_net,
    exact_w1_small,
    max_sliced_w1,
    w1_cdf,
    w1_empirical_1d,
)

__version__ = "0.1.0"

from .deconv import (  # noqa: E402  (deconv imports wasserstein)
    DeconvConfig,
    DeconvEstimate,
    deconvolve,
    deconvolve_density_1d,
    default_bandwidth,
    empirical_cf,
    project_to_cdf,
    sliced_raw_cdf,
    w1_risk,
)
from .dpm import (  # noqa: E402
    ChainSummary,
    DPMPrior,
    DPMState,
    geweke_test,
    gibbs_sweep,
    init_state,
    posterior_mean_mixing,
    posterior_predictive_density,
    run_chain,
)

__all__ = [
    "BandTooWide",
    "ChainSummary",
    "ConfigError",
    "DPMPrior",
    "DPMState",
    "DeconvConfig",
    "DeconvError",
    "DeconvEstimate",
    "DimensionError",
    "DirectionNet",
    "DomainError",
    "EmptyChain",
    "EmpiricalMeasure",
    "GaussianMixture1D",
    "GridFunction1D",
    "GridMismatch",
    "GridSpec",
    "GridTooNarrow",
    "ImagTooLarge",
    "KernelSpec",
    "NoiseModel",
    "NotUnitVector",
    "NumericalUnderflow",
    "PreconditionViolated",
    "SpectralDivergence",
    "SupportMismatch",
    "TooFewPoints",
    "TooLarge",
    "UnsupportedModel",
    "build_direction_net",
    "bump_chi",
    "cf",
    "cumulative_cdf",
    "deconvolve",
    "deconvolve_density_1d",
    "default_bandwidth",
    "density",
    "empirical_cf",
    "exact_w1_small",
    "fractional_derivative",
    "geweke_test",
    "gibbs_sweep",
    "grid_fft",
    "grid_ifft",
    "init_state",
    "max_sliced_w1",
    "posterior_mean_mixing",
    "posterior_predictive_density",
    "project_measure",
    "project_to_cdf",
    "reciprocal_cf",
    "run_chain",
    "sample_noise",
    "sliced_raw_cdf",
    "spatial_kernel",
    "spectrum",
    "verify_ordinary_smooth",
    "w1_cdf",
    "w1_empirical_1d",
    "w1_risk",
]
