"""Coloured-noise models, covariance matrices and maximum likelihood estimation
for geodetic time series."""

from .covariance import (
    CholeskyFactor,
    CovarianceMatrix,
    ToeplitzFactor,
    build_covariance,
    cholesky,
    levinson,
    toeplitz_covariance,
    toeplitz_solve,
)
from .estimator import FitResult, MinimizerOptions, fit_arrays, log_likelihood, mle_fit, nelder_mead, wls_fit
from .exceptions import (
    CollinearityError,
    ConditioningError,
    ConvergenceWarning,
    DomainError,
    EmptyRequestError,
    FactorizationError,
    GeonoiseError,
    ObjectiveError,
    OrderingError,
    ParseError,
    SingularityError,
    SpecificationError,
    TimeSeriesFormatError,
    UnderdeterminedError,
)
from .noise_kernel import (
    FilterCoefficients,
    NoiseKind,
    NoiseModelSpec,
    figgm_filter_coeffs,
    filter_coefficients,
    ggm_filter_coeffs,
    noise_psd,
    pl_filter_coeffs,
    powerlaw_p0,
    psd_ggm,
    psd_powerlaw,
)
from .spectral import Periodogram, dft, fit_power_law_psd, idft, periodogram, welch
from .synthesis import (
    SynthesisRecipe,
    generate_bsg,
    generate_colored_noise,
    mix_flicker_white,
    scale_amplitude,
    synthesize,
    synthesize_noise,
)
from .timeseries import TimeSeries, read_timeseries, write_timeseries
from .trajectory import (
    DesignMatrix,
    Offset,
    Periodic,
    Polynomial,
    TrajectoryModelSpec,
    amp_phase,
    build_design_matrix,
    standard_model,
)

__version__ = "0.1.0"
