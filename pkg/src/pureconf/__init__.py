"""Self-supervised conformal prediction for Poisson linear inverse problems."""

__version__ = "0.1.0"

from .conformal import (
    CalibrationResult,
    CoverageReport,
    PredictionSet,
    calibrate_self_supervised,
    calibrate_supervised,
    conformal_quantile,
    contains,
    coverage,
    loo_quantile,
    prediction_set,
)
from .estimators import (
    AffineSpectral,
    AnscombeSmooth,
    RichardsonLucyUnrolled,
    estimate,
    jvp_measurement_map,
)
from .linops import (
    ConvolutionKernel,
    ImageGrid,
    LinearOperatorSpec,
    adjoint_apply,
    apply,
    frequency_response,
    gaussian_kernel,
)
from .poisson import Measurement, PoissonForwardModel, intensity, sample_measurement
from .pure import (
    RiskEstimate,
    ScoreMode,
    exact_weighted_diagonal,
    hutchinson_weighted_trace,
    pure,
    supervised_score,
)
