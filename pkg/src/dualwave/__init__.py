"""Hurst exponent estimation for 2D signals from primal and dual wavelet spectra."""

from .errors import DataError, DualwaveError, EstimationError, InputError
from .experiments import (
    DEFAULT_ESTIMATORS,
    Estimator,
    StudyConfig,
    run_feature_study,
    run_mixed_H_experiment,
    run_simulation_study,
)
from .fbm import FbmSpec, fbm_cov, generate_fbm2d, make_rng, sigma2_H
from .filters import FILTER_NAMES, WaveletFilter, make_filter
from .spectra import (
    DualSpectraConfig,
    PrimalSpectraConfig,
    SpectraFit,
    dual_spectra,
    primal_spectra,
    wavelet_entropy,
)
from .stats import (
    Dataset,
    corrected_cv_ttest,
    deviance_test,
    logistic_fit,
    paired_ttest,
    stratified_repeated_cv,
)
from .wavelet import Decomposition, dwt2d, inverse_dwt2d, inverse_ndwt2d, ndwt2d

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "DualwaveError",
    "EstimationError",
    "InputError",
    "DEFAULT_ESTIMATORS",
    "Estimator",
    "StudyConfig",
    "run_feature_study",
    "run_mixed_H_experiment",
    "run_simulation_study",
    "FbmSpec",
    "fbm_cov",
    "generate_fbm2d",
    "make_rng",
    "sigma2_H",
    "FILTER_NAMES",
    "WaveletFilter",
    "make_filter",
    "DualSpectraConfig",
    "PrimalSpectraConfig",
    "SpectraFit",
    "dual_spectra",
    "primal_spectra",
    "wavelet_entropy",
    "Dataset",
    "corrected_cv_ttest",
    "deviance_test",
    "logistic_fit",
    "paired_ttest",
    "stratified_repeated_cv",
    "Decomposition",
    "dwt2d",
    "inverse_dwt2d",
    "inverse_ndwt2d",
    "ndwt2d",
]
