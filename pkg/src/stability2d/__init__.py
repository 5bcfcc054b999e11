"""Feature selection by design jittering: stability paths over a grid of
design-noise levels, the baselines they are compared with, and checks of
the irrepresentability bounds under perturbation."""

from .baselines import StabilitySelection, StabilitySelectionSpec, single_fit_select, stability_selection
from .datagen import (
    CovarianceSpec,
    DesignMatrix,
    GroundTruth,
    Standardizer,
    add_observation_noise,
    generate_response,
    nearest_pd,
    projected_covariance,
    sample_mvn,
    standardize,
)
from .jitter import (
    JitterStabilitySelection,
    NoiseGrid,
    SelectionResult,
    StabilityPath,
    delta_average,
    largest_gap_select,
    stability_path,
    top_k_select,
)
from .metrics import f1_score, nogueira_stability
from .selectors import ElasticNetSelector, LassoSelector, SelectorSpec, cv_lambda_1se, fit

__version__ = "0.1.0"
