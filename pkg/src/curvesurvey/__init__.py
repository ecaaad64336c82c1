"""Survey sampling estimators for the mean of a population of curves."""

from .allocate import (
    Allocation,
    StratumSummary,
    allocation_objective,
    manual_allocation,
    optimal_allocation,
    proportional_allocation,
    stratum_summaries,
)
from .bands import ConfidenceBand, build_band, covers, global_scale, pointwise_scale
from .design import SRSWOR, Sample, SamplingDesign, StratifiedSRSWOR, census, design_from_config
from .estimate import (
    CovarianceFunction,
    FunctionalEstimate,
    ht_covariance_estimate,
    ht_estimate,
    ht_mean,
    ht_mean_at,
    stratified_true_covariance,
    stratified_variance_estimate,
    true_covariance,
)
from .mc import ExperimentSpec, McReport, compare_designs, loss_gamma, loss_mu, run_experiment
from .population import (
    CurvePopulation,
    SyntheticSpec,
    TimeGrid,
    estimate_holder_beta,
    generate_synthetic,
    interpolate,
    load_csv,
    population_mean,
    save_csv,
    stratify_by_max_level,
    trapezoid_integral,
)

__all__ = [
    "Allocation",
    "ConfidenceBand",
    "CovarianceFunction",
    "CurvePopulation",
    "ExperimentSpec",
    "FunctionalEstimate",
    "McReport",
    "SRSWOR",
    "Sample",
    "SamplingDesign",
    "StratifiedSRSWOR",
    "StratumSummary",
    "SyntheticSpec",
    "TimeGrid",
    "allocation_objective",
    "build_band",
    "census",
    "compare_designs",
    "covers",
    "design_from_config",
    "estimate_holder_beta",
    "generate_synthetic",
    "global_scale",
    "ht_covariance_estimate",
    "ht_estimate",
    "ht_mean",
    "ht_mean_at",
    "interpolate",
    "load_csv",
    "loss_gamma",
    "loss_mu",
    "manual_allocation",
    "optimal_allocation",
    "pointwise_scale",
    "population_mean",
    "proportional_allocation",
    "run_experiment",
    "save_csv",
    "stratified_true_covariance",
    "stratified_variance_estimate",
    "stratify_by_max_level",
    "stratum_summaries",
    "trapezoid_integral",
    "true_covariance",
]

__version__ = "0.1.0"
