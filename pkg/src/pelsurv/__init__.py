"""Pseudo empirical likelihood estimation for stratified samples with
item nonresponse on an ordinal covariate.

The estimators here exploit that the covariate z is observed for every
sampled unit while y is missing for nonrespondents: unit masses are
tilted so that the z-category distribution implied by the respondents
matches the full-sample plug-in estimate, which lets small categories
borrow strength from the whole stratum.  Variances come from a
stratified with-replacement bootstrap with re-imputation.
"""

from .bootstrap import BootstrapResult, bootstrap_variance, confidence_interval, resample
from .data import (
    CategorySpace,
    Diagnostic,
    SampleMeta,
    SampleUnit,
    StratifiedSample,
    StratumMeta,
    load_meta,
    make_strata,
    parse_sample,
    serialize_imputed,
    serialize_sample,
    validate,
)
from .errors import (
    DataError,
    EmptyRespondentCell,
    EstimationError,
    InitialPointRejected,
    NonpositiveDenominator,
    NoRespondentsError,
    ParseError,
    PelsurvError,
    ZeroMassError,
)
from .estimators import (
    EstimateReport,
    cell_mean,
    cell_means,
    estimate,
    fit_mpele,
    overall_mean,
    simple_cell_sample_mean,
    simple_estimators,
)
from .impute import (
    ImputedSample,
    impute_pel_mean,
    impute_pel_random,
    impute_simple_mean,
    impute_simple_random,
    post_imputation_estimates,
)
from .models import (
    CategoryModel,
    ModelParams,
    ProportionalOddsModel,
    cell_probability,
    cell_probability_row,
    model_config,
    model_from_config,
)
from .optimize import SearchConfig, SearchResult, maximize
from .pel import (
    REJECTED,
    CellWeightTable,
    DistributionEstimate,
    PelWeights,
    cell_weight_table,
    constraint_residuals,
    distribution_estimate,
    make_objective,
    objective,
    pel_masses,
)
from .simulate import (
    Population,
    SimulationConfig,
    SimulationReport,
    draw_sample,
    generate_population,
    render_text,
    report_to_dict,
    response_probability,
    run_study,
)

__version__ = "0.1.0"

__all__ = [
    "BootstrapResult",
    "CategoryModel",
    "CategorySpace",
    "CellWeightTable",
    "DataError",
    "Diagnostic",
    "DistributionEstimate",
    "EmptyRespondentCell",
    "EstimateReport",
    "EstimationError",
    "ImputedSample",
    "InitialPointRejected",
    "ModelParams",
    "NonpositiveDenominator",
    "NoRespondentsError",
    "ParseError",
    "PelWeights",
    "PelsurvError",
    "Population",
    "ProportionalOddsModel",
    "REJECTED",
    "SampleMeta",
    "SampleUnit",
    "SearchConfig",
    "SearchResult",
    "SimulationConfig",
    "SimulationReport",
    "StratifiedSample",
    "StratumMeta",
    "ZeroMassError",
    "bootstrap_variance",
    "cell_mean",
    "cell_means",
    "cell_probability",
    "cell_probability_row",
    "cell_weight_table",
    "confidence_interval",
    "constraint_residuals",
    "distribution_estimate",
    "draw_sample",
    "estimate",
    "fit_mpele",
    "generate_population",
    "impute_pel_mean",
    "impute_pel_random",
    "impute_simple_mean",
    "impute_simple_random",
    "load_meta",
    "make_objective",
    "make_strata",
    "maximize",
    "model_config",
    "model_from_config",
    "objective",
    "overall_mean",
    "parse_sample",
    "pel_masses",
    "post_imputation_estimates",
    "render_text",
    "report_to_dict",
    "resample",
    "response_probability",
    "run_study",
    "serialize_imputed",
    "serialize_sample",
    "simple_cell_sample_mean",
    "simple_estimators",
    "validate",
    "__version__",
]
