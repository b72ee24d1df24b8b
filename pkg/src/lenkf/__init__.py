"""Ensemble Kalman samplers with Langevin dynamics.

Scalable posterior sampling for linear and nonlinear inverse problems
and for sequential data assimilation, built around forecast/analysis
updates whose stationary law is the target posterior rather than a
point estimate.  Ships the classical EnKF and stochastic-gradient MCMC
baselines for comparison, plus synthetic data generators, diagnostics
and a config-driven experiment CLI.
"""

__version__ = "0.1.0"

from .errors import (
    BurnInTooLarge,
    ConfigInvalid,
    DimensionMismatch,
    DimensionTooSmall,
    EmptyInput,
    EmptyPool,
    EnsembleTooSmall,
    IndivisibleBatch,
    LengthMismatch,
    LenkfError,
    NotSPD,
    StreamExhausted,
    TooFewSamples,
)
from .numkit import (
    CovSpec,
    DenseSPD,
    Diagonal,
    PhiloxCursor,
    RngStream,
    ScaledIdentity,
    gaussian_w2,
    log_sum_exp,
    sample_gaussian,
    solve_spd,
    wasserstein2_1d,
)
from .schedule import Constant, LearningRateSchedule, PolyDecay
from .models import (
    GaussianPrior,
    LinearForward,
    Lorenz96Config,
    Lorenz96Data,
    MixtureGaussianPrior,
    OneNeuronDataset,
    OneNeuronForward,
    RegressionDataset,
    StateSpaceModel,
    generate_lorenz96,
    generate_one_neuron,
    generate_regression,
    load_dataset,
    lorenz96_rhs,
    mixture_log_prior_grad,
    regression_model,
    rk4_step,
    save_lorenz96,
    save_regression,
    selection_matrix,
)
from .enkf import Ensemble, enkf_analysis, enkf_step, ensemble_gain
from .records import MetricRow, EventRow, RecordSpec, RunRecord, read_csv_rows
from .inverse import (
    InverseResult,
    augmented_grad,
    kalman_gain,
    lenkf_analysis,
    lenkf_forecast,
    run_linear_inverse,
    run_nonlinear_inverse,
    sgrld_drift,
)
from .assim import (
    AssimConfig,
    AssimResult,
    MeasurementAugmentation,
    ResampleDraw,
    StagePool,
    assim_forecast,
    augment_nonlinear_measurement,
    importance_resample,
    run_assimilation,
    run_enkf_comparison,
    stage_handoff,
)
from .baselines import (
    BaselineConfig,
    BaselineResult,
    psgld_step,
    run_baseline,
    sgld_step,
    sgnht_step,
    stochastic_gradient,
)
from .metrics import (
    coverage_probability,
    ess,
    inclusion_probability,
    posterior_mean_estimate,
    rmse_t,
    stage_window_mean,
)
from .experiments import (
    execute_experiment,
    load_preset,
    preset_names,
    validate_config,
)

__all__ = [
    "__version__",
    # errors
    "LenkfError",
    "NotSPD",
    "DimensionMismatch",
    "DimensionTooSmall",
    "EmptyInput",
    "LengthMismatch",
    "IndivisibleBatch",
    "EnsembleTooSmall",
    "EmptyPool",
    "TooFewSamples",
    "BurnInTooLarge",
    "StreamExhausted",
    "ConfigInvalid",
    # numerics and rng
    "CovSpec",
    "ScaledIdentity",
    "Diagonal",
    "DenseSPD",
    "RngStream",
    "PhiloxCursor",
    "solve_spd",
    "sample_gaussian",
    "log_sum_exp",
    "wasserstein2_1d",
    "gaussian_w2",
    # schedules
    "LearningRateSchedule",
    "Constant",
    "PolyDecay",
    # models and data
    "MixtureGaussianPrior",
    "GaussianPrior",
    "mixture_log_prior_grad",
    "StateSpaceModel",
    "lorenz96_rhs",
    "rk4_step",
    "Lorenz96Config",
    "Lorenz96Data",
    "generate_lorenz96",
    "selection_matrix",
    "RegressionDataset",
    "regression_model",
    "generate_regression",
    "LinearForward",
    "OneNeuronForward",
    "OneNeuronDataset",
    "generate_one_neuron",
    "save_regression",
    "save_lorenz96",
    "load_dataset",
    # classical EnKF
    "Ensemble",
    "ensemble_gain",
    "enkf_analysis",
    "enkf_step",
    # records
    "MetricRow",
    "EventRow",
    "RecordSpec",
    "RunRecord",
    "read_csv_rows",
    # inverse-problem samplers
    "InverseResult",
    "kalman_gain",
    "lenkf_forecast",
    "lenkf_analysis",
    "sgrld_drift",
    "augmented_grad",
    "run_linear_inverse",
    "run_nonlinear_inverse",
    # assimilation
    "AssimConfig",
    "AssimResult",
    "StagePool",
    "ResampleDraw",
    "importance_resample",
    "assim_forecast",
    "stage_handoff",
    "run_assimilation",
    "run_enkf_comparison",
    "MeasurementAugmentation",
    "augment_nonlinear_measurement",
    # baselines
    "BaselineConfig",
    "BaselineResult",
    "sgld_step",
    "psgld_step",
    "sgnht_step",
    "stochastic_gradient",
    "run_baseline",
    # metrics
    "rmse_t",
    "coverage_probability",
    "inclusion_probability",
    "posterior_mean_estimate",
    "ess",
    "stage_window_mean",
    # experiments
    "validate_config",
    "execute_experiment",
    "preset_names",
    "load_preset",
]
