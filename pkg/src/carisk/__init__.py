"""Bayesian conditional autoregressive VaR and ES modelling.

A single Skew Exponential Power likelihood covers both dynamic quantile
(CAViaR-style, shape 1) and dynamic expectile (CARE-style, shape 2) models
over several news-impact-curve families, including a penalized B-spline.
Estimation runs an adaptive independence Metropolis-within-Gibbs sampler;
forecasts are one-step-ahead with fixed parameters; backtests cover
coverage, independence, dynamic quantile and bootstrap ES checks.
"""

from .backtest import (
    BacktestReport,
    HitSequence,
    christoffersen_lr_cc,
    dq_test,
    es_bootstrap_test,
    evaluate_forecasts,
    hits,
    kupiec_lr_uc,
    traffic_light,
)
from .data import DataError, ReturnSeries, load_returns, split_series, summary_stats
from .model import (
    ExplosivePathError,
    ModelSpec,
    ParamVector,
    empirical_expectile,
    forecast_path,
    initial_level,
    log_likelihood,
    prepare,
    recurse_g,
)
from .nic import (
    NicSpec,
    PenaltyMatrix,
    basis_matrix,
    bspline_basis,
    knot_vector,
    nic_design,
    nic_eval,
    penalty_quadform,
    second_diff_penalty,
)
from .pipeline import (
    PipelineError,
    PipelineResult,
    RunConfig,
    run_batch,
    run_pipeline,
)
from .risk import (
    CalibrationError,
    CalibrationResult,
    RiskSeries,
    calibrate_nu,
    expectile_to_es,
    extract_var,
    violation_proportion,
)
from .sampler import (
    PosteriorDraws,
    PriorSpec,
    ProposalState,
    SamplerConfig,
    adapt,
    adaptation_step,
    gibbs_update_phi2,
    hpd_interval,
    log_posterior,
    phi2_posterior,
    mh_accept_prob,
    run_chain,
)
from .sep import SepParams, check_loss, sep_cdf, sep_log_pdf

__version__ = "0.1.0"

__all__ = [
    "BacktestReport",
    "CalibrationError",
    "CalibrationResult",
    "DataError",
    "ExplosivePathError",
    "HitSequence",
    "ModelSpec",
    "NicSpec",
    "ParamVector",
    "PenaltyMatrix",
    "PipelineError",
    "PipelineResult",
    "PosteriorDraws",
    "PriorSpec",
    "ProposalState",
    "ReturnSeries",
    "RiskSeries",
    "RunConfig",
    "SamplerConfig",
    "SepParams",
    "adapt",
    "adaptation_step",
    "basis_matrix",
    "bspline_basis",
    "calibrate_nu",
    "check_loss",
    "christoffersen_lr_cc",
    "dq_test",
    "empirical_expectile",
    "es_bootstrap_test",
    "evaluate_forecasts",
    "expectile_to_es",
    "extract_var",
    "forecast_path",
    "gibbs_update_phi2",
    "hits",
    "hpd_interval",
    "initial_level",
    "knot_vector",
    "kupiec_lr_uc",
    "load_returns",
    "log_likelihood",
    "log_posterior",
    "mh_accept_prob",
    "nic_design",
    "nic_eval",
    "penalty_quadform",
    "phi2_posterior",
    "prepare",
    "recurse_g",
    "run_batch",
    "run_chain",
    "run_pipeline",
    "second_diff_penalty",
    "sep_cdf",
    "sep_log_pdf",
    "split_series",
    "summary_stats",
    "traffic_light",
    "violation_proportion",
]
