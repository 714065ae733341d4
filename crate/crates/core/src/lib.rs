//! Score test for the slope of an error-prone covariate in a linear model
//! with possibly high-dimensional, exactly measured controls.

pub mod adaptive;
pub mod data;
pub mod def_test;
pub mod error;
pub mod io;
pub mod linalg;
pub mod lp;
pub mod normal;
pub mod ols;
pub mod penalized;
pub mod sim;

pub use data::{
    pseudo_response, validate_dataset, Dataset, FitResult, Hypothesis, Method, PseudoResponse,
    TestResult,
};
pub use error::{ConstraintFamily, Error, Result};
pub use linalg::Matrix;
pub use lp::{simplex_solve, LpProblem, LpSolution, LpStatus, Relation};
pub use ols::ols_fit;
pub use penalized::{
    default_lambda, penalized_fit, CdConfig, LambdaRate, PenaltyKind, PenaltySpec,
};
pub use adaptive::{
    auto_adaptive_tuning, default_adaptive_tuning, sparse_adaptive_fit, sparse_adaptive_program,
    AdaptiveConstants, AdaptiveKind, AdaptiveTuning,
};
pub use def_test::{
    confidence_region, def_statistic, estimate_sigma_u2_from_replicates, noncentrality, run_test,
    theoretical_power, AdaptiveChoice, AutoGrid, ConfidenceRegion, EstimatorChoice, Grid, GridSpec,
    LambdaChoice, NoncentralityInputs, PenalizedChoice,
};
pub use sim::{
    ar1_covariance, generate, mvn_sample, run_monte_carlo, run_replications, Dgp, Sampler,
    SimDesign, SimReport, Stream, StreamTag,
};
