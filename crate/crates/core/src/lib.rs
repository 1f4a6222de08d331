//! Closed Sobol indices by pick-freeze sampling: point estimators, asymptotic
//! covariance and tests, Bennett deviation bounds and a Berry-Esseen coverage
//! certificate for the centered estimator.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod berry_esseen;
pub mod concentration;
pub mod config;
pub mod error;
pub mod estimators;
pub mod hypothesis;
pub mod models;
pub mod rng;
pub mod sampling;
pub mod special;

pub use asymptotics::{asymptotic_ci, gamma_s, gamma_t, CovMatrix, Interval};
pub use berry_esseen::{be_bound_b, be_moments, coverage_bracket, coverage_curve, BEMoments, Bracket, CoverageRow};
pub use concentration::{
    bennett_h, bound_s, bound_t, deviation_curve, estimate_q, BoundReport, BoundSource, QVector, Side, Variant,
};
pub use config::{ConfigFile, DesignConfig, ModelConfig};
pub use error::{Error, Result};
pub use estimators::{
    estimate_full_info, estimate_s, estimate_t, estimate_tilde_s, estimate_with, EstimatorKind, IndexEstimate, MeanMode,
};
pub use hypothesis::{
    build_gn, power_curve, quantile_abs_sum, test_k2, test_linear, NullCov, StatKind, TestProblem, TestResult,
    TestSetup,
};
pub use models::{AnalyticModel, BreguetConstants, DiscreteTable};
pub use sampling::{generate_pick_freeze, Design, InputDistribution, ModelSpec, PickFreezeSample};

/// Version string embedded in every output file.
pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));
