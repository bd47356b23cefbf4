//! Nonparametric detection of differential item functioning (DIF) by
//! comparing kernel-smoothed item response curves of two groups.
//!
//! The pipeline for one item is
//!
//! 1. score every respondent by the standardized total score,
//! 2. smooth the item responses of each group on the score with
//!    nearest-neighbor kernel weights ([`kernel`]),
//! 3. average the weighted curve difference over the common support
//!    ([`support`], [`statistic`]),
//! 4. judge it either by its asymptotic normal law or by a wild bootstrap
//!    ([`bootstrap`]).
//!
//! A logistic-regression likelihood-ratio test ([`logistic`]) serves as the
//! parametric baseline, and [`harness`] runs Monte Carlo comparisons on
//! simulated data ([`simulation`]).

pub mod analysis;
pub mod bootstrap;
pub mod data;
pub mod dist;
pub mod error;
pub mod harness;
pub mod kde;
pub mod kernel;
pub mod logistic;
pub mod report;
pub mod rng;
pub mod simulation;
pub mod statistic;
pub mod support;

pub use analysis::{analyze, curve_data, AnalysisConfig, ItemOutcome};
pub use bootstrap::{wild_bootstrap_pvalue, BootstrapConfig};
pub use data::{load_response_csv, split_groups, standardized_total_score, ColumnSpec, Group, GroupedScores, ReferenceCoding, ResponseMatrix};
pub use error::{DifError, Result};
pub use harness::{run_condition, run_grid, ConditionMetrics, ExperimentGrid, Report};
pub use kernel::{bandwidth, irc_estimate, nn_weights, IrcEstimate, KernelKind, SmoothingConfig};
pub use logistic::{lrt_dif, LrtResult};
pub use simulation::{dif_scenario, generate_responses, DifSource, ItemParams, Scenario};
pub use statistic::{DifContext, DifResult, Method};
pub use support::{common_support, reduced_support, SupportPolicy, SupportSet};
