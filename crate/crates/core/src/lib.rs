//! Conditional relative risks for longitudinal binary outcomes.
//!
//! In a cohort where a binary outcome is measured at several visits, the
//! crude relative risk at visit `j` ignores what happened to each subject at
//! an earlier visit `k`. This crate works with the two conditional measures
//!
//! * `RR1 = Pr(Y_j = 1 | Y_k = 1, exposed) / Pr(Y_j = 1 | Y_k = 1, non-exposed)`
//! * `RR0 = Pr(Y_j = 1 | Y_k = 0, exposed) / Pr(Y_j = 1 | Y_k = 0, non-exposed)`
//!
//! and provides:
//!
//! * [`prob`]: the correlated Bernoulli pair model (conditional and joint
//!   probabilities, admissible correlation range);
//! * [`measures`]: point estimates and log-scale Wald intervals from stratified
//!   2x2 tables, plus phi correlations and population plug-in values;
//! * [`coverage`]: exact coverage probability of those intervals, obtained by
//!   enumerating every 2x2 table and summing binomial probabilities;
//! * [`mc`]: a Monte-Carlo cross-check with a counter-based generator;
//! * [`comparison`]: crude RR against RR1/RR0 over parameter grids;
//! * [`ingest`]: wide/long CSV ingestion and the per-visit analysis report;
//! * [`cli`]: the `crr` command-line front end.
//!
//! Runnable examples for each capability live in `examples/`.

pub mod cli;
pub mod comparison;
pub mod coverage;
pub mod format;
pub mod ingest;
pub mod mc;
pub mod measures;
pub mod prob;

pub use comparison::{compare_grid, CompareAxes, ComparisonRecord};
pub use coverage::{
    binom_log_pmf, exact_coverage, run_grid, true_conditional_risks, CoverageResult, GridRecord,
    Scenario, ScenarioError, ScenarioGrid, Stratum,
};
pub use ingest::{analyze, build_conditional_tables, parse_dataset, LongitudinalDataset};
pub use mc::{mc_coverage, simulate_cohort, CohortSpec, MarginModel, McCoverage};
pub use measures::{
    phi_correlations, plug_in_rr0, plug_in_rr1, rr0_estimate, rr1_estimate, rr_crude, MeasureError,
    RiskRatioEstimate, StratifiedTables, StratumTable,
};
pub use prob::{BernoulliPairParams, ProbError};

/// Identifier written into every CSV produced by the command-line tool.
pub const BUILD_ID: &str = concat!("crr ", env!("CARGO_PKG_VERSION"));
