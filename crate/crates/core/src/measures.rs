//! Relative-risk estimators and their log-scale confidence intervals.
//!
//! Counts follow the usual 2x2 layout at visit `j`:
//!
//! ```text
//!                 outcome yes   outcome no   total
//! exposed              a             b        a + b
//! non-exposed          c             d        c + d
//! ```
//!
//! A [`StratifiedTables`] holds one such table for subjects with `Y_k = 1`
//! and one for subjects with `Y_k = 0`. All intervals are Wald intervals for
//! `ln RR` with variance `(1 - p_E)/(n_E p_E) + (1 - p_N)/(n_N p_N)`,
//! exponentiated back. Zero cells are errors; no continuity correction is
//! applied.

use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::prob::{cond_prob_given0, cond_prob_given1, BernoulliPairParams, ProbError};

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum MeasureError {
    #[error("degenerate table: {0}")]
    DegenerateTable(&'static str),
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(&'static str),
    #[error("measure undefined: non-exposed conditional probability is zero")]
    UndefinedMeasure,
    #[error("confidence level {0} is not in (0, 1)")]
    InvalidLevel(f64),
    #[error(transparent)]
    Prob(#[from] ProbError),
}

/// One exposure-by-outcome table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct StratumTable {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl StratumTable {
    pub const fn new(a: u64, b: u64, c: u64, d: u64) -> Self {
        Self { a, b, c, d }
    }

    /// Row total of the exposed group, `a + b`.
    pub fn n_exposed(&self) -> u64 {
        self.a + self.b
    }

    /// Row total of the non-exposed group, `c + d`.
    pub fn n_nonexposed(&self) -> u64 {
        self.c + self.d
    }

    pub fn total(&self) -> u64 {
        self.n_exposed() + self.n_nonexposed()
    }

    /// Same table with the exposure rows exchanged.
    pub fn swapped(&self) -> Self {
        Self::new(self.c, self.d, self.a, self.b)
    }

    pub fn has_zero_cell(&self) -> bool {
        self.a == 0 || self.b == 0 || self.c == 0 || self.d == 0
    }
}

/// The two tables at visit `j`, split by the outcome at visit `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct StratifiedTables {
    /// Subjects with `Y_k = 1`.
    pub stratum1: StratumTable,
    /// Subjects with `Y_k = 0`.
    pub stratum0: StratumTable,
}

impl StratifiedTables {
    pub const fn new(stratum1: StratumTable, stratum0: StratumTable) -> Self {
        Self { stratum1, stratum0 }
    }

    pub fn n_exposed(&self) -> u64 {
        self.stratum1.n_exposed() + self.stratum0.n_exposed()
    }

    pub fn n_nonexposed(&self) -> u64 {
        self.stratum1.n_nonexposed() + self.stratum0.n_nonexposed()
    }

    /// Unstratified table at visit `j`.
    pub fn collapsed(&self) -> StratumTable {
        let (s1, s0) = (&self.stratum1, &self.stratum0);
        StratumTable::new(s1.a + s0.a, s1.b + s0.b, s1.c + s0.c, s1.d + s0.d)
    }

    pub fn swapped(&self) -> Self {
        Self::new(self.stratum1.swapped(), self.stratum0.swapped())
    }
}

/// A risk ratio with its confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskRatioEstimate {
    pub point: f64,
    /// Standard error of `ln point`.
    pub log_se: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub level: f64,
}

impl RiskRatioEstimate {
    /// Builds the interval `point * exp(-/+ z * log_se)`.
    pub fn new(point: f64, log_se: f64, level: f64) -> Result<Self, MeasureError> {
        let z = z_quantile(level)?;
        Ok(Self {
            point,
            log_se,
            ci_lower: point * (-z * log_se).exp(),
            ci_upper: point * (z * log_se).exp(),
            level,
        })
    }

    pub fn covers(&self, value: f64) -> bool {
        self.ci_lower <= value && value <= self.ci_upper
    }
}

/// Two-sided standard normal critical value `z_{1 - alpha/2}` for `level = 1 - alpha`.
pub fn z_quantile(level: f64) -> Result<f64, MeasureError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(MeasureError::InvalidLevel(level));
    }
    Ok(Normal::standard().inverse_cdf(1.0 - (1.0 - level) / 2.0))
}

/// Delta-method variance of `ln(p_hat)` for `p_hat = events / n`.
#[inline]
pub fn log_risk_variance(events: u64, n: u64) -> f64 {
    let p = events as f64 / n as f64;
    (1.0 - p) / (n as f64 * p)
}

/// Point estimate and log-scale standard error from the four numbers the
/// interval actually depends on.
fn ratio_from_counts(
    a: u64,
    n_exposed: u64,
    c: u64,
    n_nonexposed: u64,
) -> Result<(f64, f64), MeasureError> {
    if n_exposed == 0 || n_nonexposed == 0 {
        return Err(MeasureError::DegenerateTable("empty exposure row"));
    }
    if a == 0 {
        return Err(MeasureError::DegenerateTable("no events among exposed"));
    }
    if c == 0 {
        return Err(MeasureError::DegenerateTable("no events among non-exposed"));
    }
    let p_exposed = a as f64 / n_exposed as f64;
    let p_nonexposed = c as f64 / n_nonexposed as f64;
    let log_se = (log_risk_variance(a, n_exposed) + log_risk_variance(c, n_nonexposed)).sqrt();
    Ok((p_exposed / p_nonexposed, log_se))
}

fn estimate_table(table: &StratumTable, level: f64) -> Result<RiskRatioEstimate, MeasureError> {
    let (point, log_se) =
        ratio_from_counts(table.a, table.n_exposed(), table.c, table.n_nonexposed())?;
    RiskRatioEstimate::new(point, log_se, level)
}

/// Crude relative risk of a single (unstratified) table.
pub fn rr_crude(table: &StratumTable, level: f64) -> Result<RiskRatioEstimate, MeasureError> {
    estimate_table(table, level)
}

/// `RR1` estimate from the `Y_k = 1` stratum.
pub fn rr1_estimate(
    tables: &StratifiedTables,
    level: f64,
) -> Result<RiskRatioEstimate, MeasureError> {
    estimate_table(&tables.stratum1, level)
}

/// `RR0` estimate from the `Y_k = 0` stratum.
pub fn rr0_estimate(
    tables: &StratifiedTables,
    level: f64,
) -> Result<RiskRatioEstimate, MeasureError> {
    estimate_table(&tables.stratum0, level)
}

/// Which denominator to use for the non-exposed correlation estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RhoFormula {
    /// Phi coefficient of each group's `(Y_k, Y_j)` cross-tabulation.
    #[default]
    Phi,
    /// Non-exposed denominator uses the exposed `(b1 + b0)` margin, as
    /// printed in the original derivation. Kept for auditing only.
    PaperLiteral,
}

/// Phi correlation between `Y_k` and `Y_j` for one group.
///
/// `events1`/`n1` are the events and total at `Y_k = 1`, likewise `events0`/`n0`.
fn phi(
    events1: u64,
    n1: u64,
    events0: u64,
    n0: u64,
    other_margin: Option<u64>,
) -> Result<f64, MeasureError> {
    if n1 == 0 || n0 == 0 {
        return Err(MeasureError::UndefinedCorrelation("a Y_k stratum is empty"));
    }
    let events = events1 + events0;
    let non_events = other_margin.unwrap_or((n1 - events1) + (n0 - events0));
    if events == 0 || non_events == 0 {
        return Err(MeasureError::UndefinedCorrelation(
            "Y_j is constant in the group",
        ));
    }
    let numerator = events1 as f64 * n0 as f64 - events0 as f64 * n1 as f64;
    let denominator = (n1 as f64 * n0 as f64 * events as f64 * non_events as f64).sqrt();
    Ok(numerator / denominator)
}

/// Estimated within-subject correlations `(rho_E, rho_nonE)`.
pub fn phi_correlations(tables: &StratifiedTables) -> Result<(f64, f64), MeasureError> {
    phi_correlations_with(tables, RhoFormula::Phi)
}

pub fn phi_correlations_with(
    tables: &StratifiedTables,
    formula: RhoFormula,
) -> Result<(f64, f64), MeasureError> {
    let (s1, s0) = (&tables.stratum1, &tables.stratum0);
    let rho_exposed = phi(s1.a, s1.n_exposed(), s0.a, s0.n_exposed(), None)?;
    let nonexposed_margin = match formula {
        RhoFormula::Phi => None,
        RhoFormula::PaperLiteral => Some(s1.b + s0.b),
    };
    let rho_nonexposed = phi(
        s1.c,
        s1.n_nonexposed(),
        s0.c,
        s0.n_nonexposed(),
        nonexposed_margin,
    )?;
    Ok((rho_exposed, rho_nonexposed))
}

fn ratio(numerator: f64, denominator: f64) -> Result<f64, MeasureError> {
    if denominator == 0.0 {
        Err(MeasureError::UndefinedMeasure)
    } else {
        Ok(numerator / denominator)
    }
}

/// Population `RR1` from each group's model parameters.
pub fn plug_in_rr1(
    exposed: &BernoulliPairParams,
    nonexposed: &BernoulliPairParams,
) -> Result<f64, MeasureError> {
    ratio(cond_prob_given1(exposed)?, cond_prob_given1(nonexposed)?)
}

/// Population `RR0` from each group's model parameters.
pub fn plug_in_rr0(
    exposed: &BernoulliPairParams,
    nonexposed: &BernoulliPairParams,
) -> Result<f64, MeasureError> {
    ratio(cond_prob_given0(exposed)?, cond_prob_given0(nonexposed)?)
}
