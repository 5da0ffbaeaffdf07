//! Correlated Bernoulli pair model.
//!
//! `Y_k ~ Bernoulli(pi_k)` is the outcome at an earlier visit and
//! `Y_j ~ Bernoulli(pi_j)` the outcome at a later one, with Pearson
//! correlation `rho`. Everything here follows from
//! `Cov(Y_j, Y_k) = rho * sqrt(pi_j (1 - pi_j) pi_k (1 - pi_k))`.
//! The constant-probability model is the special case `pi_j == pi_k`.

use thiserror::Error;

/// Rounding slack tolerated at the edges of `[0, 1]` and of the admissible
/// correlation range. Anything beyond it is an error.
pub const UNIT_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ProbError {
    #[error("probability {0} is outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("correlation {0} is outside [-1, 1]")]
    CorrelationOutOfRange(f64),
    #[error("correlation {rho} is outside the admissible range [{lower}, {upper}]")]
    InadmissibleCorrelation { rho: f64, lower: f64, upper: f64 },
    #[error("conditioning event has probability zero")]
    ZeroProbabilityCondition,
    #[error("correlation bounds are undefined for boundary probability {0}")]
    BoundaryProbability(f64),
    #[error("computed probability {0} is outside [0, 1]")]
    OutsideUnitInterval(f64),
}

/// Marginal probabilities and correlation of one exposure group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernoulliPairParams {
    pi_j: f64,
    pi_k: f64,
    rho: f64,
}

impl BernoulliPairParams {
    /// Validates the probabilities and checks `rho` against [`rho_bounds`].
    ///
    /// When either probability is 0 or 1 the covariance vanishes and any
    /// `rho` in `[-1, 1]` describes the same distribution.
    pub fn new(pi_j: f64, pi_k: f64, rho: f64) -> Result<Self, ProbError> {
        check_probability(pi_j)?;
        check_probability(pi_k)?;
        if !(-1.0..=1.0).contains(&rho) {
            return Err(ProbError::CorrelationOutOfRange(rho));
        }
        if is_interior(pi_j) && is_interior(pi_k) {
            let (lower, upper) = rho_bounds(pi_j, pi_k)?;
            if rho < lower - UNIT_SLACK || rho > upper + UNIT_SLACK {
                return Err(ProbError::InadmissibleCorrelation { rho, lower, upper });
            }
        }
        Ok(Self { pi_j, pi_k, rho })
    }

    /// Constant outcome probability over time (`pi_j = pi_k = pi`).
    pub fn constant(pi: f64, rho: f64) -> Result<Self, ProbError> {
        Self::new(pi, pi, rho)
    }

    /// Like [`new`](Self::new) but moves `rho` onto the nearest admissible value.
    pub fn clipped(pi_j: f64, pi_k: f64, rho: f64) -> Result<Self, ProbError> {
        check_probability(pi_j)?;
        check_probability(pi_k)?;
        let rho = if is_interior(pi_j) && is_interior(pi_k) {
            let (lower, upper) = rho_bounds(pi_j, pi_k)?;
            rho.clamp(lower, upper)
        } else {
            rho.clamp(-1.0, 1.0)
        };
        Ok(Self { pi_j, pi_k, rho })
    }

    pub fn pi_j(&self) -> f64 {
        self.pi_j
    }

    pub fn pi_k(&self) -> f64 {
        self.pi_k
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

fn check_probability(p: f64) -> Result<(), ProbError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(ProbError::ProbabilityOutOfRange(p))
    }
}

fn is_interior(p: f64) -> bool {
    p > 0.0 && p < 1.0
}

/// Snaps rounding noise at the edges of `[0, 1]`.
fn clamp_unit(p: f64) -> Result<f64, ProbError> {
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else if (-UNIT_SLACK..0.0).contains(&p) {
        Ok(0.0)
    } else if p > 1.0 && p <= 1.0 + UNIT_SLACK {
        Ok(1.0)
    } else {
        Err(ProbError::OutsideUnitInterval(p))
    }
}

/// `Pr(Y_j = 1 | Y_k = 1)`.
pub fn cond_prob_given1(params: &BernoulliPairParams) -> Result<f64, ProbError> {
    let BernoulliPairParams { pi_j, pi_k, rho } = *params;
    if pi_k == 0.0 {
        return Err(ProbError::ZeroProbabilityCondition);
    }
    clamp_unit(pi_j + rho * (pi_j * (1.0 - pi_j) * (1.0 - pi_k) / pi_k).sqrt())
}

/// `Pr(Y_j = 1 | Y_k = 0)`.
pub fn cond_prob_given0(params: &BernoulliPairParams) -> Result<f64, ProbError> {
    let BernoulliPairParams { pi_j, pi_k, rho } = *params;
    if pi_k == 1.0 {
        return Err(ProbError::ZeroProbabilityCondition);
    }
    clamp_unit(pi_j - rho * (pi_j * (1.0 - pi_j) * pi_k / (1.0 - pi_k)).sqrt())
}

/// `Pr(Y_j = 1, Y_k = 1)`.
pub fn joint_prob_11(params: &BernoulliPairParams) -> Result<f64, ProbError> {
    let BernoulliPairParams { pi_j, pi_k, rho } = *params;
    clamp_unit(pi_j * pi_k + rho * (pi_j * (1.0 - pi_j) * pi_k * (1.0 - pi_k)).sqrt())
}

/// Range of `rho` for which both conditional probabilities stay in `[0, 1]`.
///
/// The four constraints come in reciprocal pairs, so the result is
/// `[-min(s, 1/s), min(r, 1/r)]` with `s = sqrt(pi_j pi_k / ((1-pi_j)(1-pi_k)))`
/// and `r = sqrt(pi_k (1-pi_j) / (pi_j (1-pi_k)))`.
pub fn rho_bounds(pi_j: f64, pi_k: f64) -> Result<(f64, f64), ProbError> {
    for p in [pi_j, pi_k] {
        check_probability(p)?;
        if !is_interior(p) {
            return Err(ProbError::BoundaryProbability(p));
        }
    }
    let (qj, qk) = (1.0 - pi_j, 1.0 - pi_k);
    // Pr(Y_j=1 | Y_k=1) >= 0 and Pr(Y_j=1 | Y_k=0) <= 1
    let lower_given1 = -(pi_j * pi_k / (qj * qk)).sqrt();
    let lower_given0 = -(qj * qk / (pi_j * pi_k)).sqrt();
    // Pr(Y_j=1 | Y_k=1) <= 1 and Pr(Y_j=1 | Y_k=0) >= 0
    let upper_given1 = (pi_k * qj / (pi_j * qk)).sqrt();
    let upper_given0 = (pi_j * qk / (qj * pi_k)).sqrt();
    let lower = lower_given1.max(lower_given0).max(-1.0);
    let upper = upper_given1.min(upper_given0).min(1.0);
    Ok((lower, upper))
}
