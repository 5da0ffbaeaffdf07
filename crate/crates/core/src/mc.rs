//! Monte-Carlo simulation of correlated binary cohorts.
//!
//! Used to cross-check [`crate::coverage::exact_coverage`] and to study the
//! cohort model, where the stratum margins are themselves random.
//!
//! # Random streams
//!
//! Replication `r` of a run with seed `s` draws from
//! `ChaCha8Rng::seed_from_u64(s)` (rand_chacha 0.9; the 64-bit seed is
//! expanded to 32 key bytes with the PCG32 routine of rand_core 0.9) with
//! `set_stream(r)`. ChaCha is counter based, so each replication owns an
//! independent stream and results do not depend on thread scheduling.
//! Uniforms are `rng.random::<f64>()`, i.e. the top 53 bits of a `u64`
//! scaled by `2^-53`. Within a cohort replication, exposed subjects are
//! drawn before non-exposed ones, and each subject consumes two uniforms:
//! `Y_k = [u1 < pi_k]`, then `Y_j = [u2 < Pr(Y_j = 1 | Y_k)]`.
//! The fixed-margin model draws `a` then `c` with `rand_distr::Binomial`
//! (rand_distr 0.5).

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use thiserror::Error;

use crate::coverage::{Scenario, Stratum};
use crate::format::{sig, sig_opt};
use crate::ingest::{LongitudinalDataset, Subject};
use crate::measures::{
    plug_in_rr0, plug_in_rr1, rr_crude, z_quantile, MeasureError, StratifiedTables, StratumTable,
};
use crate::prob::{cond_prob_given0, cond_prob_given1, BernoulliPairParams, ProbError};

pub const ORACLE_CSV_HEADER: &str = "n_E,n_nonE,pi_E,pi_nonE,rho_E,rho_nonE,stratum,level,margin_model,reps,seed,estimate,std_error,estimate_normalized";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McError {
    #[error("replication count must be at least 1")]
    NoReplications,
    #[error("group sizes must be positive")]
    EmptyGroup,
    #[error("trajectory needs at least two visits and one lag correlation per visit transition")]
    BadTrajectory,
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Prob(#[from] ProbError),
}

/// How each replication's stratum table is generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum MarginModel {
    /// Stratum margins fixed at `n_E`, `n_nonE`; `a ~ Bin(n_E, p_E)`.
    #[default]
    FixedMargin,
    /// Whole cohorts of `n_E` and `n_nonE` subjects; margins are random.
    Cohort,
}

impl fmt::Display for MarginModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            MarginModel::FixedMargin => "fixed_margin",
            MarginModel::Cohort => "cohort",
        })
    }
}

impl FromStr for MarginModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fixed_margin" | "fixed-margin" | "fixed" => Ok(MarginModel::FixedMargin),
            "cohort" => Ok(MarginModel::Cohort),
            other => Err(format!(
                "unknown margin model `{other}` (expected fixed_margin or cohort)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CohortSpec {
    pub n_exposed: u64,
    pub n_nonexposed: u64,
    pub exposed: BernoulliPairParams,
    pub nonexposed: BernoulliPairParams,
    pub seed: u64,
    pub reps: u64,
}

impl CohortSpec {
    /// Constant-probability groups taken from a coverage scenario.
    pub fn from_scenario(scenario: &Scenario, seed: u64, reps: u64) -> Result<Self, McError> {
        Ok(Self {
            n_exposed: scenario.n_exposed,
            n_nonexposed: scenario.n_nonexposed,
            exposed: BernoulliPairParams::constant(scenario.pi_exposed, scenario.rho_exposed)?,
            nonexposed: BernoulliPairParams::constant(
                scenario.pi_nonexposed,
                scenario.rho_nonexposed,
            )?,
            seed,
            reps,
        })
    }
}

/// Generator for one replication.
pub fn replicate_rng(seed: u64, replication: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    rng
}

/// Both conditional probabilities of a group; a side whose conditioning
/// event is impossible is never used and is set to 0.
fn conditionals(params: &BernoulliPairParams) -> (f64, f64) {
    (
        cond_prob_given1(params).unwrap_or(0.0),
        cond_prob_given0(params).unwrap_or(0.0),
    )
}

/// Draws one group of `n` subjects. Returns `(a1, b1, a0, b0)`: events and
/// non-events at visit `j` among `Y_k = 1` and among `Y_k = 0`.
fn draw_group<R: Rng>(rng: &mut R, n: u64, params: &BernoulliPairParams) -> [u64; 4] {
    let (given1, given0) = conditionals(params);
    let mut counts = [0u64; 4];
    for _ in 0..n {
        let y_k = rng.random::<f64>() < params.pi_k();
        let p = if y_k { given1 } else { given0 };
        let y_j = rng.random::<f64>() < p;
        let slot = match (y_k, y_j) {
            (true, true) => 0,
            (true, false) => 1,
            (false, true) => 2,
            (false, false) => 3,
        };
        counts[slot] += 1;
    }
    counts
}

/// One simulated cohort, aggregated into stratified tables.
pub fn simulate_replicate(spec: &CohortSpec, replication: u64) -> StratifiedTables {
    let mut rng = replicate_rng(spec.seed, replication);
    let [a1, b1, a0, b0] = draw_group(&mut rng, spec.n_exposed, &spec.exposed);
    let [c1, d1, c0, d0] = draw_group(&mut rng, spec.n_nonexposed, &spec.nonexposed);
    StratifiedTables::new(
        StratumTable::new(a1, b1, c1, d1),
        StratumTable::new(a0, b0, c0, d0),
    )
}

/// Replication 0 of `spec`.
pub fn simulate_cohort(spec: &CohortSpec) -> StratifiedTables {
    simulate_replicate(spec, 0)
}

/// Outcome process of one group across visits.
///
/// `Y_1 ~ Bernoulli(risks[0])`; for `t >= 2`, `Y_t` given `Y_{t-1}` follows the
/// pair model with `pi_j = risks[t-1]`, `pi_k = risks[t-2]` and
/// `rho = lag_correlations[t-2]`, so every consecutive pair has the stated
/// marginals and correlation.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupTrajectory {
    pub n: u64,
    pub risks: Vec<f64>,
    pub lag_correlations: Vec<f64>,
}

impl GroupTrajectory {
    fn transitions(&self) -> Result<Vec<(f64, f64)>, McError> {
        if self.risks.len() < 2 || self.lag_correlations.len() != self.risks.len() - 1 {
            return Err(McError::BadTrajectory);
        }
        self.risks
            .windows(2)
            .zip(&self.lag_correlations)
            .map(|(w, &rho)| Ok(conditionals(&BernoulliPairParams::new(w[1], w[0], rho)?)))
            .collect()
    }
}

/// Simulates a complete-case wide dataset. Exposed subjects are labelled
/// `1`, non-exposed `0`; ids are `e00001...` and `n00001...`. All draws come
/// from stream 0 of `seed`, exposed subjects first, one uniform per visit.
pub fn simulate_dataset(
    exposed: &GroupTrajectory,
    nonexposed: &GroupTrajectory,
    seed: u64,
) -> Result<LongitudinalDataset, McError> {
    if exposed.risks.len() != nonexposed.risks.len() {
        return Err(McError::BadTrajectory);
    }
    let mut rng = replicate_rng(seed, 0);
    let mut subjects = Vec::with_capacity((exposed.n + nonexposed.n) as usize);
    for (group, is_exposed, prefix) in [(exposed, true, 'e'), (nonexposed, false, 'n')] {
        let transitions = group.transitions()?;
        for i in 0..group.n {
            let mut outcomes = Vec::with_capacity(group.risks.len());
            let mut previous = rng.random::<f64>() < group.risks[0];
            outcomes.push(previous);
            for &(given1, given0) in &transitions {
                let p = if previous { given1 } else { given0 };
                previous = rng.random::<f64>() < p;
                outcomes.push(previous);
            }
            subjects.push(Subject {
                id: format!("{prefix}{:05}", i + 1),
                exposed: is_exposed,
                outcomes,
            });
        }
    }
    Ok(LongitudinalDataset {
        subjects,
        visits: exposed.risks.len(),
        dropped_incomplete: 0,
        exposed_label: "1".to_string(),
        nonexposed_label: (nonexposed.n > 0).then(|| "0".to_string()),
    })
}

/// Monte-Carlo coverage estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McCoverage {
    /// Covering replications over all replications; degenerate tables count
    /// as non-covering.
    pub estimate: f64,
    /// `sqrt(estimate (1 - estimate) / reps)`.
    pub std_error: f64,
    /// Covering replications over nondegenerate replications.
    pub estimate_normalized: Option<f64>,
    pub covered: u64,
    pub nondegenerate: u64,
    pub reps: u64,
    pub true_rr: f64,
}

#[derive(Clone, Copy)]
enum Outcome {
    Covered,
    Missed,
    Degenerate,
}

/// Estimates the coverage of the `stratum` interval at `level`.
pub fn mc_coverage(
    spec: &CohortSpec,
    stratum: Stratum,
    level: f64,
    margin_model: MarginModel,
) -> Result<McCoverage, McError> {
    if spec.reps == 0 {
        return Err(McError::NoReplications);
    }
    if spec.n_exposed == 0 || spec.n_nonexposed == 0 {
        return Err(McError::EmptyGroup);
    }
    z_quantile(level)?;
    let (true_rr, p_exposed, p_nonexposed) = match stratum {
        Stratum::Given1 => (
            plug_in_rr1(&spec.exposed, &spec.nonexposed)?,
            cond_prob_given1(&spec.exposed)?,
            cond_prob_given1(&spec.nonexposed)?,
        ),
        Stratum::Given0 => (
            plug_in_rr0(&spec.exposed, &spec.nonexposed)?,
            cond_prob_given0(&spec.exposed)?,
            cond_prob_given0(&spec.nonexposed)?,
        ),
    };
    let binomials = match margin_model {
        MarginModel::FixedMargin => Some((
            Binomial::new(spec.n_exposed, p_exposed).expect("probability checked"),
            Binomial::new(spec.n_nonexposed, p_nonexposed).expect("probability checked"),
        )),
        MarginModel::Cohort => None,
    };

    let classify = |replication: u64| -> Outcome {
        let table = match &binomials {
            Some((bin_e, bin_n)) => {
                let mut rng = replicate_rng(spec.seed, replication);
                let a = bin_e.sample(&mut rng);
                let c = bin_n.sample(&mut rng);
                StratumTable::new(a, spec.n_exposed - a, c, spec.n_nonexposed - c)
            }
            None => {
                let tables = simulate_replicate(spec, replication);
                match stratum {
                    Stratum::Given1 => tables.stratum1,
                    Stratum::Given0 => tables.stratum0,
                }
            }
        };
        if table.has_zero_cell() {
            return Outcome::Degenerate;
        }
        match rr_crude(&table, level) {
            Ok(est) if est.covers(true_rr) => Outcome::Covered,
            Ok(_) => Outcome::Missed,
            Err(_) => Outcome::Degenerate,
        }
    };

    let [covered, missed, _degenerate] = (0..spec.reps)
        .into_par_iter()
        .map(classify)
        .fold(
            || [0u64; 3],
            |mut acc, outcome| {
                acc[outcome as usize] += 1;
                acc
            },
        )
        .reduce(|| [0u64; 3], |x, y| [x[0] + y[0], x[1] + y[1], x[2] + y[2]]);

    let reps = spec.reps as f64;
    let estimate = covered as f64 / reps;
    let nondegenerate = covered + missed;
    Ok(McCoverage {
        estimate,
        std_error: (estimate * (1.0 - estimate) / reps).sqrt(),
        estimate_normalized: (nondegenerate > 0).then(|| covered as f64 / nondegenerate as f64),
        covered,
        nondegenerate,
        reps: spec.reps,
        true_rr,
    })
}

/// Writes one oracle result as CSV (12 significant digits).
pub fn write_oracle_csv<W: Write>(
    mut out: W,
    scenario: &Scenario,
    margin_model: MarginModel,
    seed: u64,
    result: &McCoverage,
    build_id: Option<&str>,
) -> io::Result<()> {
    if let Some(id) = build_id {
        writeln!(out, "# {id}")?;
    }
    writeln!(out, "{ORACLE_CSV_HEADER}")?;
    writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        scenario.n_exposed,
        scenario.n_nonexposed,
        sig(scenario.pi_exposed, 12),
        sig(scenario.pi_nonexposed, 12),
        sig(scenario.rho_exposed, 12),
        sig(scenario.rho_nonexposed, 12),
        scenario.stratum,
        sig(scenario.level, 12),
        margin_model,
        result.reps,
        seed,
        sig(result.estimate, 12),
        sig(result.std_error, 12),
        sig_opt(result.estimate_normalized, 12),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::phi_correlations;

    fn spec(n: u64, pi: f64, rho: f64, seed: u64, reps: u64) -> CohortSpec {
        let p = BernoulliPairParams::constant(pi, rho).unwrap();
        CohortSpec {
            n_exposed: n,
            n_nonexposed: n,
            exposed: p,
            nonexposed: p,
            seed,
            reps,
        }
    }

    #[test]
    fn perfect_correlation_copies_the_earlier_outcome() {
        let t = simulate_cohort(&spec(500, 0.5, 1.0, 7, 1));
        assert_eq!(t.stratum1.b, 0);
        assert_eq!(t.stratum1.d, 0);
        assert_eq!(t.stratum0.a, 0);
        assert_eq!(t.stratum0.c, 0);
        assert_eq!(t.n_exposed(), 500);
        assert_eq!(t.n_nonexposed(), 500);
    }

    #[test]
    fn deterministic_for_a_seed() {
        let s = spec(300, 0.3, 0.5, 42, 1);
        assert_eq!(simulate_replicate(&s, 3), simulate_replicate(&s, 3));
        assert_ne!(simulate_replicate(&s, 3), simulate_replicate(&s, 4));
    }

    #[test]
    fn conditional_frequency_matches_model() {
        let s = spec(1_000_000, 0.1, 0.9, 11, 1);
        let t = simulate_cohort(&s);
        let n1 = t.stratum1.n_exposed() as f64;
        let freq = t.stratum1.a as f64 / n1;
        let se = (0.91f64 * 0.09 / n1).sqrt();
        assert!((freq - 0.91).abs() < 3.0 * se, "freq {freq} se {se}");
    }

    #[test]
    fn independence_gives_small_phi() {
        let s = spec(200_000, 0.4, 0.0, 5, 1);
        let (re, rn) = phi_correlations(&simulate_cohort(&s)).unwrap();
        // se of phi under independence is about 1/sqrt(n)
        let se = 1.0 / (200_000f64).sqrt();
        assert!(re.abs() < 3.0 * se && rn.abs() < 3.0 * se);
    }

    #[test]
    fn empirical_moments() {
        let s = spec(1_000_000, 0.3, 0.5, 99, 1);
        let t = simulate_cohort(&s);
        let n = t.n_exposed() as f64;
        let mean_j = (t.stratum1.a + t.stratum0.a) as f64 / n;
        let mean_k = t.stratum1.n_exposed() as f64 / n;
        let se_mean = (0.3f64 * 0.7 / n).sqrt();
        assert!((mean_j - 0.3).abs() < 3.0 * se_mean);
        assert!((mean_k - 0.3).abs() < 3.0 * se_mean);
        let (phi, _) = phi_correlations(&t).unwrap();
        // delta-method se of phi is below 1/sqrt(n) here
        assert!((phi - 0.5).abs() < 3.0 / n.sqrt());
    }

    #[test]
    fn single_replication_is_zero_or_one() {
        for seed in 0..20 {
            let r = mc_coverage(
                &spec(30, 0.5, 0.5, seed, 1),
                Stratum::Given1,
                0.95,
                MarginModel::Cohort,
            )
            .unwrap();
            assert!(r.estimate == 0.0 || r.estimate == 1.0);
        }
    }

    #[test]
    fn near_certain_level_covers_nondegenerate_tables() {
        let s = spec(400, 0.5, 0.5, 3, 2000);
        let r = mc_coverage(&s, Stratum::Given1, 0.9999, MarginModel::FixedMargin).unwrap();
        assert!(r.estimate > 0.995);
        assert_eq!(
            r.estimate_normalized,
            Some(r.covered as f64 / r.nondegenerate as f64)
        );
    }

    #[test]
    fn rejects_empty_runs() {
        let s = spec(10, 0.5, 0.5, 1, 0);
        assert_eq!(
            mc_coverage(&s, Stratum::Given0, 0.95, MarginModel::Cohort),
            Err(McError::NoReplications)
        );
        let s = CohortSpec {
            n_exposed: 0,
            ..spec(10, 0.5, 0.5, 1, 5)
        };
        assert_eq!(
            mc_coverage(&s, Stratum::Given0, 0.95, MarginModel::Cohort),
            Err(McError::EmptyGroup)
        );
    }

    #[test]
    fn trajectory_marginals_and_lag_correlation() {
        let group = GroupTrajectory {
            n: 400_000,
            risks: vec![0.2, 0.35, 0.5],
            lag_correlations: vec![0.3, 0.6],
        };
        let empty = GroupTrajectory {
            n: 0,
            ..group.clone()
        };
        let data = simulate_dataset(&group, &empty, 8).unwrap();
        assert_eq!(data.visits, 3);
        let n = data.subjects.len() as f64;
        for (t, &pi) in group.risks.iter().enumerate() {
            let mean = data.subjects.iter().filter(|s| s.outcomes[t]).count() as f64 / n;
            assert!((mean - pi).abs() < 3.0 * (pi * (1.0 - pi) / n).sqrt());
        }
        let t = crate::ingest::build_conditional_tables(&data, 3, 2).unwrap();
        let (phi, _) = phi_correlations(&StratifiedTables::new(
            StratumTable::new(t.stratum1.a, t.stratum1.b, 1, 1),
            StratumTable::new(t.stratum0.a, t.stratum0.b, 1, 1),
        ))
        .unwrap();
        assert!((phi - 0.6).abs() < 3.0 / n.sqrt());
    }

    #[test]
    fn trajectory_validation() {
        let bad = GroupTrajectory {
            n: 5,
            risks: vec![0.2, 0.3],
            lag_correlations: vec![],
        };
        assert_eq!(simulate_dataset(&bad, &bad, 1), Err(McError::BadTrajectory));
        let inadmissible = GroupTrajectory {
            n: 5,
            risks: vec![0.9, 0.1],
            lag_correlations: vec![0.5],
        };
        assert!(matches!(
            simulate_dataset(&inadmissible, &inadmissible, 1),
            Err(McError::Prob(_))
        ));
    }

    #[test]
    fn independent_of_pool_size() {
        let s = spec(60, 0.3, 0.5, 17, 3000);
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        for model in [MarginModel::FixedMargin, MarginModel::Cohort] {
            let a = one
                .install(|| mc_coverage(&s, Stratum::Given0, 0.95, model))
                .unwrap();
            let b = four
                .install(|| mc_coverage(&s, Stratum::Given0, 0.95, model))
                .unwrap();
            assert_eq!(a, b);
        }
    }
}
