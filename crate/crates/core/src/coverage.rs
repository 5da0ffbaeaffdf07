//! Exact coverage probability of the `RR1`/`RR0` intervals.
//!
//! For one scenario the stratum table under study has fixed row margins
//! `n_E` and `n_nonE`; its event counts are independent binomials
//! `a ~ Bin(n_E, p_E)` and `c ~ Bin(n_nonE, p_nonE)`, where `p_E`, `p_nonE` are
//! the conditional probabilities `Pr(Y_j = 1 | Y_k = s)` of each group under
//! a constant outcome probability. Every table with all four cells positive
//! is enumerated; `p_c` is the total probability of the tables whose
//! interval contains the true ratio.
//!
//! Summation runs in ascending `a`, then ascending `c`, with compensated
//! accumulation, so results are bit-reproducible and independent of how a
//! grid is scheduled across threads.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Deserialize;
use thiserror::Error;

use crate::format::{sig, sig_opt};
use crate::measures::{log_risk_variance, z_quantile};
use crate::prob::{cond_prob_given0, cond_prob_given1, BernoulliPairParams, ProbError};

/// Default tail-pruning budget for [`exact_coverage`].
pub const DEFAULT_PRUNE_EPSILON: f64 = 1e-12;

/// Pruning budgets at or above this are rejected.
pub const MAX_PRUNE_EPSILON: f64 = 1e-6;

/// Header of the coverage CSV.
pub const COVERAGE_CSV_HEADER: &str = "n_E,n_nonE,pi_E,pi_nonE,rho_E,rho_nonE,stratum,level,true_rr,p_c,p_c_normalized,degenerate_mass,truncation_bound";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("exposed group: {0}")]
    Exposed(ProbError),
    #[error("non-exposed group: {0}")]
    NonExposed(ProbError),
    #[error("stratum margins must be positive")]
    EmptyMargin,
    #[error("{group} conditional probability {value} is not strictly inside (0, 1)")]
    DegenerateConditional { group: &'static str, value: f64 },
    #[error("true ratio undefined: non-exposed conditional probability is zero")]
    UndefinedTrueRatio,
    #[error("confidence level {0} is not in (0, 1)")]
    InvalidLevel(f64),
    #[error("prune epsilon {0} must lie in [0, 1e-6)")]
    InvalidPruneEpsilon(f64),
    #[error("grid axis `{0}` is empty")]
    EmptyAxis(&'static str),
    #[error("invalid grid file: {0}")]
    GridFile(String),
}

/// Which `Y_k` stratum the interval is computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Deserialize)]
#[serde(try_from = "StratumRepr")]
pub enum Stratum {
    /// `Y_k = 1`, the `RR1` interval.
    #[default]
    Given1,
    /// `Y_k = 0`, the `RR0` interval.
    Given0,
}

impl fmt::Display for Stratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Stratum::Given1 => "given1",
            Stratum::Given0 => "given0",
        })
    }
}

impl FromStr for Stratum {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "1" | "given1" => Ok(Stratum::Given1),
            "0" | "given0" => Ok(Stratum::Given0),
            other => Err(format!(
                "unknown stratum `{other}` (expected 1, 0, given1 or given0)"
            )),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum StratumRepr {
    Int(i64),
    Str(String),
}

impl TryFrom<StratumRepr> for Stratum {
    type Error = String;

    fn try_from(value: StratumRepr) -> Result<Self, Self::Error> {
        match value {
            StratumRepr::Int(i) => i.to_string().parse(),
            StratumRepr::Str(s) => s.parse(),
        }
    }
}

/// One point of a coverage study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    /// Exposed row margin of the stratum table.
    pub n_exposed: u64,
    /// Non-exposed row margin of the stratum table.
    pub n_nonexposed: u64,
    /// Constant outcome probability, exposed.
    pub pi_exposed: f64,
    /// Constant outcome probability, non-exposed.
    pub pi_nonexposed: f64,
    pub rho_exposed: f64,
    pub rho_nonexposed: f64,
    pub stratum: Stratum,
    pub level: f64,
}

impl Scenario {
    pub fn exposed_params(&self) -> Result<BernoulliPairParams, ScenarioError> {
        BernoulliPairParams::constant(self.pi_exposed, self.rho_exposed)
            .map_err(ScenarioError::Exposed)
    }

    pub fn nonexposed_params(&self) -> Result<BernoulliPairParams, ScenarioError> {
        BernoulliPairParams::constant(self.pi_nonexposed, self.rho_nonexposed)
            .map_err(ScenarioError::NonExposed)
    }

    /// Checks everything [`exact_coverage`] needs and returns the true risks.
    pub fn validate(&self) -> Result<ConditionalRisks, ScenarioError> {
        if self.n_exposed == 0 || self.n_nonexposed == 0 {
            return Err(ScenarioError::EmptyMargin);
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(ScenarioError::InvalidLevel(self.level));
        }
        let risks = true_conditional_risks(self)?;
        for (group, value) in [
            ("exposed", risks.p_exposed),
            ("non-exposed", risks.p_nonexposed),
        ] {
            if !(value > 0.0 && value < 1.0) {
                return Err(ScenarioError::DegenerateConditional { group, value });
            }
        }
        Ok(risks)
    }
}

/// Conditional event probabilities of the scenario's stratum and their ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalRisks {
    pub p_exposed: f64,
    pub p_nonexposed: f64,
    pub true_rr: f64,
}

/// Population conditional risks of both groups and the true `RR1` or `RR0`.
pub fn true_conditional_risks(scenario: &Scenario) -> Result<ConditionalRisks, ScenarioError> {
    let exposed = scenario.exposed_params()?;
    let nonexposed = scenario.nonexposed_params()?;
    let conditional = match scenario.stratum {
        Stratum::Given1 => cond_prob_given1,
        Stratum::Given0 => cond_prob_given0,
    };
    let p_exposed = conditional(&exposed).map_err(ScenarioError::Exposed)?;
    let p_nonexposed = conditional(&nonexposed).map_err(ScenarioError::NonExposed)?;
    if p_nonexposed == 0.0 {
        return Err(ScenarioError::UndefinedTrueRatio);
    }
    Ok(ConditionalRisks {
        p_exposed,
        p_nonexposed,
        true_rr: p_exposed / p_nonexposed,
    })
}

/// Exact coverage of one scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageResult {
    /// Probability of the nondegenerate tables whose interval covers `true_rr`.
    pub p_c: f64,
    /// `p_c / (1 - degenerate_mass)`; `None` when every table is degenerate.
    pub p_c_normalized: Option<f64>,
    /// Probability of tables with a zero cell.
    pub degenerate_mass: f64,
    /// Probability of nondegenerate, enumerated tables that miss `true_rr`.
    pub noncovering_mass: f64,
    /// Upper bound on the probability of tables skipped by tail pruning.
    pub truncation_bound: f64,
    pub true_rr: f64,
}

/// Neumaier summation.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    #[inline]
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub(crate) fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Table of `ln(n!)` for `n = 0..=max_n`.
#[derive(Debug, Clone)]
pub struct LogFactorials {
    table: Vec<f64>,
}

impl LogFactorials {
    pub fn new(max_n: u64) -> Self {
        let mut table = Vec::with_capacity(max_n as usize + 1);
        let mut acc = CompensatedSum::default();
        table.push(0.0);
        for i in 1..=max_n {
            acc.add((i as f64).ln());
            table.push(acc.value());
        }
        Self { table }
    }

    pub fn max_n(&self) -> u64 {
        self.table.len() as u64 - 1
    }

    pub fn ln_factorial(&self, n: u64) -> f64 {
        self.table[n as usize]
    }

    pub fn ln_choose(&self, n: u64, k: u64) -> f64 {
        self.ln_factorial(n) - self.ln_factorial(k) - self.ln_factorial(n - k)
    }

    /// `ln Pr(K = k)` for `K ~ Bin(n, p)`. `p` of 0 or 1 is a point mass.
    pub fn binom_log_pmf(&self, n: u64, k: u64, p: f64) -> f64 {
        assert!(k <= n, "binomial outcome {k} exceeds trials {n}");
        assert!(
            (0.0..=1.0).contains(&p),
            "binomial probability {p} outside [0, 1]"
        );
        if p == 0.0 {
            return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
        }
        if p == 1.0 {
            return if k == n { 0.0 } else { f64::NEG_INFINITY };
        }
        let kf = k as f64;
        let rest = (n - k) as f64;
        self.ln_choose(n, k) + kf * p.ln() + rest * (-p).ln_1p()
    }
}

/// `ln Pr(K = k)` for `K ~ Bin(n, p)`; builds a one-off factorial table.
pub fn binom_log_pmf(n: u64, k: u64, p: f64) -> f64 {
    LogFactorials::new(n).binom_log_pmf(n, k, p)
}

/// One binomial row margin: its pmf and the interior range kept after pruning.
struct Margin {
    pmf: Vec<f64>,
    /// Inclusive kept range within `1..=n-1`; empty when `first > last`.
    first: u64,
    last: u64,
    skipped: f64,
    degenerate: f64,
}

impl Margin {
    fn new(n: u64, p: f64, factorials: &LogFactorials, prune_epsilon: f64) -> Self {
        let pmf: Vec<f64> = (0..=n)
            .map(|k| factorials.binom_log_pmf(n, k, p).exp())
            .collect();
        let degenerate = if n == 0 {
            1.0
        } else {
            pmf[0] + pmf[n as usize]
        };
        let tail_budget = prune_epsilon / 4.0;
        let (mut first, mut last) = (1u64, n.saturating_sub(1));
        let mut low_tail = CompensatedSum::default();
        while first <= last && low_tail.value() + pmf[first as usize] < tail_budget {
            low_tail.add(pmf[first as usize]);
            first += 1;
        }
        let mut high_tail = CompensatedSum::default();
        while first <= last && high_tail.value() + pmf[last as usize] < tail_budget {
            high_tail.add(pmf[last as usize]);
            last -= 1;
        }
        Self {
            pmf,
            first,
            last,
            skipped: low_tail.value() + high_tail.value(),
            degenerate,
        }
    }

    fn kept(&self) -> std::ops::RangeInclusive<u64> {
        self.first..=self.last
    }
}

/// Exact coverage probability of one scenario.
///
/// `prune_epsilon = 0` enumerates every table. A positive value drops
/// binomial tail outcomes whose accumulated probability stays below
/// `prune_epsilon / 4` per tail; the dropped mass is reported in
/// `truncation_bound`.
pub fn exact_coverage(
    scenario: &Scenario,
    prune_epsilon: f64,
) -> Result<CoverageResult, ScenarioError> {
    check_prune_epsilon(prune_epsilon)?;
    let risks = scenario.validate()?;
    let z = z_quantile(scenario.level).map_err(|_| ScenarioError::InvalidLevel(scenario.level))?;
    let (n_e, n_n) = (scenario.n_exposed, scenario.n_nonexposed);
    let factorials = LogFactorials::new(n_e.max(n_n));
    let exposed = Margin::new(n_e, risks.p_exposed, &factorials, prune_epsilon);
    let nonexposed = Margin::new(n_n, risks.p_nonexposed, &factorials, prune_epsilon);

    let ln_true = risks.true_rr.ln();
    let z2 = z * z;
    // (ln c/n, variance term, probability) per kept non-exposed count
    let columns: Vec<(f64, f64, f64)> = nonexposed
        .kept()
        .map(|c| {
            let ln_p = (c as f64 / n_n as f64).ln();
            (ln_p, log_risk_variance(c, n_n), nonexposed.pmf[c as usize])
        })
        .collect();

    let mut covering = CompensatedSum::default();
    let mut missing = CompensatedSum::default();
    for a in exposed.kept() {
        let shift = (a as f64 / n_e as f64).ln() - ln_true;
        let var_a = log_risk_variance(a, n_e);
        let mut row_covering = CompensatedSum::default();
        let mut row_missing = CompensatedSum::default();
        for &(ln_c, var_c, prob_c) in &columns {
            let d = shift - ln_c;
            if d * d <= z2 * (var_a + var_c) {
                row_covering.add(prob_c);
            } else {
                row_missing.add(prob_c);
            }
        }
        let prob_a = exposed.pmf[a as usize];
        covering.add(prob_a * row_covering.value());
        missing.add(prob_a * row_missing.value());
    }

    let degenerate_mass =
        exposed.degenerate + nonexposed.degenerate - exposed.degenerate * nonexposed.degenerate;
    let p_c = covering.value();
    let noncovering_mass = missing.value();
    let truncation_bound = exposed.skipped + nonexposed.skipped;
    debug_assert!(
        prune_epsilon > 0.0 || (p_c + noncovering_mass + degenerate_mass - 1.0).abs() < 1e-9,
        "exhaustive enumeration lost mass"
    );
    let p_c_normalized = (degenerate_mass < 1.0).then(|| p_c / (1.0 - degenerate_mass));
    Ok(CoverageResult {
        p_c,
        p_c_normalized,
        degenerate_mass,
        noncovering_mass,
        truncation_bound,
        true_rr: risks.true_rr,
    })
}

fn check_prune_epsilon(eps: f64) -> Result<(), ScenarioError> {
    if (0.0..MAX_PRUNE_EPSILON).contains(&eps) {
        Ok(())
    } else {
        Err(ScenarioError::InvalidPruneEpsilon(eps))
    }
}

fn default_level() -> f64 {
    0.95
}

fn default_prune_epsilon() -> f64 {
    DEFAULT_PRUNE_EPSILON
}

/// Axis values of a coverage study. Every combination is one scenario.
///
/// The grid file format is TOML with the same keys:
///
/// ```toml
/// n_E = [500, 1000]
/// n_nonE = [500]
/// pi_E = [0.1, 0.5]
/// pi_nonE = [0.1]
/// rho_E = [0.1, 0.9]
/// rho_nonE = [0.5]
/// stratum = 1          # or 0, "given1", "given0"
/// level = 0.95
/// prune_epsilon = 1e-12
/// ```
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioGrid {
    #[serde(rename = "n_E")]
    pub n_exposed: Vec<u64>,
    #[serde(rename = "n_nonE")]
    pub n_nonexposed: Vec<u64>,
    #[serde(rename = "pi_E")]
    pub pi_exposed: Vec<f64>,
    #[serde(rename = "pi_nonE")]
    pub pi_nonexposed: Vec<f64>,
    #[serde(rename = "rho_E")]
    pub rho_exposed: Vec<f64>,
    #[serde(rename = "rho_nonE")]
    pub rho_nonexposed: Vec<f64>,
    #[serde(default)]
    pub stratum: Stratum,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "default_prune_epsilon")]
    pub prune_epsilon: f64,
}

pub const PAPER_SAMPLE_SIZES: [u64; 3] = [500, 1000, 2000];
pub const PAPER_PROBABILITIES: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];
pub const PAPER_CORRELATIONS: [f64; 3] = [0.1, 0.5, 0.9];

impl ScenarioGrid {
    /// The 3 x 3 x 5 x 5 x 3 x 3 = 2025-point study at 95% confidence.
    pub fn paper(stratum: Stratum) -> Self {
        Self {
            n_exposed: PAPER_SAMPLE_SIZES.to_vec(),
            n_nonexposed: PAPER_SAMPLE_SIZES.to_vec(),
            pi_exposed: PAPER_PROBABILITIES.to_vec(),
            pi_nonexposed: PAPER_PROBABILITIES.to_vec(),
            rho_exposed: PAPER_CORRELATIONS.to_vec(),
            rho_nonexposed: PAPER_CORRELATIONS.to_vec(),
            stratum,
            level: 0.95,
            prune_epsilon: DEFAULT_PRUNE_EPSILON,
        }
    }

    /// Grid containing exactly one scenario.
    pub fn single(scenario: &Scenario, prune_epsilon: f64) -> Self {
        Self {
            n_exposed: vec![scenario.n_exposed],
            n_nonexposed: vec![scenario.n_nonexposed],
            pi_exposed: vec![scenario.pi_exposed],
            pi_nonexposed: vec![scenario.pi_nonexposed],
            rho_exposed: vec![scenario.rho_exposed],
            rho_nonexposed: vec![scenario.rho_nonexposed],
            stratum: scenario.stratum,
            level: scenario.level,
            prune_epsilon,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::GridFile(e.to_string()))
    }

    fn check_axes(&self) -> Result<(), ScenarioError> {
        let axes: [(&'static str, bool); 6] = [
            ("n_E", self.n_exposed.is_empty()),
            ("n_nonE", self.n_nonexposed.is_empty()),
            ("pi_E", self.pi_exposed.is_empty()),
            ("pi_nonE", self.pi_nonexposed.is_empty()),
            ("rho_E", self.rho_exposed.is_empty()),
            ("rho_nonE", self.rho_nonexposed.is_empty()),
        ];
        match axes.iter().find(|(_, empty)| *empty) {
            Some((name, _)) => Err(ScenarioError::EmptyAxis(name)),
            None => Ok(()),
        }
    }

    /// Scenarios in lexicographic axis order (`n_E` slowest, `rho_nonE` fastest).
    pub fn scenarios(&self) -> Vec<Scenario> {
        let mut out = Vec::new();
        for &n_exposed in &self.n_exposed {
            for &n_nonexposed in &self.n_nonexposed {
                for &pi_exposed in &self.pi_exposed {
                    for &pi_nonexposed in &self.pi_nonexposed {
                        for &rho_exposed in &self.rho_exposed {
                            for &rho_nonexposed in &self.rho_nonexposed {
                                out.push(Scenario {
                                    n_exposed,
                                    n_nonexposed,
                                    pi_exposed,
                                    pi_nonexposed,
                                    rho_exposed,
                                    rho_nonexposed,
                                    stratum: self.stratum,
                                    level: self.level,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// A grid point and its coverage, or the reason it could not be evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRecord {
    pub scenario: Scenario,
    pub result: Result<CoverageResult, ScenarioError>,
}

impl GridRecord {
    pub fn is_admissible(&self) -> bool {
        self.result.is_ok()
    }
}

/// Evaluates every grid point using the grid's own `prune_epsilon`.
///
/// Scenarios run on the current rayon pool; each one is summed sequentially,
/// so output does not depend on the pool size.
pub fn run_grid(grid: &ScenarioGrid) -> Result<Vec<GridRecord>, ScenarioError> {
    grid.check_axes()?;
    check_prune_epsilon(grid.prune_epsilon)?;
    let eps = grid.prune_epsilon;
    Ok(grid
        .scenarios()
        .into_par_iter()
        .map(|scenario| GridRecord {
            scenario,
            result: exact_coverage(&scenario, eps),
        })
        .collect())
}

/// Writes grid results as CSV (12 significant digits). Inadmissible points
/// keep their row with `NA` in every result column.
pub fn write_coverage_csv<W: Write>(
    mut out: W,
    records: &[GridRecord],
    build_id: Option<&str>,
) -> io::Result<()> {
    if let Some(id) = build_id {
        writeln!(out, "# {id}")?;
    }
    writeln!(out, "{COVERAGE_CSV_HEADER}")?;
    for record in records {
        let s = &record.scenario;
        write!(
            out,
            "{},{},{},{},{},{},{},{},",
            s.n_exposed,
            s.n_nonexposed,
            sig(s.pi_exposed, 12),
            sig(s.pi_nonexposed, 12),
            sig(s.rho_exposed, 12),
            sig(s.rho_nonexposed, 12),
            s.stratum,
            sig(s.level, 12),
        )?;
        match &record.result {
            Ok(r) => writeln!(
                out,
                "{},{},{},{},{}",
                sig(r.true_rr, 12),
                sig(r.p_c, 12),
                sig_opt(r.p_c_normalized, 12),
                sig(r.degenerate_mass, 12),
                sig(r.truncation_bound, 12),
            )?,
            Err(_) => writeln!(out, "NA,NA,NA,NA,NA")?,
        }
    }
    Ok(())
}
