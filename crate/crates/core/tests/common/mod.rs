//! Helpers shared by the integration tests: independent reference
//! implementations and a driver for the `crr` binary.
#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use condrr::coverage::{Scenario, Stratum};
use condrr::measures::{StratifiedTables, StratumTable};
use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

pub fn crr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crr"))
        .args(args)
        .output()
        .expect("spawn crr")
}

pub fn crr_ok(args: &[&str]) -> Output {
    let out = crr(args);
    assert!(
        out.status.success(),
        "crr {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

/// Header and data rows of a CSV written by the binary; comment lines are
/// dropped.
pub fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).expect("read csv");
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines
        .next()
        .expect("header")
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    (header, rows)
}

pub fn column(header: &[String], name: &str) -> usize {
    header
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name}"))
}

/// `C(n, k)` computed exactly in integers.
fn choose(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * u128::from(n - i) / u128::from(i + 1);
    }
    c as f64
}

/// Binomial pmf by direct multiplication. Only meant for small `n`.
pub fn binom_pmf(n: u64, k: u64, p: f64) -> f64 {
    choose(n, k) * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
}

pub fn z_two_sided(level: f64) -> f64 {
    Normal::standard().inverse_cdf(0.5 + level / 2.0)
}

/// Conditional risks of the two groups within the scenario's stratum,
/// written out directly for constant marginal probabilities.
pub fn stratum_risks(s: &Scenario) -> (f64, f64) {
    match s.stratum {
        Stratum::Given1 => (
            s.pi_exposed + s.rho_exposed * (1.0 - s.pi_exposed),
            s.pi_nonexposed + s.rho_nonexposed * (1.0 - s.pi_nonexposed),
        ),
        Stratum::Given0 => (
            s.pi_exposed * (1.0 - s.rho_exposed),
            s.pi_nonexposed * (1.0 - s.rho_nonexposed),
        ),
    }
}

pub struct BruteForce {
    pub p_c: f64,
    pub degenerate_mass: f64,
    pub true_rr: f64,
}

/// Visits every `(a, c)` in `[0, n_E] x [0, n_nonE]`.
pub fn brute_force_coverage(s: &Scenario) -> BruteForce {
    let (p_e, p_n) = stratum_risks(s);
    let true_rr = p_e / p_n;
    let z = z_two_sided(s.level);
    let (n_e, n_n) = (s.n_exposed, s.n_nonexposed);
    let mut p_c = 0.0;
    let mut degenerate_mass = 0.0;
    for a in 0..=n_e {
        for c in 0..=n_n {
            let pr = binom_pmf(n_e, a, p_e) * binom_pmf(n_n, c, p_n);
            if a == 0 || a == n_e || c == 0 || c == n_n {
                degenerate_mass += pr;
                continue;
            }
            let ha = a as f64 / n_e as f64;
            let hc = c as f64 / n_n as f64;
            let point = ha / hc;
            let se = ((1.0 - ha) / (n_e as f64 * ha) + (1.0 - hc) / (n_n as f64 * hc)).sqrt();
            if point * (-z * se).exp() <= true_rr && true_rr <= point * (z * se).exp() {
                p_c += pr;
            }
        }
    }
    BruteForce {
        p_c,
        degenerate_mass,
        true_rr,
    }
}

/// Pearson correlation of paired observations, two-pass.
pub fn pearson(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Expands one group into `(Y_k, Y_j)` pairs.
pub fn expand_group(
    events1: u64,
    non_events1: u64,
    events0: u64,
    non_events0: u64,
) -> Vec<(f64, f64)> {
    let mut pairs = Vec::new();
    for (count, pair) in [
        (events1, (1.0, 1.0)),
        (non_events1, (1.0, 0.0)),
        (events0, (0.0, 1.0)),
        (non_events0, (0.0, 0.0)),
    ] {
        pairs.extend(std::iter::repeat_n(pair, count as usize));
    }
    pairs
}

/// Stratified tables with every cell in `1..=max_cell`.
pub fn random_tables<R: Rng>(rng: &mut R, max_cell: u64) -> StratifiedTables {
    let mut cell = || rng.random_range(1..=max_cell);
    StratifiedTables::new(
        StratumTable::new(cell(), cell(), cell(), cell()),
        StratumTable::new(cell(), cell(), cell(), cell()),
    )
}

/// Ratio forms of the two stratum estimates.
pub fn ratio_forms(t: &StratifiedTables) -> (f64, f64) {
    let s1 = &t.stratum1;
    let s0 = &t.stratum0;
    let rr1 = (s1.a as f64 / (s1.a + s1.b) as f64) / (s1.c as f64 / (s1.c + s1.d) as f64);
    let rr0 = (s0.a as f64 / (s0.a + s0.b) as f64) / (s0.c as f64 / (s0.c + s0.d) as f64);
    (rr1, rr0)
}

/// Estimated `(pi_j, pi_k)` for the exposed and the non-exposed group.
pub fn estimated_marginals(t: &StratifiedTables) -> ((f64, f64), (f64, f64)) {
    let s1 = &t.stratum1;
    let s0 = &t.stratum0;
    let n_e = (s1.a + s1.b + s0.a + s0.b) as f64;
    let n_n = (s1.c + s1.d + s0.c + s0.d) as f64;
    (
        ((s1.a + s0.a) as f64 / n_e, (s1.a + s1.b) as f64 / n_e),
        ((s1.c + s0.c) as f64 / n_n, (s1.c + s1.d) as f64 / n_n),
    )
}

/// Relative closeness for values that may be large, absolute below 1.
pub fn close(actual: f64, expected: f64, tol: f64) -> bool {
    (actual - expected).abs() <= tol * expected.abs().max(1.0)
}
