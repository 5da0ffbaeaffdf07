//! Crude relative risk versus the population `RR1` and `RR0`.

use std::io::{self, Write};

use crate::format::sig;
use crate::measures::{plug_in_rr0, plug_in_rr1, MeasureError};
use crate::prob::BernoulliPairParams;

pub const COMPARE_CSV_HEADER: &str = "pi_E,pi_nonE,rho_E,rho_nonE,rr,rr1,rr0";

/// Axes of a comparison sweep (constant outcome probability per group).
#[derive(Debug, Clone, PartialEq)]
pub struct CompareAxes {
    pub pi_exposed: Vec<f64>,
    pub pi_nonexposed: Vec<f64>,
    pub rho_exposed: Vec<f64>,
    pub rho_nonexposed: Vec<f64>,
}

impl Default for CompareAxes {
    /// `pi` in {0.1, 0.3, 0.5, 0.7, 0.9}, `rho` in {0.1, 0.5, 0.9}: 225 points.
    fn default() -> Self {
        let pi = vec![0.1, 0.3, 0.5, 0.7, 0.9];
        let rho = vec![0.1, 0.5, 0.9];
        Self {
            pi_exposed: pi.clone(),
            pi_nonexposed: pi,
            rho_exposed: rho.clone(),
            rho_nonexposed: rho,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRecord {
    pub pi_exposed: f64,
    pub pi_nonexposed: f64,
    pub rho_exposed: f64,
    pub rho_nonexposed: f64,
    /// `pi_E / pi_nonE`.
    pub rr: f64,
    pub rr1: Result<f64, MeasureError>,
    pub rr0: Result<f64, MeasureError>,
}

impl ComparisonRecord {
    pub fn is_admissible(&self) -> bool {
        self.rr1.is_ok() && self.rr0.is_ok()
    }
}

fn evaluate(pi_e: f64, pi_n: f64, rho_e: f64, rho_n: f64) -> ComparisonRecord {
    let params = BernoulliPairParams::constant(pi_e, rho_e)
        .and_then(|e| Ok((e, BernoulliPairParams::constant(pi_n, rho_n)?)))
        .map_err(MeasureError::from);
    let (rr1, rr0) = match params {
        Ok((exposed, nonexposed)) => (
            plug_in_rr1(&exposed, &nonexposed),
            plug_in_rr0(&exposed, &nonexposed),
        ),
        Err(e) => (Err(e), Err(e)),
    };
    ComparisonRecord {
        pi_exposed: pi_e,
        pi_nonexposed: pi_n,
        rho_exposed: rho_e,
        rho_nonexposed: rho_n,
        rr: pi_e / pi_n,
        rr1,
        rr0,
    }
}

/// Evaluates every axis combination, `pi_E` slowest and `rho_nonE` fastest.
/// Inadmissible points are kept with the error in `rr1`/`rr0`.
pub fn compare_grid(axes: &CompareAxes) -> Vec<ComparisonRecord> {
    let mut out = Vec::new();
    for &pi_e in &axes.pi_exposed {
        for &pi_n in &axes.pi_nonexposed {
            for &rho_e in &axes.rho_exposed {
                for &rho_n in &axes.rho_nonexposed {
                    out.push(evaluate(pi_e, pi_n, rho_e, rho_n));
                }
            }
        }
    }
    out
}

/// CSV with 10 significant digits; undefined measures print as `NA`.
pub fn write_compare_csv<W: Write>(
    mut out: W,
    records: &[ComparisonRecord],
    build_id: Option<&str>,
) -> io::Result<()> {
    if let Some(id) = build_id {
        writeln!(out, "# {id}")?;
    }
    writeln!(out, "{COMPARE_CSV_HEADER}")?;
    let cell = |r: &Result<f64, MeasureError>| r.map_or_else(|_| "NA".to_string(), |v| sig(v, 10));
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            sig(r.pi_exposed, 10),
            sig(r.pi_nonexposed, 10),
            sig(r.rho_exposed, 10),
            sig(r.rho_nonexposed, 10),
            sig(r.rr, 10),
            cell(&r.rr1),
            cell(&r.rr0),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn find(records: &[ComparisonRecord], key: [f64; 4]) -> &ComparisonRecord {
        records
            .iter()
            .find(|r| {
                [
                    r.pi_exposed,
                    r.pi_nonexposed,
                    r.rho_exposed,
                    r.rho_nonexposed,
                ] == key
            })
            .unwrap()
    }

    #[test]
    fn worked_examples() {
        let records = compare_grid(&CompareAxes::default());
        assert_eq!(records.len(), 225);
        let r = find(&records, [0.1, 0.1, 0.9, 0.1]);
        assert_eq!(r.rr, 1.0);
        assert!((r.rr1.unwrap() - 0.91 / 0.19).abs() < 1e-12);
        let r = find(&records, [0.9, 0.1, 0.1, 0.9]);
        assert!((r.rr - 9.0).abs() < 1e-12);
        assert!((r.rr0.unwrap() - 81.0).abs() < 1e-9);
    }

    #[test]
    fn independence_collapse() {
        let axes = CompareAxes {
            rho_exposed: vec![0.0],
            rho_nonexposed: vec![0.0],
            ..Default::default()
        };
        for r in compare_grid(&axes) {
            assert_eq!(r.rr1.unwrap(), r.rr);
            assert_eq!(r.rr0.unwrap(), r.rr);
        }
    }

    #[test]
    fn underestimation_when_exposed_risk_is_small() {
        // RR < RR1 whenever rho_E > rho_nonE and pi_E <= pi_nonE
        for r in compare_grid(&CompareAxes::default()) {
            if r.rho_exposed > r.rho_nonexposed
                && r.pi_exposed <= 0.3
                && r.pi_exposed <= r.pi_nonexposed
            {
                assert!(r.rr < r.rr1.unwrap(), "{r:?}");
            }
        }
    }

    #[test]
    fn inadmissible_points_are_flagged() {
        let axes = CompareAxes {
            pi_exposed: vec![0.1],
            pi_nonexposed: vec![0.5],
            rho_exposed: vec![-0.5],
            rho_nonexposed: vec![0.1],
        };
        let records = compare_grid(&axes);
        assert!(!records[0].is_admissible());
        let mut buf = Vec::new();
        write_compare_csv(&mut buf, &records, None).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            format!("{COMPARE_CSV_HEADER}\n0.1,0.5,-0.5,0.1,0.2,NA,NA\n")
        );
    }
}
