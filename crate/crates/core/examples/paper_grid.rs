//! Runs the full 2025-scenario coverage study for both strata and prints a
//! summary of `1 - p_c` by sample-size cell and by non-exposed correlation.
//!
//! ```bash
//! cargo run --release -p condrr --example paper_grid
//! ```

use std::time::Instant;

use condrr::coverage::{run_grid, ScenarioGrid, Stratum, PAPER_CORRELATIONS, PAPER_SAMPLE_SIZES};

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

fn main() {
    for stratum in [Stratum::Given1, Stratum::Given0] {
        let started = Instant::now();
        let records = run_grid(&ScenarioGrid::paper(stratum)).expect("paper grid is well formed");
        let elapsed = started.elapsed();
        let results: Vec<_> = records
            .iter()
            .filter_map(|r| r.result.as_ref().ok().map(|c| (r.scenario, *c)))
            .collect();
        let worst = results
            .iter()
            .max_by(|a, b| a.1.p_c.total_cmp(&b.1.p_c).reverse())
            .expect("non-empty grid");
        println!(
            "stratum {stratum}: {} scenarios ({} evaluated) in {:.2?}",
            records.len(),
            results.len(),
            elapsed
        );
        println!(
            "  largest 1 - p_c = {:.4} (normalized {:.4}) at {:?}",
            1.0 - worst.1.p_c,
            1.0 - worst.1.p_c_normalized.unwrap_or(f64::NAN),
            worst.0
        );
        println!("  mean 1 - p_c by (n_E, n_nonE):");
        for &n_e in &PAPER_SAMPLE_SIZES {
            let row: Vec<String> = PAPER_SAMPLE_SIZES
                .iter()
                .map(|&n_n| {
                    let m = mean(
                        results
                            .iter()
                            .filter(|(s, _)| s.n_exposed == n_e && s.n_nonexposed == n_n)
                            .map(|(_, c)| 1.0 - c.p_c),
                    );
                    format!("{m:.4}")
                })
                .collect();
            println!("    n_E = {n_e:>4}: {}", row.join("  "));
        }
        for &pi_n in &[0.1, 0.5, 0.9] {
            let by_rho: Vec<String> = PAPER_CORRELATIONS
                .iter()
                .map(|&rho| {
                    let m = mean(
                        results
                            .iter()
                            .filter(|(s, _)| s.pi_nonexposed == pi_n && s.rho_nonexposed == rho)
                            .map(|(_, c)| 1.0 - c.p_c),
                    );
                    format!("rho_nonE={rho}: {m:.4}")
                })
                .collect();
            println!("  pi_nonE = {pi_n}: {}", by_rho.join(", "));
        }
    }
}
