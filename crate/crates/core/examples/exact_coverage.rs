//! Exact coverage of the RR1 interval for one scenario, with and without
//! tail pruning.
//!
//! ```bash
//! cargo run --release -p condrr --example exact_coverage
//! ```

use condrr::coverage::{exact_coverage, Scenario, Stratum, DEFAULT_PRUNE_EPSILON};

fn main() {
    let scenario = Scenario {
        n_exposed: 500,
        n_nonexposed: 1000,
        pi_exposed: 0.1,
        pi_nonexposed: 0.1,
        rho_exposed: 0.1,
        rho_nonexposed: 0.9,
        stratum: Stratum::Given1,
        level: 0.95,
    };
    for eps in [0.0, DEFAULT_PRUNE_EPSILON, 1e-8] {
        let r = exact_coverage(&scenario, eps).unwrap();
        println!(
            "prune {eps:e}: p_c = {:.12}, normalized {:.12}, degenerate {:.3e}, truncation <= {:.3e}",
            r.p_c,
            r.p_c_normalized.unwrap(),
            r.degenerate_mass,
            r.truncation_bound
        );
    }
    let r = exact_coverage(&scenario, DEFAULT_PRUNE_EPSILON).unwrap();
    println!(
        "true RR1 = {:.6}, non-coverage 1 - p_c = {:.4}",
        r.true_rr,
        1.0 - r.p_c
    );
}
