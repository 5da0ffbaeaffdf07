//! Monte-Carlo coverage under both margin models next to the exact value.
//!
//! ```bash
//! cargo run --release -p condrr --example monte_carlo_check
//! ```

use condrr::coverage::{exact_coverage, Scenario, Stratum, DEFAULT_PRUNE_EPSILON};
use condrr::mc::{mc_coverage, CohortSpec, MarginModel};

fn main() {
    let scenario = Scenario {
        n_exposed: 1000,
        n_nonexposed: 500,
        pi_exposed: 0.3,
        pi_nonexposed: 0.5,
        rho_exposed: 0.5,
        rho_nonexposed: 0.1,
        stratum: Stratum::Given0,
        level: 0.95,
    };
    let exact = exact_coverage(&scenario, DEFAULT_PRUNE_EPSILON).unwrap();
    println!("exact p_c          {:.5}", exact.p_c);
    let spec = CohortSpec::from_scenario(&scenario, 2024, 20_000).unwrap();
    for model in [MarginModel::FixedMargin, MarginModel::Cohort] {
        let mc = mc_coverage(&spec, scenario.stratum, scenario.level, model).unwrap();
        println!(
            "{model:<12} MC    {:.5} +/- {:.5} ({:+.2} SE from exact)",
            mc.estimate,
            mc.std_error,
            (mc.estimate - exact.p_c) / mc.std_error
        );
    }
}
