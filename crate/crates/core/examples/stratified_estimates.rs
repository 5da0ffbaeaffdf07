//! Crude and conditional relative risks, with 95% intervals and the
//! within-subject correlations, from a pair of stratified 2x2 tables.
//!
//! ```bash
//! cargo run -p condrr --example stratified_estimates
//! ```

use condrr::measures::{
    phi_correlations, rr0_estimate, rr1_estimate, rr_crude, StratifiedTables, StratumTable,
};

fn main() {
    // rows: exposed (a events, b non-events), non-exposed (c, d)
    let tables = StratifiedTables::new(
        StratumTable::new(48, 22, 39, 20), // outcome present at the earlier visit
        StratumTable::new(52, 190, 28, 211), // outcome absent at the earlier visit
    );
    let show = |name: &str, e: condrr::RiskRatioEstimate| {
        println!(
            "{name:<4} {:.3} ({:.3} - {:.3})  se(log) {:.4}",
            e.point, e.ci_lower, e.ci_upper, e.log_se
        )
    };
    show("RR", rr_crude(&tables.collapsed(), 0.95).unwrap());
    show("RR1", rr1_estimate(&tables, 0.95).unwrap());
    show("RR0", rr0_estimate(&tables, 0.95).unwrap());
    let (rho_e, rho_n) = phi_correlations(&tables).unwrap();
    println!("rho_E {rho_e:.3}, rho_nonE {rho_n:.3}");

    let empty = StratifiedTables::new(StratumTable::new(0, 5, 3, 4), StratumTable::new(2, 3, 4, 5));
    println!("zero cell: {}", rr1_estimate(&empty, 0.95).unwrap_err());
}
