//! Population RR against RR1 and RR0 over a grid of marginal risks and
//! correlations, including the two extreme worked cases.
//!
//! ```bash
//! cargo run -p condrr --example worked_comparison
//! ```

use condrr::comparison::{compare_grid, CompareAxes};

fn main() {
    let records = compare_grid(&CompareAxes::default());
    println!("{} grid points", records.len());
    let show = |pi_e: f64, pi_n: f64, rho_e: f64, rho_n: f64| {
        let r = records
            .iter()
            .find(|r| {
                (
                    r.pi_exposed,
                    r.pi_nonexposed,
                    r.rho_exposed,
                    r.rho_nonexposed,
                ) == (pi_e, pi_n, rho_e, rho_n)
            })
            .unwrap();
        println!(
            "pi=({pi_e}, {pi_n}) rho=({rho_e}, {rho_n}): RR {:.4}  RR1 {:.4}  RR0 {:.4}",
            r.rr,
            r.rr1.unwrap(),
            r.rr0.unwrap()
        );
    };
    show(0.1, 0.1, 0.9, 0.1);
    show(0.9, 0.1, 0.1, 0.9);
    show(0.5, 0.5, 0.5, 0.5);

    let under = records
        .iter()
        .filter(|r| r.rr1.as_ref().is_ok_and(|&v| v > r.rr))
        .count();
    println!("RR understates RR1 at {under} of {} points", records.len());
}
