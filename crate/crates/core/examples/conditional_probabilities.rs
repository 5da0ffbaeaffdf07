//! Conditional outcome probabilities of a correlated Bernoulli pair and the
//! correlation range a pair of marginals allows.
//!
//! ```bash
//! cargo run -p condrr --example conditional_probabilities
//! ```

use condrr::prob::{
    cond_prob_given0, cond_prob_given1, joint_prob_11, rho_bounds, BernoulliPairParams,
};

fn main() {
    let (pi_j, pi_k) = (0.35, 0.2);
    let (lower, upper) = rho_bounds(pi_j, pi_k).unwrap();
    println!("pi_j = {pi_j}, pi_k = {pi_k}: admissible rho in [{lower:.4}, {upper:.4}]");
    println!(
        "{:>6} {:>12} {:>12} {:>12}",
        "rho", "P(Yj|Yk=1)", "P(Yj|Yk=0)", "P(11)"
    );
    for rho in [lower, -0.1, 0.0, 0.3, upper] {
        let p = BernoulliPairParams::new(pi_j, pi_k, rho).unwrap();
        println!(
            "{rho:>6.3} {:>12.6} {:>12.6} {:>12.6}",
            cond_prob_given1(&p).unwrap(),
            cond_prob_given0(&p).unwrap(),
            joint_prob_11(&p).unwrap()
        );
    }
    match BernoulliPairParams::new(pi_j, pi_k, 0.95) {
        Ok(_) => unreachable!(),
        Err(e) => println!("rho = 0.95: {e}"),
    }
}
