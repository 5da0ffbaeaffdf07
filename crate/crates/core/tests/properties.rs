mod common;

use condrr::coverage::{exact_coverage, run_grid, Scenario, ScenarioGrid, Stratum};
use condrr::measures::{
    phi_correlations, phi_correlations_with, rr0_estimate, rr1_estimate, rr_crude, RhoFormula,
    StratifiedTables, StratumTable,
};
use condrr::prob::BernoulliPairParams;
use condrr::{plug_in_rr0, plug_in_rr1};
use proptest::prelude::*;

use common::*;

fn tables(max_cell: u64) -> impl Strategy<Value = StratifiedTables> {
    proptest::array::uniform8(1..=max_cell).prop_map(|c| {
        StratifiedTables::new(
            StratumTable::new(c[0], c[1], c[2], c[3]),
            StratumTable::new(c[4], c[5], c[6], c[7]),
        )
    })
}

fn scenario() -> impl Strategy<Value = Scenario> {
    (
        2u64..=30,
        2u64..=30,
        0.05f64..0.95,
        0.05f64..0.95,
        0.0f64..0.9,
        0.0f64..0.9,
        any::<bool>(),
        0.8f64..0.99,
    )
        .prop_map(
            |(n_e, n_n, pi_e, pi_n, rho_e, rho_n, given1, level)| Scenario {
                n_exposed: n_e,
                n_nonexposed: n_n,
                pi_exposed: pi_e,
                pi_nonexposed: pi_n,
                rho_exposed: rho_e,
                rho_nonexposed: rho_n,
                stratum: if given1 {
                    Stratum::Given1
                } else {
                    Stratum::Given0
                },
                level,
            },
        )
}

proptest! {
    #[test]
    fn plug_in_matches_ratio_form(t in tables(300)) {
        let (rr1, rr0) = ratio_forms(&t);
        let (rho_e, rho_n) = phi_correlations(&t).unwrap();
        let ((pj_e, pk_e), (pj_n, pk_n)) = estimated_marginals(&t);
        let exposed = BernoulliPairParams::new(pj_e, pk_e, rho_e).unwrap();
        let nonexposed = BernoulliPairParams::new(pj_n, pk_n, rho_n).unwrap();
        prop_assert!(close(plug_in_rr1(&exposed, &nonexposed).unwrap(), rr1, 1e-10));
        prop_assert!(close(plug_in_rr0(&exposed, &nonexposed).unwrap(), rr0, 1e-10));
        prop_assert!(close(rr1_estimate(&t, 0.95).unwrap().point, rr1, 1e-14));
        prop_assert!(close(rr0_estimate(&t, 0.95).unwrap().point, rr0, 1e-14));
    }

    #[test]
    fn phi_matches_pearson(t in tables(60)) {
        let (rho_e, rho_n) = phi_correlations(&t).unwrap();
        let (s1, s0) = (t.stratum1, t.stratum0);
        prop_assert!((rho_e - pearson(&expand_group(s1.a, s1.b, s0.a, s0.b))).abs() < 1e-12);
        prop_assert!((rho_n - pearson(&expand_group(s1.c, s1.d, s0.c, s0.d))).abs() < 1e-12);
    }

    #[test]
    fn literal_rho_differs_only_in_the_nonexposed_margin(t in tables(60)) {
        let phi = phi_correlations(&t).unwrap();
        let literal = phi_correlations_with(&t, RhoFormula::PaperLiteral).unwrap();
        prop_assert_eq!(phi.0, literal.0);
        let (s1, s0) = (t.stratum1, t.stratum0);
        if s1.b + s0.b == s1.d + s0.d {
            prop_assert_eq!(phi.1, literal.1);
        }
    }

    #[test]
    fn interval_is_log_symmetric(t in tables(500).prop_map(|t| t.stratum1), level in 0.5f64..0.999) {
        let e = rr_crude(&t, level).unwrap();
        let lo = e.point.ln() - e.ci_lower.ln();
        let hi = e.ci_upper.ln() - e.point.ln();
        prop_assert!((lo - hi).abs() < 1e-12);
        prop_assert!((lo - z_two_sided(level) * e.log_se).abs() < 1e-12);
        prop_assert!(e.covers(e.point));
    }

    #[test]
    fn swapping_groups_inverts(t in tables(500)) {
        let e = rr1_estimate(&t, 0.95).unwrap();
        let s = rr1_estimate(&t.swapped(), 0.95).unwrap();
        prop_assert!(close(s.point, 1.0 / e.point, 1e-13));
        prop_assert!(close(s.ci_lower, 1.0 / e.ci_upper, 1e-12));
        prop_assert!(close(s.log_se, e.log_se, 1e-13));
    }

    #[test]
    fn collapsing_preserves_counts(t in tables(500)) {
        let c = t.collapsed();
        prop_assert_eq!(c.total(), t.stratum1.total() + t.stratum0.total());
        prop_assert_eq!(c.n_exposed(), t.n_exposed());
        prop_assert_eq!(c.n_nonexposed(), t.n_nonexposed());
    }

    #[test]
    fn exact_matches_oracle_and_pruning_is_bounded(s in scenario(), eps in 1e-12f64..1e-6) {
        let (p_e, p_n) = stratum_risks(&s);
        prop_assume!(p_e < 1.0 - 1e-9 && p_n < 1.0 - 1e-9);
        let full = exact_coverage(&s, 0.0).unwrap();
        let oracle = brute_force_coverage(&s);
        prop_assert!((full.p_c - oracle.p_c).abs() < 1e-12);
        prop_assert!((full.degenerate_mass - oracle.degenerate_mass).abs() < 1e-12);
        prop_assert_eq!(full.truncation_bound, 0.0);
        let total = full.p_c + full.noncovering_mass + full.degenerate_mass;
        prop_assert!((total - 1.0).abs() < 1e-12);
        let pruned = exact_coverage(&s, eps).unwrap();
        prop_assert!(pruned.truncation_bound <= eps);
        prop_assert!(pruned.p_c <= full.p_c + 1e-13);
        prop_assert!(full.p_c <= pruned.p_c + pruned.truncation_bound + 1e-13);
    }

    #[test]
    fn wider_level_never_lowers_coverage(s in scenario()) {
        let (p_e, p_n) = stratum_risks(&s);
        prop_assume!(p_e < 1.0 - 1e-9 && p_n < 1.0 - 1e-9);
        let narrow = exact_coverage(&Scenario { level: 0.95, ..s }, 0.0).unwrap();
        let wide = exact_coverage(&Scenario { level: 0.99, ..s }, 0.0).unwrap();
        prop_assert!(wide.p_c >= narrow.p_c);
    }
}

#[test]
fn grid_results_do_not_depend_on_pool_size() {
    let grid = ScenarioGrid::from_toml_str(
        "n_E = [20, 300]\nn_nonE = [25, 500]\npi_E = [0.1, 0.7]\npi_nonE = [0.3, 0.9]\n\
         rho_E = [0.1, 0.9]\nrho_nonE = [0.5]\nstratum = 0\n",
    )
    .unwrap();
    let in_pool = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_grid(&grid).unwrap())
    };
    let one = in_pool(1);
    let four = in_pool(4);
    assert_eq!(one.len(), 32);
    for (a, b) in one.iter().zip(&four) {
        assert_eq!(a.scenario, b.scenario);
        let bits =
            |r: &condrr::coverage::GridRecord| r.result.as_ref().ok().map(|c| c.p_c.to_bits());
        assert_eq!(bits(a), bits(b));
    }
}
