//! Simulates a four-visit cohort, writes it as CSV, reads it back and runs
//! the full analysis: per-visit risks and RR, RR1, RR0 for consecutive visits.
//!
//! ```bash
//! cargo run -p condrr --example longitudinal_analysis
//! ```

use condrr::ingest::{analyze, parse_dataset, FormatOptions};
use condrr::mc::{simulate_dataset, GroupTrajectory};
use condrr::measures::RhoFormula;

fn main() {
    let exposed = GroupTrajectory {
        n: 360,
        risks: vec![0.16, 0.30, 0.48, 0.53],
        lag_correlations: vec![0.3, 0.45, 0.6],
    };
    let nonexposed = GroupTrajectory {
        n: 354,
        risks: vec![0.18, 0.25, 0.37, 0.52],
        lag_correlations: vec![0.4, 0.7, 0.7],
    };
    let data = simulate_dataset(&exposed, &nonexposed, 7).unwrap();

    let dir = std::env::temp_dir().join("condrr-longitudinal-example");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("cohort.csv");
    data.write_wide_csv(std::fs::File::create(&path).unwrap())
        .unwrap();
    println!("wrote {}", path.display());

    let parsed = parse_dataset(&path, &FormatOptions::wide("1")).unwrap();
    assert_eq!(parsed, data);
    let report = analyze(&parsed, &[], 0.95, RhoFormula::Phi).unwrap();
    print!("{report}");
}
