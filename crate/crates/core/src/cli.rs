//! The `crr` command-line tool.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical-domain error.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand};
use thiserror::Error;

use crate::comparison::{compare_grid, write_compare_csv, CompareAxes};
use crate::coverage::{
    run_grid, write_coverage_csv, Scenario, ScenarioError, ScenarioGrid, Stratum,
};
use crate::ingest::{analyze, parse_dataset, FormatOptions, IngestError, Layout};
use crate::mc::{mc_coverage, write_oracle_csv, CohortSpec, MarginModel, McError};
use crate::measures::{MeasureError, RhoFormula};
use crate::BUILD_ID;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::InvalidPair { .. }
            | IngestError::Measure(MeasureError::InvalidLevel(_)) => CliError::Usage(e.to_string()),
            IngestError::Measure(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::GridFile(_) | ScenarioError::EmptyAxis(_) => {
                CliError::Data(e.to_string())
            }
            ScenarioError::InvalidPruneEpsilon(_) | ScenarioError::InvalidLevel(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<McError> for CliError {
    fn from(e: McError) -> Self {
        match e {
            McError::NoReplications
            | McError::EmptyGroup
            | McError::Measure(MeasureError::InvalidLevel(_)) => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

fn io_error(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |e| CliError::Data(format!("cannot write {}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(
    name = "crr",
    version,
    about = "Conditional relative risks for longitudinal binary data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analyse a longitudinal dataset: per-visit risks, RR, RR1, RR0, correlations.
    Analyze(AnalyzeArgs),
    /// Exact coverage probability of the RR1/RR0 intervals over a scenario grid.
    Coverage(CoverageArgs),
    /// Crude RR against population RR1/RR0 over a parameter grid.
    Compare(CompareArgs),
    /// Monte-Carlo coverage estimate for one scenario.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Wide CSV `id,exposure,y1,...,yT` (or long `id,exposure,visit,y` with --long).
    #[arg(long)]
    pub input: PathBuf,
    /// Value of the exposure column that marks the exposed group.
    #[arg(long)]
    pub exposed_value: String,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Visit pairs `j:k` separated by commas, e.g. `2:1,3:2`. Default: consecutive visits.
    #[arg(long, value_delimiter = ',', value_parser = parse_pair)]
    pub pairs: Vec<(usize, usize)>,
    /// Output directory for report.txt, risks.csv and measures.csv.
    #[arg(long)]
    pub out: PathBuf,
    /// Input is in long layout.
    #[arg(long)]
    pub long: bool,
    /// Use the literal (b1 + b0) margin in the non-exposed correlation.
    #[arg(long)]
    pub paper_literal_rho: bool,
}

fn parse_pair(pair: &str) -> Result<(usize, usize), String> {
    let (j, k) = pair
        .trim()
        .split_once(':')
        .ok_or_else(|| format!("visit pair `{pair}` is not of the form j:k"))?;
    let j = j
        .trim()
        .parse()
        .map_err(|_| format!("invalid visit `{j}`"))?;
    let k = k
        .trim()
        .parse()
        .map_err(|_| format!("invalid visit `{k}`"))?;
    Ok((j, k))
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["grid", "paper_grid"])))]
pub struct CoverageArgs {
    /// TOML grid file (keys n_E, n_nonE, pi_E, pi_nonE, rho_E, rho_nonE, stratum, level, prune_epsilon).
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// The 2025-scenario study grid.
    #[arg(long)]
    pub paper_grid: bool,
    /// 1 for RR1, 0 for RR0. Overrides the grid file.
    #[arg(long)]
    pub stratum: Option<Stratum>,
    /// Tail-pruning budget. Overrides the grid file.
    #[arg(long)]
    pub prune: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.3, 0.5, 0.7, 0.9])]
    pub pi_exposed: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.3, 0.5, 0.7, 0.9])]
    pub pi_nonexposed: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_values_t = [0.1, 0.5, 0.9])]
    pub rho_exposed: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_values_t = [0.1, 0.5, 0.9])]
    pub rho_nonexposed: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub n_exposed: u64,
    #[arg(long)]
    pub n_nonexposed: u64,
    #[arg(long)]
    pub pi_exposed: f64,
    #[arg(long)]
    pub pi_nonexposed: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub rho_exposed: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub rho_nonexposed: f64,
    #[arg(long, default_value = "1")]
    pub stratum: Stratum,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long)]
    pub reps: u64,
    #[arg(long)]
    pub seed: u64,
    /// fixed_margin or cohort.
    #[arg(long, default_value = "fixed_margin")]
    pub margin_model: MarginModel,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub threads: Option<usize>,
}

fn with_threads<T>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T, CliError>
where
    T: Send,
{
    match threads {
        None => Ok(job()),
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(job))
            .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}"))),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(io_error(path))
}

pub fn run_analyze(args: &AnalyzeArgs) -> Result<(), CliError> {
    let options = FormatOptions {
        exposed_value: args.exposed_value.clone(),
        layout: if args.long {
            Layout::Long
        } else {
            Layout::Wide
        },
    };
    let data = parse_dataset(&args.input, &options)?;
    let formula = if args.paper_literal_rho {
        RhoFormula::PaperLiteral
    } else {
        RhoFormula::Phi
    };
    let report = analyze(&data, &args.pairs, args.level, formula)?;

    fs::create_dir_all(&args.out).map_err(io_error(&args.out))?;
    let text = report.to_string();
    let report_path = args.out.join("report.txt");
    fs::write(&report_path, &text).map_err(io_error(&report_path))?;
    let risks_path = args.out.join("risks.csv");
    let mut risks = create(&risks_path)?;
    report
        .write_risks_csv(&mut risks, Some(BUILD_ID))
        .map_err(io_error(&risks_path))?;
    risks.flush().map_err(io_error(&risks_path))?;
    let measures_path = args.out.join("measures.csv");
    let mut measures = create(&measures_path)?;
    report
        .write_measures_csv(&mut measures, Some(BUILD_ID))
        .map_err(io_error(&measures_path))?;
    measures.flush().map_err(io_error(&measures_path))?;
    print!("{text}");
    Ok(())
}

pub fn run_coverage(args: &CoverageArgs) -> Result<(), CliError> {
    let mut grid = match &args.grid {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
            ScenarioGrid::from_toml_str(&text)?
        }
        None => ScenarioGrid::paper(args.stratum.unwrap_or_default()),
    };
    if let Some(stratum) = args.stratum {
        grid.stratum = stratum;
    }
    if let Some(eps) = args.prune {
        grid.prune_epsilon = eps;
    }
    let records = with_threads(args.threads, || run_grid(&grid))??;
    let mut out = create(&args.out)?;
    write_coverage_csv(&mut out, &records, Some(BUILD_ID)).map_err(io_error(&args.out))?;
    out.flush().map_err(io_error(&args.out))?;
    let flagged = records.iter().filter(|r| !r.is_admissible()).count();
    let worst = records
        .iter()
        .filter_map(|r| r.result.as_ref().ok())
        .map(|r| 1.0 - r.p_c)
        .fold(f64::NAN, f64::max);
    eprintln!(
        "{} scenarios ({} inadmissible), max 1 - p_c = {}",
        records.len(),
        flagged,
        crate::format::sig(worst, 6)
    );
    Ok(())
}

pub fn run_compare(args: &CompareArgs) -> Result<(), CliError> {
    let axes = CompareAxes {
        pi_exposed: args.pi_exposed.clone(),
        pi_nonexposed: args.pi_nonexposed.clone(),
        rho_exposed: args.rho_exposed.clone(),
        rho_nonexposed: args.rho_nonexposed.clone(),
    };
    let records = compare_grid(&axes);
    let mut out = create(&args.out)?;
    write_compare_csv(&mut out, &records, Some(BUILD_ID)).map_err(io_error(&args.out))?;
    out.flush().map_err(io_error(&args.out))?;
    let flagged = records.iter().filter(|r| !r.is_admissible()).count();
    if flagged > 0 {
        eprintln!(
            "{flagged} of {} grid points are inadmissible (NA)",
            records.len()
        );
    }
    Ok(())
}

pub fn run_oracle(args: &OracleArgs) -> Result<(), CliError> {
    let scenario = Scenario {
        n_exposed: args.n_exposed,
        n_nonexposed: args.n_nonexposed,
        pi_exposed: args.pi_exposed,
        pi_nonexposed: args.pi_nonexposed,
        rho_exposed: args.rho_exposed,
        rho_nonexposed: args.rho_nonexposed,
        stratum: args.stratum,
        level: args.level,
    };
    let spec = CohortSpec::from_scenario(&scenario, args.seed, args.reps)?;
    let result = with_threads(args.threads, || {
        mc_coverage(&spec, args.stratum, args.level, args.margin_model)
    })??;
    let mut out = create(&args.out)?;
    write_oracle_csv(
        &mut out,
        &scenario,
        args.margin_model,
        args.seed,
        &result,
        Some(BUILD_ID),
    )
    .map_err(io_error(&args.out))?;
    out.flush().map_err(io_error(&args.out))?;
    Ok(())
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Analyze(args) => run_analyze(args),
        Command::Coverage(args) => run_coverage(args),
        Command::Compare(args) => run_compare(args),
        Command::Oracle(args) => run_oracle(args),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn pair_syntax() {
        assert_eq!(parse_pair(" 4:2").unwrap(), (4, 2));
        assert!(parse_pair("2-1").is_err());
        assert!(parse_pair("x:1").is_err());
        let cli = Cli::try_parse_from([
            "crr",
            "analyze",
            "--input",
            "d.csv",
            "--exposed-value",
            "1",
            "--out",
            "o",
            "--pairs",
            "2:1,4:2",
        ])
        .unwrap();
        match cli.command {
            Command::Analyze(a) => assert_eq!(a.pairs, vec![(2, 1), (4, 2)]),
            _ => unreachable!(),
        }
    }

    #[test]
    fn usage_errors_exit_1() {
        assert_eq!(main_with_args(["crr", "coverage", "--out", "x.csv"]), 1);
        assert_eq!(main_with_args(["crr", "bogus"]), 1);
    }

    #[test]
    fn exit_code_mapping() {
        assert_eq!(
            CliError::from(ScenarioError::InvalidPruneEpsilon(1.0)).exit_code(),
            1
        );
        assert_eq!(
            CliError::from(ScenarioError::GridFile("x".into())).exit_code(),
            2
        );
        assert_eq!(
            CliError::from(ScenarioError::UndefinedTrueRatio).exit_code(),
            3
        );
        assert_eq!(CliError::from(IngestError::Empty).exit_code(), 2);
        assert_eq!(CliError::from(McError::NoReplications).exit_code(), 1);
    }
}
