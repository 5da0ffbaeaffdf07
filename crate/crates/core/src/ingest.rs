//! Longitudinal datasets: parsing, stratified tables, per-visit analysis.
//!
//! Wide input has one row per subject:
//!
//! ```text
//! id,exposure,y1,y2,y3,y4
//! s001,150,0,1,1,1
//! s002,100,0,,1,0      <- missing visit 2: dropped as incomplete
//! ```
//!
//! Long input has one row per subject and visit (`id,exposure,visit,y`) and
//! is pivoted to the wide form. Only complete cases are analysed.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::measures::{
    phi_correlations_with, rr0_estimate, rr1_estimate, rr_crude, z_quantile, MeasureError,
    RhoFormula, RiskRatioEstimate, StratifiedTables,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("input is empty")]
    Empty,
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("exposed value `{0}` does not occur in the exposure column")]
    ExposedValueAbsent(String),
    #[error("no subject has complete outcome data")]
    NoSubjects,
    #[error("invalid visit pair (j={j}, k={k}): need 1 <= k < j <= {visits}")]
    InvalidPair { j: usize, k: usize, visits: usize },
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

fn parse_error(line: u64, message: impl Into<String>) -> IngestError {
    IngestError::Parse {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Layout {
    #[default]
    Wide,
    /// `id,exposure,visit,y`, pivoted to wide on read.
    Long,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormatOptions {
    /// Value of the exposure column that marks the exposed group.
    pub exposed_value: String,
    pub layout: Layout,
}

impl FormatOptions {
    pub fn wide(exposed_value: impl Into<String>) -> Self {
        Self {
            exposed_value: exposed_value.into(),
            layout: Layout::Wide,
        }
    }

    pub fn long(exposed_value: impl Into<String>) -> Self {
        Self {
            exposed_value: exposed_value.into(),
            layout: Layout::Long,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subject {
    pub id: String,
    pub exposed: bool,
    /// Outcome at visits `1..=T`, stored at index `visit - 1`.
    pub outcomes: Vec<bool>,
}

impl Subject {
    /// Outcome at 1-based `visit`.
    pub fn outcome(&self, visit: usize) -> bool {
        self.outcomes[visit - 1]
    }
}

/// Complete-case longitudinal data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LongitudinalDataset {
    pub subjects: Vec<Subject>,
    pub visits: usize,
    /// Subjects removed because at least one outcome was missing.
    pub dropped_incomplete: usize,
    pub exposed_label: String,
    pub nonexposed_label: Option<String>,
}

impl LongitudinalDataset {
    pub fn n_exposed(&self) -> usize {
        self.subjects.iter().filter(|s| s.exposed).count()
    }

    pub fn n_nonexposed(&self) -> usize {
        self.subjects.len() - self.n_exposed()
    }

    /// Writes the dataset in the wide layout.
    pub fn write_wide_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let nonexposed = self.nonexposed_label.as_deref().unwrap_or("0");
        write!(out, "id,exposure")?;
        for v in 1..=self.visits {
            write!(out, ",y{v}")?;
        }
        writeln!(out)?;
        for s in &self.subjects {
            write!(
                out,
                "{},{}",
                s.id,
                if s.exposed {
                    &self.exposed_label
                } else {
                    nonexposed
                }
            )?;
            for &y in &s.outcomes {
                write!(out, ",{}", u8::from(y))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Reads a dataset from a file.
pub fn parse_dataset(
    path: impl AsRef<Path>,
    options: &FormatOptions,
) -> Result<LongitudinalDataset, IngestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.into(),
        source,
    })?;
    parse_reader(file, options)
}

/// Reads a dataset from any byte source.
pub fn parse_reader<R: Read>(
    reader: R,
    options: &FormatOptions,
) -> Result<LongitudinalDataset, IngestError> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for record in csv.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        rows.push((line, record));
    }
    let (header, body) = rows.split_first().ok_or(IngestError::Empty)?;
    let raw = match options.layout {
        Layout::Wide => read_wide(header, body)?,
        Layout::Long => read_long(header, body)?,
    };
    finish(raw, options)
}

/// Subject before exposure coding and completeness filtering.
struct RawSubject {
    id: String,
    exposure: String,
    outcomes: Vec<Option<bool>>,
}

fn parse_outcome(line: u64, column: &str, value: &str) -> Result<Option<bool>, IngestError> {
    match value {
        "" | "NA" | "." => Ok(None),
        "0" => Ok(Some(false)),
        "1" => Ok(Some(true)),
        other => Err(parse_error(
            line,
            format!("non-binary outcome `{other}` in column `{column}`"),
        )),
    }
}

fn nonempty_field(
    line: u64,
    record: &csv::StringRecord,
    idx: usize,
    name: &str,
) -> Result<String, IngestError> {
    match record.get(idx) {
        Some(v) if !v.is_empty() => Ok(v.to_string()),
        _ => Err(parse_error(line, format!("missing {name}"))),
    }
}

fn read_wide(
    (header_line, header): &(u64, csv::StringRecord),
    body: &[(u64, csv::StringRecord)],
) -> Result<(Vec<RawSubject>, usize), IngestError> {
    let width = header.len();
    if width < 4 {
        return Err(parse_error(
            *header_line,
            format!("expected header `id,exposure,y1,...,yT` with T >= 2, found {width} columns"),
        ));
    }
    let visits = width - 2;
    let mut subjects = Vec::with_capacity(body.len());
    for (line, record) in body {
        let line = *line;
        if record.len() != width {
            return Err(parse_error(
                line,
                format!(
                    "expected {width} fields ({visits} visits), found {}",
                    record.len()
                ),
            ));
        }
        let id = nonempty_field(line, record, 0, "subject id")?;
        let exposure = nonempty_field(line, record, 1, "exposure")?;
        let outcomes = (2..width)
            .map(|i| parse_outcome(line, &header[i], &record[i]))
            .collect::<Result<Vec<_>, _>>()?;
        subjects.push(RawSubject {
            id,
            exposure,
            outcomes,
        });
    }
    Ok((subjects, visits))
}

fn read_long(
    (header_line, header): &(u64, csv::StringRecord),
    body: &[(u64, csv::StringRecord)],
) -> Result<(Vec<RawSubject>, usize), IngestError> {
    if header.len() != 4 {
        return Err(parse_error(
            *header_line,
            "expected header `id,exposure,visit,y`",
        ));
    }
    let mut order: Vec<RawSubject> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut cells: Vec<HashMap<usize, Option<bool>>> = Vec::new();
    let mut visits = 0usize;
    for (line, record) in body {
        let line = *line;
        if record.len() != 4 {
            return Err(parse_error(
                line,
                format!("expected 4 fields, found {}", record.len()),
            ));
        }
        let id = nonempty_field(line, record, 0, "subject id")?;
        let exposure = nonempty_field(line, record, 1, "exposure")?;
        let visit: usize = record[2]
            .parse()
            .ok()
            .filter(|&v| v >= 1)
            .ok_or_else(|| parse_error(line, format!("invalid visit `{}`", &record[2])))?;
        let y = parse_outcome(line, "y", &record[3])?;
        visits = visits.max(visit);
        let slot = *index.entry(id.clone()).or_insert_with(|| {
            order.push(RawSubject {
                id: id.clone(),
                exposure: exposure.clone(),
                outcomes: Vec::new(),
            });
            cells.push(HashMap::new());
            order.len() - 1
        });
        if order[slot].exposure != exposure {
            return Err(parse_error(
                line,
                format!("subject `{id}` changes exposure"),
            ));
        }
        if cells[slot].insert(visit, y).is_some() {
            return Err(parse_error(
                line,
                format!("duplicate visit {visit} for subject `{id}`"),
            ));
        }
    }
    if visits < 2 {
        return Err(parse_error(*header_line, "need at least two visits"));
    }
    for (subject, seen) in order.iter_mut().zip(&cells) {
        subject.outcomes = (1..=visits)
            .map(|v| seen.get(&v).copied().flatten())
            .collect();
    }
    Ok((order, visits))
}

fn finish(
    (raw, visits): (Vec<RawSubject>, usize),
    options: &FormatOptions,
) -> Result<LongitudinalDataset, IngestError> {
    let mut labels: Vec<&str> = Vec::new();
    for s in &raw {
        if !labels.contains(&s.exposure.as_str()) {
            labels.push(&s.exposure);
        }
    }
    if labels.len() > 2 {
        return Err(parse_error(
            0,
            format!(
                "exposure column has more than two values: {}",
                labels.join(", ")
            ),
        ));
    }
    if !labels.contains(&options.exposed_value.as_str()) {
        return Err(IngestError::ExposedValueAbsent(
            options.exposed_value.clone(),
        ));
    }
    let nonexposed_label = labels
        .iter()
        .find(|l| **l != options.exposed_value)
        .map(|l| l.to_string());

    let total = raw.len();
    let subjects: Vec<Subject> = raw
        .into_iter()
        .filter_map(|s| {
            let outcomes = s.outcomes.into_iter().collect::<Option<Vec<bool>>>()?;
            Some(Subject {
                exposed: s.exposure == options.exposed_value,
                id: s.id,
                outcomes,
            })
        })
        .collect();
    if subjects.is_empty() {
        return Err(IngestError::NoSubjects);
    }
    Ok(LongitudinalDataset {
        dropped_incomplete: total - subjects.len(),
        subjects,
        visits,
        exposed_label: options.exposed_value.clone(),
        nonexposed_label,
    })
}

fn check_pair(data: &LongitudinalDataset, j: usize, k: usize) -> Result<(), IngestError> {
    if k >= 1 && k < j && j <= data.visits {
        Ok(())
    } else {
        Err(IngestError::InvalidPair {
            j,
            k,
            visits: data.visits,
        })
    }
}

/// Cross-tabulates exposure by `Y_j`, separately for `Y_k = 1` and `Y_k = 0`.
pub fn build_conditional_tables(
    data: &LongitudinalDataset,
    j: usize,
    k: usize,
) -> Result<StratifiedTables, IngestError> {
    check_pair(data, j, k)?;
    let mut tables = StratifiedTables::default();
    for s in &data.subjects {
        let stratum = if s.outcome(k) {
            &mut tables.stratum1
        } else {
            &mut tables.stratum0
        };
        match (s.exposed, s.outcome(j)) {
            (true, true) => stratum.a += 1,
            (true, false) => stratum.b += 1,
            (false, true) => stratum.c += 1,
            (false, false) => stratum.d += 1,
        }
    }
    Ok(tables)
}

/// Outcome risk at one visit in each group; `None` for an empty group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisitRisk {
    pub visit: usize,
    pub exposed: Option<f64>,
    pub nonexposed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisitPairAnalysis {
    pub j: usize,
    pub k: usize,
    pub tables: StratifiedTables,
    /// Crude RR of the unstratified visit-`j` table.
    pub rr: Result<RiskRatioEstimate, MeasureError>,
    pub rr1: Result<RiskRatioEstimate, MeasureError>,
    pub rr0: Result<RiskRatioEstimate, MeasureError>,
    pub rho_exposed: Result<f64, MeasureError>,
    pub rho_nonexposed: Result<f64, MeasureError>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub level: f64,
    pub n_exposed: usize,
    pub n_nonexposed: usize,
    pub dropped_incomplete: usize,
    pub exposed_label: String,
    pub nonexposed_label: Option<String>,
    pub risks: Vec<VisitRisk>,
    pub pairs: Vec<VisitPairAnalysis>,
}

/// `(2, 1), (3, 2), ..., (T, T-1)`.
pub fn consecutive_pairs(visits: usize) -> Vec<(usize, usize)> {
    (2..=visits).map(|j| (j, j - 1)).collect()
}

fn visit_risks(data: &LongitudinalDataset) -> Vec<VisitRisk> {
    let (n_e, n_n) = (data.n_exposed(), data.n_nonexposed());
    let share = |events: usize, n: usize| (n > 0).then(|| events as f64 / n as f64);
    (1..=data.visits)
        .map(|visit| {
            let count = |exposed: bool| {
                data.subjects
                    .iter()
                    .filter(|s| s.exposed == exposed && s.outcome(visit))
                    .count()
            };
            VisitRisk {
                visit,
                exposed: share(count(true), n_e),
                nonexposed: share(count(false), n_n),
            }
        })
        .collect()
}

/// Full analysis: per-visit risks and crude/conditional measures per pair.
///
/// An empty `pairs` slice means consecutive visits. Degenerate tables do not
/// abort the analysis; the affected measure holds the error instead.
pub fn analyze(
    data: &LongitudinalDataset,
    pairs: &[(usize, usize)],
    level: f64,
    rho_formula: RhoFormula,
) -> Result<AnalysisReport, IngestError> {
    z_quantile(level)?;
    let pairs = if pairs.is_empty() {
        consecutive_pairs(data.visits)
    } else {
        pairs.to_vec()
    };
    let analyses = pairs
        .iter()
        .map(|&(j, k)| {
            let tables = build_conditional_tables(data, j, k)?;
            let rho = phi_correlations_with(&tables, rho_formula);
            Ok(VisitPairAnalysis {
                j,
                k,
                tables,
                rr: rr_crude(&tables.collapsed(), level),
                rr1: rr1_estimate(&tables, level),
                rr0: rr0_estimate(&tables, level),
                rho_exposed: rho.map(|r| r.0),
                rho_nonexposed: rho.map(|r| r.1),
            })
        })
        .collect::<Result<Vec<_>, IngestError>>()?;
    Ok(AnalysisReport {
        level,
        n_exposed: data.n_exposed(),
        n_nonexposed: data.n_nonexposed(),
        dropped_incomplete: data.dropped_incomplete,
        exposed_label: data.exposed_label.clone(),
        nonexposed_label: data.nonexposed_label.clone(),
        risks: visit_risks(data),
        pairs: analyses,
    })
}

fn full(x: f64) -> String {
    if x.is_finite() {
        x.to_string()
    } else {
        "NA".to_string()
    }
}

impl AnalysisReport {
    /// `visit,group,risk` with risks as proportions.
    pub fn write_risks_csv<W: Write>(&self, mut out: W, build_id: Option<&str>) -> io::Result<()> {
        if let Some(id) = build_id {
            writeln!(out, "# {id}")?;
        }
        writeln!(out, "visit,group,risk")?;
        for r in &self.risks {
            for (group, risk) in [("exposed", r.exposed), ("nonexposed", r.nonexposed)] {
                writeln!(
                    out,
                    "{},{},{}",
                    r.visit,
                    group,
                    risk.map_or("NA".into(), full)
                )?;
            }
        }
        Ok(())
    }

    /// `j,k,measure,point,ci_lower,ci_upper,rho_E,rho_nonE`, one row per measure.
    pub fn write_measures_csv<W: Write>(
        &self,
        mut out: W,
        build_id: Option<&str>,
    ) -> io::Result<()> {
        if let Some(id) = build_id {
            writeln!(out, "# {id}")?;
        }
        writeln!(out, "j,k,measure,point,ci_lower,ci_upper,rho_E,rho_nonE")?;
        for p in &self.pairs {
            let rho = |r: &Result<f64, MeasureError>| r.map_or("NA".into(), full);
            for (name, est) in [("rr", &p.rr), ("rr1", &p.rr1), ("rr0", &p.rr0)] {
                let cells = match est {
                    Ok(e) => format!(
                        "{},{},{}",
                        full(e.point),
                        full(e.ci_lower),
                        full(e.ci_upper)
                    ),
                    Err(_) => "NA,NA,NA".to_string(),
                };
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    p.j,
                    p.k,
                    name,
                    cells,
                    rho(&p.rho_exposed),
                    rho(&p.rho_nonexposed)
                )?;
            }
        }
        Ok(())
    }
}

fn estimate_cell(est: &Result<RiskRatioEstimate, MeasureError>) -> String {
    match est {
        Ok(e) => format!("{:.2} ({:.2}-{:.2})", e.point, e.ci_lower, e.ci_upper),
        Err(e) => format!("not estimable ({e})"),
    }
}

fn percent(risk: Option<f64>) -> String {
    risk.map_or("NA".into(), |r| format!("{:.1}", 100.0 * r))
}

impl fmt::Display for AnalysisReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let nonexposed = self.nonexposed_label.as_deref().unwrap_or("-");
        writeln!(
            f,
            "Complete cases: {} (exposed `{}`: {}, non-exposed `{}`: {}); dropped as incomplete: {}",
            self.n_exposed + self.n_nonexposed,
            self.exposed_label,
            self.n_exposed,
            nonexposed,
            self.n_nonexposed,
            self.dropped_incomplete
        )?;
        writeln!(f)?;
        writeln!(f, "Risk of outcome (%) by visit")?;
        write!(f, "{:<14}", "group")?;
        for r in &self.risks {
            write!(f, "{:>10}", format!("visit {}", r.visit))?;
        }
        writeln!(f)?;
        for (name, pick) in [
            (
                "exposed",
                (|r: &VisitRisk| r.exposed) as fn(&VisitRisk) -> Option<f64>,
            ),
            ("non-exposed", |r: &VisitRisk| r.nonexposed),
        ] {
            write!(f, "{name:<14}")?;
            for r in &self.risks {
                write!(f, "{:>10}", percent(pick(r)))?;
            }
            writeln!(f)?;
        }
        writeln!(f)?;
        writeln!(
            f,
            "Relative risks with {}% confidence intervals",
            100.0 * self.level
        )?;
        for p in &self.pairs {
            writeln!(f)?;
            writeln!(f, "visit {} given visit {}", p.j, p.k)?;
            writeln!(f, "  RR        {}", estimate_cell(&p.rr))?;
            writeln!(f, "  RR1       {}", estimate_cell(&p.rr1))?;
            writeln!(f, "  RR0       {}", estimate_cell(&p.rr0))?;
            let rho = |r: &Result<f64, MeasureError>| match r {
                Ok(v) => format!("{v:.2}"),
                Err(e) => format!("not estimable ({e})"),
            };
            writeln!(f, "  rho_E     {}", rho(&p.rho_exposed))?;
            writeln!(f, "  rho_nonE  {}", rho(&p.rho_nonexposed))?;
        }
        Ok(())
    }
}
