//! End-to-end runs: ingest a matrix, choose the lag order, score every
//! series, segment the scores and summarise the segments.
//!
//! A [`RunReport`] echoes the [`RunConfig`] that produced it. Neither the
//! thread count nor the output path is part of the echo, and timings are
//! only recorded on request, so the serialised report depends on the
//! configuration and seed alone.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::apen::{apen, sample_std, ApEnConfig};
use crate::cpd::{default_penalty, dp_detect_k, pelt_detect, welch_t_test};
use crate::entropy::entropy_profile;
use crate::error::{Result, RlenError};
use crate::grid::GridSpec;
use crate::kernels::{BaseKernel, KernelSpec};
use crate::lag::{select_lag, LagConfig, LagSelectionReport, NwVariant};
use crate::matrix::SeriesMatrix;
use crate::simulate::{build_case_matrix, logistic_transform, CaseMatrixSpec};

/// Where the series come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSource {
    /// CSV file, one series per column.
    Csv(PathBuf),
    /// Generated matrix; its seed is replaced by [`RunConfig::seed`].
    Simulation(CaseMatrixSpec),
}

/// Per-series statistic fed to the change-point detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Rlen,
    Apen,
    Mean,
    Variance,
}

impl std::str::FromStr for Method {
    type Err = RlenError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rlen" => Ok(Method::Rlen),
            "apen" => Ok(Method::Apen),
            "mean" => Ok(Method::Mean),
            "variance" => Ok(Method::Variance),
            other => Err(RlenError::Config(format!(
                "unknown method `{other}` (expected rlen, apen, mean or variance)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: InputSource,
    pub seed: u64,
    pub method: Method,
    /// Fixed lag order; `None` runs lag selection (RlEn only). For ApEn it
    /// overrides the template length.
    pub m: Option<usize>,
    /// Largest lag order scanned by lag selection.
    pub max_m: usize,
    pub kernel: BaseKernel,
    pub entropy_grid: GridSpec,
    pub regression_grid: GridSpec,
    pub nw_variant: NwVariant,
    pub isolated_tolerance: f64,
    pub apen: ApEnConfig,
    /// PELT penalty; `None` uses [`default_penalty`].
    pub penalty: Option<f64>,
    /// Exact number of change points; excludes `penalty`.
    pub k: Option<usize>,
    pub min_seg: usize,
    /// Logistic-transform inputs with values outside `[0, 1]`.
    pub auto_transform: bool,
    pub timing: bool,
    /// Worker threads; `None` uses the global pool. Not part of the echo.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn new(input: InputSource) -> Self {
        RunConfig {
            input,
            seed: 0,
            method: Method::Rlen,
            m: None,
            max_m: 10,
            kernel: BaseKernel::Epanechnikov,
            entropy_grid: GridSpec::entropy_default(),
            regression_grid: GridSpec::regression_default(),
            nw_variant: NwVariant::Printed,
            isolated_tolerance: 0.01,
            apen: ApEnConfig::default(),
            penalty: None,
            k: None,
            min_seg: 2,
            auto_transform: true,
            timing: false,
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(RlenError::Config(msg));
        if self.penalty.is_some() && self.k.is_some() {
            return bad("penalty and k are mutually exclusive".into());
        }
        if let Some(p) = self.penalty {
            if !(p >= 0.0 && p.is_finite()) {
                return bad(format!("penalty {p} must be finite and >= 0"));
            }
        }
        if self.min_seg == 0 {
            return bad("min_seg must be >= 1".into());
        }
        if self.m == Some(0) {
            return bad("lag order m must be >= 1".into());
        }
        if self.max_m == 0 {
            return bad("max_m must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.isolated_tolerance) {
            return bad(format!("isolated tolerance {} outside [0, 1]", self.isolated_tolerance));
        }
        if self.threads == Some(0) {
            return bad("threads must be >= 1".into());
        }
        Ok(())
    }

    fn lag_config(&self) -> LagConfig {
        LagConfig {
            max_m: self.max_m,
            grid: self.regression_grid.clone(),
            variant: self.nw_variant,
            isolated_tolerance: self.isolated_tolerance,
        }
    }
}

/// One segment of the statistic sequence, 1-based and inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSummary {
    pub start: usize,
    pub end: usize,
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation; zero for a single value.
    pub std: f64,
}

/// Welch test between two neighbouring segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentComparison {
    /// Index of the left segment in `segments`.
    pub left: usize,
    /// `None` when the statistic is infinite (both segments constant).
    pub t: Option<f64>,
    pub df: f64,
    pub p: f64,
}

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub ingest: f64,
    pub lag_selection: f64,
    pub statistic: f64,
    pub detection: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub config: RunConfig,
    pub n_rows: usize,
    pub n_cols: usize,
    pub column_names: Option<Vec<String>>,
    /// Whether the logistic transform was applied to the input.
    pub transformed: bool,
    pub lag_selection: Option<LagSelectionReport>,
    /// Lag order used by the statistic (template length for ApEn).
    pub m: Option<usize>,
    pub values: Vec<f64>,
    /// Selected entropy bandwidth per series (RlEn only).
    pub bandwidths: Option<Vec<f64>>,
    pub penalty: Option<f64>,
    /// 1-based first index of each new segment.
    pub changepoints: Vec<usize>,
    pub cost: f64,
    pub segments: Vec<SegmentSummary>,
    pub comparisons: Vec<SegmentComparison>,
    pub timing: Option<Timing>,
    pub warnings: Vec<String>,
}

/// Runs the configured pipeline, on a dedicated pool when `threads` is set.
pub fn run_pipeline(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    match config.threads {
        None => run_inner(config),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| RlenError::Config(format!("thread pool: {e}")))?
            .install(|| run_inner(config)),
    }
}

fn load_input(config: &RunConfig, warnings: &mut Vec<String>) -> Result<(SeriesMatrix, bool)> {
    let matrix = match &config.input {
        InputSource::Csv(path) => read_matrix_csv(path)?,
        InputSource::Simulation(spec) => {
            let spec = CaseMatrixSpec {
                seed: config.seed,
                ..spec.clone()
            };
            // generated columns are already logistic-transformed
            return Ok((build_case_matrix(&spec)?.0, true));
        }
    };
    if matrix.is_unit_interval() {
        return Ok((matrix, false));
    }
    if !config.auto_transform {
        if config.method == Method::Rlen {
            return Err(RlenError::domain(
                "input has values outside [0, 1] and the automatic transform is disabled",
            ));
        }
        return Ok((matrix, false));
    }
    warnings.push("input has values outside [0, 1]; applied the logistic transform".into());
    let names = matrix.names().map(<[String]>::to_vec);
    let t = SeriesMatrix::from_columns(matrix.columns().iter().map(|c| logistic_transform(c)).collect())?;
    let t = match names {
        Some(n) => t.with_names(n)?,
        None => t,
    };
    Ok((t, true))
}

fn run_inner(config: &RunConfig) -> Result<RunReport> {
    let mut warnings = Vec::new();
    let kernel = KernelSpec::new(config.kernel);

    let clock = Instant::now();
    let (matrix, transformed) = load_input(config, &mut warnings).map_err(|e| e.in_stage("ingest"))?;
    let t_ingest = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let lag_selection = if config.method == Method::Rlen && config.m.is_none() {
        let r = select_lag(&kernel, &matrix, &config.lag_config()).map_err(|e| e.in_stage("lag_selection"))?;
        warnings.extend(r.warnings.iter().cloned());
        Some(r)
    } else {
        None
    };
    let t_lag = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let (m, values, bandwidths) =
        statistic(config, &kernel, &matrix, lag_selection.as_ref()).map_err(|e| e.in_stage("statistic"))?;
    let t_stat = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let (penalty, cps) = detect(config, &values).map_err(|e| e.in_stage("detection"))?;
    let (segments, comparisons) = summarise(&values, &cps.changepoints).map_err(|e| e.in_stage("summary"))?;
    let t_detect = clock.elapsed().as_secs_f64();

    Ok(RunReport {
        version: crate::VERSION.to_string(),
        config: config.clone(),
        n_rows: matrix.n_rows(),
        n_cols: matrix.n_cols(),
        column_names: matrix.names().map(<[String]>::to_vec),
        transformed,
        lag_selection,
        m,
        values,
        bandwidths,
        penalty,
        changepoints: cps.changepoints,
        cost: cps.cost,
        segments,
        comparisons,
        timing: config.timing.then_some(Timing {
            ingest: t_ingest,
            lag_selection: t_lag,
            statistic: t_stat,
            detection: t_detect,
        }),
        warnings,
    })
}

type Statistic = (Option<usize>, Vec<f64>, Option<Vec<f64>>);

fn statistic(
    config: &RunConfig,
    kernel: &KernelSpec,
    matrix: &SeriesMatrix,
    lag: Option<&LagSelectionReport>,
) -> Result<Statistic> {
    use rayon::prelude::*;
    match config.method {
        Method::Rlen => {
            let m = config.m.or(lag.map(|r| r.m_hat)).expect("lag chosen before scoring");
            let p = entropy_profile(kernel, matrix, m, &config.entropy_grid)?;
            Ok((Some(m), p.values(), Some(p.bandwidths())))
        }
        Method::Apen => {
            let cfg = ApEnConfig {
                m: config.m.unwrap_or(config.apen.m),
                ..config.apen
            };
            let values = matrix
                .columns()
                .par_iter()
                .enumerate()
                .map(|(j, c)| apen(c, &cfg).map_err(|e| e.in_column(j, Some(cfg.m))))
                .collect::<Result<Vec<_>>>()?;
            Ok((Some(cfg.m), values, None))
        }
        Method::Mean => Ok((
            None,
            matrix.columns().iter().map(|c| c.iter().sum::<f64>() / c.len() as f64).collect(),
            None,
        )),
        Method::Variance => Ok((
            None,
            matrix.columns().iter().map(|c| sample_std(c).powi(2)).collect(),
            None,
        )),
    }
}

fn detect(config: &RunConfig, values: &[f64]) -> Result<(Option<f64>, crate::cpd::ChangePointResult)> {
    match config.k {
        Some(k) => Ok((None, dp_detect_k(values, k, config.min_seg)?)),
        None => {
            let pen = config.penalty.unwrap_or_else(|| default_penalty(values));
            Ok((Some(pen), pelt_detect(values, pen, config.min_seg)?))
        }
    }
}

/// Segment statistics and Welch tests between neighbouring segments.
pub fn summarise(values: &[f64], changepoints: &[usize]) -> Result<(Vec<SegmentSummary>, Vec<SegmentComparison>)> {
    let mut bounds = vec![0];
    bounds.extend(changepoints.iter().map(|c| c - 1));
    bounds.push(values.len());
    let segments: Vec<SegmentSummary> = bounds
        .windows(2)
        .map(|w| {
            let seg = &values[w[0]..w[1]];
            SegmentSummary {
                start: w[0] + 1,
                end: w[1],
                count: seg.len(),
                mean: seg.iter().sum::<f64>() / seg.len() as f64,
                std: sample_std(seg),
            }
        })
        .collect();
    let mut comparisons = Vec::new();
    for (i, w) in bounds.windows(3).enumerate() {
        let (a, b) = (&values[w[0]..w[1]], &values[w[1]..w[2]]);
        if a.len() < 2 || b.len() < 2 {
            continue;
        }
        let t = welch_t_test(a, b)?;
        comparisons.push(SegmentComparison {
            left: i,
            t: t.t.is_finite().then_some(t.t),
            df: t.df,
            p: t.p,
        });
    }
    Ok((segments, comparisons))
}

fn parse_line_err(line: usize, message: impl Into<String>) -> RlenError {
    RlenError::Parse {
        line,
        message: message.into(),
    }
}

/// Reads a matrix from CSV; see [`parse_matrix_csv`].
pub fn read_matrix_csv(path: &Path) -> Result<SeriesMatrix> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| RlenError::Io(format!("{}: {e}", path.display())))?;
    parse_matrix_csv(&text)
}

/// One series per column. The first row is a header when any of its cells
/// is not a number; every other cell must be a finite number and every row
/// must have the same width.
pub fn parse_matrix_csv(text: &str) -> Result<SeriesMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut names: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(idx + 1, |p| p.line() as usize);
            parse_line_err(line, e.to_string())
        })?;
        let line = record.position().map_or(idx + 1, |p| p.line() as usize);
        if idx == 0 && record.iter().any(|c| c.parse::<f64>().is_err()) {
            names = Some(record.iter().map(str::to_string).collect());
            width = Some(record.len());
            continue;
        }
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(parse_line_err(line, format!("expected {w} fields, found {}", record.len())));
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(c, cell)| match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(parse_line_err(line, format!("column {}: `{cell}` is not a finite number", c + 1))),
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.len() < 2 {
        return Err(parse_line_err(
            rows.len() + names.is_some() as usize,
            format!("need at least 2 data rows, found {}", rows.len()),
        ));
    }
    let w = rows[0].len();
    let columns = (0..w).map(|c| rows.iter().map(|r| r[c]).collect()).collect();
    let m = SeriesMatrix::from_columns(columns)?;
    match names {
        Some(n) => m.with_names(n),
        None => Ok(m),
    }
}

/// Writes the matrix as CSV with a header when the columns are named.
/// Values use the shortest representation that reads back exactly.
pub fn write_matrix_csv(matrix: &SeriesMatrix, out: &mut impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| RlenError::Io(e.to_string());
    if let Some(names) = matrix.names() {
        w.write_record(names).map_err(csv_err)?;
    }
    for i in 0..matrix.n_rows() {
        w.write_record(matrix.columns().iter().map(|c| c[i].to_string()))
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty-printed JSON with fields in declaration order.
pub fn report_to_json(report: &RunReport) -> Result<String> {
    serde_json::to_string_pretty(report).map_err(|e| RlenError::Io(e.to_string()))
}

pub fn write_report(report: &RunReport, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| RlenError::Io(format!("{}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    w.write_all(report_to_json(report)?.as_bytes())?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_report(path: &Path) -> Result<RunReport> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| RlenError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| parse_line_err(e.line(), e.to_string()))
}
