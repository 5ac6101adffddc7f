//! Command-line front end. Exit codes: 0 success, 2 configuration error,
//! 3 data error, 4 numeric degeneracy.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use rlen::apen::{apen, ApEnConfig, RMode};
use rlen::ar::{ar2_rlen, arp_rlen, matched_noise_variance};
use rlen::cpd::{default_penalty, dp_detect_k, pelt_detect};
use rlen::entropy::entropy_profile;
use rlen::grid::GridSpec;
use rlen::lag::{select_lag, LagConfig, NwVariant};
use rlen::pipeline::{
    read_matrix_csv, report_to_json, run_pipeline, summarise, write_matrix_csv, InputSource, Method, RunConfig,
};
use rlen::simulate::{build_case_matrix, CaseMatrixSpec};
use rlen::theory::theory_constants;
use rlen::{BaseKernel, KernelSpec, Result, RlenError, SeriesMatrix};

#[derive(Parser)]
#[command(name = "rlen", version, about = "Relative-entropy complexity and change-point detection for collections of time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a case matrix as CSV (one series per column).
    Simulate {
        /// case1, case2, case3 or a JSON case-matrix spec file.
        #[arg(long = "simulate", alias = "case", default_value = "case1")]
        case: String,
        /// Case 1 model parameter.
        #[arg(long, default_value_t = 1.5)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Choose the common lag order by averaged BIC.
    SelectLag {
        #[arg(long)]
        input: PathBuf,
        #[arg(long = "M", default_value_t = 10)]
        max_m: usize,
        #[arg(long, value_enum, default_value_t = Variant::Printed)]
        nw_variant: Variant,
        #[command(flatten)]
        common: Common,
    },
    /// Relative entropy of every series at a fixed lag order.
    Entropy {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        m: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Approximate entropy of every series.
    Apen {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 2)]
        m: usize,
        #[arg(long, default_value_t = 0.2)]
        r: f64,
        /// Use `r` as an absolute tolerance instead of a multiple of the std.
        #[arg(long)]
        absolute: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Change points of a single sequence (first CSV column).
    Detect {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, conflicts_with = "k")]
        penalty: Option<f64>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 2)]
        min_seg: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Lag selection, per-series statistic, detection and summary.
    Pipeline(PipelineArgs),
    /// Closed-form relative entropies of Gaussian AR processes.
    Oracle {
        #[command(subcommand)]
        which: Oracle,
    },
    /// Kernel constants and the centring and scale constants for (m, h, n).
    Constants {
        #[arg(long, value_enum, default_value_t = Kernel::Epanechnikov)]
        kernel: Kernel,
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long, default_value_t = 0.15)]
        h: f64,
        #[arg(long, default_value_t = 1000)]
        n: usize,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, value_enum, default_value_t = Kernel::Epanechnikov)]
    kernel: Kernel,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long, conflicts_with_all = ["simulate", "config"])]
    input: Option<PathBuf>,
    /// case1, case2, case3 or a JSON case-matrix spec file.
    #[arg(long, conflicts_with = "config")]
    simulate: Option<String>,
    /// Rerun from a saved configuration or report.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1.5)]
    alpha: f64,
    /// Fixed lag order (skips lag selection).
    #[arg(long)]
    m: Option<usize>,
    #[arg(long = "M", default_value_t = 10)]
    max_m: usize,
    #[arg(long, default_value = "rlen")]
    method: String,
    #[arg(long, conflicts_with = "k")]
    penalty: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 2)]
    min_seg: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum, default_value_t = Variant::Printed)]
    nw_variant: Variant,
    #[arg(long, value_enum, default_value_t = Kernel::Epanechnikov)]
    kernel: Kernel,
    /// Reject inputs outside [0, 1] instead of transforming them.
    #[arg(long)]
    no_auto_transform: bool,
    /// Record wall-clock time per stage.
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Oracle {
    /// Stationary Gaussian AR(2) at lag order 2.
    Ar2 {
        #[arg(long, allow_hyphen_values = true)]
        phi1: f64,
        #[arg(long, allow_hyphen_values = true)]
        phi2: f64,
    },
    /// Gaussian AR(p) between the leading m+1-s and trailing s values.
    Arp {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        phi: Vec<f64>,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 1)]
        s: usize,
    },
    /// Innovation variance giving phi_y the stationary variance of phi_x.
    MatchedVariance {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        phi_x: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        phi_y: Vec<f64>,
        #[arg(long)]
        sigma1_sq: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kernel {
    Epanechnikov,
    Biweight,
}

impl From<Kernel> for BaseKernel {
    fn from(k: Kernel) -> Self {
        match k {
            Kernel::Epanechnikov => BaseKernel::Epanechnikov,
            Kernel::Biweight => BaseKernel::Biweight,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Printed,
    Symmetric,
}

impl From<Variant> for NwVariant {
    fn from(v: Variant) -> Self {
        match v {
            Variant::Printed => NwVariant::Printed,
            Variant::Symmetric => NwVariant::Symmetric,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| RlenError::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit_json(value: &impl Serialize, path: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| RlenError::Io(e.to_string()))?;
    emit_text(&text, path)
}

fn emit_text(text: &str, path: Option<&Path>) -> Result<()> {
    let mut out = sink(path)?;
    out.write_all(text.as_bytes())?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn case_spec(name: &str, alpha: f64, seed: u64) -> Result<CaseMatrixSpec> {
    match name {
        "case1" => Ok(CaseMatrixSpec::case1(alpha, seed)),
        "case2" => CaseMatrixSpec::case2(seed),
        "case3" => Ok(CaseMatrixSpec::case3(seed)),
        path => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| RlenError::Config(format!("simulation spec `{path}`: {e}")))?;
            let spec: CaseMatrixSpec = serde_json::from_str(&text)
                .map_err(|e| RlenError::Config(format!("simulation spec `{path}`: {e}")))?;
            Ok(CaseMatrixSpec { seed, ..spec })
        }
    }
}

/// Runs `f` on a pool of `threads` workers, or on the global pool.
fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        None => f(),
        Some(0) => Err(RlenError::Config("threads must be >= 1".into())),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| RlenError::Config(format!("thread pool: {e}")))?
            .install(f),
    }
}

fn unit_matrix(path: &Path) -> Result<SeriesMatrix> {
    let m = read_matrix_csv(path)?;
    if !m.is_unit_interval() {
        return Err(RlenError::Domain(format!(
            "{}: values outside [0, 1]; transform the data or use `pipeline`",
            path.display()
        )));
    }
    Ok(m)
}

#[derive(Serialize)]
struct SeriesValues {
    m: Option<usize>,
    values: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bandwidths: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct Detection {
    penalty: Option<f64>,
    changepoints: Vec<usize>,
    cost: f64,
    segments: Vec<rlen::pipeline::SegmentSummary>,
    comparisons: Vec<rlen::pipeline::SegmentComparison>,
}

#[derive(Serialize)]
struct Constants {
    kernel: rlen::kernels::KernelConstants,
    theory: rlen::theory::TheoryConstants,
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate {
            case,
            alpha,
            seed,
            output,
        } => {
            let (matrix, _) = build_case_matrix(&case_spec(&case, alpha, seed)?)?;
            let mut out = sink(output.as_deref())?;
            write_matrix_csv(&matrix, &mut out)
        }
        Command::SelectLag {
            input,
            max_m,
            nw_variant,
            common,
        } => {
            let matrix = unit_matrix(&input)?;
            let kernel = KernelSpec::new(common.kernel.into());
            let cfg = LagConfig {
                max_m,
                variant: nw_variant.into(),
                ..LagConfig::default()
            };
            let report = with_threads(common.threads, || select_lag(&kernel, &matrix, &cfg))?;
            emit_json(&report, common.output.as_deref())
        }
        Command::Entropy { input, m, common } => {
            let matrix = unit_matrix(&input)?;
            let kernel = KernelSpec::new(common.kernel.into());
            let p = with_threads(common.threads, || {
                entropy_profile(&kernel, &matrix, m, &GridSpec::entropy_default())
            })?;
            emit_json(
                &SeriesValues {
                    m: Some(m),
                    values: p.values(),
                    bandwidths: Some(p.bandwidths()),
                },
                common.output.as_deref(),
            )
        }
        Command::Apen {
            input,
            m,
            r,
            absolute,
            common,
        } => {
            let matrix = read_matrix_csv(&input)?;
            let cfg = ApEnConfig {
                m,
                r,
                r_mode: if absolute { RMode::Absolute } else { RMode::StdMultiple },
            };
            let values = matrix.columns().iter().map(|c| apen(c, &cfg)).collect::<Result<Vec<_>>>()?;
            emit_json(
                &SeriesValues {
                    m: Some(m),
                    values,
                    bandwidths: None,
                },
                common.output.as_deref(),
            )
        }
        Command::Detect {
            input,
            penalty,
            k,
            min_seg,
            output,
        } => {
            let values = read_matrix_csv(&input)?.column(0).to_vec();
            let (penalty, r) = match k {
                Some(k) => (None, dp_detect_k(&values, k, min_seg)?),
                None => {
                    let p = penalty.unwrap_or_else(|| default_penalty(&values));
                    (Some(p), pelt_detect(&values, p, min_seg)?)
                }
            };
            let (segments, comparisons) = summarise(&values, &r.changepoints)?;
            emit_json(
                &Detection {
                    penalty,
                    changepoints: r.changepoints,
                    cost: r.cost,
                    segments,
                    comparisons,
                },
                output.as_deref(),
            )
        }
        Command::Pipeline(args) => {
            let output = args.output.clone();
            let config = pipeline_config(args)?;
            let report = run_pipeline(&config)?;
            emit_text(&report_to_json(&report)?, output.as_deref())
        }
        Command::Oracle { which } => {
            let v = match which {
                Oracle::Ar2 { phi1, phi2 } => ar2_rlen(phi1, phi2)?,
                Oracle::Arp { phi, m, s } => arp_rlen(&phi, m, s)?,
                Oracle::MatchedVariance {
                    phi_x,
                    phi_y,
                    sigma1_sq,
                } => matched_noise_variance(&phi_x, &phi_y, sigma1_sq)?,
            };
            emit_text(&v.to_string(), None)
        }
        Command::Constants { kernel, m, h, n } => {
            let k = KernelSpec::new(kernel.into());
            emit_json(
                &Constants {
                    kernel: k.constants,
                    theory: theory_constants(&k, m, h, n)?,
                },
                None,
            )
        }
    }
}

fn pipeline_config(args: PipelineArgs) -> Result<RunConfig> {
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).map_err(|e| RlenError::Config(format!("{}: {e}", path.display())))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| RlenError::Config(format!("{}: {e}", path.display())))?;
        // a saved report carries its configuration under `config`
        let value = value.get("config").cloned().unwrap_or(value);
        let mut config: RunConfig =
            serde_json::from_value(value).map_err(|e| RlenError::Config(format!("{}: {e}", path.display())))?;
        config.threads = args.threads;
        return Ok(config);
    }
    let input = match (args.input, args.simulate) {
        (Some(p), None) => InputSource::Csv(p),
        (None, Some(case)) => InputSource::Simulation(case_spec(&case, args.alpha, args.seed)?),
        _ => return Err(RlenError::Config("give exactly one of --input and --simulate".into())),
    };
    Ok(RunConfig {
        seed: args.seed,
        method: args.method.parse::<Method>()?,
        m: args.m,
        max_m: args.max_m,
        kernel: args.kernel.into(),
        nw_variant: args.nw_variant.into(),
        penalty: args.penalty,
        k: args.k,
        min_seg: args.min_seg,
        auto_transform: !args.no_auto_transform,
        timing: args.timing,
        threads: args.threads,
        ..RunConfig::new(input)
    })
}
