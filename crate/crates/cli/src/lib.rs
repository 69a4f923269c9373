//! Batch front-end for `gsp-core`: declarative experiment configs in,
//! CSV/JSON artifacts out.

pub mod commands;
pub mod config;
pub mod report;
pub mod verify;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use gsp_core::persistence::MethodChoice;
use serde::Deserialize;

pub use config::ExperimentConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECKS_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INAPPLICABLE: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "gsp", version, about = "Persistence of Gaussian stationary processes")]
pub struct Cli {
    /// Experiment file (TOML, or JSON by extension).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker cap; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Catalog shorthand such as `iid`, `gap`, `power:-0.5`, `sinc`.
    #[arg(long, global = true)]
    pub measure: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Moments, σ_N², k(N) and the canonical declaration of a measure.
    MeasureInfo(MeasureInfoArgs),
    /// Sample paths on a grid.
    Sample(SampleArgs),
    /// One persistence estimate.
    Estimate(EstimateArgs),
    /// Persistence estimates over a list of N.
    Curve(CurveArgs),
    /// Lower and upper bound table.
    Bounds(BoundsArgs),
    /// Predicted growth classes, with an optional fitted exponent.
    Regimes(RegimesArgs),
    /// Chebyshev-extrema certificates.
    Cheby(ChebyArgs),
    /// Numerical inequality suite.
    Verify(VerifyArgs),
    /// Join artifacts into one summary.
    Report(ReportArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::MeasureInfo(_) => "measure-info",
            Command::Sample(_) => "sample",
            Command::Estimate(_) => "estimate",
            Command::Curve(_) => "curve",
            Command::Bounds(_) => "bounds",
            Command::Regimes(_) => "regimes",
            Command::Cheby(_) => "cheby",
            Command::Verify(_) => "verify",
            Command::Report(_) => "report",
        }
    }
}

#[derive(Debug, Args)]
pub struct MeasureInfoArgs {
    /// Horizons at which to report σ_N² and k(N).
    #[arg(long = "N", value_delimiter = ',')]
    pub n: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long, value_enum)]
    pub method: Option<config::SampleMethod>,
    #[arg(long)]
    pub start: Option<f64>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub n_paths: Option<usize>,
    #[arg(long)]
    pub n_modes: Option<usize>,
    #[arg(long)]
    pub binary: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Auto,
    Exact,
    Orthant,
    Path,
}

impl From<MethodArg> for MethodChoice {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Auto => MethodChoice::Auto,
            MethodArg::Exact => MethodChoice::Exact,
            MethodArg::Orthant => MethodChoice::Orthant,
            MethodArg::Path => MethodChoice::Path,
        }
    }
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long = "N")]
    pub n: Option<f64>,
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[arg(long)]
    pub n_samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[arg(long = "N", value_delimiter = ',')]
    pub n: Vec<f64>,
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[arg(long)]
    pub n_samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long = "N", value_delimiter = ',')]
    pub n: Vec<f64>,
    /// Pin k in the upper bound.
    #[arg(long)]
    pub k: Option<u32>,
}

#[derive(Debug, Args)]
pub struct RegimesArgs {
    /// Fit a growth exponent on estimates at these N.
    #[arg(long = "N", value_delimiter = ',')]
    pub n: Vec<f64>,
    #[arg(long)]
    pub n_samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ChebyArgs {
    #[arg(long, value_enum)]
    pub mode: Option<config::ChebyMode>,
    #[arg(long, value_enum)]
    pub family: Option<config::Family>,
    #[arg(long, value_delimiter = ',')]
    pub k: Vec<usize>,
    #[arg(long = "N")]
    pub n: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub coeffs: Vec<f64>,
    #[arg(long)]
    pub n_mc: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub n_samples: Option<usize>,
    /// Smaller case lists for smoke runs.
    #[arg(long)]
    pub quick: bool,
    /// Margins CSV; defaults to `<out>.margins.csv`.
    #[arg(long)]
    pub margins: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    pub inputs: Vec<PathBuf>,
    /// Long-format CSV; defaults to `<out>.long.csv`.
    #[arg(long)]
    pub long_csv: Option<PathBuf>,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_CONFIG,
            kind: "config",
            message: message.into(),
        }
    }

    pub fn inapplicable(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INAPPLICABLE,
            kind: "inapplicable",
            message: message.into(),
        }
    }

    /// One-line JSON diagnostic.
    pub fn diagnostic(&self) -> String {
        serde_json::json!({
            "error": self.kind,
            "exit_code": self.code,
            "message": self.message,
        })
        .to_string()
    }
}

impl From<gsp_core::Error> for CliError {
    fn from(e: gsp_core::Error) -> Self {
        use gsp_core::Error as E;
        match e {
            E::Invalid(_) | E::NonIntegrable { .. } => CliError::config(e.to_string()),
            E::Inapplicable(_) | E::CovarianceInvalid { .. } | E::Numerical(_) => CliError::inapplicable(e.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::config(format!("i/o: {e}"))
    }
}

/// Resolved run context shared by the subcommands.
pub struct Context {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub stream_count: Option<u32>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub measure_override: Option<String>,
}

impl Context {
    pub fn rng(&self) -> gsp_core::RngSpec {
        match self.stream_count {
            Some(s) => gsp_core::RngSpec::with_streams(self.seed, s),
            None => gsp_core::RngSpec::new(self.seed),
        }
    }

    pub fn measure(&self) -> Result<gsp_core::SpectralMeasure, CliError> {
        let cfg = match &self.measure_override {
            Some(s) => config::parse_shorthand(s)?,
            None => self
                .config
                .measure
                .clone()
                .ok_or_else(|| CliError::config("no measure: pass --measure or a [measure] section"))?,
        };
        cfg.build()
    }

    pub fn format_or(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }

    /// Write to `--out`, or stdout without one.
    pub fn emit(&self, bytes: &[u8]) -> Result<(), CliError> {
        write_target(self.out.as_deref(), bytes)
    }

    /// Sibling of `--out` with `suffix` appended to the file name.
    pub fn sibling(&self, suffix: &str) -> Option<PathBuf> {
        self.out.as_ref().map(|p| {
            let mut s = p.as_os_str().to_owned();
            s.push(suffix);
            PathBuf::from(s)
        })
    }
}

pub fn write_target(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| CliError::config(format!("writing {}: {e}", p.display()))),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

/// Run a parsed command line; returns the process exit code.
pub fn run(cli: Cli) -> Result<i32, CliError> {
    let config = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(c) = &config.command {
        if c != cli.command.name() {
            return Err(CliError::config(format!(
                "config declares command {c:?} but {:?} was requested",
                cli.command.name()
            )));
        }
    }
    let ctx = Context {
        seed: cli.seed.or(config.rng.seed).unwrap_or(0),
        stream_count: config.rng.stream_count,
        out: cli.out.clone().or_else(|| config.output.path.clone()),
        format: cli.format.or(config.output.format),
        measure_override: cli.measure.clone(),
        config,
    };
    match &cli.command {
        Command::MeasureInfo(a) => commands::measure_info(&ctx, a),
        Command::Sample(a) => commands::sample(&ctx, a),
        Command::Estimate(a) => commands::estimate(&ctx, a),
        Command::Curve(a) => commands::curve(&ctx, a),
        Command::Bounds(a) => commands::bounds(&ctx, a),
        Command::Regimes(a) => commands::regimes(&ctx, a),
        Command::Cheby(a) => commands::cheby(&ctx, a),
        Command::Verify(a) => verify::run(&ctx, a),
        Command::Report(a) => report::run(&ctx, a),
    }
}
