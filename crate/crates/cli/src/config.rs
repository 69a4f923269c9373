//! Experiment declarations: a TOML or JSON file whose sections mirror the
//! subcommands. Command-line flags override the file.

use std::fs;
use std::path::{Path, PathBuf};

use gsp_core::bounds::{BoundParams, Features, SlopeModel};
use gsp_core::persistence::MethodChoice;
use gsp_core::spectral::MeasureSpec;
use gsp_core::{catalog, Domain, SpectralMeasure};
use serde::{Deserialize, Serialize};

use crate::{CliError, Format};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub measure: Option<MeasureConfig>,
    /// When present it must name the subcommand being run.
    pub command: Option<String>,
    #[serde(default)]
    pub rng: RngConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub sample: SampleParams,
    #[serde(default)]
    pub estimate: EstimateParams,
    #[serde(default)]
    pub curve: CurveParams,
    #[serde(default)]
    pub bounds: BoundsParams,
    #[serde(default)]
    pub regimes: RegimesParams,
    #[serde(default)]
    pub cheby: ChebyParams,
    #[serde(default)]
    pub verify: VerifyParams,
    #[serde(default)]
    pub report: ReportParams,
}

/// A full declaration, or a catalog entry by name.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum MeasureConfig {
    Catalog(CatalogRef),
    Spec(MeasureSpec),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogRef {
    pub catalog: String,
    pub domain: Option<Domain>,
    pub alpha: Option<f64>,
    #[serde(rename = "A")]
    pub a: Option<f64>,
    #[serde(default)]
    pub atoms: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RngConfig {
    pub seed: Option<u64>,
    pub stream_count: Option<u32>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SampleMethod {
    #[default]
    Circulant,
    Exact,
    Spectral,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleParams {
    pub method: SampleMethod,
    pub start: f64,
    /// Grid step over ℝ; fixed to 1 over ℤ.
    pub step: Option<f64>,
    pub count: usize,
    pub n_paths: usize,
    pub n_modes: usize,
    /// Write the little-endian binary dump instead of CSV/JSON.
    pub binary: bool,
}

impl Default for SampleParams {
    fn default() -> Self {
        SampleParams {
            method: SampleMethod::Circulant,
            start: 0.0,
            step: None,
            count: 64,
            n_paths: 10,
            n_modes: 256,
            binary: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateParams {
    #[serde(rename = "N")]
    pub n: Option<f64>,
    pub h: Option<f64>,
    pub method: MethodChoice,
    pub n_samples: usize,
    pub orthant_cap: usize,
}

impl Default for EstimateParams {
    fn default() -> Self {
        EstimateParams {
            n: None,
            h: None,
            method: MethodChoice::Auto,
            n_samples: 100_000,
            orthant_cap: 512,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurveParams {
    #[serde(rename = "N")]
    pub n: Vec<f64>,
    pub h: Option<f64>,
    pub method: MethodChoice,
    pub n_samples: usize,
    pub orthant_cap: usize,
}

impl Default for CurveParams {
    fn default() -> Self {
        CurveParams {
            n: Vec::new(),
            h: None,
            method: MethodChoice::Auto,
            n_samples: 20_000,
            orthant_cap: 512,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsParams {
    #[serde(rename = "N")]
    pub n: Vec<f64>,
    pub params: BoundParams,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegimesParams {
    /// Declared features; read off the measure when absent.
    pub features: Option<Features>,
    /// Curve to fit a growth exponent on, if any.
    pub curve: Option<CurveParams>,
    pub model: SlopeModel,
}

impl Default for RegimesParams {
    fn default() -> Self {
        RegimesParams {
            features: None,
            curve: None,
            model: SlopeModel::PowerOfN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ChebyMode {
    #[default]
    Continuous,
    Discrete,
    HermiteGenocchi,
    MinNorm,
    SimplexDensity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `T_k(x/N)` scaled to be monic in `x/N`.
    #[default]
    Chebyshev,
    Exp,
    /// Ascending coefficients from `coeffs`.
    Polynomial,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChebyParams {
    pub mode: ChebyMode,
    pub family: Family,
    pub k: Vec<usize>,
    #[serde(rename = "N")]
    pub n: f64,
    pub coeffs: Vec<f64>,
    pub n_mc: usize,
}

impl Default for ChebyParams {
    fn default() -> Self {
        ChebyParams {
            mode: ChebyMode::Continuous,
            family: Family::Chebyshev,
            k: vec![2],
            n: 10.0,
            coeffs: Vec::new(),
            n_mc: 100_000,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyParams {
    pub n_samples: usize,
    pub quick: bool,
    pub margins: Option<PathBuf>,
}

impl Default for VerifyParams {
    fn default() -> Self {
        VerifyParams {
            n_samples: 4_000,
            quick: false,
            margins: None,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportParams {
    pub inputs: Vec<PathBuf>,
    /// Long-format CSV written next to the JSON summary.
    pub long_csv: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::config(format!("reading {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e == "json");
        if is_json {
            serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
        } else {
            toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
        }
    }
}

/// `name[:param]` shorthand: `iid`, `sinc`, `gap`, `gap:continuous`,
/// `power:-0.5`, `exp_well:1`, `mixed`, `uniform:continuous`.
pub fn parse_shorthand(text: &str) -> Result<MeasureConfig, CliError> {
    let mut parts = text.split(':');
    let name = parts.next().unwrap_or_default().to_string();
    let mut r = CatalogRef {
        catalog: name,
        domain: None,
        alpha: None,
        a: None,
        atoms: Vec::new(),
    };
    for p in parts {
        match p {
            "integer" | "Z" => r.domain = Some(Domain::IntegerTime),
            "continuous" | "R" => r.domain = Some(Domain::ContinuousTime),
            v => {
                let x: f64 = v
                    .parse()
                    .map_err(|_| CliError::config(format!("measure shorthand {text:?}: cannot read {v:?}")))?;
                match r.catalog.as_str() {
                    "power" => r.alpha = Some(x),
                    "exp_well" => r.a = Some(x),
                    _ => return Err(CliError::config(format!("measure {:?} takes no parameter", r.catalog))),
                }
            }
        }
    }
    Ok(MeasureConfig::Catalog(r))
}

impl MeasureConfig {
    pub fn build(&self) -> Result<SpectralMeasure, CliError> {
        match self {
            MeasureConfig::Spec(spec) => Ok(SpectralMeasure::from_spec(spec)?),
            MeasureConfig::Catalog(r) => {
                let need = |v: Option<f64>, what: &str| {
                    v.ok_or_else(|| CliError::config(format!("catalog measure {:?} needs {what}", r.catalog)))
                };
                let domain = r.domain;
                let dom = |default: Domain| domain.unwrap_or(default);
                Ok(match r.catalog.as_str() {
                    "iid" => catalog::iid(),
                    "sinc" => catalog::sinc(),
                    "uniform" => catalog::uniform(dom(Domain::IntegerTime)),
                    "gap" => catalog::gap(dom(Domain::IntegerTime)),
                    "mixed" => catalog::mixed(dom(Domain::IntegerTime)),
                    "power" => catalog::power(need(r.alpha, "alpha")?, dom(Domain::IntegerTime))?,
                    "exp_well" => catalog::exp_well(need(r.a, "A")?, dom(Domain::IntegerTime))?,
                    "atoms" => catalog::atoms(&r.atoms, dom(Domain::IntegerTime))?,
                    other => return Err(CliError::config(format!("unknown catalog measure {other:?}"))),
                })
            }
        }
    }
}
