use gsp_core::bounds::{self, BoundResult, Features, NearZero, Tail};
use gsp_core::chebyshev;
use gsp_core::persistence::{self, CurvePoint, EstimateOptions, MethodChoice, PersistenceEstimate};
use gsp_core::sampler::{self, PathGrid};
use gsp_core::spectral::SCHEMA_VERSION;
use gsp_core::{DensityForm, Domain, SpectralMeasure};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ChebyMode, CurveParams, Family, SampleMethod};
use crate::{
    BoundsArgs, ChebyArgs, CliError, Context, CurveArgs, EstimateArgs, Format, MeasureInfoArgs, RegimesArgs, SampleArgs,
    EXIT_OK,
};

const MOMENT_DELTAS: [f64; 9] = [-4.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 4.0];

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::config(format!("serializing output: {e}")))?;
    s.push('\n');
    Ok(s.into_bytes())
}

/// Common fields of every JSON artifact.
fn header(kind: &str, ctx: &Context, rho: Option<&SpectralMeasure>) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("kind".into(), json!(kind));
    m.insert("schema_version".into(), json!(SCHEMA_VERSION));
    m.insert("seed".into(), json!(ctx.seed));
    if let Some(r) = rho {
        m.insert("measure_digest".into(), json!(r.digest()));
        m.insert("domain".into(), json!(r.domain()));
    }
    m
}

fn with(mut m: serde_json::Map<String, Value>, fields: Value) -> Value {
    if let Value::Object(extra) = fields {
        m.extend(extra);
    }
    Value::Object(m)
}

/// Plain decimal for CSV cells; empty when absent.
fn cell(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| CliError::config(format!("csv: {e}")))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::config(format!("csv: {e}"))
}

pub fn measure_info(ctx: &Context, args: &MeasureInfoArgs) -> Result<i32, CliError> {
    let rho = ctx.measure()?;
    let moments: Vec<(f64, Option<f64>)> = MOMENT_DELTAS.iter().map(|&d| (d, rho.moment(d).finite())).collect();
    let ns = if args.n.is_empty() { vec![1.0, 10.0, 100.0] } else { args.n.clone() };
    let support = rho.support_sup();
    match ctx.format_or(Format::Json) {
        Format::Json => {
            let doc = with(
                header("measure_info", ctx, Some(&rho)),
                json!({
                    "total_mass": rho.total_mass(),
                    "support_sup": if support.is_finite() { json!(support) } else { json!("inf") },
                    "weight_order": rho.weight_order(),
                    "moment_sup": rho.moment_sup(),
                    "moments": moments.iter().map(|(d, m)| json!({"delta": d, "value": m, "finite": m.is_some()})).collect::<Vec<_>>(),
                    "horizons": ns.iter().map(|&n| json!({"N": n, "sigma_sq": rho.sigma_sq(n), "k_of_n": bounds::k_of_n(&rho, n)})).collect::<Vec<_>>(),
                    "spec": rho.to_spec(),
                }),
            );
            ctx.emit(&to_json(&doc)?)?;
        }
        Format::Csv => {
            let mut rows = vec![
                vec!["measure_digest".into(), rho.digest()],
                vec!["total_mass".into(), rho.total_mass().to_string()],
                vec!["support_sup".into(), support.to_string()],
                vec!["weight_order".into(), rho.weight_order().to_string()],
            ];
            for (d, m) in &moments {
                rows.push(vec![format!("m_{d}"), m.map(|v| v.to_string()).unwrap_or("inf".into())]);
            }
            for &n in &ns {
                rows.push(vec![format!("sigma_sq_{n}"), rho.sigma_sq(n).to_string()]);
                rows.push(vec![format!("k_of_n_{n}"), bounds::k_of_n(&rho, n).to_string()]);
            }
            ctx.emit(&csv_bytes(&["quantity", "value"], &rows)?)?;
        }
    }
    Ok(EXIT_OK)
}

pub fn sample(ctx: &Context, args: &SampleArgs) -> Result<i32, CliError> {
    let rho = ctx.measure()?;
    let mut p = ctx.config.sample.clone();
    p.method = args.method.unwrap_or(p.method);
    p.start = args.start.unwrap_or(p.start);
    p.step = args.step.or(p.step);
    p.count = args.count.unwrap_or(p.count);
    p.n_paths = args.n_paths.unwrap_or(p.n_paths);
    p.n_modes = args.n_modes.unwrap_or(p.n_modes);
    p.binary |= args.binary;
    let grid = match rho.domain() {
        Domain::IntegerTime => {
            if p.start.fract() != 0.0 || p.step.is_some_and(|s| s != 1.0) {
                return Err(CliError::config("integer-time grids need an integer start and step 1"));
            }
            PathGrid::integer(p.start as i64, p.count)
        }
        Domain::ContinuousTime => {
            let step = p.step.ok_or_else(|| CliError::config("continuous-time sampling needs step"))?;
            PathGrid::continuous(p.start, step, p.count)?
        }
    };
    grid.validate()?;
    let rng = ctx.rng();
    let paths = match p.method {
        SampleMethod::Exact => sampler::sample_exact(&rho, &grid, p.n_paths, &rng)?,
        SampleMethod::Circulant => sampler::sample_circulant(&rho, &grid, p.n_paths, &rng)?,
        SampleMethod::Spectral => sampler::sample_spectral(&rho, &grid, p.n_modes, p.n_paths, &rng)?.paths,
    };
    let bytes = if p.binary {
        let mut buf = Vec::new();
        sampler::write_binary(&paths, &mut buf)?;
        buf
    } else {
        match ctx.format_or(Format::Csv) {
            Format::Csv => {
                let mut buf = Vec::new();
                sampler::write_csv(&paths, &mut buf)?;
                buf
            }
            Format::Json => to_json(&with(
                header("sample", ctx, Some(&rho)),
                json!({
                    "grid": grid,
                    "method": paths.first().map(|p| p.provenance.method.clone()),
                    "paths": paths.iter().map(|p| &p.values).collect::<Vec<_>>(),
                }),
            ))?,
        }
    };
    ctx.emit(&bytes)?;
    Ok(EXIT_OK)
}

fn options(method: MethodChoice, n_samples: usize, orthant_cap: usize) -> EstimateOptions {
    EstimateOptions {
        method,
        n_samples,
        orthant_cap,
    }
}

fn estimate_json(e: &PersistenceEstimate) -> Value {
    json!({
        "log_p": e.log_p,
        "se_log": e.se_log,
        "p": e.p(),
        "se_p": e.se_p(),
        "method": e.method,
        "grid_step": e.grid_step,
        "n_samples": e.n_samples,
        "dim": e.dim,
        "low_confidence": e.low_confidence,
    })
}

pub fn estimate(ctx: &Context, args: &EstimateArgs) -> Result<i32, CliError> {
    let rho = ctx.measure()?;
    let p = &ctx.config.estimate;
    let n = args.n.or(p.n).ok_or_else(|| CliError::config("estimate needs N"))?;
    let h = args.h.or(p.h);
    let opts = options(
        args.method.map(Into::into).unwrap_or(p.method),
        args.n_samples.unwrap_or(p.n_samples),
        p.orthant_cap,
    );
    let rng = ctx.rng();
    let est = match rho.domain() {
        Domain::IntegerTime => {
            if n.fract() != 0.0 || n < 1.0 {
                return Err(CliError::config(format!("N = {n} must be a positive integer over the integers")));
            }
            persistence::persistence_integer_with(&rho, n as usize, &opts, &rng)?
        }
        Domain::ContinuousTime => {
            let h = h.ok_or_else(|| CliError::config("continuous-time estimates need h"))?;
            persistence::persistence_continuous_with(&rho, n, h, &opts, &rng)?
        }
    };
    let bytes = match ctx.format_or(Format::Json) {
        Format::Json => to_json(&with(header("estimate", ctx, Some(&rho)), {
            let mut v = estimate_json(&est);
            v["N"] = json!(n);
            v
        }))?,
        Format::Csv => {
            let mut buf = Vec::new();
            let point = CurvePoint {
                n,
                estimate: Some(est),
                error: None,
            };
            persistence::write_curve_csv(&[point], ctx.seed, &mut buf)?;
            buf
        }
    };
    ctx.emit(&bytes)?;
    Ok(EXIT_OK)
}

pub fn run_curve(rho: &SpectralMeasure, p: &CurveParams, ctx: &Context) -> Result<Vec<CurvePoint>, CliError> {
    if p.n.is_empty() {
        return Err(CliError::config("curve needs a nonempty N list"));
    }
    let opts = options(p.method, p.n_samples, p.orthant_cap);
    Ok(persistence::persistence_curve(rho, &p.n, p.h, &opts, &ctx.rng())?)
}

pub fn curve_json(points: &[CurvePoint]) -> Value {
    Value::Array(
        points
            .iter()
            .map(|pt| {
                let mut v = match &pt.estimate {
                    Some(e) => estimate_json(e),
                    None => json!({}),
                };
                v["N"] = json!(pt.n);
                v["error"] = json!(pt.error);
                v
            })
            .collect(),
    )
}

pub fn curve(ctx: &Context, args: &CurveArgs) -> Result<i32, CliError> {
    let rho = ctx.measure()?;
    let mut p = ctx.config.curve.clone();
    if !args.n.is_empty() {
        p.n = args.n.clone();
    }
    p.h = args.h.or(p.h);
    p.method = args.method.map(Into::into).unwrap_or(p.method);
    p.n_samples = args.n_samples.unwrap_or(p.n_samples);
    let points = run_curve(&rho, &p, ctx)?;
    let bytes = match ctx.format_or(Format::Csv) {
        Format::Csv => {
            let mut buf = Vec::new();
            persistence::write_curve_csv(&points, ctx.seed, &mut buf)?;
            buf
        }
        Format::Json => to_json(&with(header("curve", ctx, Some(&rho)), json!({ "points": curve_json(&points) })))?,
    };
    ctx.emit(&bytes)?;
    Ok(EXIT_OK)
}

/// One bounds table row; a failing side leaves its cells empty and records
/// why in `flags`.
#[derive(Debug, Clone, Serialize)]
pub struct BoundsRow {
    #[serde(rename = "N")]
    pub n: f64,
    pub lower_log: Option<f64>,
    pub upper_log: Option<f64>,
    pub ell_star_lower: Option<f64>,
    pub ell_star_upper: Option<f64>,
    pub k_used: Option<u32>,
    pub flags: Vec<String>,
    pub lower: Option<BoundResult>,
    pub upper: Option<BoundResult>,
}

pub fn bounds(ctx: &Context, args: &BoundsArgs) -> Result<i32, CliError> {
    let rho = ctx.measure()?;
    let mut p = ctx.config.bounds.clone();
    if !args.n.is_empty() {
        p.n = args.n.clone();
    }
    if let Some(k) = args.k {
        p.params.k = Some(k);
    }
    if p.n.is_empty() {
        return Err(CliError::config("bounds needs a nonempty N list"));
    }
    let mut rows = Vec::new();
    let mut last_inapplicable = None;
    for &n in &p.n {
        let mut flags = Vec::new();
        let mut side = |r: gsp_core::Result<BoundResult>, name: &str, flags: &mut Vec<String>| -> Result<Option<BoundResult>, CliError> {
            match r {
                Ok(b) => {
                    flags.extend(b.flags.iter().map(|f| format!("{name}: {f}")));
                    Ok(Some(b))
                }
                Err(e) if e.is_inapplicable() => {
                    flags.push(format!("{name}: {e}"));
                    last_inapplicable = Some(e);
                    Ok(None)
                }
                Err(e) => Err(e.into()),
            }
        };
        let lower = match rho.domain() {
            Domain::ContinuousTime if p.params.beta.is_none() || p.params.ell0.is_none() => {
                flags.push("lower skipped: continuous time needs beta and ell0".into());
                None
            }
            _ => side(bounds::optimize_lower(&rho, n, &p.params), "lower", &mut flags)?,
        };
        let upper = side(bounds::optimize_upper(&rho, n, &p.params), "upper", &mut flags)?;
        rows.push(BoundsRow {
            n,
            lower_log: lower.as_ref().map(|b| b.log_bound),
            upper_log: upper.as_ref().map(|b| b.log_bound),
            ell_star_lower: lower.as_ref().map(|b| b.ell_star),
            ell_star_upper: upper.as_ref().map(|b| b.ell_star),
            k_used: upper.as_ref().and_then(|b| b.params_used.k),
            flags,
            lower,
            upper,
        });
    }
    if rows.iter().all(|r| r.lower.is_none() && r.upper.is_none()) {
        let e = last_inapplicable.map(|e| e.to_string()).unwrap_or_else(|| "no bound applies".into());
        return Err(CliError::inapplicable(e));
    }
    let bytes = match ctx.format_or(Format::Csv) {
        Format::Csv => {
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.n.to_string(),
                        cell(r.lower_log),
                        cell(r.upper_log),
                        cell(r.ell_star_lower),
                        cell(r.ell_star_upper),
                        r.k_used.map(|k| k.to_string()).unwrap_or_default(),
                        r.flags.join("; "),
                    ]
                })
                .collect();
            csv_bytes(
                &["N", "lower_log", "upper_log", "ell_star_lower", "ell_star_upper", "k_used", "flags"],
                &table,
            )?
        }
        Format::Json => to_json(&with(header("bounds", ctx, Some(&rho)), json!({ "rows": rows })))?,
    };
    ctx.emit(&bytes)?;
    Ok(EXIT_OK)
}

/// Near-zero and tail behaviour read off the declared segments.
pub fn infer_features(rho: &SpectralMeasure) -> Result<Features, CliError> {
    if rho.weight_order() != 0 {
        return Err(CliError::config("declare [regimes.features] for derived measures"));
    }
    if rho.atoms().iter().any(|a| a.location == 0.0 && a.mass > 0.0) {
        return Err(CliError::inapplicable("an atom at the origin keeps persistence bounded away from 0"));
    }
    let first = rho.segments().iter().min_by(|a, b| a.a.total_cmp(&b.a));
    let near_zero = match first {
        None => NearZero::Gap,
        Some(s) if s.a > 0.0 => NearZero::Gap,
        Some(s) => match s.form {
            DensityForm::Constant { .. } => NearZero::Power { alpha: 0.0 },
            DensityForm::Power { alpha, .. } => NearZero::Power { alpha },
            DensityForm::ExpWell { a, .. } => NearZero::ExpWell { a },
            _ => return Err(CliError::config("cannot read the behaviour at 0; declare [regimes.features]")),
        },
    };
    let tail = if rho.support_sup().is_finite() {
        Tail::Compact
    } else {
        let last = rho.segments().iter().max_by(|a, b| a.b.total_cmp(&b.b)).expect("unbounded support has a segment");
        match last.form {
            DensityForm::PowerTail { alpha, .. } => Tail::Power { eta: alpha },
            DensityForm::LogTail { .. } => Tail::Log,
            _ => return Err(CliError::config("cannot read the tail; declare [regimes.features]")),
        }
    };
    Ok(Features { near_zero, tail })
}

pub fn regimes(ctx: &Context, args: &RegimesArgs) -> Result<i32, CliError> {
    let rho = ctx.measure()?;
    let p = &ctx.config.regimes;
    let features = match p.features {
        Some(f) => f,
        None => infer_features(&rho)?,
    };
    let classes = bounds::envelope(&features, rho.domain())?;
    let mut curve_params = p.curve.clone();
    if !args.n.is_empty() {
        let mut c = curve_params.unwrap_or_default();
        c.n = args.n.clone();
        curve_params = Some(c);
    }
    if let (Some(c), Some(s)) = (curve_params.as_mut(), args.n_samples) {
        c.n_samples = s;
    }
    let (curve, fit) = match &curve_params {
        Some(c) => {
            let points = run_curve(&rho, c, ctx)?;
            let fit = bounds::slope_fit(&points, p.model, &ctx.rng())?;
            (Some(curve_json(&points)), Some(json!({"model": p.model, "exponent": fit.exponent, "ci": fit.ci})))
        }
        None => (None, None),
    };
    let doc = with(
        header("regimes", ctx, Some(&rho)),
        json!({ "features": features, "classes": classes, "curve": curve, "slope_fit": fit }),
    );
    ctx.emit(&to_json(&doc)?)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Serialize)]
pub struct ChebyRecord {
    pub mode: ChebyMode,
    pub k: usize,
    #[serde(rename = "N")]
    pub n: Option<f64>,
    pub lhs: f64,
    pub sup: Option<f64>,
    pub implied_c0: Option<f64>,
    pub samples: Option<u64>,
    pub seed: u64,
    pub details: Value,
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Ascending coefficients of the `k`-th derivative.
fn derivative(coeffs: &[f64], k: usize) -> Vec<f64> {
    (k..coeffs.len())
        .map(|j| coeffs[j] * (j - k + 1..=j).map(|i| i as f64).product::<f64>())
        .collect()
}

fn family_coeffs(family: Family, k: usize, coeffs: &[f64]) -> Result<Vec<f64>, CliError> {
    match family {
        Family::Chebyshev => Ok(chebyshev::monic_chebyshev_coeffs(k)),
        Family::Polynomial if coeffs.is_empty() => Err(CliError::config("family polynomial needs coeffs")),
        Family::Polynomial => Ok(coeffs.to_vec()),
        Family::Exp => Err(CliError::config("family exp has no coefficients")),
    }
}

fn cheby_record(ctx: &Context, mode: ChebyMode, family: Family, k: usize, n: f64, coeffs: &[f64], n_mc: usize) -> Result<ChebyRecord, CliError> {
    let base = |lhs: f64| ChebyRecord {
        mode,
        k,
        n: None,
        lhs,
        sup: None,
        implied_c0: None,
        samples: None,
        seed: ctx.seed,
        details: Value::Null,
    };
    let rng = ctx.rng();
    Ok(match mode {
        ChebyMode::Continuous => {
            let r = match family {
                Family::Exp => chebyshev::verify_continuous(f64::exp, f64::exp, k, n)?,
                _ => {
                    let c = family_coeffs(family, k, coeffs)?;
                    let dk = derivative(&c, k);
                    let scale = n.powi(k as i32);
                    chebyshev::verify_continuous(
                        |x| chebyshev::poly_eval(&c, x / n),
                        |x| chebyshev::poly_eval(&dk, x / n) / scale,
                        k,
                        n,
                    )?
                }
            };
            ChebyRecord {
                n: Some(n),
                sup: Some(r.sup),
                implied_c0: Some(r.implied_c0),
                details: serde_json::to_value(r).unwrap_or(Value::Null),
                ..base(r.lhs)
            }
        }
        ChebyMode::Discrete => {
            if n.fract() != 0.0 || n < 1.0 {
                return Err(CliError::config("discrete mode needs an integer N"));
            }
            let ni = n as i64;
            let vals: Vec<f64> = match family {
                Family::Exp => (-2 * ni..=2 * ni).map(|m| (m as f64).exp()).collect(),
                _ => {
                    let c = family_coeffs(family, k, coeffs)?;
                    (-2 * ni..=2 * ni).map(|m| chebyshev::poly_eval(&c, m as f64 / n)).collect()
                }
            };
            let r = chebyshev::verify_discrete(&vals, k, n as usize)?;
            ChebyRecord {
                n: Some(n),
                sup: Some(r.sup),
                implied_c0: Some(r.implied_c),
                details: serde_json::to_value(r).unwrap_or(Value::Null),
                ..base(r.lhs)
            }
        }
        ChebyMode::HermiteGenocchi => {
            let nodes = chebyshev::extrema(k)?;
            let (vals, mc) = match family {
                Family::Exp => {
                    let v: Vec<f64> = nodes.nodes.iter().map(|x| x.exp()).collect();
                    (v, chebyshev::hermite_genocchi_mc(f64::exp, &nodes.nodes, n_mc, &rng)?)
                }
                _ => {
                    let c = family_coeffs(family, k, coeffs)?;
                    let dk = derivative(&c, k);
                    let v: Vec<f64> = nodes.nodes.iter().map(|&x| chebyshev::poly_eval(&c, x)).collect();
                    (v, chebyshev::hermite_genocchi_mc(|x| chebyshev::poly_eval(&dk, x), &nodes.nodes, n_mc, &rng)?)
                }
            };
            let dd = chebyshev::divided_difference(&nodes, &vals)?;
            ChebyRecord {
                samples: Some(mc.samples),
                details: json!({"monte_carlo": mc.estimate, "se": mc.se, "agrees": (mc.estimate - dd.leading).abs() <= 3.0 * mc.se}),
                ..base(dd.leading)
            }
        }
        ChebyMode::MinNorm => {
            let c = match family {
                Family::Exp => return Err(CliError::config("min_norm needs a polynomial family")),
                _ => family_coeffs(family, k, coeffs)?,
            };
            let r = chebyshev::min_norm_check(&c)?;
            ChebyRecord {
                sup: Some(r.bound),
                details: serde_json::to_value(r).unwrap_or(Value::Null),
                ..base(r.max_abs_at_extrema)
            }
        }
        ChebyMode::SimplexDensity => {
            let grid: Vec<f64> = (-9..=9).map(|i| i as f64 / 10.0).collect();
            let r = chebyshev::simplex_density_check(k, &grid, n_mc, &rng)?;
            ChebyRecord {
                samples: Some(r.samples),
                details: serde_json::to_value(&r).unwrap_or(Value::Null),
                ..base(r.min_density * factorial(k))
            }
        }
    })
}

pub fn cheby(ctx: &Context, args: &ChebyArgs) -> Result<i32, CliError> {
    let mut p = ctx.config.cheby.clone();
    p.mode = args.mode.unwrap_or(p.mode);
    p.family = args.family.unwrap_or(p.family);
    if !args.k.is_empty() {
        p.k = args.k.clone();
    }
    p.n = args.n.unwrap_or(p.n);
    if !args.coeffs.is_empty() {
        p.coeffs = args.coeffs.clone();
    }
    p.n_mc = args.n_mc.unwrap_or(p.n_mc);
    if p.k.is_empty() {
        return Err(CliError::config("cheby needs at least one k"));
    }
    let records = p
        .k
        .iter()
        .map(|&k| cheby_record(ctx, p.mode, p.family, k, p.n, &p.coeffs, p.n_mc))
        .collect::<Result<Vec<_>, _>>()?;
    let bytes = match ctx.format_or(Format::Json) {
        Format::Json if records.len() == 1 => to_json(&records[0])?,
        Format::Json => to_json(&records)?,
        Format::Csv => {
            let rows: Vec<Vec<String>> = records
                .iter()
                .map(|r| {
                    vec![
                        serde_json::to_value(r.mode).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                        r.k.to_string(),
                        cell(r.n),
                        r.lhs.to_string(),
                        cell(r.sup),
                        cell(r.implied_c0),
                        r.samples.map(|s| s.to_string()).unwrap_or_default(),
                        r.seed.to_string(),
                    ]
                })
                .collect();
            csv_bytes(&["mode", "k", "N", "lhs", "sup", "implied_c0", "samples", "seed"], &rows)?
        }
    };
    ctx.emit(&bytes)?;
    Ok(EXIT_OK)
}
