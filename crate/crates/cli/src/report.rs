//! `gsp report`: join curve, bounds, estimate and regimes artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use gsp_core::bounds::{self, SlopeModel};
use gsp_core::persistence::{CurvePoint, GridStep, Method, PersistenceEstimate};
use gsp_core::spectral::SCHEMA_VERSION;
use serde::Serialize;
use serde_json::{json, Value};

use crate::commands::to_json;
use crate::{write_target, CliError, Context, ReportArgs, EXIT_OK};

/// Upper bound used when a bounds table has no upper entry: persistence
/// is at most the probability that one sample is positive.
const TRIVIAL_UPPER: f64 = -std::f64::consts::LN_2;

#[derive(Debug, Clone, Serialize)]
pub struct Point {
    #[serde(rename = "N")]
    pub n: f64,
    pub log_p: Option<f64>,
    pub se_log: Option<f64>,
    pub method: Option<String>,
    pub grid_step: Option<String>,
    pub n_samples: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundRow {
    #[serde(rename = "N")]
    pub n: f64,
    pub lower_log: Option<f64>,
    pub upper_log: Option<f64>,
    pub flags: Vec<String>,
}

#[derive(Debug, Default)]
struct Inputs {
    curves: BTreeMap<String, Vec<Point>>,
    bounds: BTreeMap<String, Vec<BoundRow>>,
    regimes: BTreeMap<String, Value>,
}

fn label(path: &Path) -> String {
    path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

fn num(v: &Value) -> Option<f64> {
    v.as_f64()
}

fn point_from_json(v: &Value) -> Result<Point, CliError> {
    Ok(Point {
        n: num(&v["N"]).ok_or_else(|| CliError::config("curve point without N"))?,
        log_p: num(&v["log_p"]).or_else(|| v.get("log_p").filter(|x| !x.is_null()).map(|_| f64::NEG_INFINITY)),
        se_log: num(&v["se_log"]),
        method: v["method"].as_str().map(str::to_string),
        grid_step: match &v["grid_step"] {
            Value::Null => None,
            Value::String(s) => Some(s.clone()),
            other => Some(other.to_string()),
        },
        n_samples: v["n_samples"].as_u64(),
    })
}

fn cell(s: &str) -> Result<Option<f64>, CliError> {
    if s.trim().is_empty() {
        return Ok(None);
    }
    s.trim()
        .parse::<f64>()
        .map(Some)
        .map_err(|_| CliError::config(format!("not a number: {s:?}")))
}

fn read_json(name: &str, v: Value, inputs: &mut Inputs, versions: &mut Vec<(String, u64)>) -> Result<(), CliError> {
    let version = v["schema_version"]
        .as_u64()
        .ok_or_else(|| CliError::config(format!("{name}: missing schema_version")))?;
    versions.push((name.to_string(), version));
    match v["kind"].as_str() {
        Some("curve") => {
            let pts = v["points"]
                .as_array()
                .ok_or_else(|| CliError::config(format!("{name}: curve without points")))?;
            inputs.curves.insert(name.into(), pts.iter().map(point_from_json).collect::<Result<_, _>>()?);
        }
        Some("estimate") => {
            inputs.curves.entry(name.into()).or_default().push(point_from_json(&v)?);
        }
        Some("bounds") => {
            let rows = v["rows"]
                .as_array()
                .ok_or_else(|| CliError::config(format!("{name}: bounds without rows")))?;
            let rows = rows
                .iter()
                .map(|r| {
                    Ok(BoundRow {
                        n: num(&r["N"]).ok_or_else(|| CliError::config(format!("{name}: bounds row without N")))?,
                        lower_log: num(&r["lower_log"]),
                        upper_log: num(&r["upper_log"]),
                        flags: r["flags"]
                            .as_array()
                            .map(|a| a.iter().filter_map(|f| f.as_str().map(str::to_string)).collect())
                            .unwrap_or_default(),
                    })
                })
                .collect::<Result<_, CliError>>()?;
            inputs.bounds.insert(name.into(), rows);
        }
        Some("regimes") => {
            if let Some(c) = v["curve"].as_array() {
                inputs
                    .curves
                    .insert(format!("{name}#curve"), c.iter().map(point_from_json).collect::<Result<_, _>>()?);
            }
            inputs.regimes.insert(name.into(), v);
        }
        other => return Err(CliError::config(format!("{name}: cannot report on kind {other:?}"))),
    }
    Ok(())
}

fn read_csv(name: &str, text: &str, inputs: &mut Inputs) -> Result<(), CliError> {
    let err = |e: csv::Error| CliError::config(format!("{name}: {e}"));
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers().map_err(err)?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    match cols.as_slice() {
        ["N", "log_p", "se_log", "method", "grid_step", "n_samples", "seed"] => {
            let mut pts = Vec::new();
            for rec in r.records() {
                let rec = rec.map_err(err)?;
                let method = &rec[3];
                pts.push(Point {
                    n: cell(&rec[0])?.ok_or_else(|| CliError::config(format!("{name}: row without N")))?,
                    log_p: cell(&rec[1])?,
                    se_log: cell(&rec[2])?,
                    method: (method != "gap").then(|| method.to_string()),
                    grid_step: (!rec[4].is_empty()).then(|| rec[4].to_string()),
                    n_samples: rec[5].parse().ok(),
                });
            }
            inputs.curves.insert(name.into(), pts);
        }
        ["N", "lower_log", "upper_log", "ell_star_lower", "ell_star_upper", "k_used", "flags"] => {
            let mut rows = Vec::new();
            for rec in r.records() {
                let rec = rec.map_err(err)?;
                rows.push(BoundRow {
                    n: cell(&rec[0])?.ok_or_else(|| CliError::config(format!("{name}: row without N")))?,
                    lower_log: cell(&rec[1])?,
                    upper_log: cell(&rec[2])?,
                    flags: rec[6].split("; ").filter(|s| !s.is_empty()).map(str::to_string).collect(),
                });
            }
            inputs.bounds.insert(name.into(), rows);
        }
        _ => return Err(CliError::config(format!("{name}: unrecognised CSV header {cols:?}"))),
    }
    Ok(())
}

fn to_curve_points(pts: &[Point]) -> Option<Vec<CurvePoint>> {
    pts.iter()
        .map(|p| {
            let method: Method = serde_json::from_value(json!(p.method.as_deref()?)).ok()?;
            let grid_step = match p.grid_step.as_deref()? {
                "integer" => GridStep::Integer,
                s => GridStep::Step(s.parse().ok()?),
            };
            Some(CurvePoint {
                n: p.n,
                estimate: Some(PersistenceEstimate {
                    log_p: p.log_p?,
                    se_log: p.se_log?,
                    method,
                    n_samples: p.n_samples.unwrap_or(0),
                    grid_step,
                    dim: 0,
                    low_confidence: p.se_log? > 1.0,
                }),
                error: None,
            })
        })
        .collect()
}

fn usable(p: &Point) -> bool {
    match (p.log_p, p.se_log) {
        (Some(l), Some(s)) => l.is_finite() && l < 0.0 && s < 0.5 * l.abs(),
        _ => false,
    }
}

pub fn run(ctx: &Context, args: &ReportArgs) -> Result<i32, CliError> {
    let paths: Vec<PathBuf> = if args.inputs.is_empty() {
        ctx.config.report.inputs.clone()
    } else {
        args.inputs.clone()
    };
    if paths.is_empty() {
        return Err(CliError::config("report needs at least one input artifact"));
    }
    let mut inputs = Inputs::default();
    let mut versions = Vec::new();
    for path in &paths {
        let text = fs::read_to_string(path).map_err(|e| CliError::config(format!("reading {}: {e}", path.display())))?;
        let name = label(path);
        if text.trim_start().starts_with('{') {
            let v: Value = serde_json::from_str(&text).map_err(|e| CliError::config(format!("{name}: {e}")))?;
            read_json(&name, v, &mut inputs, &mut versions)?;
        } else {
            read_csv(&name, &text, &mut inputs)?;
        }
    }
    if let Some((n, v)) = versions.iter().find(|(_, v)| *v != versions[0].1) {
        return Err(CliError::config(format!(
            "mixed schema versions: {} has {v}, {} has {}",
            n, versions[0].0, versions[0].1
        )));
    }
    let schema = versions.first().map(|(_, v)| *v).unwrap_or(SCHEMA_VERSION as u64);

    let rng = ctx.rng();
    let mut fits = BTreeMap::new();
    for (name, pts) in &inputs.curves {
        let good: Vec<Point> = pts.iter().filter(|p| usable(p)).cloned().collect();
        if good.len() < 4 {
            continue;
        }
        if let Some(cp) = to_curve_points(&good) {
            match bounds::slope_fit(&cp, SlopeModel::PowerOfN, &rng) {
                Ok(f) => fits.insert(name.clone(), json!({"model": SlopeModel::PowerOfN, "exponent": f.exponent, "ci": f.ci, "points": good.len()})),
                Err(e) => fits.insert(name.clone(), json!({"error": e.to_string()})),
            };
        }
    }

    let mut ordering = Vec::new();
    let mut long: Vec<(String, f64, Option<f64>, Option<f64>, Option<f64>)> = Vec::new();
    for (name, pts) in &inputs.curves {
        for p in pts {
            let (lo, hi) = match (p.log_p, p.se_log) {
                (Some(l), Some(s)) => (Some(l - 1.96 * s), Some(l + 1.96 * s)),
                _ => (None, None),
            };
            long.push((format!("estimate:{name}"), p.n, p.log_p, lo, hi));
        }
    }
    for (name, rows) in &inputs.bounds {
        for r in rows {
            long.push((format!("lower:{name}"), r.n, r.lower_log, None, None));
            long.push((format!("upper:{name}"), r.n, r.upper_log, None, None));
        }
    }
    for (bname, rows) in &inputs.bounds {
        for r in rows {
            let upper = r.upper_log.unwrap_or(TRIVIAL_UPPER).min(TRIVIAL_UPPER);
            for (cname, pts) in &inputs.curves {
                let Some(p) = pts.iter().find(|p| p.n == r.n) else { continue };
                let (Some(l), Some(s)) = (p.log_p, p.se_log) else { continue };
                let lower_ok = r.lower_log.is_none_or(|lb| lb <= l + 3.0 * s);
                let upper_ok = l - 3.0 * s <= upper;
                ordering.push(json!({
                    "N": r.n,
                    "bounds": bname,
                    "curve": cname,
                    "lower_log": r.lower_log,
                    "log_p": l,
                    "se_log": s,
                    "upper_log": upper,
                    "lower_ok": lower_ok,
                    "upper_ok": upper_ok,
                }));
            }
        }
    }
    let consistent = ordering.iter().all(|o| o["lower_ok"] == json!(true) && o["upper_ok"] == json!(true));

    let summary = json!({
        "kind": "report",
        "schema_version": schema,
        "seed": ctx.seed,
        "inputs": paths.iter().map(|p| label(p)).collect::<Vec<_>>(),
        "curves": inputs.curves,
        "bounds": inputs.bounds,
        "regimes": inputs.regimes,
        "slope_fits": fits,
        "ordering": ordering,
        "consistent": consistent,
    });
    ctx.emit(&to_json(&summary)?)?;

    let long_path = args
        .long_csv
        .clone()
        .or_else(|| ctx.config.report.long_csv.clone())
        .or_else(|| ctx.sibling(".long.csv"));
    if let Some(p) = long_path {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| CliError::config(format!("csv: {e}"));
        let f = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        w.write_record(["series", "N", "value", "lo", "hi"]).map_err(err)?;
        for (s, n, v, lo, hi) in &long {
            w.write_record([s.clone(), n.to_string(), f(*v), f(*lo), f(*hi)]).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::config(format!("csv: {e}")))?;
        write_target(Some(&p), &bytes)?;
    }
    Ok(EXIT_OK)
}
