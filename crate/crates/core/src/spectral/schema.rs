//! Versioned declaration format for spectral measures (JSON or TOML).

use std::collections::BTreeMap;

use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Atom, DensityForm, DensitySegment, Domain, SpectralMeasure};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Upper end of a segment support: a number or the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Upper(pub f64);

impl Serialize for Upper {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Upper {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Upper(x)),
            Raw::Int(x) => Ok(Upper(x as f64)),
            Raw::Text(t) if matches!(t.as_str(), "inf" | "+inf" | "infinity") => Ok(Upper(f64::INFINITY)),
            Raw::Text(t) => Err(de::Error::custom(format!("unrecognized support bound {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub support: (f64, Upper),
    pub form: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    pub schema_version: u32,
    pub domain: Domain,
    #[serde(default)]
    pub atoms: Vec<(f64, f64)>,
    #[serde(default)]
    pub segments: Vec<SegmentSpec>,
    #[serde(default)]
    pub normalize: bool,
    /// A `δ > 0` whose moment the declaration asserts to be finite.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moment_delta: Option<f64>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub weight_order: i32,
}

fn is_zero(x: &i32) -> bool {
    *x == 0
}

fn form_from_spec(index: usize, seg: &SegmentSpec) -> Result<DensityForm> {
    let p = &seg.params;
    let allowed: &[&str] = match seg.form.as_str() {
        "constant" => &["c"],
        "power" | "power_tail" => &["c", "alpha"],
        "exp_well" => &["c", "A", "scale"],
        "log_tail" => &["c", "scale"],
        other => {
            return Err(Error::invalid(format!("segment {index}: unknown form {other:?}")));
        }
    };
    if let Some(k) = p.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(Error::invalid(format!(
            "segment {index}: parameter {k:?} does not apply to form {}",
            seg.form
        )));
    }
    let get = |name: &str| {
        p.get(name)
            .copied()
            .ok_or_else(|| Error::invalid(format!("segment {index}: missing parameter {name:?}")))
    };
    let scale = p.get("scale").copied().unwrap_or(1.0);
    Ok(match seg.form.as_str() {
        "constant" => DensityForm::Constant { c: get("c")? },
        "power" => DensityForm::Power {
            c: get("c")?,
            alpha: get("alpha")?,
        },
        "power_tail" => DensityForm::PowerTail {
            c: get("c")?,
            alpha: get("alpha")?,
        },
        "exp_well" => DensityForm::ExpWell {
            c: get("c")?,
            a: get("A")?,
            scale,
        },
        _ => DensityForm::LogTail { c: get("c")?, scale },
    })
}

fn form_to_params(form: &DensityForm) -> BTreeMap<String, f64> {
    let mut p = BTreeMap::new();
    p.insert("c".to_string(), form.coefficient());
    match *form {
        DensityForm::Power { alpha, .. } | DensityForm::PowerTail { alpha, .. } => {
            p.insert("alpha".into(), alpha);
        }
        DensityForm::ExpWell { a, scale, .. } => {
            p.insert("A".into(), a);
            if scale != 1.0 {
                p.insert("scale".into(), scale);
            }
        }
        DensityForm::LogTail { scale, .. } => {
            if scale != 1.0 {
                p.insert("scale".into(), scale);
            }
        }
        DensityForm::Constant { .. } => {}
    }
    p
}

pub(super) fn from_spec(spec: &MeasureSpec) -> Result<SpectralMeasure> {
    if spec.schema_version != SCHEMA_VERSION {
        return Err(Error::invalid(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            spec.schema_version
        )));
    }
    let atoms = spec
        .atoms
        .iter()
        .map(|&(location, mass)| Atom { location, mass })
        .collect();
    let segments = spec
        .segments
        .iter()
        .enumerate()
        .map(|(i, s)| Ok(DensitySegment::new(s.support.0, s.support.1 .0, form_from_spec(i, s)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut m = SpectralMeasure::with_weight(spec.domain, atoms, segments, spec.weight_order)?;
    if spec.normalize {
        m = m.normalize()?;
    }
    if let Some(delta) = spec.moment_delta {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::invalid(format!("moment_delta must be a positive number, got {delta}")));
        }
        if !m.moment_is_finite(delta) {
            return Err(Error::invalid(format!("declared moment m_{delta} is infinite")));
        }
    }
    Ok(m)
}

pub(super) fn to_spec(m: &SpectralMeasure) -> MeasureSpec {
    MeasureSpec {
        schema_version: SCHEMA_VERSION,
        domain: m.domain,
        atoms: m.atoms.iter().map(|a| (a.location, a.mass)).collect(),
        segments: m
            .segments
            .iter()
            .map(|s| SegmentSpec {
                support: (s.a, Upper(s.b)),
                form: s.form.name().to_string(),
                params: form_to_params(&s.form),
            })
            .collect(),
        normalize: false,
        moment_delta: None,
        weight_order: m.weight_order,
    }
}

pub(super) fn digest(spec: &MeasureSpec) -> String {
    let text = serde_json::to_string(spec).expect("measure spec serializes");
    let hash = Sha256::digest(text.as_bytes());
    hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
}
