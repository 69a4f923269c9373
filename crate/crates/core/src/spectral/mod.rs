//! Spectral measures: a finite symmetric measure stored by its nonnegative
//! half, as atoms plus parametric density segments.

mod integrals;
mod schema;

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use schema::{MeasureSpec, SegmentSpec, Upper, SCHEMA_VERSION};

use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, toeplitz};
use crate::quadrature::Integral;
use integrals::{cos_piece, moment_piece, Weight};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    #[serde(alias = "integer", alias = "Z")]
    IntegerTime,
    #[serde(alias = "continuous", alias = "R")]
    ContinuousTime,
}

/// A point mass. At `location > 0` it stands for the pair `±location`, each
/// carrying `mass / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

/// Parametric densities on a segment of `[0, ∞)`.
///
/// `ExpWell` is `c·exp(−(scale·λ)^{−A})` and `LogTail` is
/// `c / (λ·log²(scale·λ))`; `scale = 1` gives the plain forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensityForm {
    Constant { c: f64 },
    Power { c: f64, alpha: f64 },
    ExpWell { c: f64, a: f64, scale: f64 },
    PowerTail { c: f64, alpha: f64 },
    LogTail { c: f64, scale: f64 },
}

impl DensityForm {
    pub fn coefficient(&self) -> f64 {
        match *self {
            DensityForm::Constant { c }
            | DensityForm::Power { c, .. }
            | DensityForm::ExpWell { c, .. }
            | DensityForm::PowerTail { c, .. }
            | DensityForm::LogTail { c, .. } => c,
        }
    }

    fn with_coefficient(self, c: f64) -> Self {
        match self {
            DensityForm::Constant { .. } => DensityForm::Constant { c },
            DensityForm::Power { alpha, .. } => DensityForm::Power { c, alpha },
            DensityForm::ExpWell { a, scale, .. } => DensityForm::ExpWell { c, a, scale },
            DensityForm::PowerTail { alpha, .. } => DensityForm::PowerTail { c, alpha },
            DensityForm::LogTail { scale, .. } => DensityForm::LogTail { c, scale },
        }
    }

    /// Power of `λ` in the density, up to slowly varying factors.
    pub fn exponent(&self) -> f64 {
        match *self {
            DensityForm::Constant { .. } | DensityForm::ExpWell { .. } => 0.0,
            DensityForm::Power { alpha, .. } => alpha,
            DensityForm::PowerTail { alpha, .. } => -alpha,
            DensityForm::LogTail { .. } => -1.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DensityForm::Constant { .. } => "constant",
            DensityForm::Power { .. } => "power",
            DensityForm::ExpWell { .. } => "exp_well",
            DensityForm::PowerTail { .. } => "power_tail",
            DensityForm::LogTail { .. } => "log_tail",
        }
    }

    pub fn value(&self, l: f64) -> f64 {
        match *self {
            DensityForm::Constant { c } => c,
            DensityForm::Power { c, alpha } => c * l.powf(alpha),
            DensityForm::ExpWell { c, a, scale } => {
                if l <= 0.0 {
                    0.0
                } else {
                    c * (-(scale * l).powf(-a)).exp()
                }
            }
            DensityForm::PowerTail { c, alpha } => c * l.powf(-alpha),
            DensityForm::LogTail { c, scale } => {
                let lg = (scale * l).ln();
                c / (l * lg * lg)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensitySegment {
    pub a: f64,
    pub b: f64,
    pub form: DensityForm,
}

impl DensitySegment {
    pub fn new(a: f64, b: f64, form: DensityForm) -> Self {
        DensitySegment { a, b, form }
    }
}

/// A moment value or a divergence decided from the segment exponents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Moment {
    Finite { value: f64, abs_err: f64 },
    Infinite,
}

impl Moment {
    pub fn is_finite(&self) -> bool {
        matches!(self, Moment::Finite { .. })
    }

    /// The value, with `+∞` for a divergent moment.
    pub fn value(&self) -> f64 {
        match *self {
            Moment::Finite { value, .. } => value,
            Moment::Infinite => f64::INFINITY,
        }
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            Moment::Finite { value, .. } => Some(value),
            Moment::Infinite => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentTable {
    pub entries: Vec<(f64, Moment)>,
}

impl MomentTable {
    pub fn get(&self, delta: f64) -> Option<Moment> {
        self.entries.iter().find(|(d, _)| *d == delta).map(|(_, m)| *m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IbpReport {
    pub gamma: f64,
    pub b: f64,
    pub max_ratio: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RieszGap {
    pub step: f64,
    pub min_eigenvalue: f64,
    /// `ν·|J ∪ −J|`, the eigenvalue floor implied by the declared density floor.
    pub expected_floor: f64,
    /// `√λ_min` when the decomposition is certified.
    pub b: Option<f64>,
    pub certified: bool,
    /// Set when `λ_min` falls short of `expected_floor`, or the sampled density
    /// dips below `ν` on `J`.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMeasure {
    domain: Domain,
    atoms: Vec<Atom>,
    segments: Vec<DensitySegment>,
    weight_order: i32,
}

const SUPPORT_TOL: f64 = 1e-12;

fn non_integrable(index: usize, reason: impl Into<String>) -> Error {
    Error::NonIntegrable {
        index,
        reason: reason.into(),
    }
}

impl SpectralMeasure {
    pub fn new(domain: Domain, atoms: Vec<Atom>, segments: Vec<DensitySegment>) -> Result<Self> {
        Self::with_weight(domain, atoms, segments, 0)
    }

    fn with_weight(
        domain: Domain,
        mut atoms: Vec<Atom>,
        mut segments: Vec<DensitySegment>,
        weight_order: i32,
    ) -> Result<Self> {
        atoms.sort_by(|x, y| x.location.total_cmp(&y.location));
        segments.sort_by(|x, y| x.a.total_cmp(&y.a));
        let m = SpectralMeasure {
            domain,
            atoms,
            segments,
            weight_order,
        };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        let limit = match self.domain {
            Domain::IntegerTime => PI + SUPPORT_TOL,
            Domain::ContinuousTime => f64::INFINITY,
        };
        for atom in &self.atoms {
            if !(atom.location.is_finite() && atom.location >= 0.0) {
                return Err(Error::invalid(format!("atom location {} must be finite and >= 0", atom.location)));
            }
            if !(atom.mass.is_finite() && atom.mass >= 0.0) {
                return Err(Error::invalid(format!("atom mass {} must be finite and >= 0", atom.mass)));
            }
            if atom.location > limit {
                return Err(Error::invalid(format!(
                    "atom at {} lies outside [0, pi] for integer time",
                    atom.location
                )));
            }
        }
        for (i, seg) in self.segments.iter().enumerate() {
            if !(seg.a >= 0.0 && seg.a.is_finite() && seg.b > seg.a) {
                return Err(Error::invalid(format!(
                    "segment {i}: support [{}, {}] must satisfy 0 <= a < b",
                    seg.a, seg.b
                )));
            }
            if seg.b > limit {
                return Err(Error::invalid(format!(
                    "segment {i}: support [{}, {}] exceeds [0, pi] for integer time",
                    seg.a, seg.b
                )));
            }
            if i > 0 && self.segments[i - 1].b > seg.a {
                return Err(Error::invalid(format!("segment {i} overlaps segment {}", i - 1)));
            }
            let c = seg.form.coefficient();
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::invalid(format!("segment {i}: coefficient c = {c} must be > 0")));
            }
            match seg.form {
                DensityForm::Power { alpha, .. } | DensityForm::PowerTail { alpha, .. } if !alpha.is_finite() => {
                    return Err(Error::invalid(format!("segment {i}: exponent must be finite")));
                }
                DensityForm::ExpWell { a, scale, .. } if !(a > 0.0 && a.is_finite() && scale > 0.0 && scale.is_finite()) => {
                    return Err(Error::invalid(format!("segment {i}: exp_well needs A > 0 and scale > 0")));
                }
                DensityForm::LogTail { scale, .. } => {
                    if !(scale > 0.0 && scale.is_finite()) {
                        return Err(Error::invalid(format!("segment {i}: log_tail needs scale > 0")));
                    }
                    if !(scale * seg.a > 1.0) {
                        return Err(Error::invalid(format!(
                            "segment {i}: log_tail needs scale * a > 1 (got a = {})",
                            seg.a
                        )));
                    }
                }
                _ => {}
            }
            if let Some(reason) = self.divergence(seg, 0.0) {
                return Err(non_integrable(i, reason));
            }
        }
        let mass = self.total_mass();
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::invalid(format!("total mass {mass} must be finite and > 0")));
        }
        Ok(())
    }

    /// Why `∫ λ^δ M w` diverges on this segment, if it does.
    fn divergence(&self, seg: &DensitySegment, delta: f64) -> Option<String> {
        let e = seg.form.exponent() + delta + 2.0 * self.weight_order as f64;
        if seg.a == 0.0 {
            let ok = match seg.form {
                DensityForm::ExpWell { .. } => true,
                _ => e > -1.0,
            };
            if !ok {
                return Some(format!(
                    "{} density has exponent {e} at 0, needs > -1 to be integrable",
                    seg.form.name()
                ));
            }
        }
        if seg.b.is_infinite() {
            let ok = match seg.form {
                DensityForm::LogTail { .. } => e <= -1.0,
                _ => e < -1.0,
            };
            if !ok {
                return Some(format!(
                    "{} density has exponent {e} at infinity, needs < -1 to be integrable",
                    seg.form.name()
                ));
            }
        }
        None
    }

    fn weight(&self) -> Weight {
        Weight {
            p: self.weight_order,
            discrete: self.domain == Domain::IntegerTime,
        }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn segments(&self) -> &[DensitySegment] {
        &self.segments
    }

    /// Net number of derivatives applied: `+1` per derivative measure, `−1`
    /// per anti-derivative measure.
    pub fn weight_order(&self) -> i32 {
        self.weight_order
    }

    /// Density of the absolutely continuous part at `|λ|`.
    pub fn density_at(&self, l: f64) -> f64 {
        let l = l.abs();
        let w = self.weight();
        self.segments
            .iter()
            .filter(|s| l >= s.a && l <= s.b)
            .map(|s| s.form.value(l) * w.multiplier(l))
            .sum()
    }

    /// Largest frequency carrying mass, `+∞` for unbounded support.
    pub fn support_sup(&self) -> f64 {
        let atoms = self
            .atoms
            .iter()
            .filter(|a| a.mass > 0.0)
            .map(|a| a.location)
            .fold(0.0, f64::max);
        self.segments.iter().map(|s| s.b).fold(atoms, f64::max)
    }

    pub fn total_mass(&self) -> f64 {
        let atoms: f64 = self.atoms.iter().map(|a| a.mass).sum();
        let w = self.weight();
        let dens: f64 = self
            .segments
            .iter()
            .map(|s| moment_piece(s.form, s.a, s.b, 0.0, w).value)
            .sum();
        atoms + 2.0 * dens
    }

    pub fn normalize(&self) -> Result<SpectralMeasure> {
        let mass = self.total_mass();
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::invalid(format!("cannot normalize a measure of mass {mass}")));
        }
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom {
                location: a.location,
                mass: a.mass / mass,
            })
            .collect();
        let segments = self
            .segments
            .iter()
            .map(|s| DensitySegment::new(s.a, s.b, s.form.with_coefficient(s.form.coefficient() / mass)))
            .collect();
        Self::with_weight(self.domain, atoms, segments, self.weight_order)
    }

    /// Analytic finiteness of `m_δ`.
    pub fn moment_is_finite(&self, delta: f64) -> bool {
        if delta < 0.0 && self.atoms.iter().any(|a| a.location == 0.0 && a.mass > 0.0) {
            return false;
        }
        self.segments.iter().all(|s| self.divergence(s, delta).is_none())
    }

    /// Supremum of the `δ` with `m_δ < ∞` (tails only; `+∞` for bounded support).
    pub fn moment_sup(&self) -> f64 {
        let p2 = 2.0 * self.weight_order as f64;
        self.segments
            .iter()
            .filter(|s| s.b.is_infinite())
            .map(|s| -1.0 - s.form.exponent() - p2)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn moment(&self, delta: f64) -> Moment {
        if !self.moment_is_finite(delta) {
            return Moment::Infinite;
        }
        let mut total = Integral::ZERO;
        for a in &self.atoms {
            let v = if a.location == 0.0 {
                if delta == 0.0 {
                    a.mass
                } else {
                    0.0
                }
            } else {
                a.mass * a.location.powf(delta)
            };
            total = total + Integral::exact(v);
        }
        let w = self.weight();
        for s in &self.segments {
            total = total + moment_piece(s.form, s.a, s.b, delta, w).scale(2.0);
        }
        Moment::Finite {
            value: total.value,
            abs_err: total.abs_err,
        }
    }

    pub fn moment_table(&self, deltas: &[f64]) -> MomentTable {
        MomentTable {
            entries: deltas.iter().map(|&d| (d, self.moment(d))).collect(),
        }
    }

    /// `ρ([0, x])`: the atom at 0 in full, atoms in `(0, x]` at half mass.
    pub fn mass_below(&self, x: f64) -> f64 {
        if !(x >= 0.0) {
            return 0.0;
        }
        let atoms: f64 = self
            .atoms
            .iter()
            .filter(|a| a.location <= x)
            .map(|a| if a.location == 0.0 { a.mass } else { 0.5 * a.mass })
            .fold(0.0, |acc, m| acc + m);
        atoms + self.density_mass_below(x)
    }

    /// `∫_0^x` of the density part alone.
    pub fn density_mass_below(&self, x: f64) -> f64 {
        let w = self.weight();
        self.segments
            .iter()
            .filter(|s| s.a < x)
            .map(|s| moment_piece(s.form, s.a, s.b.min(x), 0.0, w).value)
            .fold(0.0, |acc, v| acc + v)
    }

    /// `σ²_N = ρ([0, 1/N])`.
    pub fn sigma_sq(&self, n: f64) -> f64 {
        debug_assert!(n > 0.0);
        self.mass_below(1.0 / n)
    }

    pub fn covariance_detailed(&self, t: f64) -> Integral {
        let mut total: Integral = self
            .atoms
            .iter()
            .map(|a| Integral::exact(a.mass * (a.location * t).cos()))
            .sum();
        let w = self.weight();
        for s in &self.segments {
            total = total + cos_piece(s.form, s.a, s.b, t, w).scale(2.0);
        }
        total
    }

    /// `r(t) = ∫ cos(λt) dρ(λ)`.
    pub fn covariance(&self, t: f64) -> f64 {
        self.covariance_detailed(t).value
    }

    /// `r(0), r(step), …, r((count−1)·step)`.
    pub fn covariance_row(&self, step: f64, count: usize) -> Vec<f64> {
        (0..count)
            .into_par_iter()
            .map(|k| self.covariance(k as f64 * step))
            .collect()
    }

    /// Checks `ρ([0,λ]) ≤ ½ m_{−γ} λ^γ` on the grid.
    pub fn check_ibp(&self, gamma: f64, grid: &[f64]) -> Result<IbpReport> {
        if !(gamma > 0.0) {
            return Err(Error::invalid("gamma must be positive"));
        }
        let m = self
            .moment(-gamma)
            .finite()
            .ok_or_else(|| Error::inapplicable(format!("m_{{-{gamma}}} is infinite")))?;
        let b = 0.5 * m;
        let mut max_ratio: f64 = 0.0;
        for &l in grid {
            if !(l > 0.0) {
                return Err(Error::invalid("grid points must be positive"));
            }
            max_ratio = max_ratio.max(self.mass_below(l) / (b * l.powf(gamma)));
        }
        Ok(IbpReport {
            gamma,
            b,
            max_ratio,
            pass: max_ratio <= 1.0 + 1e-12,
        })
    }

    /// Pushforward under `λ ↦ λ/q` with the smallest `q ≥ 1` placing the
    /// support inside `[−π, π]`.
    pub fn rescale_to_pi(&self) -> Result<(SpectralMeasure, f64)> {
        if self.domain != Domain::ContinuousTime {
            return Err(Error::invalid("rescaling applies to continuous-time measures"));
        }
        let sup = self.support_sup();
        if !sup.is_finite() {
            return Err(Error::invalid("rescaling needs bounded support"));
        }
        let q = (sup / PI).max(1.0);
        let out = self.pushforward(q)?;
        for gamma in [-2.0, 2.0] {
            let (before, after) = (self.moment(gamma), out.moment(gamma));
            match (before, after) {
                (Moment::Infinite, Moment::Infinite) => {}
                (Moment::Finite { value: x, .. }, Moment::Finite { value: y, .. }) => {
                    let expect = x * q.powf(-gamma);
                    if (y - expect).abs() > 1e-9 * expect.abs() {
                        return Err(Error::Numerical(format!(
                            "rescaled m_{gamma} = {y} differs from q^-gamma m_gamma = {expect}"
                        )));
                    }
                }
                _ => return Err(Error::Numerical("rescaling changed moment finiteness".into())),
            }
        }
        Ok((out, q))
    }

    fn pushforward(&self, q: f64) -> Result<SpectralMeasure> {
        if q == 1.0 {
            return Ok(self.clone());
        }
        let wq = q.powi(2 * self.weight_order);
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom {
                location: a.location / q,
                mass: a.mass,
            })
            .collect();
        let segments = self
            .segments
            .iter()
            .map(|s| {
                let form = match s.form {
                    DensityForm::Constant { c } => DensityForm::Constant { c: c * q * wq },
                    DensityForm::Power { c, alpha } => DensityForm::Power {
                        c: c * q.powf(1.0 + alpha) * wq,
                        alpha,
                    },
                    DensityForm::PowerTail { c, alpha } => DensityForm::PowerTail {
                        c: c * q.powf(1.0 - alpha) * wq,
                        alpha,
                    },
                    DensityForm::ExpWell { c, a, scale } => DensityForm::ExpWell {
                        c: c * q * wq,
                        a,
                        scale: scale * q,
                    },
                    DensityForm::LogTail { c, scale } => DensityForm::LogTail { c: c * wq, scale: scale * q },
                };
                DensitySegment::new(s.a / q, s.b / q, form)
            })
            .collect();
        Self::with_weight(self.domain, atoms, segments, self.weight_order)
    }

    /// The same spectral data read in another time domain.
    pub fn with_domain(&self, domain: Domain) -> Result<SpectralMeasure> {
        if domain == self.domain {
            return Ok(self.clone());
        }
        if self.weight_order != 0 {
            return Err(Error::invalid("weighted measures cannot change domain"));
        }
        Self::new(domain, self.atoms.clone(), self.segments.clone())
    }

    /// `max_{1≤k≤k_max} m_{−2k+2} / m_{−2k}`.
    pub fn finite_tau(&self, k_max: u32) -> Result<f64> {
        if k_max == 0 {
            return Err(Error::invalid("k_max must be >= 1"));
        }
        let mut prev = self.moment(0.0).value();
        let mut tau: f64 = 0.0;
        for k in 1..=k_max {
            let m = self
                .moment(-2.0 * k as f64)
                .finite()
                .ok_or_else(|| Error::inapplicable(format!("m_{{-{}}} is infinite", 2 * k)))?;
            tau = tau.max(prev / m);
            prev = m;
        }
        Ok(tau)
    }

    /// Minimum eigenvalue of the covariance section on the lattice `(2π/|J|)ℤ`.
    pub fn riesz_lattice_gap(&self, j: (f64, f64), nu: f64, n: usize) -> Result<RieszGap> {
        let (lo, hi) = j;
        if !(hi > lo) || !(nu > 0.0) {
            return Err(Error::invalid("need J = [a, b] with a < b and nu > 0"));
        }
        if n == 0 || n > 2000 {
            return Err(Error::invalid("matrix size must be in 1..=2000"));
        }
        let len = hi - lo;
        let step = 2.0 * PI / len;
        let row = self.covariance_row(step, n);
        let sigma = toeplitz(&row);
        let min_eig = min_eigenvalue(&sigma);
        let union = if lo >= 0.0 || hi <= 0.0 {
            2.0 * len
        } else {
            lo.abs().max(hi.abs()) * 2.0
        };
        let expected_floor = nu * union;
        let probe_ok = (0..=256).all(|i| {
            let l = lo + len * i as f64 / 256.0;
            self.density_at(l) >= nu * (1.0 - 1e-12)
        });
        let certified = min_eig > 1e-10;
        Ok(RieszGap {
            step,
            min_eigenvalue: min_eig,
            expected_floor,
            b: certified.then(|| min_eig.sqrt()),
            certified,
            flagged: !probe_ok || min_eig < expected_floor * (1.0 - 1e-9) - 1e-12,
        })
    }

    /// `dμ = λ² dρ` (continuous) or `dμ = 2(1 − cos λ) dρ` (integer time).
    pub fn derivative_measure(&self) -> Result<SpectralMeasure> {
        if self.domain == Domain::ContinuousTime && !(self.moment_sup() > 2.0) {
            return Err(Error::inapplicable("derivative needs m_delta < inf for some delta > 2"));
        }
        let w = Weight {
            p: 1,
            discrete: self.domain == Domain::IntegerTime,
        };
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom {
                location: a.location,
                mass: a.mass * w.multiplier(a.location),
            })
            .filter(|a| a.mass > 0.0 || a.location > 0.0)
            .collect();
        Self::with_weight(self.domain, atoms, self.segments.clone(), self.weight_order + 1)
    }

    /// `dμ = λ^{−2} dρ` (continuous) or `dμ = dρ / (2(1 − cos λ))` (integer time).
    pub fn antiderivative_measure(&self) -> Result<SpectralMeasure> {
        if !self.moment(-2.0).is_finite() {
            return Err(Error::inapplicable("anti-derivative needs m_{-2} < inf"));
        }
        if self.domain == Domain::ContinuousTime && !(self.moment_sup() > 0.0) {
            return Err(Error::inapplicable("anti-derivative needs m_delta < inf for some delta > 0"));
        }
        let w = Weight {
            p: 1,
            discrete: self.domain == Domain::IntegerTime,
        };
        let atoms = self
            .atoms
            .iter()
            .filter(|a| a.location > 0.0)
            .map(|a| Atom {
                location: a.location,
                mass: a.mass / w.multiplier(a.location),
            })
            .collect();
        Self::with_weight(self.domain, atoms, self.segments.clone(), self.weight_order - 1)
    }

    pub fn to_spec(&self) -> MeasureSpec {
        schema::to_spec(self)
    }

    pub fn from_spec(spec: &MeasureSpec) -> Result<SpectralMeasure> {
        schema::from_spec(spec)
    }

    /// Short content hash of the canonical serialization.
    pub fn digest(&self) -> String {
        schema::digest(&self.to_spec())
    }
}

/// Measures used throughout the tests, examples and CLI presets.
pub mod catalog {
    use super::*;

    /// Uniform density `1/(2π)` on `[−π, π]`: i.i.d. over ℤ, sinc kernel over ℝ.
    pub fn uniform(domain: Domain) -> SpectralMeasure {
        SpectralMeasure::new(
            domain,
            vec![],
            vec![DensitySegment::new(0.0, PI, DensityForm::Constant { c: 0.5 / PI })],
        )
        .expect("uniform measure is valid")
    }

    pub fn iid() -> SpectralMeasure {
        uniform(Domain::IntegerTime)
    }

    pub fn sinc() -> SpectralMeasure {
        uniform(Domain::ContinuousTime)
    }

    /// Density `1/2` on `±[1, 2]`.
    pub fn gap(domain: Domain) -> SpectralMeasure {
        SpectralMeasure::new(
            domain,
            vec![],
            vec![DensitySegment::new(1.0, 2.0, DensityForm::Constant { c: 0.5 })],
        )
        .expect("gap measure is valid")
    }

    /// Normalized `c|λ|^α` on `[−π, π]`.
    pub fn power(alpha: f64, domain: Domain) -> Result<SpectralMeasure> {
        SpectralMeasure::new(
            domain,
            vec![],
            vec![DensitySegment::new(0.0, PI, DensityForm::Power { c: 1.0, alpha })],
        )?
        .normalize()
    }

    pub fn atoms(pairs: &[(f64, f64)], domain: Domain) -> Result<SpectralMeasure> {
        SpectralMeasure::new(
            domain,
            pairs.iter().map(|&(location, mass)| Atom { location, mass }).collect(),
            vec![],
        )
    }

    /// Normalized `e^{−|λ|^{−A}}` on `[−1, 1]`.
    pub fn exp_well(a: f64, domain: Domain) -> Result<SpectralMeasure> {
        SpectralMeasure::new(
            domain,
            vec![],
            vec![DensitySegment::new(
                0.0,
                1.0,
                DensityForm::ExpWell { c: 1.0, a, scale: 1.0 },
            )],
        )?
        .normalize()
    }

    /// Half atoms at `±1` (mass 1/2), half uniform density on `[−π, π]`.
    pub fn mixed(domain: Domain) -> SpectralMeasure {
        SpectralMeasure::new(
            domain,
            vec![Atom {
                location: 1.0,
                mass: 0.5,
            }],
            vec![DensitySegment::new(0.0, PI, DensityForm::Constant { c: 0.25 / PI })],
        )
        .expect("mixed measure is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::catalog::*;
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn masses() {
        assert!(close(iid().total_mass(), 1.0, 1e-14));
        let c = 3.0 / (4.0 * PI.powf(1.5));
        let m = SpectralMeasure::new(
            Domain::IntegerTime,
            vec![],
            vec![DensitySegment::new(0.0, PI, DensityForm::Power { c, alpha: 0.5 })],
        )
        .unwrap();
        assert!(close(m.total_mass(), 1.0, 1e-14));
        assert!(close(atoms(&[(1.0, 1.0)], Domain::ContinuousTime).unwrap().total_mass(), 1.0, 0.0));
    }

    #[test]
    fn divergent_segment_is_named() {
        let r = SpectralMeasure::new(
            Domain::ContinuousTime,
            vec![],
            vec![
                DensitySegment::new(0.0, 1.0, DensityForm::Constant { c: 1.0 }),
                DensitySegment::new(1.0, f64::INFINITY, DensityForm::PowerTail { c: 1.0, alpha: 0.5 }),
            ],
        );
        assert!(matches!(r, Err(Error::NonIntegrable { index: 1, .. })), "{r:?}");
        let r = SpectralMeasure::new(
            Domain::IntegerTime,
            vec![],
            vec![DensitySegment::new(0.0, 1.0, DensityForm::Power { c: 1.0, alpha: -1.0 })],
        );
        assert!(matches!(r, Err(Error::NonIntegrable { index: 0, .. })));
    }

    #[test]
    fn normalize_examples() {
        let m = SpectralMeasure::new(
            Domain::IntegerTime,
            vec![],
            vec![DensitySegment::new(0.0, PI, DensityForm::Power { c: 1.0, alpha: -0.5 })],
        )
        .unwrap()
        .normalize()
        .unwrap();
        let c = m.segments()[0].form.coefficient();
        assert!(close(c, 1.0 / (4.0 * PI.sqrt()), 1e-14));
        let a = atoms(&[(1.0, 2.0)], Domain::IntegerTime).unwrap().normalize().unwrap();
        assert_eq!(a.atoms()[0].mass, 1.0);
    }

    #[test]
    fn moment_examples() {
        assert!(close(iid().moment(2.0).value(), PI * PI / 3.0, 1e-13));
        assert_eq!(atoms(&[(1.0, 1.0)], Domain::IntegerTime).unwrap().moment(-2.0).value(), 1.0);
        let g = gap(Domain::IntegerTime);
        for k in 1..6 {
            let kf = k as f64;
            let exact = (1.0 - 2f64.powf(1.0 - 2.0 * kf)) / (2.0 * kf - 1.0);
            assert!(close(g.moment(-2.0 * kf).value(), exact, 1e-14));
        }
        assert_eq!(iid().moment(-1.0), Moment::Infinite);
        assert!(iid().moment(-0.999).is_finite());
        let with_zero = atoms(&[(0.0, 0.5), (1.0, 0.5)], Domain::IntegerTime).unwrap();
        assert_eq!(with_zero.moment(-0.1), Moment::Infinite);
    }

    #[test]
    fn sigma_sq_examples() {
        assert!(close(iid().sigma_sq(10.0), 1.0 / (20.0 * PI), 1e-14));
        assert_eq!(gap(Domain::IntegerTime).sigma_sq(1.0), 0.0);
        let p = power(0.5, Domain::IntegerTime).unwrap();
        let expect = 1.0 / (2.0 * PI.powf(1.5)) * 4f64.powf(-1.5);
        assert!(close(p.sigma_sq(4.0), expect, 1e-13));
        let a = atoms(&[(0.0, 0.25), (0.05, 0.5), (2.0, 0.25)], Domain::IntegerTime).unwrap();
        assert!(close(a.sigma_sq(10.0), 0.5, 0.0));
    }

    #[test]
    fn covariance_examples() {
        let m = iid();
        assert!(close(m.covariance(0.0), 1.0, 1e-14));
        for n in 1..20 {
            assert!(m.covariance(n as f64).abs() < 1e-14);
        }
        let s = sinc();
        for &t in &[0.3, 1.7, 5.5] {
            assert!(close(s.covariance(t), (PI * t).sin() / (PI * t), 1e-13));
        }
        let a = atoms(&[(1.0, 1.0)], Domain::ContinuousTime).unwrap();
        assert!(close(a.covariance(2.5), 2.5f64.cos(), 0.0));
    }

    #[test]
    fn ibp_examples() {
        let r = gap(Domain::IntegerTime).check_ibp(2.0, &[0.5, 1.5, 3.0]).unwrap();
        assert!(r.pass && r.max_ratio <= 1.0);
        let r = iid().check_ibp(0.5, &[0.1, 0.5, 1.0, 2.0, 3.0]).unwrap();
        assert!(r.pass);
        let z = atoms(&[(0.0, 1.0)], Domain::IntegerTime).unwrap();
        assert!(z.check_ibp(1.0, &[1.0]).unwrap_err().is_inapplicable());
    }

    #[test]
    fn rescale_examples() {
        let g = gap(Domain::ContinuousTime);
        let (r, q) = g.rescale_to_pi().unwrap();
        assert!(close(q, 2.0 / PI, 0.0) || q == 1.0);
        assert!(r.support_sup() <= PI);
        let wide = SpectralMeasure::new(
            Domain::ContinuousTime,
            vec![],
            vec![DensitySegment::new(0.0, 2.0 * PI, DensityForm::Constant { c: 0.25 / PI })],
        )
        .unwrap();
        let (r, q) = wide.rescale_to_pi().unwrap();
        assert_eq!(q, 2.0);
        assert!(close(r.total_mass(), 1.0, 1e-14));
        assert!(close(r.moment(2.0).value(), wide.moment(2.0).value() / 4.0, 1e-12));
        assert!(close(r.support_sup(), PI, 1e-15));
    }

    #[test]
    fn tau_examples() {
        let g = gap(Domain::IntegerTime);
        let t = g.finite_tau(5).unwrap();
        assert!(t <= 4.0 && t >= 1.0);
        assert!(close(atoms(&[(1.0, 1.0)], Domain::IntegerTime).unwrap().finite_tau(7).unwrap(), 1.0, 0.0));
        assert!(close(atoms(&[(2.0, 1.0)], Domain::IntegerTime).unwrap().finite_tau(3).unwrap(), 4.0, 1e-15));
        assert!(iid().finite_tau(1).unwrap_err().is_inapplicable());
    }

    #[test]
    fn riesz_examples() {
        let r = iid().riesz_lattice_gap((-PI, PI), 0.5 / PI, 50).unwrap();
        assert_eq!(r.step, 1.0);
        assert!(close(r.min_eigenvalue, 1.0, 1e-12));
        assert!(r.certified && !r.flagged);
        let g = gap(Domain::ContinuousTime);
        let r = g.riesz_lattice_gap((1.0, 2.0), 0.5, 32).unwrap();
        assert!(r.certified && r.min_eigenvalue > 0.0 && !r.flagged);
        let r = g.riesz_lattice_gap((1.0, 2.0), 1.0, 32).unwrap();
        assert!(r.flagged);
    }

    #[test]
    fn calculus_examples() {
        let a = atoms(&[(1.0, 1.0)], Domain::ContinuousTime).unwrap();
        assert_eq!(a.derivative_measure().unwrap().atoms()[0].mass, 1.0);
        assert_eq!(a.antiderivative_measure().unwrap().atoms()[0].mass, 1.0);
        let p = atoms(&[(PI, 1.0)], Domain::IntegerTime).unwrap();
        assert!(close(p.derivative_measure().unwrap().atoms()[0].mass, 4.0, 1e-15));
        let d = sinc().derivative_measure().unwrap();
        assert!(close(d.total_mass(), PI * PI / 3.0, 1e-13));
        let g = gap(Domain::ContinuousTime);
        let anti = g.antiderivative_measure().unwrap();
        assert!(close(anti.total_mass(), g.moment(-2.0).value(), 1e-14));
        assert!(close(anti.total_mass(), 0.5, 1e-14));
        assert!(sinc().antiderivative_measure().unwrap_err().is_inapplicable());
        let back = anti.derivative_measure().unwrap();
        for d in [-2.0, 0.0, 2.0] {
            assert!(close(back.moment(d).value(), g.moment(d).value(), 1e-13));
        }
    }
}
