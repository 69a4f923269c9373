//! General persistence bounds, the `k(N)` selector and regime envelopes.
//!
//! The lower bound over ℤ is rigorous with `β = 2√2`, `ℓ₀ = 0`. Every other
//! bound depends on universal constants that are configuration values, and
//! results say so in their flags.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};
use crate::normal::{log_normal_ccdf, log_prob_abs_below, log_sum_exp};
use crate::persistence::CurvePoint;
use crate::rng::{purpose, RngSpec};
use crate::spectral::{DensityForm, Domain, SpectralMeasure};
use crate::stats::linear_fit;

/// `β` of the lower bound over ℤ.
pub const BETA_INTEGER: f64 = 2.0 * SQRT_2;

pub const FLAG_HEURISTIC: &str = "heuristic";
pub const FLAG_CONSTANTS: &str = "up to universal constants";
pub const FLAG_SIGMA_ZERO: &str = "sigma_n_zero";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniversalConstants {
    pub c0: f64,
    pub c1: f64,
    pub c_s: f64,
    pub k_dudley: f64,
}

impl Default for UniversalConstants {
    fn default() -> Self {
        Self {
            c0: 1.0,
            c1: 1.0,
            c_s: 1.0,
            k_dudley: 1.0,
        }
    }
}

/// Absolutely continuous floor `dρ ≥ ν dλ` on `E = ±[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcFloor {
    pub a: f64,
    pub b: f64,
    pub nu: f64,
}

impl AcFloor {
    pub fn new(a: f64, b: f64, nu: f64) -> Result<Self> {
        if !(a >= 0.0 && b > a && b.is_finite() && nu > 0.0 && nu.is_finite()) {
            return Err(Error::invalid(format!("invalid floor E = ±[{a}, {b}], nu = {nu}")));
        }
        Ok(Self { a, b, nu })
    }

    /// `|E|`
    pub fn measure(&self) -> f64 {
        2.0 * (self.b - self.a)
    }

    /// Length of the longest interval inside `E`.
    pub fn interval_length(&self) -> f64 {
        if self.a == 0.0 {
            2.0 * self.b
        } else {
            self.b - self.a
        }
    }

    /// Floor read off a measure made of one constant segment.
    pub fn detect(rho: &SpectralMeasure) -> Option<AcFloor> {
        if rho.weight_order() != 0 {
            return None;
        }
        match rho.segments() {
            [s] => match s.form {
                DensityForm::Constant { c } if s.b.is_finite() && c > 0.0 => AcFloor::new(s.a, s.b, c).ok(),
                _ => None,
            },
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundParams {
    /// Lower-bound `β`; fixed to `2√2` over ℤ.
    pub beta: Option<f64>,
    /// Lower-bound `ℓ₀`; fixed to 0 over ℤ.
    pub ell0: Option<f64>,
    /// Upper-bound `α`, derived as `c₀|E|` when absent.
    pub alpha: Option<f64>,
    /// Scale with `E/q ⊂ [−π, π]`, derived when absent.
    pub q: Option<f64>,
    /// Pinned `k`; the upper optimizer scans `0..=k(N)` when absent.
    pub k: Option<u32>,
    pub s: f64,
    pub universal_constants: UniversalConstants,
    pub ac_floor: Option<AcFloor>,
}

impl Default for BoundParams {
    fn default() -> Self {
        Self {
            beta: None,
            ell0: None,
            alpha: None,
            q: None,
            k: None,
            s: 0.0,
            universal_constants: UniversalConstants::default(),
            ac_floor: None,
        }
    }
}

impl BoundParams {
    pub fn with_k(mut self, k: u32) -> Self {
        self.k = Some(k);
        self
    }

    pub fn with_floor(mut self, floor: AcFloor) -> Self {
        self.ac_floor = Some(floor);
        self
    }

    /// `γ = 2k + s`
    pub fn gamma(&self) -> f64 {
        2.0 * self.k.unwrap_or(0) as f64 + self.s
    }

    /// `r = max{k, s/2}`
    pub fn r(&self) -> f64 {
        (self.k.unwrap_or(0) as f64).max(self.s / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub name: String,
    pub log_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub log_bound: f64,
    pub ell_star: f64,
    pub factors: Vec<Factor>,
    pub params_used: BoundParams,
    pub flags: Vec<String>,
}

impl BoundResult {
    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.iter().any(|f| f == flag)
    }
}

fn factor(name: &str, log_value: f64) -> Factor {
    Factor {
        name: name.into(),
        log_value,
    }
}

fn check_n(n: f64) -> Result<()> {
    if n > 0.0 && n.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("N must be positive and finite, got {n}")))
    }
}

fn lower_params(rho: &SpectralMeasure, params: &BoundParams) -> Result<(BoundParams, Vec<String>)> {
    let mut used = params.clone();
    let mut flags = Vec::new();
    match rho.domain() {
        Domain::IntegerTime => {
            if params.beta.is_some_and(|b| b != BETA_INTEGER) || params.ell0.is_some_and(|l| l != 0.0) {
                return Err(Error::invalid("over the integers beta = 2*sqrt(2) and ell0 = 0 are fixed"));
            }
            used.beta = Some(BETA_INTEGER);
            used.ell0 = Some(0.0);
        }
        Domain::ContinuousTime => {
            let (Some(beta), Some(ell0)) = (params.beta, params.ell0) else {
                return Err(Error::invalid("continuous-time lower bounds need beta and ell0"));
            };
            if !(beta > 0.0) || !(ell0 >= 0.0) {
                return Err(Error::invalid("beta must be positive and ell0 nonnegative"));
            }
            flags.push(FLAG_HEURISTIC.to_string());
        }
    }
    Ok((used, flags))
}

fn lower_eval(sigma: f64, n: f64, beta: f64, ell: f64) -> (f64, Vec<Factor>) {
    let tail = if sigma > 0.0 {
        log_normal_ccdf(ell / sigma)
    } else {
        f64::NEG_INFINITY
    };
    let ball = n * log_prob_abs_below(ell / beta);
    (tail + ball, vec![factor("tail", tail), factor("small_ball", ball)])
}

/// `log[ P(σ_N Z > ℓ) · P(β|Z| < ℓ)^N ]`.
pub fn lower_bound_log(rho: &SpectralMeasure, n: f64, ell: f64, params: &BoundParams) -> Result<BoundResult> {
    check_n(n)?;
    let (used, mut flags) = lower_params(rho, params)?;
    let (beta, ell0) = (used.beta.unwrap(), used.ell0.unwrap());
    if !(ell > ell0) || !ell.is_finite() {
        return Err(Error::invalid(format!("level {ell} must exceed ell0 = {ell0}")));
    }
    let sigma = rho.sigma_sq(n).max(0.0).sqrt();
    if sigma == 0.0 {
        flags.push(FLAG_SIGMA_ZERO.to_string());
    }
    let (log_bound, factors) = lower_eval(sigma, n, beta, ell);
    Ok(BoundResult {
        log_bound,
        ell_star: ell,
        factors,
        params_used: used,
        flags,
    })
}

/// Maximize or minimize `f` over `log ℓ ∈ [lo, hi]`: a log-spaced scan, then
/// golden-section refinement around the best three scan cells.
fn optimize_log_level<F: Fn(f64) -> f64>(lo: f64, hi: f64, maximize: bool, f: F) -> (f64, f64) {
    let sign = if maximize { -1.0 } else { 1.0 };
    let g = |x: f64| {
        let v = sign * f(x.exp());
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    const SCAN: usize = 96;
    let xs: Vec<f64> = (0..=SCAN).map(|i| lo + (hi - lo) * i as f64 / SCAN as f64).collect();
    let vs: Vec<f64> = xs.iter().map(|&x| g(x)).collect();
    let mut order: Vec<usize> = (0..=SCAN).collect();
    order.sort_by(|&a, &b| vs[a].total_cmp(&vs[b]));
    let (mut best_x, mut best_v) = (xs[order[0]], vs[order[0]]);
    for &i in order.iter().take(3) {
        let (mut a, mut b) = (xs[i.saturating_sub(1)], xs[(i + 1).min(SCAN)]);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        let (mut fc, mut fd) = (g(c), g(d));
        for _ in 0..100 {
            if (b - a).abs() < 1e-12 * (1.0 + a.abs()) {
                break;
            }
            if fc <= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - phi * (b - a);
                fc = g(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + phi * (b - a);
                fd = g(d);
            }
        }
        for (x, v) in [(c, fc), (d, fd)] {
            if v < best_v {
                best_x = x;
                best_v = v;
            }
        }
    }
    (best_x.exp(), sign * best_v)
}

/// Lower bound maximized over the level `ℓ`.
pub fn optimize_lower(rho: &SpectralMeasure, n: f64, params: &BoundParams) -> Result<BoundResult> {
    check_n(n)?;
    let (used, mut flags) = lower_params(rho, params)?;
    let (beta, ell0) = (used.beta.unwrap(), used.ell0.unwrap());
    let sigma = rho.sigma_sq(n).max(0.0).sqrt();
    if sigma == 0.0 {
        flags.push(FLAG_SIGMA_ZERO.to_string());
        let (log_bound, factors) = lower_eval(0.0, n, beta, ell0.max(1.0));
        return Ok(BoundResult {
            log_bound,
            ell_star: ell0.max(1.0),
            factors,
            params_used: used,
            flags,
        });
    }
    let lo = ell0.max(1e-6) * (1.0 + 1e-12);
    let hi = (20.0 * sigma).max(beta * (2.0 * n.max(1.0).ln() + 10.0).sqrt() * 10.0).max(2.0 * lo);
    let (ell, _) = optimize_log_level(lo.ln(), hi.ln(), true, |l| lower_eval(sigma, n, beta, l).0);
    let (log_bound, factors) = lower_eval(sigma, n, beta, ell);
    Ok(BoundResult {
        log_bound,
        ell_star: ell,
        factors,
        params_used: used,
        flags,
    })
}

/// Resolved constants of the upper bound for one `k`.
struct UpperSetup {
    used: BoundParams,
    r: f64,
    alpha: f64,
    beta: f64,
    q: f64,
    ell0: f64,
}

fn upper_setup(rho: &SpectralMeasure, n: f64, params: &BoundParams, k: u32) -> Result<UpperSetup> {
    check_n(n)?;
    let s = params.s;
    if !(0.0..2.0).contains(&s) {
        return Err(Error::invalid(format!("s must lie in [0, 2), got {s}")));
    }
    let floor = params
        .ac_floor
        .or_else(|| AcFloor::detect(rho))
        .ok_or_else(|| Error::inapplicable("no absolutely continuous floor (E, nu) declared"))?;
    let c = params.universal_constants;
    let e = floor.measure();
    let n0 = 2.0 * PI / floor.interval_length();
    if !(n > n0.max(k as f64)) {
        return Err(Error::inapplicable(format!(
            "N = {n} must exceed max(N0, k) = {}",
            n0.max(k as f64)
        )));
    }
    let moment = |delta: f64| -> Result<f64> {
        if delta == 0.0 {
            return Ok(1.0);
        }
        rho.moment(delta)
            .finite()
            .ok_or_else(|| Error::inapplicable(format!("m_{delta} is infinite")))
    };
    let m2k = moment(-2.0 * k as f64)?;
    let beta = if k > 0 {
        (c.c1 * k as f64).powi(-(k as i32)) * (floor.nu * e / m2k).sqrt()
    } else {
        c.c_s * (floor.nu * e / moment(-s)?).sqrt()
    };
    let m_prev = moment(2.0 - 2.0 * k as f64)?;
    let r = (k as f64).max(s / 2.0);
    let inner = 0.5 * (m_prev / (4.0 * m2k) * n * n).ln();
    let ell0 = 2.0 * n.powf(-r) * if inner > 1.0 { inner.sqrt() } else { 1.0 };
    let alpha = params.alpha.unwrap_or(c.c0 * e);
    let q = params.q.unwrap_or_else(|| (floor.b / PI).max(1.0));
    let mut used = params.clone();
    used.k = Some(k);
    used.alpha = Some(alpha);
    used.q = Some(q);
    used.ac_floor = Some(floor);
    used.beta = Some(beta);
    used.ell0 = Some(ell0);
    Ok(UpperSetup {
        used,
        r,
        alpha,
        beta,
        q,
        ell0,
    })
}

fn upper_eval(u: &UpperSetup, n: f64, ell: f64) -> (f64, Vec<Factor>) {
    let tail = log_normal_ccdf(ell * n.powf(u.r));
    let ball = (2.0 * u.q * n).ln() + u.alpha * n * log_prob_abs_below(ell / u.beta);
    (log_sum_exp(&[tail, ball]), vec![factor("tail", tail), factor("small_ball", ball)])
}

/// `log[ P(N^{−r} Z > ℓ) + 2qN · P(β|Z| < ℓ)^{αN} ]` for the pinned `k`
/// (0 when unset).
pub fn upper_bound_log(rho: &SpectralMeasure, n: f64, ell: f64, params: &BoundParams) -> Result<BoundResult> {
    let u = upper_setup(rho, n, params, params.k.unwrap_or(0))?;
    if !(ell > u.ell0) || !ell.is_finite() {
        return Err(Error::invalid(format!("level {ell} must exceed ell0(N) = {}", u.ell0)));
    }
    let (log_bound, factors) = upper_eval(&u, n, ell);
    Ok(BoundResult {
        log_bound,
        ell_star: ell,
        factors,
        params_used: u.used,
        flags: vec![FLAG_CONSTANTS.to_string()],
    })
}

fn optimize_upper_k(rho: &SpectralMeasure, n: f64, params: &BoundParams, k: u32) -> Result<BoundResult> {
    let u = upper_setup(rho, n, params, k)?;
    let lo = u.ell0 * (1.0 + 1e-9);
    let hi = u.ell0 * 1e6;
    let (ell, _) = optimize_log_level(lo.ln(), hi.ln(), false, |l| upper_eval(&u, n, l).0);
    let (log_bound, factors) = upper_eval(&u, n, ell);
    Ok(BoundResult {
        log_bound,
        ell_star: ell,
        factors,
        params_used: u.used,
        flags: vec![FLAG_CONSTANTS.to_string()],
    })
}

/// Upper bound minimized over `ℓ > ℓ₀(N)` and, unless `k` is pinned, over
/// `k ∈ {0, …, k(N)}`.
pub fn optimize_upper(rho: &SpectralMeasure, n: f64, params: &BoundParams) -> Result<BoundResult> {
    check_n(n)?;
    let ks: Vec<u32> = match params.k {
        Some(k) => vec![k],
        None => (0..=k_of_n(rho, n)).collect(),
    };
    let mut best: Option<BoundResult> = None;
    let mut last_err = None;
    for k in ks {
        match optimize_upper_k(rho, n, params, k) {
            Ok(res) => {
                if best.as_ref().is_none_or(|b| res.log_bound < b.log_bound) {
                    best = Some(res);
                }
            }
            Err(e) if e.is_inapplicable() => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| Error::inapplicable("no admissible (k, ell)")))
}

/// `max{k ∈ ℕ ∩ (0, N] : k·m_{−2k}^{1/k} ≤ N}`, 0 when no `k` qualifies.
///
/// For a probability measure `m_{−2k}^{1/k}` is nondecreasing in `k`, so the
/// scan stops at the first failure.
pub fn k_of_n(rho: &SpectralMeasure, n: f64) -> u32 {
    let mut best = 0;
    let mut k = 1u32;
    while (k as f64) <= n {
        let Some(m) = rho.moment(-2.0 * k as f64).finite() else {
            break;
        };
        let kf = k as f64;
        if !(kf * m.powf(1.0 / kf) <= n * (1.0 + 1e-12)) {
            break;
        }
        best = k;
        k += 1;
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NearZero {
    /// Density `≍ |λ|^α` at the origin.
    Power { alpha: f64 },
    /// `ρ = 0` on a neighbourhood of the origin.
    Gap,
    /// Density `e^{−|λ|^{−A}}` at the origin.
    ExpWell { a: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    Compact,
    /// Density `≥ |λ|^{−η}` for `|λ| > 1`.
    Power { eta: f64 },
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Features {
    pub near_zero: NearZero,
    pub tail: Tail,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GrowthClass {
    /// `log P ≍ −N^e log N`
    PowerLog { exponent: f64 },
    /// `log P ≍ −N`
    Linear,
    /// `log P ≍ −N log N`
    NLogN,
    /// `log P ≍ −N²`
    Quadratic,
    /// `log P ≍ −e^{CN}`
    ExpExp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Lower,
    Upper,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeClass {
    pub class: GrowthClass,
    pub side: Side,
    pub conditions: String,
}

fn regime(class: GrowthClass, side: Side, conditions: &str) -> RegimeClass {
    RegimeClass {
        class,
        side,
        conditions: conditions.into(),
    }
}

/// Predicted growth classes of `−log P(N)`.
pub fn envelope(features: &Features, domain: Domain) -> Result<Vec<RegimeClass>> {
    let continuous = domain == Domain::ContinuousTime;
    match features.tail {
        Tail::Compact | Tail::Log => {}
        Tail::Power { eta } if eta > 1.0 => {}
        Tail::Power { eta } => return Err(Error::invalid(format!("tail exponent {eta} is not integrable"))),
    }
    if !continuous && features.tail != Tail::Compact {
        return Err(Error::invalid("integer-time spectra live on [-pi, pi]; tail must be compact"));
    }
    let mut out = Vec::new();
    match features.near_zero {
        NearZero::Power { alpha } if alpha <= -1.0 || !alpha.is_finite() => {
            return Err(Error::invalid(format!("density exponent {alpha} is not integrable at 0")));
        }
        NearZero::Power { alpha } if alpha < 0.0 => {
            out.push(regime(
                GrowthClass::PowerLog { exponent: 1.0 + alpha },
                Side::Both,
                "density ~ |x|^alpha at 0 with -1 < alpha < 0",
            ));
        }
        NearZero::Power { alpha } if alpha == 0.0 => {
            out.push(regime(GrowthClass::Linear, Side::Both, "density bounded above and below near 0"));
        }
        NearZero::Power { alpha } => {
            let side = if continuous { Side::Upper } else { Side::Both };
            out.push(regime(GrowthClass::NLogN, side, "density vanishes at 0 with alpha > 0"));
            if continuous && alpha > 1.0 {
                if let Tail::Power { eta } = features.tail {
                    out.push(regime(
                        GrowthClass::PowerLog { exponent: 1.0 + 1.0 / eta },
                        Side::Upper,
                        "m_{-2} finite and density >= |x|^{-eta} for |x| > 1",
                    ));
                }
            }
        }
        NearZero::Gap => {
            out.push(regime(
                GrowthClass::Quadratic,
                Side::Upper,
                "spectrum vanishes on an interval containing 0; a matching exp(-cN^2) lower bound for \
                 measures with density is known from the literature and is not computed here",
            ));
            if continuous && matches!(features.tail, Tail::Power { .. }) {
                out.push(regime(
                    GrowthClass::ExpExp,
                    Side::Upper,
                    "spectral gap at 0 and power-law tail at infinity",
                ));
            }
        }
        NearZero::ExpWell { a } if !(a > 0.0 && a.is_finite()) => {
            return Err(Error::invalid(format!("exp-well order {a} must be positive")));
        }
        NearZero::ExpWell { a } => {
            out.push(regime(
                GrowthClass::PowerLog { exponent: 1.0 + a / (a + 2.0) },
                Side::Upper,
                "density exp(-|x|^{-A}) at 0, m_{-2k} <= k^{(2/A)k}",
            ));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopeModel {
    /// `log(−log p) = a + e·log N`
    PowerOfN,
    /// `log(−log p) = a + e·log N + log log N`
    PowerTimesLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub exponent: f64,
    pub ci: (f64, f64),
}

const BOOTSTRAP_REPS: usize = 2000;

fn fit_exponent(ns: &[f64], log_ps: &[f64], model: SlopeModel) -> f64 {
    let x: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let y: Vec<f64> = ns
        .iter()
        .zip(log_ps)
        .map(|(n, lp)| {
            let v = (-lp).ln();
            match model {
                SlopeModel::PowerOfN => v,
                SlopeModel::PowerTimesLog => v - n.ln().ln(),
            }
        })
        .collect();
    linear_fit(&x, &y).0
}

/// Growth exponent of `−log p` against `N` with a 95% parametric bootstrap
/// interval that perturbs each `log p` by its standard error.
pub fn slope_fit(curve: &[CurvePoint], model: SlopeModel, rng: &RngSpec) -> Result<SlopeFit> {
    if curve.len() < 4 {
        return Err(Error::invalid(format!("slope fit needs >= 4 points, got {}", curve.len())));
    }
    let mut ns = Vec::with_capacity(curve.len());
    let mut lps = Vec::with_capacity(curve.len());
    let mut ses = Vec::with_capacity(curve.len());
    for p in curve {
        let est = p
            .estimate
            .as_ref()
            .ok_or_else(|| Error::invalid(format!("curve point N = {} has no estimate", p.n)))?;
        if !est.log_p.is_finite() || !(est.log_p < 0.0) || !(est.se_log < 0.5 * est.log_p.abs()) {
            return Err(Error::invalid(format!(
                "curve point N = {} unusable: log_p = {}, se_log = {}",
                p.n, est.log_p, est.se_log
            )));
        }
        if model == SlopeModel::PowerTimesLog && !(p.n > 1.0) {
            return Err(Error::invalid("the log-corrected model needs N > 1"));
        }
        ns.push(p.n);
        lps.push(est.log_p);
        ses.push(est.se_log);
    }
    let exponent = fit_exponent(&ns, &lps, model);
    let mut r = rng.stream(purpose::BOOTSTRAP, 0);
    let mut reps: Vec<f64> = (0..BOOTSTRAP_REPS)
        .map(|_| {
            let pert: Vec<f64> = lps
                .iter()
                .zip(&ses)
                .map(|(lp, se)| {
                    let z: f64 = StandardNormal.sample(&mut r);
                    (lp + se * z).min(-f64::MIN_POSITIVE)
                })
                .collect();
            fit_exponent(&ns, &pert, model)
        })
        .collect();
    reps.sort_by(f64::total_cmp);
    let at = |q: f64| reps[((q * (BOOTSTRAP_REPS - 1) as f64).round() as usize).min(BOOTSTRAP_REPS - 1)];
    Ok(SlopeFit {
        exponent,
        ci: (at(0.025).min(exponent), at(0.975).max(exponent)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::persistence::{GridStep, Method, PersistenceEstimate};
    use crate::spectral::catalog;

    fn point(n: f64, log_p: f64, se: f64) -> CurvePoint {
        CurvePoint {
            n,
            estimate: Some(PersistenceEstimate {
                log_p,
                se_log: se,
                method: Method::OrthantMC,
                n_samples: 1,
                grid_step: GridStep::Integer,
                dim: n as usize,
                low_confidence: false,
            }),
            error: None,
        }
    }

    #[test]
    fn iid_lower_at_one() {
        let rho = catalog::iid();
        let res = lower_bound_log(&rho, 1.0, 1.0, &BoundParams::default()).unwrap();
        // σ₁² = 1/(2π); P(Z > √(2π)) and P(|Z| < 1/(2√2)) from erfc/erf.
        let tail = (0.5 * libm::erfc((2.0 * PI).sqrt() / SQRT_2)).ln();
        let ball = libm::erf(1.0 / (2.0 * SQRT_2) / SQRT_2).ln();
        assert!((res.log_bound - (tail + ball)).abs() < 1e-12);
        let sum: f64 = res.factors.iter().map(|f| f.log_value).sum();
        assert!((sum - res.log_bound).abs() < 1e-12);
    }

    #[test]
    fn lower_decreases_for_large_levels() {
        let rho = catalog::iid();
        let p = BoundParams::default();
        let vals: Vec<f64> = [5.0, 10.0, 20.0, 40.0]
            .iter()
            .map(|&l| lower_bound_log(&rho, 8.0, l, &p).unwrap().log_bound)
            .collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn gap_lower_is_minus_infinity() {
        let rho = catalog::gap(Domain::IntegerTime);
        let res = optimize_lower(&rho, 10.0, &BoundParams::default()).unwrap();
        assert_eq!(res.log_bound, f64::NEG_INFINITY);
        assert!(res.has_flag(FLAG_SIGMA_ZERO));
    }

    #[test]
    fn optimizer_dominates_grid() {
        let rho = catalog::iid();
        let p = BoundParams::default();
        let best = optimize_lower(&rho, 10.0, &p).unwrap();
        for l in [0.5, 1.0, 2.0] {
            assert!(best.log_bound >= lower_bound_log(&rho, 10.0, l, &p).unwrap().log_bound);
        }
    }

    #[test]
    fn integer_constants_are_fixed() {
        let rho = catalog::iid();
        let p = BoundParams {
            beta: Some(1.0),
            ..Default::default()
        };
        assert!(lower_bound_log(&rho, 4.0, 1.0, &p).is_err());
    }

    #[test]
    fn continuous_lower_needs_constants() {
        let rho = catalog::uniform(Domain::ContinuousTime);
        assert!(optimize_lower(&rho, 4.0, &BoundParams::default()).is_err());
        let p = BoundParams {
            beta: Some(1.0),
            ell0: Some(0.1),
            ..Default::default()
        };
        assert!(optimize_lower(&rho, 4.0, &p).unwrap().has_flag(FLAG_HEURISTIC));
    }

    #[test]
    fn iid_upper_second_term_dominates() {
        let rho = catalog::iid();
        let res = upper_bound_log(&rho, 16.0, 4.0, &BoundParams::default()).unwrap();
        assert!(res.log_bound.is_finite());
        assert!(res.factors[1].log_value > res.factors[0].log_value);
        let lse = log_sum_exp(&[res.factors[0].log_value, res.factors[1].log_value]);
        assert!((lse - res.log_bound).abs() < 1e-12);
        let u = res.params_used;
        assert!((u.alpha.unwrap() - 2.0 * PI).abs() < 1e-12);
        assert!((u.beta.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn upper_tends_to_trivial_bound() {
        let rho = catalog::iid();
        let p = BoundParams::default();
        let target = (2.0 * 16.0f64).ln();
        let vals: Vec<f64> = [10.0, 100.0, 1000.0]
            .iter()
            .map(|&l| upper_bound_log(&rho, 16.0, l, &p).unwrap().log_bound)
            .collect();
        assert!(vals.windows(2).all(|w| w[1] >= w[0] && w[1] <= target + 1e-12));
        assert!((vals[2] - target).abs() < 1e-6);
    }

    #[test]
    fn upper_rejects_low_levels() {
        let rho = catalog::iid();
        let err = upper_bound_log(&rho, 16.0, 1e-3, &BoundParams::default()).unwrap_err();
        assert!(err.to_string().contains("ell0"));
    }

    #[test]
    fn upper_needs_finite_moments() {
        let rho = catalog::uniform(Domain::IntegerTime);
        let p = BoundParams::default().with_k(1);
        assert!(upper_bound_log(&rho, 16.0, 1.0, &p).unwrap_err().is_inapplicable());
    }

    #[test]
    fn gap_upper_uses_closed_form_moment() {
        let rho = catalog::gap(Domain::IntegerTime);
        let res = optimize_upper(&rho, 16.0, &BoundParams::default().with_k(3)).unwrap();
        let m6 = (1.0 - 2f64.powi(-5)) / 5.0;
        let beta = 3f64.powi(-3) * (0.5 * 2.0 / m6).sqrt();
        assert!((res.params_used.beta.unwrap() - beta).abs() < 1e-10 * beta);
    }

    #[test]
    fn upper_optimizer_dominates_grid() {
        let rho = catalog::iid();
        let p = BoundParams::default();
        let best = optimize_upper(&rho, 16.0, &p).unwrap();
        let ell0 = best.params_used.ell0.unwrap();
        for m in [2.0, 5.0, 10.0] {
            let v = upper_bound_log(&rho, 16.0, m * ell0, &p).unwrap().log_bound;
            assert!(best.log_bound <= v + 1e-12);
        }
    }

    #[test]
    fn k_of_n_examples() {
        let gap = catalog::gap(Domain::IntegerTime);
        for n in 2..=20 {
            assert_eq!(k_of_n(&gap, n as f64), n);
        }
        assert_eq!(k_of_n(&catalog::uniform(Domain::IntegerTime), 50.0), 0);
    }

    #[test]
    fn envelope_table() {
        let f = |near_zero| Features {
            near_zero,
            tail: Tail::Compact,
        };
        let r = envelope(&f(NearZero::Power { alpha: -0.5 }), Domain::IntegerTime).unwrap();
        assert_eq!(r[0].class, GrowthClass::PowerLog { exponent: 0.5 });
        assert_eq!(r[0].side, Side::Both);
        let r = envelope(&f(NearZero::Power { alpha: 0.0 }), Domain::ContinuousTime).unwrap();
        assert_eq!((r[0].class, r[0].side), (GrowthClass::Linear, Side::Both));
        let r = envelope(&f(NearZero::Power { alpha: 1.0 }), Domain::ContinuousTime).unwrap();
        assert!(r.iter().all(|c| c.side == Side::Upper));
        let tail = Features {
            near_zero: NearZero::Gap,
            tail: Tail::Power { eta: 2.0 },
        };
        let r = envelope(&tail, Domain::ContinuousTime).unwrap();
        assert!(r.iter().any(|c| c.class == GrowthClass::ExpExp && c.side == Side::Upper));
        assert!(envelope(&f(NearZero::Power { alpha: -1.5 }), Domain::IntegerTime).is_err());
    }

    #[test]
    fn slope_of_exact_curves() {
        let rng = RngSpec::new(1);
        let lin: Vec<CurvePoint> = [8.0, 16.0, 32.0, 64.0].iter().map(|&n| point(n, -n, 0.0)).collect();
        let fit = slope_fit(&lin, SlopeModel::PowerOfN, &rng).unwrap();
        assert!((fit.exponent - 1.0).abs() < 1e-12);
        assert!((fit.ci.1 - fit.ci.0).abs() < 1e-12);
        let quad: Vec<CurvePoint> = [8.0, 16.0, 32.0, 64.0].iter().map(|&n| point(n, -n * n, 0.0)).collect();
        assert!((slope_fit(&quad, SlopeModel::PowerOfN, &rng).unwrap().exponent - 2.0).abs() < 1e-12);
        assert!(slope_fit(&lin[..3], SlopeModel::PowerOfN, &rng).is_err());
    }
}
